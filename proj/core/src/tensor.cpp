#include "svla/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <utility>

namespace svla {

Tensor::Tensor(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("Tensor: negative extent " + shape_str());
  }
  data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), 0.0);
}

Tensor::Tensor(int rows, int cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (rows < 0 || cols < 0) {
    throw std::invalid_argument("Tensor: negative extent " + shape_str());
  }
  if (data_.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                " does not match shape " + shape_str());
  }
}

Tensor Tensor::full(int rows, int cols, double value) {
  Tensor t(rows, cols);
  t.fill(value);
  return t;
}

Tensor Tensor::row(std::vector<double> values) {
  const int n = static_cast<int>(values.size());
  return Tensor(1, n, std::move(values));
}

Tensor Tensor::identity(int n) {
  Tensor t(n, n);
  for (int i = 0; i < n; ++i) {
    t.at(i, i) = 1.0;
  }
  return t;
}

Tensor Tensor::randn(int rows, int cols, Rng& rng, double stddev, double mean) {
  Tensor t(rows, cols);
  for (double& v : t.data_) {
    v = rng.gaussian(mean, stddev);
  }
  return t;
}

Tensor Tensor::rand_uniform(int rows, int cols, Rng& rng, double lo, double hi) {
  Tensor t(rows, cols);
  for (double& v : t.data_) {
    v = rng.uniform(lo, hi);
  }
  return t;
}

double Tensor::item() const {
  if (size() != 1) {
    throw std::invalid_argument("Tensor::item: expected 1x1, got " + shape_str());
  }
  return data_[0];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      return false;
    }
  }
  return true;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double v : data_) {
    m = std::max(m, std::fabs(v));
  }
  return m;
}

void Tensor::fill(double v) {
  for (double& x : data_) {
    x = v;
  }
}

std::string Tensor::shape_str() const {
  return "[" + std::to_string(rows_) + "x" + std::to_string(cols_) + "]";
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw std::invalid_argument("max_abs_diff: shape mismatch " + a.shape_str() + " vs " +
                                b.shape_str());
  }
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    m = std::max(m, std::fabs(a.vec()[i] - b.vec()[i]));
  }
  return m;
}

}  // namespace svla
