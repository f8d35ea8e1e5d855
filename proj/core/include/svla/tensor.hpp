#pragma once

#include <string>
#include <vector>

#include "svla/rng.hpp"

namespace svla {

// Dense row-major matrix of doubles. Everything in the pipeline is a token
// matrix (rows = tokens, cols = features); scalars are 1x1, vectors 1xn.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int rows, int cols);  // zero-filled
  Tensor(int rows, int cols, std::vector<double> data);

  static Tensor zeros(int rows, int cols) { return Tensor(rows, cols); }
  static Tensor full(int rows, int cols, double value);
  static Tensor scalar(double v) { return Tensor(1, 1, {v}); }
  static Tensor row(std::vector<double> values);
  static Tensor identity(int n);
  static Tensor randn(int rows, int cols, Rng& rng, double stddev = 1.0, double mean = 0.0);
  static Tensor rand_uniform(int rows, int cols, Rng& rng, double lo, double hi);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int r, int c) { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double at(int r, int c) const { return data_[static_cast<std::size_t>(r) * cols_ + c]; }
  double* row_ptr(int r) { return data_.data() + static_cast<std::size_t>(r) * cols_; }
  const double* row_ptr(int r) const { return data_.data() + static_cast<std::size_t>(r) * cols_; }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  // Value of a 1x1 tensor; throws otherwise.
  double item() const;

  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  bool all_finite() const;
  double max_abs() const;
  void fill(double v);

  std::string shape_str() const;  // e.g. "[3x4]"

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

// Max |a - b| over all entries; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace svla
