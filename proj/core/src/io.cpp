#include "svla/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace svla {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open '" + path + "' for reading");
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw std::runtime_error("cannot open '" + path + "' for writing");
  }
  out << text;
  if (!out) {
    throw std::runtime_error("write failed for '" + path + "'");
  }
}

namespace {

std::string pgm_from_levels(const Tensor& levels) {
  std::string out =
      "P5\n" + std::to_string(levels.cols()) + " " + std::to_string(levels.rows()) + "\n255\n";
  for (int i = 0; i < levels.rows(); ++i) {
    for (int j = 0; j < levels.cols(); ++j) {
      const double v = std::clamp(levels.at(i, j), 0.0, 255.0);
      out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(v))));
    }
  }
  return out;
}

}  // namespace

std::string pgm_bytes(const Tensor& image) {
  double lo = image.vec().empty() ? 0.0 : image.vec()[0];
  double hi = lo;
  for (double v : image.vec()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  Tensor levels(image.rows(), image.cols());
  if (hi > lo) {
    const double scale = 255.0 / (hi - lo);
    for (std::size_t i = 0; i < image.size(); ++i) {
      levels.vec()[i] = (image.vec()[i] - lo) * scale;
    }
  }
  return pgm_from_levels(levels);
}

void write_pgm(const std::string& path, const Tensor& image) {
  write_text_file(path, pgm_bytes(image));
}

std::string pgm_bytes_raw(const Tensor& levels) { return pgm_from_levels(levels); }

void write_pgm_raw(const std::string& path, const Tensor& levels) {
  write_text_file(path, pgm_bytes_raw(levels));
}

}  // namespace svla
