#pragma once

#include <string>

#include "svla/tensor.hpp"

namespace svla {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// 8-bit binary PGM (P5). Values are min-max normalized to 0..255; a constant
// image renders as all zeros.
std::string pgm_bytes(const Tensor& image);
void write_pgm(const std::string& path, const Tensor& image);

// PGM from raw 0..255 levels (no normalization).
std::string pgm_bytes_raw(const Tensor& levels);
void write_pgm_raw(const std::string& path, const Tensor& levels);

}  // namespace svla
