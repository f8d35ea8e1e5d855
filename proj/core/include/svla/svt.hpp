#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace svla::svt {

// SVT1 binary tensor container. Layout (all integers little-endian):
//   magic "SVT1" (0x53 0x56 0x54 0x31), u8 version = 1, then records:
//   u32 name length, UTF-8 name, u8 dtype (0=f64, 1=u32, 2=u8), u8 rank,
//   rank x u64 extents, row-major payload.

enum class Dtype : std::uint8_t { f64 = 0, u32 = 1, u8 = 2 };

class ParseError : public std::runtime_error {
 public:
  enum class Kind { bad_magic, unsupported_version, truncated, unknown_dtype, missing_record, io };

  ParseError(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

struct Record {
  std::string name;
  Dtype dtype = Dtype::f64;
  std::vector<std::uint64_t> extents;
  std::vector<std::uint8_t> payload;  // packed little-endian

  std::uint64_t count() const;
  std::vector<double> as_f64() const;
  std::vector<std::uint32_t> as_u32() const;
  std::vector<std::uint8_t> as_u8() const;
};

struct File {
  std::vector<Record> records;

  const Record* find(std::string_view name) const;
  const Record& get(std::string_view name) const;  // missing_record if absent
};

class Writer {
 public:
  void add_f64(const std::string& name, const std::vector<std::uint64_t>& extents,
               const double* values);
  void add_f64(const std::string& name, const std::vector<std::uint64_t>& extents,
               const std::vector<double>& values);
  void add_u32(const std::string& name, const std::vector<std::uint64_t>& extents,
               const std::vector<std::uint32_t>& values);
  void add_u8(const std::string& name, const std::vector<std::uint64_t>& extents,
              const std::vector<std::uint8_t>& values);

  const std::vector<std::uint8_t>& bytes() const { return bytes_; }
  void save(const std::string& path) const;  // ParseError::io on failure

 private:
  std::vector<std::uint8_t> bytes_ = {0x53, 0x56, 0x54, 0x31, 0x01};
};

File parse(const std::vector<std::uint8_t>& bytes);
File load(const std::string& path);

}  // namespace svla::svt
