#include "svla/svt.hpp"

#include <bit>
#include <cstring>
#include <fstream>

namespace svla::svt {
namespace {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

std::size_t dtype_width(Dtype d) {
  switch (d) {
    case Dtype::f64:
      return 8;
    case Dtype::u32:
      return 4;
    case Dtype::u8:
      return 1;
  }
  return 0;
}

class Cursor {
 public:
  explicit Cursor(const std::vector<std::uint8_t>& bytes) : bytes_(bytes) {}

  bool at_end() const { return pos_ == bytes_.size(); }

  std::uint8_t u8() {
    need(1, "byte");
    return bytes_[pos_++];
  }

  std::uint32_t u32() {
    need(4, "u32");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint64_t u64() {
    need(8, "u64");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::vector<std::uint8_t> raw(std::uint64_t n, const char* what) {
    need(n, what);
    std::vector<std::uint8_t> out(bytes_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                  bytes_.begin() + static_cast<std::ptrdiff_t>(pos_ + n));
    pos_ += n;
    return out;
  }

 private:
  void need(std::uint64_t n, const char* what) const {
    if (pos_ + n > bytes_.size()) {
      throw ParseError(ParseError::Kind::truncated,
                       std::string("SVT1: truncated payload while reading ") + what);
    }
  }

  const std::vector<std::uint8_t>& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t Record::count() const {
  std::uint64_t n = 1;
  for (std::uint64_t e : extents) {
    n *= e;
  }
  return n;
}

std::vector<double> Record::as_f64() const {
  if (dtype != Dtype::f64) {
    throw ParseError(ParseError::Kind::unknown_dtype, "SVT1: record '" + name + "' is not f64");
  }
  std::vector<double> out(count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(payload[i * 8 + b]) << (8 * b);
    }
    out[i] = std::bit_cast<double>(bits);
  }
  return out;
}

std::vector<std::uint32_t> Record::as_u32() const {
  if (dtype != Dtype::u32) {
    throw ParseError(ParseError::Kind::unknown_dtype, "SVT1: record '" + name + "' is not u32");
  }
  std::vector<std::uint32_t> out(count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t v = 0;
    for (int b = 0; b < 4; ++b) {
      v |= static_cast<std::uint32_t>(payload[i * 4 + b]) << (8 * b);
    }
    out[i] = v;
  }
  return out;
}

std::vector<std::uint8_t> Record::as_u8() const {
  if (dtype != Dtype::u8) {
    throw ParseError(ParseError::Kind::unknown_dtype, "SVT1: record '" + name + "' is not u8");
  }
  return payload;
}

const Record* File::find(std::string_view name) const {
  for (const Record& r : records) {
    if (r.name == name) {
      return &r;
    }
  }
  return nullptr;
}

const Record& File::get(std::string_view name) const {
  const Record* r = find(name);
  if (r == nullptr) {
    throw ParseError(ParseError::Kind::missing_record,
                     "SVT1: missing record '" + std::string(name) + "'");
  }
  return *r;
}

namespace {

void add_header(std::vector<std::uint8_t>& bytes, const std::string& name, Dtype dtype,
                const std::vector<std::uint64_t>& extents) {
  put_u32(bytes, static_cast<std::uint32_t>(name.size()));
  bytes.insert(bytes.end(), name.begin(), name.end());
  bytes.push_back(static_cast<std::uint8_t>(dtype));
  bytes.push_back(static_cast<std::uint8_t>(extents.size()));
  for (std::uint64_t e : extents) {
    put_u64(bytes, e);
  }
}

std::uint64_t extent_count(const std::vector<std::uint64_t>& extents) {
  std::uint64_t n = 1;
  for (std::uint64_t e : extents) {
    n *= e;
  }
  return n;
}

}  // namespace

void Writer::add_f64(const std::string& name, const std::vector<std::uint64_t>& extents,
                     const double* values) {
  add_header(bytes_, name, Dtype::f64, extents);
  const std::uint64_t n = extent_count(extents);
  for (std::uint64_t i = 0; i < n; ++i) {
    put_u64(bytes_, std::bit_cast<std::uint64_t>(values[i]));
  }
}

void Writer::add_f64(const std::string& name, const std::vector<std::uint64_t>& extents,
                     const std::vector<double>& values) {
  if (values.size() != extent_count(extents)) {
    throw std::invalid_argument("SVT1: payload length mismatch for '" + name + "'");
  }
  add_f64(name, extents, values.data());
}

void Writer::add_u32(const std::string& name, const std::vector<std::uint64_t>& extents,
                     const std::vector<std::uint32_t>& values) {
  if (values.size() != extent_count(extents)) {
    throw std::invalid_argument("SVT1: payload length mismatch for '" + name + "'");
  }
  add_header(bytes_, name, Dtype::u32, extents);
  for (std::uint32_t v : values) {
    put_u32(bytes_, v);
  }
}

void Writer::add_u8(const std::string& name, const std::vector<std::uint64_t>& extents,
                    const std::vector<std::uint8_t>& values) {
  if (values.size() != extent_count(extents)) {
    throw std::invalid_argument("SVT1: payload length mismatch for '" + name + "'");
  }
  add_header(bytes_, name, Dtype::u8, extents);
  bytes_.insert(bytes_.end(), values.begin(), values.end());
}

void Writer::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw ParseError(ParseError::Kind::io, "SVT1: cannot open '" + path + "' for writing");
  }
  out.write(reinterpret_cast<const char*>(bytes_.data()),
            static_cast<std::streamsize>(bytes_.size()));
  if (!out) {
    throw ParseError(ParseError::Kind::io, "SVT1: write failed for '" + path + "'");
  }
}

File parse(const std::vector<std::uint8_t>& bytes) {
  Cursor cur(bytes);
  const std::uint8_t magic[4] = {0x53, 0x56, 0x54, 0x31};
  for (std::uint8_t expected : magic) {
    std::uint8_t got;
    try {
      got = cur.u8();
    } catch (const ParseError&) {
      throw ParseError(ParseError::Kind::bad_magic, "SVT1: file shorter than magic");
    }
    if (got != expected) {
      throw ParseError(ParseError::Kind::bad_magic, "SVT1: bad magic bytes");
    }
  }
  const std::uint8_t version = cur.u8();
  if (version != 1) {
    throw ParseError(ParseError::Kind::unsupported_version,
                     "SVT1: unsupported version " + std::to_string(version));
  }

  File file;
  while (!cur.at_end()) {
    Record rec;
    const std::uint32_t name_len = cur.u32();
    const std::vector<std::uint8_t> name = cur.raw(name_len, "record name");
    rec.name.assign(name.begin(), name.end());
    const std::uint8_t dtype = cur.u8();
    if (dtype > 2) {
      throw ParseError(ParseError::Kind::unknown_dtype,
                       "SVT1: unknown dtype " + std::to_string(dtype) + " in record '" +
                           rec.name + "'");
    }
    rec.dtype = static_cast<Dtype>(dtype);
    const std::uint8_t rank = cur.u8();
    rec.extents.resize(rank);
    for (std::uint8_t i = 0; i < rank; ++i) {
      rec.extents[i] = cur.u64();
    }
    rec.payload = cur.raw(rec.count() * dtype_width(rec.dtype), "record payload");
    file.records.push_back(std::move(rec));
  }
  return file;
}

File load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw ParseError(ParseError::Kind::io, "SVT1: cannot open '" + path + "'");
  }
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return parse(bytes);
}

}  // namespace svla::svt
