#pragma once

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fdkp/error.hpp"
#include "fdkp/grid.hpp"

namespace fdkp {

// FDKPFLD1: 8-byte magic, u32 version = 1, u64 nx, u64 ny, f64 lx, f64 ly, then nx*ny f64
// samples, x fastest. Every number is little-endian.
inline constexpr char kFieldMagic[8] = {'F', 'D', 'K', 'P', 'F', 'L', 'D', '1'};
inline constexpr std::uint32_t kFieldVersion = 1;
inline constexpr std::size_t kFieldHeaderBytes = 8 + 4 + 8 + 8 + 8 + 8;

namespace detail {

template <class T>
void put_le(std::string& out, T v) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  out.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const char* p) {
  unsigned char b[sizeof(T)];
  std::memcpy(b, p, sizeof(T));
  if constexpr (std::endian::native == std::endian::big)
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

}  // namespace detail

inline std::string encode_field(std::size_t nx, std::size_t ny, double lx, double ly, const std::vector<double>& v) {
  if (v.size() != nx * ny) throw InvalidArgument("encode_field: value count does not match nx*ny");
  std::string out(kFieldMagic, 8);
  out.reserve(kFieldHeaderBytes + 8 * v.size());
  detail::put_le<std::uint32_t>(out, kFieldVersion);
  detail::put_le<std::uint64_t>(out, nx);
  detail::put_le<std::uint64_t>(out, ny);
  detail::put_le<double>(out, lx);
  detail::put_le<double>(out, ly);
  for (double x : v) detail::put_le<double>(out, x);
  return out;
}

inline std::string encode_field(const Field& f) {
  const Grid2D& g = f.grid();
  return encode_field(g.nx(), g.ny(), g.lx(), g.ly(), f.values());
}

struct FieldHeader {
  std::uint32_t version = 0;
  std::uint64_t nx = 0, ny = 0;
  double lx = 0.0, ly = 0.0;
};

// Header and payload checks; returns an empty string when the bytes are a valid file.
inline std::string field_format_problem(const std::string& bytes, FieldHeader* header = nullptr) {
  if (bytes.size() < kFieldHeaderBytes) return "file shorter than the " + std::to_string(kFieldHeaderBytes) + "-byte header";
  if (std::memcmp(bytes.data(), kFieldMagic, 8) != 0) return "bad magic (expected FDKPFLD1)";
  FieldHeader h;
  const char* p = bytes.data() + 8;
  h.version = detail::get_le<std::uint32_t>(p);
  h.nx = detail::get_le<std::uint64_t>(p + 4);
  h.ny = detail::get_le<std::uint64_t>(p + 12);
  h.lx = detail::get_le<double>(p + 20);
  h.ly = detail::get_le<double>(p + 28);
  if (header) *header = h;
  if (h.version != kFieldVersion) return "unsupported version " + std::to_string(h.version);
  if (h.nx == 0 || h.ny == 0 || h.nx > (1u << 20) || h.ny > (1u << 20)) return "implausible grid size";
  if (!(h.lx > 0.0) || !(h.ly > 0.0) || !std::isfinite(h.lx) || !std::isfinite(h.ly)) return "box lengths must be positive";
  const std::uint64_t want = kFieldHeaderBytes + 8 * h.nx * h.ny;
  if (bytes.size() != want)
    return "payload size " + std::to_string(bytes.size()) + " bytes, expected " + std::to_string(want);
  for (std::uint64_t q = 0; q < h.nx * h.ny; ++q)
    if (!std::isfinite(detail::get_le<double>(bytes.data() + kFieldHeaderBytes + 8 * q)))
      return "non-finite sample at index " + std::to_string(q);
  return {};
}

inline Field decode_field(const std::string& bytes) {
  FieldHeader h;
  const std::string problem = field_format_problem(bytes, &h);
  if (!problem.empty()) throw IoError("FDKPFLD1: " + problem);
  Grid2D g(h.nx, h.ny, h.lx, h.ly);
  std::vector<double> v(g.size());
  for (std::size_t q = 0; q < v.size(); ++q) v[q] = detail::get_le<double>(bytes.data() + kFieldHeaderBytes + 8 * q);
  return Field(g, std::move(v));
}

inline void write_field(const std::filesystem::path& path, const Field& f) { detail::write_file(path, encode_field(f)); }
inline Field read_field(const std::filesystem::path& path) { return decode_field(detail::read_file(path)); }

// Shortest round-trip decimal form.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

class CsvWriter {
 public:
  explicit CsvWriter(std::vector<std::string> columns) : columns_(std::move(columns)) {
    for (std::size_t c = 0; c < columns_.size(); ++c) out_ += (c ? "," : "") + columns_[c];
    out_ += '\n';
  }
  void row(const std::vector<double>& values) {
    if (values.size() != columns_.size()) throw InvalidArgument("csv row has the wrong number of columns");
    for (std::size_t c = 0; c < values.size(); ++c) {
      if (c) out_ += ',';
      out_ += format_double(values[c]);
    }
    out_ += '\n';
  }
  const std::string& str() const { return out_; }
  void save(const std::filesystem::path& path) const { detail::write_file(path, out_); }

 private:
  std::vector<std::string> columns_;
  std::string out_;
};

}  // namespace fdkp
