#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "qseg/errors.hpp"

// Little-endian primitives shared by the index, feature and model files.
namespace qseg::binary {

static_assert(std::endian::native == std::endian::little,
              "binary formats assume a little-endian host");

inline void write_u32(std::ostream& out, std::uint32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_i32(std::ostream& out, std::int32_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

inline void write_bytes(std::ostream& out, std::string_view bytes) {
  write_u32(out, static_cast<std::uint32_t>(bytes.size()));
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline void read_exact(std::istream& in, void* dst, std::size_t n) {
  in.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw FormatError("unexpected end of file");
}

inline std::uint32_t read_u32(std::istream& in) {
  std::uint32_t v;
  read_exact(in, &v, sizeof v);
  return v;
}

inline std::int32_t read_i32(std::istream& in) {
  std::int32_t v;
  read_exact(in, &v, sizeof v);
  return v;
}

inline double read_f64(std::istream& in) {
  double v;
  read_exact(in, &v, sizeof v);
  return v;
}

inline std::string read_bytes(std::istream& in, std::size_t limit = 1u << 20) {
  std::uint32_t n = read_u32(in);
  if (n > limit) throw FormatError("length prefix too large");
  std::string s(n, '\0');
  read_exact(in, s.data(), n);
  return s;
}

inline void write_magic(std::ostream& out, std::string_view magic) {
  out.write(magic.data(), static_cast<std::streamsize>(magic.size()));
}

inline void expect_magic(std::istream& in, std::string_view magic) {
  std::string got(magic.size(), '\0');
  in.read(got.data(), static_cast<std::streamsize>(got.size()));
  if (static_cast<std::size_t>(in.gcount()) != magic.size() || got != magic) {
    throw FormatError("bad magic, expected " + std::string(magic));
  }
}

}  // namespace qseg::binary
