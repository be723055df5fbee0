#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "decoyforge/util.hpp"

// Little-endian primitives shared by the binary file formats.
namespace decoyforge::binio {

inline void put_u32(std::ostream& out, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 4);
}

inline void put_u64(std::ostream& out, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  out.write(b, 8);
}

inline void put_f32(std::ostream& out, float f) { put_u32(out, std::bit_cast<std::uint32_t>(f)); }
inline void put_f64(std::ostream& out, double d) { put_u64(out, std::bit_cast<std::uint64_t>(d)); }

inline void put_string(std::ostream& out, const std::string& s) {
  put_u32(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

// Returns false on clean EOF before any byte; throws on a truncated value.
inline bool try_get_u32(std::istream& in, std::uint32_t& v, const char* what) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (in.gcount() == 0) return false;
  if (in.gcount() != 4) throw Error("io.truncated", std::string("truncated ") + what);
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

inline std::uint32_t get_u32(std::istream& in, const char* what) {
  std::uint32_t v;
  if (!try_get_u32(in, v, what)) throw Error("io.truncated", std::string("truncated ") + what);
  return v;
}

inline std::uint64_t get_u64(std::istream& in, const char* what) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (in.gcount() != 8) throw Error("io.truncated", std::string("truncated ") + what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

inline float get_f32(std::istream& in, const char* what) { return std::bit_cast<float>(get_u32(in, what)); }
inline double get_f64(std::istream& in, const char* what) { return std::bit_cast<double>(get_u64(in, what)); }

inline std::string get_bytes(std::istream& in, std::size_t n, const char* what) {
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) throw Error("io.truncated", std::string("truncated ") + what);
  return s;
}

inline void expect_magic(std::istream& in, const char (&magic)[5], const char* what) {
  char m[4];
  in.read(m, 4);
  if (in.gcount() != 4 || std::memcmp(m, magic, 4) != 0) {
    throw Error("io.bad_magic", std::string(what) + ": expected magic \"" + magic + "\"");
  }
}

}  // namespace decoyforge::binio
