#pragma once

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "hmof/error.hpp"

// Little-endian scalar encoding shared by the model and flow dump formats.
namespace hmof::binary {

inline void write_u32(std::ostream& out, std::uint32_t value) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

inline void write_u64(std::ostream& out, std::uint64_t value) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(value >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

inline void write_f32(std::ostream& out, float value) {
  write_u32(out, std::bit_cast<std::uint32_t>(value));
}

inline void write_f64(std::ostream& out, double value) {
  write_u64(out, std::bit_cast<std::uint64_t>(value));
}

template <typename Error = ModelError>
std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw Error("unexpected end of file");
  std::uint32_t value = 0;
  for (int i = 0; i < 4; ++i) value |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return value;
}

template <typename Error = ModelError>
std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw Error("unexpected end of file");
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) value |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return value;
}

template <typename Error = ModelError>
float read_f32(std::istream& in) {
  return std::bit_cast<float>(read_u32<Error>(in));
}

template <typename Error = ModelError>
double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_u64<Error>(in));
}

template <typename Error = ModelError>
void expect_magic(std::istream& in, const std::string& magic) {
  std::string got(magic.size(), '\0');
  if (!in.read(got.data(), static_cast<std::streamsize>(got.size())) || got != magic) {
    throw Error("bad magic, expected '" + magic + "'");
  }
}

}  // namespace hmof::binary
