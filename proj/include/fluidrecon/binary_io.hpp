#pragma once

#include "fluidrecon/errors.hpp"

#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

namespace fluidrecon::binio {

static_assert(std::endian::native == std::endian::little,
              "binary formats are little-endian; big-endian hosts need byte swapping");

template <typename T>
  requires std::is_trivially_copyable_v<T>
void write(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
  requires std::is_trivially_copyable_v<T>
T read(std::istream& in) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(T))) {
    throw IoError("truncated binary stream");
  }
  return value;
}

inline void write_array(std::ostream& out, const double* data, std::size_t n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_array(std::istream& in, double* data, std::size_t n) {
  const auto bytes = static_cast<std::streamsize>(n * sizeof(double));
  in.read(reinterpret_cast<char*>(data), bytes);
  if (in.gcount() != bytes) throw IoError("truncated binary stream");
}

inline void write_magic(std::ostream& out, const char (&magic)[5], std::uint32_t version) {
  out.write(magic, 4);
  write<std::uint32_t>(out, version);
}

inline void expect_magic(std::istream& in, const char (&magic)[5], std::uint32_t version) {
  char tag[4] = {};
  in.read(tag, 4);
  if (in.gcount() != 4) throw IoError("truncated binary stream");
  if (std::string(tag, 4) != std::string(magic, 4)) {
    throw IoError(std::string("bad magic, expected ") + magic);
  }
  const auto found = read<std::uint32_t>(in);
  if (found != version) {
    throw IoError(std::string(magic) + " version mismatch: file has " + std::to_string(found) +
                  ", reader expects " + std::to_string(version));
  }
}

}  // namespace fluidrecon::binio
