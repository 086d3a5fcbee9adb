#pragma once

#include <array>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>

#include "nscl/errors.hpp"

// Little-endian scalar I/O independent of host byte order.
namespace nscl::detail {

template <typename U>
void write_le(std::ostream& out, U value) {
  std::array<char, sizeof(U)> bytes{};
  for (std::size_t i = 0; i < sizeof(U); ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xFFu);
  out.write(bytes.data(), bytes.size());
}

inline void write_f64(std::ostream& out, double v) { write_le(out, std::bit_cast<std::uint64_t>(v)); }
inline void write_f32(std::ostream& out, float v) { write_le(out, std::bit_cast<std::uint32_t>(v)); }

/// Reader that tracks its byte offset for error reporting.
class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}

  template <typename U>
  U read(const char* what) {
    std::array<unsigned char, sizeof(U)> bytes{};
    in_.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
    if (in_.gcount() != static_cast<std::streamsize>(bytes.size())) {
      throw ParseError(std::string("truncated input while reading ") + what, offset_);
    }
    offset_ += bytes.size();
    U value = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) value |= static_cast<U>(bytes[i]) << (8 * i);
    return value;
  }

  double read_f64(const char* what) { return std::bit_cast<double>(read<std::uint64_t>(what)); }
  float read_f32(const char* what) { return std::bit_cast<float>(read<std::uint32_t>(what)); }

  std::string read_bytes(std::size_t n, const char* what) {
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n)) {
      throw ParseError(std::string("truncated input while reading ") + what, offset_);
    }
    offset_ += n;
    return s;
  }

  std::uint64_t offset() const noexcept { return offset_; }

  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace nscl::detail
