#pragma once

// Little-endian primitive encoding shared by the checkpoint and LREP codecs.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <type_traits>

#include "ilse/errors.hpp"

namespace ilse::detail {

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::is_arithmetic_v<T>);
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
            std::conditional_t<sizeof(T) == 4, std::uint32_t,
            std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
  U bits;
  std::memcpy(&bits, &value, sizeof(T));
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, sizeof(T));
}

// Reads from a stream while tracking the absolute byte offset for errors.
class LeReader {
 public:
  explicit LeReader(std::istream& in) : in_(in) {}

  std::uint64_t offset() const { return offset_; }

  // True when no more bytes are available.
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }

  void bytes(char* dst, std::size_t n, const char* what) {
    in_.read(dst, static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(std::string("truncated payload while reading ") + what, offset_ + in_.gcount());
    }
    offset_ += n;
  }

  template <typename T>
  T get(const char* what) {
    static_assert(std::is_arithmetic_v<T>);
    unsigned char buf[sizeof(T)];
    bytes(reinterpret_cast<char*>(buf), sizeof(T), what);
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t,
              std::conditional_t<sizeof(T) == 4, std::uint32_t,
              std::conditional_t<sizeof(T) == 2, std::uint16_t, std::uint8_t>>>;
    U bits = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(static_cast<U>(buf[i]) << (8 * i));
    T value;
    std::memcpy(&value, &bits, sizeof(T));
    return value;
  }

 private:
  std::istream& in_;
  std::uint64_t offset_ = 0;
};

}  // namespace ilse::detail
