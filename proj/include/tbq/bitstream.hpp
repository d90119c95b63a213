#pragma once

#include <algorithm>
#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "tbq/errors.hpp"

namespace tbq {

/// Length-counted packed bit sequence. Bits are stored MSB-first: bit i lives
/// in byte i/8 at mask 0x80 >> (i%8). Pad bits past bit_count are kept zero.
class BitStream {
 public:
  BitStream() = default;
  explicit BitStream(std::size_t bit_count) : bits_(bit_count), bytes_((bit_count + 7) / 8, 0) {}

  /// Adopts a packed payload; bits beyond bit_count are cleared.
  BitStream(std::vector<std::uint8_t> payload, std::size_t bit_count) : bits_(bit_count), bytes_(std::move(payload)) {
    detail::require<FormatError>(bytes_.size() == (bit_count + 7) / 8, "bitstream payload length does not match bit count");
    clear_padding();
  }

  static BitStream from_string(std::string_view s) {
    BitStream out;
    out.reserve(s.size());
    for (char c : s) {
      if (c == '0' || c == '1') out.push_back(c == '1');
      else if (c != ' ' && c != '_') throw FormatError("bit string may only contain 0, 1, space or underscore");
    }
    return out;
  }

  std::size_t size() const noexcept { return bits_; }
  bool empty() const noexcept { return bits_ == 0; }
  std::span<const std::uint8_t> bytes() const noexcept { return bytes_; }
  std::span<std::uint8_t> mutable_bytes() noexcept { return bytes_; }

  bool operator[](std::size_t i) const noexcept { return (bytes_[i >> 3] >> (7 - (i & 7))) & 1u; }

  void set(std::size_t i, bool v) noexcept {
    const std::uint8_t mask = static_cast<std::uint8_t>(0x80u >> (i & 7));
    if (v) bytes_[i >> 3] |= mask;
    else bytes_[i >> 3] &= static_cast<std::uint8_t>(~mask);
  }

  void reserve(std::size_t bit_count) { bytes_.reserve((bit_count + 7) / 8); }

  void push_back(bool v) {
    if ((bits_ & 7) == 0) bytes_.push_back(0);
    if (v) bytes_.back() |= static_cast<std::uint8_t>(0x80u >> (bits_ & 7));
    ++bits_;
  }

  /// Appends the low `count` bits of `value`, most significant first.
  void append_bits(std::uint64_t value, unsigned count) {
    unsigned k = count;
    for (; k > 0 && (bits_ & 7); --k) push_back((value >> (k - 1)) & 1u);
    for (; k >= 8; k -= 8) {
      bytes_.push_back(static_cast<std::uint8_t>(value >> (k - 8)));
      bits_ += 8;
    }
    for (; k > 0; --k) push_back((value >> (k - 1)) & 1u);
  }

  /// Reads 64 bits starting at bit `pos` as an MSB-first word; bits past the
  /// end read as zero.
  std::uint64_t load_word(std::size_t pos) const noexcept {
    const std::size_t byte = pos >> 3;
    const unsigned shift = pos & 7;
    std::uint8_t buf[9] = {};
    const std::size_t avail = byte < bytes_.size() ? std::min<std::size_t>(9, bytes_.size() - byte) : 0;
    if (avail) std::memcpy(buf, bytes_.data() + byte, avail);
    std::uint64_t w = 0;
    for (int k = 0; k < 8; ++k) w = (w << 8) | buf[k];
    if (shift) w = (w << shift) | (buf[8] >> (8 - shift));
    if (pos + 64 > bits_) {
      const std::size_t valid = pos < bits_ ? bits_ - pos : 0;
      w = valid == 0 ? 0 : (w & (~std::uint64_t{0} << (64 - valid)));
    }
    return w;
  }

  /// Appends `count` bits from another stream starting at `pos`.
  void append_range(const BitStream& src, std::size_t pos, std::size_t count) {
    if ((bits_ & 7) == 0 && (pos & 7) == 0) {
      const std::size_t whole = count / 8;
      bytes_.insert(bytes_.end(), src.bytes_.begin() + static_cast<std::ptrdiff_t>(pos / 8),
                    src.bytes_.begin() + static_cast<std::ptrdiff_t>(pos / 8 + whole));
      bits_ += whole * 8;
      pos += whole * 8;
      count -= whole * 8;
    }
    for (std::size_t i = 0; i < count; ++i) push_back(src[pos + i]);
  }

  BitStream slice(std::size_t pos, std::size_t count) const {
    detail::require<LengthMismatchError>(pos + count <= bits_, "bitstream slice out of range");
    BitStream out;
    out.reserve(count);
    out.append_range(*this, pos, count);
    return out;
  }

  std::size_t popcount() const noexcept {
    std::size_t n = 0;
    for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
    return n;
  }

  friend bool operator==(const BitStream& a, const BitStream& b) noexcept {
    return a.bits_ == b.bits_ && a.bytes_ == b.bytes_;
  }

  std::string to_string() const {
    std::string s(bits_, '0');
    for (std::size_t i = 0; i < bits_; ++i) s[i] = (*this)[i] ? '1' : '0';
    return s;
  }

  void clear_padding() noexcept {
    if (bits_ & 7) bytes_.back() &= static_cast<std::uint8_t>(0xFFu << (8 - (bits_ & 7)));
  }

 private:
  std::size_t bits_ = 0;
  std::vector<std::uint8_t> bytes_;
};

/// Appends bits to a BitStream through a 64-bit accumulator; far cheaper
/// than push_back for bulk output. The stream is complete after flush() or
/// destruction.
class BitWriter {
 public:
  explicit BitWriter(BitStream& out) : out_(out) {}
  BitWriter(const BitWriter&) = delete;
  BitWriter& operator=(const BitWriter&) = delete;
  ~BitWriter() { flush(); }

  /// Appends the low `count` bits of value (count <= 64), MSB-first.
  void put(std::uint64_t value, unsigned count) {
    if (count == 0) return;
    if (count < 64) value &= (std::uint64_t{1} << count) - 1;
    const unsigned space = 64 - fill_;
    if (count < space) {
      acc_ |= value << (space - count);
      fill_ += count;
      return;
    }
    const unsigned rest = count - space;
    acc_ |= rest ? value >> rest : value;
    out_.append_bits(acc_, 64);
    acc_ = rest ? value << (64 - rest) : 0;
    fill_ = rest;
  }

  void flush() {
    if (fill_) out_.append_bits(acc_ >> (64 - fill_), fill_);
    acc_ = 0;
    fill_ = 0;
  }

 private:
  BitStream& out_;
  std::uint64_t acc_ = 0;
  unsigned fill_ = 0;
};

// ---------------------------------------------------------------------------
// Little-endian primitives shared by the TBBS and TBQR file formats.
namespace io {

template <class T>
void put_le(std::ostream& os, T value) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <class T>
T get_le(std::istream& is, const char* what) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) throw FormatError(std::string("truncated file: missing ") + what);
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  T value;
  std::memcpy(&value, buf, sizeof(T));
  return value;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  return os;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path.string());
  return is;
}

inline void expect_magic(std::istream& is, const char (&magic)[5]) {
  char buf[4] = {};
  if (!is.read(buf, 4) || std::memcmp(buf, magic, 4) != 0)
    throw FormatError(std::string("bad magic, expected ") + magic);
}

}  // namespace io

inline constexpr std::uint8_t kBitStreamFormatVersion = 1;

/// TBBS file: "TBBS", version u8, bit_count u64 (LE), packed MSB-first payload.
inline void write_bitstream(std::ostream& os, const BitStream& bits) {
  os.write("TBBS", 4);
  io::put_le<std::uint8_t>(os, kBitStreamFormatVersion);
  io::put_le<std::uint64_t>(os, bits.size());
  os.write(reinterpret_cast<const char*>(bits.bytes().data()), static_cast<std::streamsize>(bits.bytes().size()));
  if (!os) throw IoError("write failed");
}

inline BitStream read_bitstream(std::istream& is) {
  io::expect_magic(is, "TBBS");
  const auto version = io::get_le<std::uint8_t>(is, "version");
  if (version != kBitStreamFormatVersion) throw FormatError("unsupported TBBS version " + std::to_string(version));
  const auto count = io::get_le<std::uint64_t>(is, "bit count");
  std::vector<std::uint8_t> payload((count + 7) / 8);
  if (!is.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size())))
    throw FormatError("truncated TBBS payload: header declares " + std::to_string(count) + " bits");
  return BitStream(std::move(payload), count);
}

inline void save_bitstream(const std::filesystem::path& path, const BitStream& bits) {
  auto os = io::open_out(path);
  write_bitstream(os, bits);
}

inline BitStream load_bitstream(const std::filesystem::path& path) {
  auto is = io::open_in(path);
  return read_bitstream(is);
}

}  // namespace tbq
