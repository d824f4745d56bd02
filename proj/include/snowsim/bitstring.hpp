#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace snowsim {

// Finite bit string, stored MSB-first in 64-bit words. Bit 0 is the first bit
// of the string. Bits past size() in the last word are always zero so that
// equality and hashing can work on whole words.
class BitString {
 public:
  BitString() = default;

  static BitString from_bits(std::string_view zeros_and_ones);
  // Takes the first nbits bits of bytes, most significant bit of bytes[0] first.
  static BitString from_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits);
  static BitString single(bool bit);

  std::size_t size() const { return size_; }
  bool empty() const { return size_ == 0; }

  bool bit(std::size_t i) const {
    return (words_[i >> 6] >> (63 - (i & 63))) & 1u;
  }

  void push_back(bool b);
  void append(const BitString& other);
  // Drops bits so that size() == n. No-op if n >= size().
  void truncate(std::size_t n);

  BitString prefix(std::size_t n) const;
  // Bits [pos, pos+len). Throws std::out_of_range past the end.
  BitString slice(std::size_t pos, std::size_t len) const;
  BitString with_bit(bool b) const {
    BitString out = *this;
    out.push_back(b);
    return out;
  }

  // this ⊆ other: this is an initial segment of other.
  bool is_prefix_of(const BitString& other) const;
  // One of the two strings extends the other.
  bool compatible_with(const BitString& other) const;

  std::vector<std::uint8_t> to_bytes() const;
  std::string to_bits() const;
  std::string to_hex() const;
  std::uint64_t hash() const;

  const std::vector<std::uint64_t>& words() const { return words_; }

  friend bool operator==(const BitString& a, const BitString& b) {
    return a.size_ == b.size_ && a.words_ == b.words_;
  }
  // Shortlex order: shorter strings first, then lexicographic on bits.
  friend std::strong_ordering operator<=>(const BitString& a, const BitString& b);

 private:
  std::vector<std::uint64_t> words_;
  std::size_t size_ = 0;
};

// Length of the longest common prefix of a and b.
std::size_t common_prefix(const BitString& a, const BitString& b);

BitString concat(const BitString& a, const BitString& b);

struct BitStringHash {
  std::size_t operator()(const BitString& s) const { return static_cast<std::size_t>(s.hash()); }
};

}  // namespace snowsim
