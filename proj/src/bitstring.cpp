#include "snowsim/bitstring.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>

namespace snowsim {

BitString BitString::from_bits(std::string_view zeros_and_ones) {
  BitString out;
  for (char c : zeros_and_ones) {
    if (c != '0' && c != '1') throw std::invalid_argument("bit string must contain only 0 and 1");
    out.push_back(c == '1');
  }
  return out;
}

BitString BitString::from_bytes(std::span<const std::uint8_t> bytes, std::size_t nbits) {
  if (bytes.size() * 8 < nbits) throw std::invalid_argument("not enough bytes for bit count");
  BitString out;
  out.size_ = nbits;
  out.words_.assign((nbits + 63) / 64, 0);
  for (std::size_t i = 0; i < (nbits + 7) / 8; ++i) {
    out.words_[i / 8] |= static_cast<std::uint64_t>(bytes[i]) << (56 - 8 * (i % 8));
  }
  if (nbits & 63) out.words_.back() &= ~0ull << (64 - (nbits & 63));
  return out;
}

BitString BitString::single(bool bit) {
  BitString out;
  out.push_back(bit);
  return out;
}

void BitString::push_back(bool b) {
  if ((size_ & 63) == 0) words_.push_back(0);
  if (b) words_.back() |= 1ull << (63 - (size_ & 63));
  ++size_;
}

void BitString::append(const BitString& other) {
  if ((size_ & 63) == 0) {
    words_.insert(words_.end(), other.words_.begin(), other.words_.end());
    size_ += other.size_;
    return;
  }
  const unsigned shift = size_ & 63;
  std::size_t remaining = other.size_;
  for (std::uint64_t w : other.words_) {
    words_.back() |= w >> shift;
    const std::size_t taken = std::min<std::size_t>(64 - shift, remaining);
    size_ += taken;
    remaining -= taken;
    if (remaining == 0) break;
    words_.push_back(w << (64 - shift));
    const std::size_t more = std::min<std::size_t>(shift, remaining);
    size_ += more;
    remaining -= more;
    if (remaining == 0) break;
  }
}

void BitString::truncate(std::size_t n) {
  if (n >= size_) return;
  size_ = n;
  words_.resize((n + 63) / 64);
  if (n & 63) words_.back() &= ~0ull << (64 - (n & 63));
}

BitString BitString::prefix(std::size_t n) const {
  BitString out;
  n = std::min(n, size_);
  out.size_ = n;
  out.words_.assign(words_.begin(), words_.begin() + static_cast<std::ptrdiff_t>((n + 63) / 64));
  if (n & 63) out.words_.back() &= ~0ull << (64 - (n & 63));
  return out;
}

BitString BitString::slice(std::size_t pos, std::size_t len) const {
  if (pos > size_ || len > size_ - pos) throw std::out_of_range("BitString::slice");
  BitString out;
  out.size_ = len;
  out.words_.assign((len + 63) / 64, 0);
  const std::size_t first = pos >> 6;
  const unsigned shift = pos & 63;
  for (std::size_t i = 0; i < out.words_.size(); ++i) {
    std::uint64_t w = words_[first + i] << shift;
    if (shift != 0 && first + i + 1 < words_.size()) w |= words_[first + i + 1] >> (64 - shift);
    out.words_[i] = w;
  }
  if (len & 63) out.words_.back() &= ~0ull << (64 - (len & 63));
  return out;
}

bool BitString::is_prefix_of(const BitString& other) const {
  return size_ <= other.size_ && common_prefix(*this, other) == size_;
}

bool BitString::compatible_with(const BitString& other) const {
  return common_prefix(*this, other) == std::min(size_, other.size_);
}

std::vector<std::uint8_t> BitString::to_bytes() const {
  std::vector<std::uint8_t> out((size_ + 7) / 8);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(words_[i / 8] >> (56 - 8 * (i % 8)));
  }
  return out;
}

std::string BitString::to_bits() const {
  std::string out;
  out.reserve(size_);
  for (std::size_t i = 0; i < size_; ++i) out.push_back(bit(i) ? '1' : '0');
  return out;
}

std::string BitString::to_hex() const {
  static constexpr char digits[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : to_bytes()) {
    out.push_back(digits[b >> 4]);
    out.push_back(digits[b & 15]);
  }
  return out;
}

std::uint64_t BitString::hash() const {
  std::uint64_t h = 0x9e3779b97f4a7c15ull ^ size_;
  for (std::uint64_t w : words_) {
    h ^= w + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
  }
  return h;
}

std::strong_ordering operator<=>(const BitString& a, const BitString& b) {
  if (auto c = a.size_ <=> b.size_; c != 0) return c;
  for (std::size_t i = 0; i < a.words_.size(); ++i) {
    if (auto c = a.words_[i] <=> b.words_[i]; c != 0) return c;
  }
  return std::strong_ordering::equal;
}

std::size_t common_prefix(const BitString& a, const BitString& b) {
  const std::size_t limit = std::min(a.size(), b.size());
  const auto& wa = a.words();
  const auto& wb = b.words();
  const std::size_t nwords = (limit + 63) / 64;
  for (std::size_t i = 0; i < nwords; ++i) {
    const std::uint64_t x = wa[i] ^ wb[i];
    if (x != 0) return std::min(limit, i * 64 + static_cast<std::size_t>(std::countl_zero(x)));
  }
  return limit;
}

BitString concat(const BitString& a, const BitString& b) {
  BitString out = a;
  out.append(b);
  return out;
}

}  // namespace snowsim
