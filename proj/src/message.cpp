#include "snowsim/message.hpp"

#include <stdexcept>

namespace snowsim {

namespace {

enum Tag : std::uint8_t {
  kRequest = 0x01,
  kBitReply = 0x02,
  kLockReply = 0x03,
  kChainReply = 0x04,
};

constexpr std::uint32_t kMaxBlocksPerChain = 1u << 20;
constexpr std::uint32_t kMaxBits = 1u << 28;

class Writer {
 public:
  void u8(std::uint8_t v) { out.push_back(v); }
  void u32(std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void u64(std::uint64_t v) {
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
  }
  void bits(const BitString& b) {
    u32(static_cast<std::uint32_t>(b.size()));
    const auto bytes = b.to_bytes();
    out.insert(out.end(), bytes.begin(), bytes.end());
  }
  void block(const Block& b) {
    bits(b.id);
    u8(b.parent ? 1 : 0);
    if (b.parent) bits(*b.parent);
    u64(b.height);
    u32(static_cast<std::uint32_t>(b.payload.size()));
    out.insert(out.end(), b.payload.begin(), b.payload.end());
  }
  std::vector<std::uint8_t> out;
};

struct DecodeError {};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v = (v << 8) | in_[pos_++];
    return v;
  }
  BitString bits() {
    const std::uint32_t n = u32();
    if (n > kMaxBits) throw DecodeError{};
    const std::size_t nbytes = (n + 7) / 8;
    need(nbytes);
    auto b = BitString::from_bytes(in_.subspan(pos_, nbytes), n);
    // Padding bits must be zero so that encoding is canonical.
    if (b.to_bytes() != std::vector<std::uint8_t>(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                                   in_.begin() + static_cast<std::ptrdiff_t>(pos_ + nbytes))) {
      throw DecodeError{};
    }
    pos_ += nbytes;
    return b;
  }
  BlockPtr block() {
    BitString id = bits();
    std::optional<BitString> parent;
    const std::uint8_t has_parent = u8();
    if (has_parent > 1) throw DecodeError{};
    if (has_parent) parent = bits();
    const std::uint64_t height = u64();
    const std::uint32_t len = u32();
    need(len);
    std::vector<std::uint8_t> payload(in_.begin() + static_cast<std::ptrdiff_t>(pos_),
                                      in_.begin() + static_cast<std::ptrdiff_t>(pos_ + len));
    pos_ += len;
    return make_raw_block(std::move(id), std::move(parent), height, std::move(payload));
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  void need(std::size_t n) const {
    if (in_.size() - pos_ < n) throw DecodeError{};
  }
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> encode(const Message& m) {
  Writer w;
  std::visit(
      [&](const auto& body) {
        using T = std::decay_t<decltype(body)>;
        if constexpr (std::is_same_v<T, Request>) {
          w.u8(kRequest);
          w.u64(static_cast<std::uint64_t>(body.round));
          w.u8(body.clock ? 1 : 0);
          if (body.clock) w.u64(static_cast<std::uint64_t>(*body.clock));
        } else if constexpr (std::is_same_v<T, BitReply>) {
          w.u8(kBitReply);
          w.u64(static_cast<std::uint64_t>(body.round));
          w.u8(body.value);
        } else if constexpr (std::is_same_v<T, LockReply>) {
          w.u8(kLockReply);
          w.u64(static_cast<std::uint64_t>(body.round));
          w.u8(body.value);
          w.u64(body.lock_age);
        } else if constexpr (std::is_same_v<T, ChainReply>) {
          w.u8(kChainReply);
          w.u64(static_cast<std::uint64_t>(body.round));
          const auto n = body.chain ? body.chain->blocks.size() : 0;
          w.u32(static_cast<std::uint32_t>(n));
          for (std::size_t i = 0; i < n; ++i) w.block(*body.chain->blocks[i]);
          w.bits(body.locked);
          w.u8(body.safe ? 1 : 0);
          if (body.safe) w.bits(*body.safe);
        } else {
          w.out = body.bytes;
        }
      },
      m);
  return std::move(w.out);
}

std::vector<std::uint8_t> encode_block(const Block& b) {
  Writer w;
  w.block(b);
  return std::move(w.out);
}

Message decode(std::span<const std::uint8_t> bytes, const BitString& genesis_id) {
  const Garbage garbage{std::vector<std::uint8_t>(bytes.begin(), bytes.end())};
  try {
    Reader r(bytes);
    const std::uint8_t tag = r.u8();
    Message out;
    switch (tag) {
      case kRequest: {
        Request q;
        q.round = static_cast<Round>(r.u64());
        const std::uint8_t has_clock = r.u8();
        if (has_clock > 1) return garbage;
        if (has_clock) q.clock = static_cast<Slot>(r.u64());
        out = q;
        break;
      }
      case kBitReply: {
        BitReply b;
        b.round = static_cast<Round>(r.u64());
        b.value = r.u8();
        if (b.value > 1) return garbage;
        out = b;
        break;
      }
      case kLockReply: {
        LockReply l;
        l.round = static_cast<Round>(r.u64());
        l.value = r.u8();
        if (l.value > 1) return garbage;
        l.lock_age = r.u64();
        out = l;
        break;
      }
      case kChainReply: {
        ChainReply c;
        c.round = static_cast<Round>(r.u64());
        const std::uint32_t n = r.u32();
        if (n > kMaxBlocksPerChain) return garbage;
        std::vector<BlockPtr> blocks;
        for (std::uint32_t i = 0; i < n; ++i) blocks.push_back(r.block());
        c.chain = make_chain(std::move(blocks), genesis_id);
        c.locked = r.bits();
        const std::uint8_t has_safe = r.u8();
        if (has_safe > 1) return garbage;
        if (has_safe) c.safe = r.bits();
        out = std::move(c);
        break;
      }
      default:
        return garbage;
    }
    if (!r.done()) return garbage;
    return out;
  } catch (const DecodeError&) {
    return garbage;
  }
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
  static constexpr char digits[] = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (std::uint8_t b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 15]);
  }
  return s;
}

std::vector<std::uint8_t> from_hex(std::string_view hex) {
  if (hex.size() % 2) throw std::invalid_argument("odd-length hex string");
  auto nibble = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    throw std::invalid_argument("bad hex digit");
  };
  std::vector<std::uint8_t> out(hex.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(nibble(hex[2 * i]) << 4 | nibble(hex[2 * i + 1]));
  }
  return out;
}

const char* message_kind(const Message& m) {
  switch (m.index()) {
    case 0: return "request";
    case 1: return "bit_reply";
    case 2: return "lock_reply";
    case 3: return "chain_reply";
    default: return "garbage";
  }
}

}  // namespace snowsim
