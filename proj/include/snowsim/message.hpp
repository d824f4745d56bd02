#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "snowsim/bitstring.hpp"
#include "snowsim/chainstore.hpp"
#include "snowsim/params.hpp"

namespace snowsim {

// Sample request. clock carries the requester's local time for the
// clock-synchronised response rules; absent otherwise.
struct Request {
  Round round = 0;
  std::optional<Slot> clock;
};

// Lockstep protocol reply: (s, v).
struct BitReply {
  Round round = 0;
  std::uint8_t value = 0;
};

// Partially synchronous binary reply: (s, v, lock duration).
struct LockReply {
  Round round = 0;
  std::uint8_t value = 0;
  std::uint64_t lock_age = 0;
};

// Chain reply: (s, chain(pref), locked prefix[, safely locked prefix]).
struct ChainReply {
  Round round = 0;
  ChainPtr chain;
  BitString locked;
  std::optional<BitString> safe;
};

// Bytes that did not decode. Only Byzantine senders produce these.
struct Garbage {
  std::vector<std::uint8_t> bytes;
};

using Message = std::variant<Request, BitReply, LockReply, ChainReply, Garbage>;
using MessagePtr = std::shared_ptr<const Message>;

template <typename T>
MessagePtr make_message(T body) {
  return std::make_shared<const Message>(std::move(body));
}

std::vector<std::uint8_t> encode(const Message& m);
// Never throws; anything malformed comes back as Garbage.
Message decode(std::span<const std::uint8_t> bytes, const BitString& genesis_id);

std::vector<std::uint8_t> encode_block(const Block& b);
std::string to_hex(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> from_hex(std::string_view hex);

const char* message_kind(const Message& m);

}  // namespace snowsim
