#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "snowsim/bitstring.hpp"

namespace snowsim {

inline constexpr std::size_t kDefaultHashBits = 128;
inline constexpr std::size_t kMaxHashBits = 256;

struct Block {
  BitString id;
  std::optional<BitString> parent;
  std::uint64_t height = 0;
  std::vector<std::uint8_t> payload;
  // id == H(parent, payload) truncated to id.size() bits. Computed once when
  // the block object is built; stands in for perfect hashing.
  bool authentic = false;
};

using BlockPtr = std::shared_ptr<const Block>;

// SHA-256 over (parent id bytes with bit length, payload), truncated to width bits.
BitString block_hash(const std::optional<BitString>& parent, std::span<const std::uint8_t> payload,
                     std::size_t width);

BlockPtr make_genesis(std::size_t width = kDefaultHashBits);
BlockPtr make_block(const BlockPtr& parent, std::vector<std::uint8_t> payload);
// Builds a block with caller-chosen fields; authentic is recomputed from them.
BlockPtr make_raw_block(BitString id, std::optional<BitString> parent, std::uint64_t height,
                        std::vector<std::uint8_t> payload);

// Immutable block sequence with its hash string. hashes is H_B: the
// concatenated ids when the sequence is a chain from the given genesis, and
// the empty string otherwise.
struct Chain {
  std::vector<BlockPtr> blocks;
  BitString hashes;
  bool linked = false;
};

using ChainPtr = std::shared_ptr<const Chain>;

ChainPtr make_chain(std::vector<BlockPtr> blocks, const BitString& genesis_id);
BitString hash_concat(std::span<const BlockPtr> blocks, const BitString& genesis_id);

enum class InsertResult { Inserted, Pending, Duplicate, Invalid };

struct Resolution {
  std::vector<BlockPtr> chain;
  // Length in bits of reduct(σ); reduct is always a prefix of the chain hashes.
  std::size_t reduct_bits = 0;
  const BlockPtr& last() const { return chain.back(); }
};

class ChainStore {
 public:
  explicit ChainStore(BlockPtr genesis);

  std::size_t width() const { return width_; }
  const BlockPtr& genesis() const { return genesis_; }
  std::size_t size() const { return order_.size(); }
  std::size_t pending_count() const;

  // Unknown parent: buffered until the parent is inserted. Blocks whose
  // height, width or hash do not check out are Invalid.
  InsertResult insert(const BlockPtr& b);

  bool contains(const BitString& id) const { return by_id_.count(id) != 0; }
  BlockPtr find(const BitString& id) const;
  // Position in the order blocks were accepted; genesis is 0.
  std::uint64_t enumeration_index(const BitString& id) const;
  const std::vector<BlockPtr>& children(const BitString& id) const;
  const std::vector<BlockPtr>& blocks_in_order() const { return order_; }

  Resolution resolve(const BitString& sigma) const;
  std::vector<BlockPtr> chain(const BitString& sigma) const { return resolve(sigma).chain; }
  BitString reduct(const BitString& sigma) const;
  BlockPtr last(const BitString& sigma) const { return resolve(sigma).last(); }
  BitString hash_concat(std::span<const BlockPtr> blocks) const {
    return snowsim::hash_concat(blocks, genesis_->id);
  }

 private:
  struct Entry {
    BlockPtr block;
    std::uint64_t index = 0;
    std::vector<BlockPtr> children;
  };
  bool structurally_valid(const Block& b, const Entry& parent) const;
  void accept(const BlockPtr& b, Entry& parent);

  std::size_t width_;
  BlockPtr genesis_;
  std::unordered_map<BitString, Entry, BitStringHash> by_id_;
  std::vector<BlockPtr> order_;
  std::unordered_map<BitString, std::vector<BlockPtr>, BitStringHash> pending_;
};

}  // namespace snowsim
