#include "snowsim/chainstore.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace snowsim {

BitString block_hash(const std::optional<BitString>& parent, std::span<const std::uint8_t> payload,
                     std::size_t width) {
  if (width == 0 || width > kMaxHashBits) throw std::invalid_argument("hash width out of range");
  std::vector<std::uint8_t> buf;
  buf.push_back(parent ? 1 : 0);
  if (parent) {
    const auto bits = static_cast<std::uint32_t>(parent->size());
    for (int shift = 24; shift >= 0; shift -= 8) buf.push_back(static_cast<std::uint8_t>(bits >> shift));
    const auto bytes = parent->to_bytes();
    buf.insert(buf.end(), bytes.begin(), bytes.end());
  }
  buf.insert(buf.end(), payload.begin(), payload.end());
  std::uint8_t digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(buf.data(), buf.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  return BitString::from_bytes(std::span<const std::uint8_t>(digest, len), width);
}

BlockPtr make_raw_block(BitString id, std::optional<BitString> parent, std::uint64_t height,
                        std::vector<std::uint8_t> payload) {
  auto b = std::make_shared<Block>();
  b->authentic = !id.empty() && id.size() <= kMaxHashBits &&
                 block_hash(parent, payload, id.size()) == id;
  b->id = std::move(id);
  b->parent = std::move(parent);
  b->height = height;
  b->payload = std::move(payload);
  return b;
}

BlockPtr make_genesis(std::size_t width) {
  static constexpr std::uint8_t tag[] = {'g', 'e', 'n', 'e', 's', 'i', 's'};
  std::vector<std::uint8_t> payload(std::begin(tag), std::end(tag));
  auto id = block_hash(std::nullopt, payload, width);
  return make_raw_block(std::move(id), std::nullopt, 0, std::move(payload));
}

BlockPtr make_block(const BlockPtr& parent, std::vector<std::uint8_t> payload) {
  auto id = block_hash(parent->id, payload, parent->id.size());
  return make_raw_block(std::move(id), parent->id, parent->height + 1, std::move(payload));
}

BitString hash_concat(std::span<const BlockPtr> blocks, const BitString& genesis_id) {
  if (blocks.empty()) return {};
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const Block& b = *blocks[i];
    if (!b.authentic || b.height != i) return {};
    if (i == 0) {
      if (b.parent || b.id != genesis_id) return {};
    } else if (!b.parent || *b.parent != blocks[i - 1]->id) {
      return {};
    }
  }
  BitString out;
  for (const auto& b : blocks) out.append(b->id);
  return out;
}

ChainPtr make_chain(std::vector<BlockPtr> blocks, const BitString& genesis_id) {
  auto c = std::make_shared<Chain>();
  c->hashes = hash_concat(blocks, genesis_id);
  c->linked = !c->hashes.empty();
  c->blocks = std::move(blocks);
  return c;
}

ChainStore::ChainStore(BlockPtr genesis) : width_(genesis->id.size()), genesis_(std::move(genesis)) {
  if (genesis_->parent || genesis_->height != 0 || !genesis_->authentic) {
    throw std::invalid_argument("genesis block must be authentic, parentless, height 0");
  }
  by_id_[genesis_->id] = Entry{genesis_, 0, {}};
  order_.push_back(genesis_);
}

std::size_t ChainStore::pending_count() const {
  std::size_t n = 0;
  for (const auto& [_, v] : pending_) n += v.size();
  return n;
}

bool ChainStore::structurally_valid(const Block& b, const Entry& parent) const {
  return b.authentic && b.id.size() == width_ && b.height == parent.block->height + 1;
}

void ChainStore::accept(const BlockPtr& b, Entry& parent) {
  Entry e{b, order_.size(), {}};
  order_.push_back(b);
  parent.children.push_back(b);
  by_id_.emplace(b->id, std::move(e));
  auto waiting = pending_.find(b->id);
  if (waiting == pending_.end()) return;
  auto kids = std::move(waiting->second);
  pending_.erase(waiting);
  Entry& self = by_id_.at(b->id);
  for (const auto& kid : kids) {
    if (by_id_.count(kid->id) == 0 && structurally_valid(*kid, self)) accept(kid, self);
  }
}

InsertResult ChainStore::insert(const BlockPtr& b) {
  if (!b) return InsertResult::Invalid;
  if (by_id_.count(b->id)) return InsertResult::Duplicate;
  if (!b->parent || !b->authentic || b->id.size() != width_) return InsertResult::Invalid;
  auto parent = by_id_.find(*b->parent);
  if (parent == by_id_.end()) {
    auto& bucket = pending_[*b->parent];
    for (const auto& other : bucket) {
      if (other->id == b->id) return InsertResult::Duplicate;
    }
    bucket.push_back(b);
    return InsertResult::Pending;
  }
  if (!structurally_valid(*b, parent->second)) return InsertResult::Invalid;
  accept(b, parent->second);
  return InsertResult::Inserted;
}

BlockPtr ChainStore::find(const BitString& id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : it->second.block;
}

std::uint64_t ChainStore::enumeration_index(const BitString& id) const {
  auto it = by_id_.find(id);
  if (it == by_id_.end()) throw std::out_of_range("block not in store");
  return it->second.index;
}

const std::vector<BlockPtr>& ChainStore::children(const BitString& id) const {
  static const std::vector<BlockPtr> none;
  auto it = by_id_.find(id);
  return it == by_id_.end() ? none : it->second.children;
}

Resolution ChainStore::resolve(const BitString& sigma) const {
  Resolution r;
  r.chain.push_back(genesis_);
  r.reduct_bits = width_;
  if (sigma.size() < width_ || common_prefix(sigma, genesis_->id) < width_) return r;
  const Entry* current = &by_id_.at(genesis_->id);
  std::size_t pos = width_;
  while (pos + width_ <= sigma.size()) {
    const BitString next = sigma.slice(pos, width_);
    const Entry* found = nullptr;
    for (const auto& child : current->children) {
      if (child->id == next) {
        found = &by_id_.at(child->id);
        break;
      }
    }
    if (!found) break;
    current = found;
    r.chain.push_back(found->block);
    pos += width_;
  }
  r.reduct_bits = pos;
  return r;
}

BitString ChainStore::reduct(const BitString& sigma) const {
  const Resolution r = resolve(sigma);
  if (r.chain.size() == 1) return genesis_->id;
  return sigma.prefix(r.reduct_bits);
}

}  // namespace snowsim
