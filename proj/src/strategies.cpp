#include <unordered_set>

#include "snowsim/simnet.hpp"

namespace snowsim {

namespace {

constexpr std::uint64_t kLongLock = 1'000'000;

std::uint64_t request_key(ProcessId from, Round r) {
  return (static_cast<std::uint64_t>(r) << 24) | (from & 0xffffffu);
}

// Answers each request once, with whatever the concrete strategy claims.
class Replier : public ByzantineStrategy {
 public:
  void tick(ProcessId self, std::span<const Inbound> inbox, const World& world, Rng& rng,
            std::vector<Outbound>& out) override {
    for (const auto& in : inbox) {
      const auto* req = std::get_if<Request>(in.msg.get());
      if (!req || req->round < 0) continue;
      if (!answered_.insert(request_key(in.from, req->round)).second) continue;
      auto msg = world.config().protocol == Protocol::Snowman ? chain_reply(self, in.from, *req, world, rng)
                                                             : bit_reply(self, in.from, *req, world, rng);
      if (msg) out.push_back({in.from, std::move(msg)});
    }
  }

 protected:
  struct Claim {
    std::uint8_t value = 0;
    std::uint64_t lock_age = 0;
  };
  struct ChainClaim {
    ChainPtr chain;
    std::size_t locked_len = 0;
    std::size_t safe_len = 0;
  };

  virtual Claim claim_bit(ProcessId to, const World& world, Rng& rng) = 0;
  virtual ChainClaim claim_chain(ProcessId to, const World& world, Rng& rng) = 0;

  static ChainClaim full_claim(ChainPtr c) {
    const std::size_t len = c->hashes.size();
    return {std::move(c), len, len};
  }

 private:
  MessagePtr bit_reply(ProcessId, ProcessId to, const Request& req, const World& world, Rng& rng) {
    const Claim c = claim_bit(to, world, rng);
    if (world.config().protocol == Protocol::SnowflakePlus) return make_message(BitReply{req.round, c.value});
    return make_message(LockReply{req.round, c.value, c.lock_age});
  }

  MessagePtr chain_reply(ProcessId, ProcessId to, const Request& req, const World& world, Rng& rng) {
    ChainClaim c = claim_chain(to, world, rng);
    ChainReply rep;
    rep.round = req.round;
    rep.locked = c.chain->hashes.prefix(c.locked_len);
    if (world.config().variant == SnowmanVariant::TempFinal) rep.safe = c.chain->hashes.prefix(c.safe_len);
    rep.chain = std::move(c.chain);
    return make_message(std::move(rep));
  }

  std::unordered_set<std::uint64_t> answered_;
};

class Silent final : public ByzantineStrategy {
 public:
  void tick(ProcessId, std::span<const Inbound>, const World&, Rng&, std::vector<Outbound>&) override {}
};

class Equivocator final : public Replier {
  Claim claim_bit(ProcessId to, const World&, Rng&) override {
    return {static_cast<std::uint8_t>(to & 1u), kLongLock};
  }
  ChainClaim claim_chain(ProcessId to, const World& world, Rng&) override {
    const auto leaves = world.leaves();
    return full_claim(world.chain_to(leaves[to % leaves.size()]));
  }
};

class SplitKeeper final : public Replier {
  Claim claim_bit(ProcessId to, const World& world, Rng&) override {
    std::uint32_t ones = 0;
    std::uint32_t total = 0;
    for (ProcessId i = 0; i < world.config().params.n; ++i) {
      const auto* node = world.node(i);
      if (!node) continue;
      if (auto b = node->current_bit()) {
        ones += *b;
        ++total;
      }
    }
    std::uint8_t minority = 2 * ones < total ? 1 : 0;
    if (2 * ones == total) {
      const auto* node = world.node(to);
      const auto b = node ? node->current_bit() : std::nullopt;
      minority = b ? static_cast<std::uint8_t>(1 - *b) : 0;
    }
    return {minority, kLongLock};
  }
  ChainClaim claim_chain(ProcessId, const World& world, Rng&) override {
    ChainPtr best;
    std::uint32_t best_support = 0;
    for (const auto& leaf : world.leaves()) {
      auto c = world.chain_to(leaf);
      std::uint32_t support = 0;
      for (ProcessId i = 0; i < world.config().params.n; ++i) {
        const auto* node = world.node(i);
        const BitString* p = node ? node->current_pref() : nullptr;
        if (p && p->compatible_with(c->hashes)) ++support;
      }
      if (!best || support < best_support) {
        best = c;
        best_support = support;
      }
    }
    return full_claim(best);
  }
};

class LockLiar final : public Replier {
  Claim claim_bit(ProcessId, const World&, Rng& rng) override {
    const auto v = static_cast<std::uint8_t>(rng.coin() ? 1 : 0);
    return {v, rng.below(kLongLock + 1)};
  }
  ChainClaim claim_chain(ProcessId, const World& world, Rng& rng) override {
    const auto leaves = world.leaves();
    auto c = world.chain_to(leaves[rng.below(leaves.size())]);
    const std::size_t len = c->hashes.size();
    const auto locked = static_cast<std::size_t>(rng.below(len + 1));
    const auto safe = static_cast<std::size_t>(rng.below(len + 1));
    return {std::move(c), locked, safe};
  }
};

class ChainWithholder final : public Replier {
  Claim claim_bit(ProcessId, const World& world, Rng&) override {
    std::uint32_t ones = 0;
    std::uint32_t total = 0;
    for (ProcessId i = 0; i < world.config().params.n; ++i) {
      if (world.is_byzantine(i)) continue;
      ones += world.setup().inputs[i];
      ++total;
    }
    return {static_cast<std::uint8_t>(2 * ones > total ? 1 : 0), 0};
  }
  ChainClaim claim_chain(ProcessId, const World& world, Rng&) override {
    return full_claim(world.chain_to(world.blocks().genesis()));
  }
};

}  // namespace

std::unique_ptr<ByzantineStrategy> make_strategy(Strategy s) {
  switch (s) {
    case Strategy::Silent: return std::make_unique<Silent>();
    case Strategy::Equivocator: return std::make_unique<Equivocator>();
    case Strategy::SplitKeeper: return std::make_unique<SplitKeeper>();
    case Strategy::LockLiar: return std::make_unique<LockLiar>();
    case Strategy::ChainWithholder: return std::make_unique<ChainWithholder>();
  }
  return std::make_unique<Silent>();
}

}  // namespace snowsim
