#pragma once

#include <deque>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "snowsim/chainstore.hpp"
#include "snowsim/node.hpp"
#include "snowsim/params.hpp"
#include "snowsim/rng.hpp"

namespace snowsim {

enum class SnowmanVariant { Base, ClockSync, TempFinal };

const char* variant_name(SnowmanVariant v);
std::optional<SnowmanVariant> parse_variant(std::string_view name);

// Multiset of reported strings for one round, kept as distinct values with
// multiplicities. Sample positions point into it.
struct ReportSet {
  std::vector<BitString> values;
  std::vector<std::uint32_t> mult;
  std::uint32_t total = 0;

  std::int32_t add(const BitString& s);
  // Longest string that is an initial segment of at least `threshold`
  // reported values. Unique when threshold > half the sample.
  std::optional<BitString> longest_supported(std::uint32_t threshold) const;
  // Number of reported values extending s.
  std::uint32_t count_extending(const BitString& s) const;
};

class SnowmanDiamond final : public ProcessNode {
 public:
  struct RoundState {
    Slot start = 0;
    std::vector<ProcessId> sample;
    std::vector<std::int32_t> pref_ix;  // -1 while undefined
    std::vector<std::int32_t> lock_ix;
    std::vector<std::int32_t> safe_ix;
    ReportSet prefs;
    ReportSet locks;
    ReportSet safes;
    std::optional<BitString> pref_after;
    // Every initial segment of `supp_fin` has suppfin(.,s)=1.
    std::optional<BitString> supp_fin;
    bool cache_valid = false;
    std::optional<BitString> pref_support;  // longest σ with >= α2 rpref ⊇ σ
    std::optional<BitString> lock_support;  // longest σ with >= α2 rlock ⊇ σ
    bool safe_changed = false;
  };

  SnowmanDiamond(const ProtocolParams& params, ProcessId self, SnowmanVariant variant,
                 BlockPtr genesis, Rng rng);

  void tick(Slot now, std::span<const Inbound> inbox, std::vector<Outbound>& out) override;
  void receive_block(const BlockPtr& b) override;
  const NodeSnapshot& snapshot() override;
  const BitString* current_pref() const override { return &pref_; }

  const BitString& pref() const { return pref_; }
  const BitString& final_string() const { return final_; }
  Round round() const { return s_; }
  const ChainStore& store() const { return store_; }
  SnowmanVariant variant() const { return variant_; }
  const std::vector<RoundState>& rounds() const { return rounds_; }

  bool is_locked(const BitString& sigma) const;
  std::optional<Slot> locktime(const BitString& sigma) const;
  std::optional<std::uint8_t> val(const BitString& sigma) const;
  // True iff some recorded round had >= α2 safely-locked reports extending σ.
  bool is_temp_final(const BitString& sigma) const;
  // Longest initial segment of pref locked since at or before `latest`, no
  // longer than `cap` bits.
  BitString locked_prefix(Slot latest, std::size_t cap) const;

 private:
  struct TrieNode {
    std::int32_t child[2] = {-1, -1};
    std::int32_t parent = -1;
    std::uint32_t depth = 0;
    std::int8_t val = -1;
    bool lock = false;
    Slot locktime = 0;
    Round lockbound = 0;
    Round dec_round = -1;
  };
  struct PrefChange {
    Slot at;
    BitString pref;
  };

  std::int32_t child_of(std::int32_t node, int bit);
  std::int32_t find_node(const BitString& sigma) const;
  BitString node_string(std::int32_t node) const;
  void set_lock(std::int32_t node, Slot now, Round bound);
  void clear_locks_above(std::int32_t node);

  void start_round(Slot now, std::vector<Outbound>& out);
  void record(Slot now, ProcessId from, const ChainReply& rep);
  void refresh_supports(RoundState& r);
  void update_suppfin(Slot now);
  void update_locks(Slot now);
  bool recompute_pref();
  void update_final();
  void update_temp_final(Slot now);
  void respond(Slot now, ProcessId to, const Request& req, std::vector<Outbound>& out);
  void refresh_chain();
  std::size_t safe_cap(Slot since) const;
  void check_invariants(const BitString& final_before);

  ProtocolParams params_;
  ProcessId self_;
  SnowmanVariant variant_;
  Rng rng_;
  ChainStore store_;
  std::size_t width_;

  std::vector<TrieNode> nodes_;
  std::vector<std::int32_t> path_;  // path_[d] is the node of pref.prefix(d)
  BitString pref_;
  BitString final_;
  std::set<std::int32_t> locked_;
  bool locks_changed_ = false;

  bool newround_ = true;
  Round s_ = 0;
  std::vector<RoundState> rounds_;
  std::optional<Slot> last_tick_;
  std::unordered_set<std::uint64_t> answered_;

  // Blocks of reduct(pref) as sent in replies.
  ChainPtr chain_;
  BitString chain_tip_;

  std::deque<PrefChange> pref_history_;
  std::vector<TempFinalEntry> temp_final_;

  NodeSnapshot snap_;
  bool dirty_ = true;
};

}  // namespace snowsim
