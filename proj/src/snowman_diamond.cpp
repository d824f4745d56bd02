#include "snowsim/snowman_diamond.hpp"

#include <algorithm>
#include <limits>
#include <string>
#include <unordered_map>

namespace snowsim {

namespace {

constexpr Slot kFarPast = std::numeric_limits<Slot>::min() / 4;
constexpr Round kMaxRound = Round{1} << 39;
constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

std::uint64_t answer_key(ProcessId from, Round r) {
  return (static_cast<std::uint64_t>(r) << 24) | (from & 0xffffffu);
}

}  // namespace

const char* variant_name(SnowmanVariant v) {
  switch (v) {
    case SnowmanVariant::Base: return "BASE";
    case SnowmanVariant::ClockSync: return "CLOCK_SYNC";
    case SnowmanVariant::TempFinal: return "TEMP_FINAL";
  }
  return "?";
}

std::optional<SnowmanVariant> parse_variant(std::string_view name) {
  if (name == "BASE") return SnowmanVariant::Base;
  if (name == "CLOCK_SYNC") return SnowmanVariant::ClockSync;
  if (name == "TEMP_FINAL") return SnowmanVariant::TempFinal;
  return std::nullopt;
}

std::int32_t ReportSet::add(const BitString& s) {
  ++total;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] == s) {
      ++mult[i];
      return static_cast<std::int32_t>(i);
    }
  }
  values.push_back(s);
  mult.push_back(1);
  return static_cast<std::int32_t>(values.size() - 1);
}

std::optional<BitString> ReportSet::longest_supported(std::uint32_t threshold) const {
  if (total < threshold || values.empty()) return std::nullopt;
  if (values.size() == 1) return values[0];
  std::vector<std::pair<std::size_t, std::uint32_t>> depths(values.size());
  std::size_t best = 0;
  std::size_t best_len = 0;
  bool found = false;
  for (std::size_t c = 0; c < values.size(); ++c) {
    for (std::size_t j = 0; j < values.size(); ++j) {
      depths[j] = {j == c ? values[c].size() : common_prefix(values[c], values[j]), mult[j]};
    }
    std::sort(depths.begin(), depths.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    std::uint32_t acc = 0;
    for (const auto& [d, m] : depths) {
      acc += m;
      if (acc >= threshold) {
        if (!found || d > best_len) {
          best = c;
          best_len = d;
          found = true;
        }
        break;
      }
    }
  }
  if (!found) return std::nullopt;
  return values[best].prefix(best_len);
}

std::uint32_t ReportSet::count_extending(const BitString& s) const {
  std::uint32_t n = 0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (s.is_prefix_of(values[i])) n += mult[i];
  }
  return n;
}

SnowmanDiamond::SnowmanDiamond(const ProtocolParams& params, ProcessId self, SnowmanVariant variant,
                               BlockPtr genesis, Rng rng)
    : params_(params),
      self_(self),
      variant_(variant),
      rng_(rng),
      store_(genesis),
      width_(store_.width()) {
  nodes_.emplace_back();
  path_.push_back(0);
  for (std::size_t d = 0; d < genesis->id.size(); ++d) {
    const std::int32_t c = child_of(path_.back(), genesis->id.bit(d));
    path_.push_back(c);
  }
  pref_ = genesis->id;
  final_ = genesis->id;
  chain_ = make_chain({genesis}, genesis->id);
  chain_tip_ = genesis->id;
  pref_history_.push_back({kFarPast, pref_});
}

std::int32_t SnowmanDiamond::child_of(std::int32_t node, int bit) {
  std::int32_t c = nodes_[static_cast<std::size_t>(node)].child[bit];
  if (c >= 0) return c;
  TrieNode n;
  n.parent = node;
  n.depth = nodes_[static_cast<std::size_t>(node)].depth + 1;
  c = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(n);
  nodes_[static_cast<std::size_t>(node)].child[bit] = c;
  return c;
}

std::int32_t SnowmanDiamond::find_node(const BitString& sigma) const {
  std::int32_t n = 0;
  for (std::size_t d = 0; d < sigma.size() && n >= 0; ++d) {
    n = nodes_[static_cast<std::size_t>(n)].child[sigma.bit(d) ? 1 : 0];
  }
  return n;
}

BitString SnowmanDiamond::node_string(std::int32_t node) const {
  std::vector<bool> bits;
  while (node > 0) {
    const auto& n = nodes_[static_cast<std::size_t>(node)];
    const auto& p = nodes_[static_cast<std::size_t>(n.parent)];
    bits.push_back(p.child[1] == node);
    node = n.parent;
  }
  BitString out;
  for (auto it = bits.rbegin(); it != bits.rend(); ++it) out.push_back(*it);
  return out;
}

bool SnowmanDiamond::is_locked(const BitString& sigma) const {
  const auto n = find_node(sigma);
  return n >= 0 && nodes_[static_cast<std::size_t>(n)].lock;
}

std::optional<Slot> SnowmanDiamond::locktime(const BitString& sigma) const {
  const auto n = find_node(sigma);
  if (n < 0 || !nodes_[static_cast<std::size_t>(n)].lock) return std::nullopt;
  return nodes_[static_cast<std::size_t>(n)].locktime;
}

std::optional<std::uint8_t> SnowmanDiamond::val(const BitString& sigma) const {
  const auto n = find_node(sigma);
  if (n < 0 || nodes_[static_cast<std::size_t>(n)].val < 0) return std::nullopt;
  return static_cast<std::uint8_t>(nodes_[static_cast<std::size_t>(n)].val);
}

bool SnowmanDiamond::is_temp_final(const BitString& sigma) const {
  if (variant_ != SnowmanVariant::TempFinal) {
    throw std::domain_error("temporary finality is only tracked by the TEMP_FINAL variant");
  }
  return std::any_of(temp_final_.begin(), temp_final_.end(),
                     [&](const TempFinalEntry& e) { return sigma.is_prefix_of(e.sigma); });
}

void SnowmanDiamond::set_lock(std::int32_t node, Slot now, Round bound) {
  auto& n = nodes_[static_cast<std::size_t>(node)];
  n.lock = true;
  n.locktime = now;
  n.lockbound = bound;
  locked_.insert(node);
  locks_changed_ = true;
  dirty_ = true;
}

void SnowmanDiamond::clear_locks_above(std::int32_t node) {
  std::vector<std::int32_t> stack;
  for (std::int32_t c : nodes_[static_cast<std::size_t>(node)].child) {
    if (c >= 0) stack.push_back(c);
  }
  while (!stack.empty()) {
    const std::int32_t x = stack.back();
    stack.pop_back();
    auto& n = nodes_[static_cast<std::size_t>(x)];
    if (n.lock) {
      n.lock = false;
      locked_.erase(x);
      locks_changed_ = true;
      dirty_ = true;
    }
    for (std::int32_t c : n.child) {
      if (c >= 0) stack.push_back(c);
    }
  }
}

void SnowmanDiamond::receive_block(const BlockPtr& b) {
  if (b) store_.insert(b);
}

void SnowmanDiamond::start_round(Slot now, std::vector<Outbound>& out) {
  RoundState r;
  r.start = now;
  r.sample = draw_sample(rng_, params_.n, params_.k);
  r.pref_ix.assign(params_.k, -1);
  r.lock_ix.assign(params_.k, -1);
  r.safe_ix.assign(params_.k, -1);
  std::optional<Slot> clock;
  if (variant_ != SnowmanVariant::Base) clock = now;
  const auto req = make_message(Request{s_, clock});
  for (ProcessId id : r.sample) out.push_back({id, req});
  rounds_.push_back(std::move(r));
  newround_ = false;
  dirty_ = true;
}

void SnowmanDiamond::record(Slot now, ProcessId from, const ChainReply& rep) {
  if (rep.round < 0 || rep.round > s_ || rep.round >= static_cast<Round>(rounds_.size())) return;
  RoundState& r = rounds_[static_cast<std::size_t>(rep.round)];
  if (!(now > r.start && r.start >= now - 2 * params_.delta)) return;
  const auto& chain = rep.chain;
  if (!chain || !chain->linked || chain->blocks.empty()) return;
  if (chain->blocks.front()->id != store_.genesis()->id) return;
  if (chain->hashes.size() != chain->blocks.size() * width_) return;
  if (!rep.locked.is_prefix_of(chain->hashes)) return;

  bool wanted = false;
  for (std::size_t i = 0; i < r.sample.size(); ++i) {
    if (r.sample[i] == from && r.pref_ix[i] < 0) wanted = true;
  }
  if (!wanted) return;

  if (!store_.contains(chain->blocks.back()->id)) {
    for (const auto& b : chain->blocks) {
      if (store_.insert(b) == InsertResult::Invalid) return;
    }
  }
  std::optional<BitString> safe;
  if (variant_ == SnowmanVariant::TempFinal && rep.safe && rep.safe->is_prefix_of(chain->hashes)) safe = rep.safe;

  for (std::size_t i = 0; i < r.sample.size(); ++i) {
    if (r.sample[i] != from || r.pref_ix[i] >= 0) continue;
    r.pref_ix[i] = r.prefs.add(chain->hashes);
    r.lock_ix[i] = r.locks.add(rep.locked);
    if (safe) {
      r.safe_ix[i] = r.safes.add(*safe);
      r.safe_changed = true;
    }
  }
  r.cache_valid = false;
}

void SnowmanDiamond::refresh_supports(RoundState& r) {
  if (r.cache_valid) return;
  r.pref_support = r.prefs.longest_supported(params_.alpha2);
  r.lock_support = r.locks.longest_supported(params_.alpha2);
  r.cache_valid = true;
}

void SnowmanDiamond::update_suppfin(Slot now) {
  for (auto it = rounds_.rbegin(); it != rounds_.rend(); ++it) {
    if (it->start < now - 2 * params_.delta) break;
    if (it->start >= now) continue;
    refresh_supports(*it);
    if (!it->lock_support) continue;
    const std::size_t g = common_prefix(*it->lock_support, pref_);
    if (!it->supp_fin || g > it->supp_fin->size()) it->supp_fin = it->lock_support->prefix(g);
  }
}

void SnowmanDiamond::update_locks(Slot now) {
  const auto R = static_cast<Round>(rounds_.size());
  Round lo = R;
  for (std::size_t d = 0; d < path_.size(); ++d) {
    const auto& n = nodes_[static_cast<std::size_t>(path_[d])];
    if (!n.lock) lo = std::min(lo, n.lockbound);
  }
  if (lo >= R) return;

  // reach[s'] is the longest depth d such that pref.prefix(d) qualifies via
  // round s'; -1 when not even the empty string does.
  const std::size_t span = static_cast<std::size_t>(R - lo);
  std::vector<std::int64_t> reach(span);
  std::int64_t later = std::numeric_limits<std::int64_t>::max();
  for (Round sp = R - 1; sp >= lo; --sp) {
    auto& r = rounds_[static_cast<std::size_t>(sp)];
    if (sp < s_ && r.pref_after) {
      later = std::min<std::int64_t>(later, static_cast<std::int64_t>(common_prefix(*r.pref_after, pref_)));
    }
    refresh_supports(r);
    const std::int64_t here =
        r.pref_support ? static_cast<std::int64_t>(common_prefix(*r.pref_support, pref_)) : -1;
    reach[static_cast<std::size_t>(sp - lo)] = std::min(here, later);
  }

  std::unordered_map<Round, Round> cursor;
  for (std::size_t d = 0; d < path_.size(); ++d) {
    const std::int32_t id = path_[d];
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.lock) continue;
    auto [it, fresh] = cursor.try_emplace(n.lockbound, n.lockbound);
    Round& c = it->second;
    while (c < R && reach[static_cast<std::size_t>(c - lo)] < static_cast<std::int64_t>(d)) ++c;
    if (c < R) set_lock(id, now, c + 1);
  }
}

bool SnowmanDiamond::recompute_pref() {
  const Round s = s_;
  RoundState& cur = rounds_[static_cast<std::size_t>(s)];
  const std::uint32_t k = params_.k;

  pref_ = final_;
  path_.resize(final_.size() + 1);

  Resolution res = store_.resolve(final_);
  BlockPtr last = res.last();
  std::size_t reduct_bits = res.reduct_bits;
  std::vector<BlockPtr> cands;
  {
    const BitString tau = final_.slice(reduct_bits, final_.size() - reduct_bits);
    for (const auto& c : store_.children(last->id)) {
      if (tau.is_prefix_of(c->id)) cands.push_back(c);
    }
  }

  struct Alive {
    const BitString* s;
    std::uint32_t m;
  };
  std::uint32_t defined = 0;
  std::vector<Alive> prefs;
  std::vector<Alive> locks;
  for (std::size_t i = 0; i < cur.prefs.values.size(); ++i) {
    if (final_.is_prefix_of(cur.prefs.values[i])) prefs.push_back({&cur.prefs.values[i], cur.prefs.mult[i]});
  }
  for (std::size_t i = 0; i < cur.locks.values.size(); ++i) {
    if (final_.is_prefix_of(cur.locks.values[i])) locks.push_back({&cur.locks.values[i], cur.locks.mult[i]});
  }
  defined = cur.prefs.total;

  auto extending = [](const std::vector<Alive>& v, std::size_t d, int b) {
    std::uint32_t n = 0;
    for (const auto& a : v) {
      if (a.s->size() > d && a.s->bit(d) == (b != 0)) n += a.m;
    }
    return n;
  };
  auto keep_only = [](std::vector<Alive>& v, std::size_t d, int b) {
    std::erase_if(v, [&](const Alive& a) { return a.s->size() <= d || a.s->bit(d) != (b != 0); });
  };

  bool all_dec = true;
  while (!cands.empty()) {
    const std::size_t d = pref_.size();
    const std::int32_t node = path_[d];
    const std::size_t tau_len = d - reduct_bits;
    if (nodes_[static_cast<std::size_t>(node)].val < 0) {
      nodes_[static_cast<std::size_t>(node)].val = cands.front()->id.bit(tau_len) ? 1 : 0;
    }
    int v = nodes_[static_cast<std::size_t>(node)].val;

    std::int32_t c = child_of(node, v);
    if (!nodes_[static_cast<std::size_t>(c)].lock) {
      const std::uint32_t other = extending(prefs, d, 1 - v);
      if (defined - other >= k - params_.alpha1 + 1) nodes_[static_cast<std::size_t>(c)].dec_round = s;
      if (other >= params_.alpha1) {
        v = 1 - v;
        nodes_[static_cast<std::size_t>(node)].val = static_cast<std::int8_t>(v);
        c = child_of(node, v);
        nodes_[static_cast<std::size_t>(c)].dec_round = s;
      }
    }
    if (nodes_[static_cast<std::size_t>(c)].lock) {
      const std::uint32_t other = extending(locks, d, 1 - v);
      if (defined - other >= k - params_.alpha2 + 1) nodes_[static_cast<std::size_t>(c)].dec_round = s;
      if (other >= params_.alpha2) {
        v = 1 - v;
        nodes_[static_cast<std::size_t>(node)].val = static_cast<std::int8_t>(v);
        c = child_of(node, v);
        nodes_[static_cast<std::size_t>(c)].dec_round = s;
        clear_locks_above(node);
      }
    }

    pref_.push_back(v != 0);
    path_.push_back(c);
    if (nodes_[static_cast<std::size_t>(c)].dec_round != s) all_dec = false;
    keep_only(prefs, d, v);
    keep_only(locks, d, v);
    std::erase_if(cands, [&](const BlockPtr& b) { return b->id.bit(tau_len) != (v != 0); });
    if (tau_len + 1 == width_ && !cands.empty()) {
      last = cands.front();
      reduct_bits += width_;
      cands = store_.children(last->id);
    }
  }

  if (chain_tip_ != last->id) {
    std::vector<BlockPtr> blocks;
    for (BlockPtr b = last; b; b = b->parent ? store_.find(*b->parent) : nullptr) blocks.push_back(b);
    std::reverse(blocks.begin(), blocks.end());
    chain_ = make_chain(std::move(blocks), store_.genesis()->id);
    chain_tip_ = last->id;
  }
  return all_dec;
}

void SnowmanDiamond::update_final() {
  const auto beta = static_cast<std::size_t>(params_.beta);
  if (rounds_.size() < beta) return;
  std::size_t best = final_.size();
  for (std::size_t w = 0; w + beta <= rounds_.size(); ++w) {
    std::size_t m = kUnbounded;
    const BitString* ref = nullptr;
    for (std::size_t j = w; j < w + beta; ++j) {
      const auto& g = rounds_[j].supp_fin;
      if (!g) {
        m = 0;
        ref = nullptr;
        w = j;  // no window containing j can qualify
        break;
      }
      if (!ref) {
        ref = &*g;
        m = g->size();
      } else {
        m = std::min(m, common_prefix(*ref, *g));
      }
      if (m <= best) break;
    }
    if (!ref || m <= best) continue;
    const std::size_t reach = std::min(m, common_prefix(*ref, pref_));
    best = std::max(best, reach);
  }
  if (best > final_.size()) {
    final_ = pref_.prefix(best);
    dirty_ = true;
  }
}

void SnowmanDiamond::update_temp_final(Slot now) {
  for (std::size_t i = rounds_.size(); i-- > 0;) {
    auto& r = rounds_[i];
    if (r.start < now - 2 * params_.delta) break;
    if (!r.safe_changed) continue;
    r.safe_changed = false;
    const auto t = r.safes.longest_supported(params_.alpha2);
    if (!t) continue;
    const bool covered =
        std::any_of(temp_final_.begin(), temp_final_.end(), [&](const auto& e) { return t->is_prefix_of(e.sigma); });
    if (covered) continue;
    std::erase_if(temp_final_, [&](const auto& e) { return e.sigma.is_prefix_of(*t); });
    temp_final_.push_back({*t, static_cast<Round>(i)});
    dirty_ = true;
  }
}

BitString SnowmanDiamond::locked_prefix(Slot latest, std::size_t cap) const {
  std::size_t d = std::min(cap, pref_.size());
  for (;; --d) {
    const auto& n = nodes_[static_cast<std::size_t>(path_[d])];
    if (n.lock && n.locktime <= latest) return pref_.prefix(d);
    if (d == 0) return BitString{};
  }
}

std::size_t SnowmanDiamond::safe_cap(Slot since) const {
  if (pref_history_.empty() || pref_history_.front().at > since) return 0;
  std::size_t cap = kUnbounded;
  for (std::size_t i = 0; i < pref_history_.size(); ++i) {
    const bool in_effect = pref_history_[i].at >= since || i + 1 == pref_history_.size() ||
                           pref_history_[i + 1].at > since;
    if (!in_effect) continue;
    const BitString& p = pref_history_[i].pref;
    const std::size_t l = common_prefix(p, pref_);
    if (l < p.size()) cap = std::min(cap, l);
  }
  return cap;
}

void SnowmanDiamond::respond(Slot now, ProcessId to, const Request& req, std::vector<Outbound>& out) {
  const std::size_t hb = chain_->hashes.size();
  const Slot dstar = params_.delta_star.value_or(0);
  ChainReply rep;
  rep.round = req.round;
  rep.chain = chain_;
  if (variant_ == SnowmanVariant::Base) {
    rep.locked = locked_prefix(now - 4 * params_.delta, hb);
  } else {
    const Slot t = req.clock.value_or(now);
    rep.locked = locked_prefix(t - 2 * params_.delta - dstar, hb);
    if (variant_ == SnowmanVariant::TempFinal) {
      const std::size_t cap = std::min(hb, safe_cap(t - dstar - 2 * params_.delta));
      rep.safe = locked_prefix(t - dstar, cap);
    }
  }
  out.push_back({to, make_message(std::move(rep))});
}

void SnowmanDiamond::check_invariants(const BitString& final_before) {
  if (!final_before.is_prefix_of(final_)) {
    violate("consistency_i", "final shrank or forked from " + final_before.to_hex() + " to " + final_.to_hex());
  }
  if (!final_.is_prefix_of(pref_)) {
    violate("consistency_i", "final " + final_.to_hex() + " not a prefix of pref " + pref_.to_hex());
  }
  if (!locks_changed_) return;
  locks_changed_ = false;
  std::vector<BitString> off_path;
  std::int32_t deepest_on_path = -1;
  for (std::int32_t id : locked_) {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.depth < path_.size() && path_[n.depth] == id) {
      if (deepest_on_path < 0 || n.depth > nodes_[static_cast<std::size_t>(deepest_on_path)].depth) deepest_on_path = id;
    } else {
      off_path.push_back(node_string(id));
    }
  }
  if (off_path.empty()) return;
  if (deepest_on_path >= 0) off_path.push_back(pref_.prefix(nodes_[static_cast<std::size_t>(deepest_on_path)].depth));
  for (std::size_t i = 0; i < off_path.size(); ++i) {
    for (std::size_t j = i + 1; j < off_path.size(); ++j) {
      if (!off_path[i].compatible_with(off_path[j])) {
        violate("lock_chain", "locked on incompatible " + off_path[i].to_hex() + " and " + off_path[j].to_hex());
        return;
      }
    }
  }
}

void SnowmanDiamond::tick(Slot now, std::span<const Inbound> inbox, std::vector<Outbound>& out) {
  if (last_tick_ && now <= *last_tick_) {
    violate("clock", "tick at " + std::to_string(now) + " after " + std::to_string(*last_tick_));
    return;
  }
  last_tick_ = now;
  const BitString final_before = final_;
  const BitString pref_before = pref_;
  const std::size_t locks_before = locked_.size();

  if (newround_) start_round(now, out);
  for (const auto& in : inbox) {
    if (const auto* rep = std::get_if<ChainReply>(in.msg.get())) record(now, in.from, *rep);
  }
  update_suppfin(now);
  update_locks(now);
  const bool all_dec = recompute_pref();
  if (rounds_[static_cast<std::size_t>(s_)].start <= now - 2 * params_.delta || all_dec) {
    rounds_[static_cast<std::size_t>(s_)].pref_after = pref_;
    ++s_;
    newround_ = true;
    dirty_ = true;
  }
  update_final();
  if (variant_ == SnowmanVariant::TempFinal) update_temp_final(now);

  if (pref_ != pref_before) {
    dirty_ = true;
    pref_history_.push_back({now, pref_});
    const Slot keep_from = now - 2 * params_.delta - 2 * params_.delta_star.value_or(0) - 2;
    while (pref_history_.size() > 1 && pref_history_[1].at <= keep_from) pref_history_.pop_front();
  }
  if (locked_.size() != locks_before) dirty_ = true;
  check_invariants(final_before);

  for (const auto& in : inbox) {
    const auto* req = std::get_if<Request>(in.msg.get());
    if (!req || req->round < 0 || req->round >= kMaxRound) continue;
    if (!answered_.insert(answer_key(in.from, req->round)).second) continue;
    respond(now, in.from, *req, out);
  }
}

const NodeSnapshot& SnowmanDiamond::snapshot() {
  if (!dirty_) return snap_;
  snap_.round = s_;
  snap_.rounds_started = static_cast<Round>(rounds_.size());
  snap_.pref = pref_;
  snap_.final = final_;
  snap_.locks.clear();
  std::size_t run_from = 0;
  bool in_run = false;
  Slot since = 0;
  for (std::size_t d = 0; d <= pref_.size(); ++d) {
    const auto& n = nodes_[static_cast<std::size_t>(path_[d])];
    if (in_run && (!n.lock || n.locktime != since)) {
      snap_.locks.push_back({pref_.prefix(d - 1), run_from, since});
      in_run = false;
    }
    if (n.lock && !in_run) {
      in_run = true;
      run_from = d;
      since = n.locktime;
    }
  }
  if (in_run) snap_.locks.push_back({pref_, run_from, since});
  for (std::int32_t id : locked_) {
    const auto& n = nodes_[static_cast<std::size_t>(id)];
    if (n.depth < path_.size() && path_[n.depth] == id) continue;
    const BitString s = node_string(id);
    snap_.locks.push_back({s, s.size(), n.locktime});
  }
  snap_.temp_final = temp_final_;
  snap_.output.reset();
  snap_.terminated = false;
  dirty_ = false;
  return snap_;
}

}  // namespace snowsim
