#include "snowsim/simnet.hpp"

#include <numeric>
#include <set>
#include <stdexcept>

#include "snowsim/snowflake_diamond.hpp"
#include "snowsim/snowflake_plus.hpp"

namespace snowsim {

namespace {

template <typename E, std::size_t N>
std::optional<E> lookup(const std::pair<E, const char*> (&table)[N], std::string_view s) {
  for (const auto& [e, name] : table) {
    if (s == name) return e;
  }
  return std::nullopt;
}

template <typename E, std::size_t N>
const char* name_of(const std::pair<E, const char*> (&table)[N], E e) {
  for (const auto& [v, name] : table) {
    if (v == e) return name;
  }
  return "?";
}

constexpr std::pair<Protocol, const char*> kProtocols[] = {
    {Protocol::SnowflakePlus, "SF_PLUS"},
    {Protocol::SnowflakeDiamond, "SF_DIAMOND"},
    {Protocol::Snowman, "SNOWMAN"},
};
constexpr std::pair<Strategy, const char*> kStrategies[] = {
    {Strategy::Silent, "SILENT"},
    {Strategy::Equivocator, "EQUIVOCATOR"},
    {Strategy::SplitKeeper, "SPLIT_KEEPER"},
    {Strategy::LockLiar, "LOCK_LIAR"},
    {Strategy::ChainWithholder, "CHAIN_WITHHOLDER"},
};
constexpr std::pair<DelayKind, const char*> kDelays[] = {
    {DelayKind::Constant, "constant"}, {DelayKind::Uniform, "uniform"}, {DelayKind::Max, "max"},
    {DelayKind::Starve, "starve"},     {DelayKind::Split, "split"},     {DelayKind::Custom, "custom"},
};
constexpr std::pair<InputMode, const char*> kInputs[] = {
    {InputMode::Zero, "zero"},   {InputMode::One, "one"},           {InputMode::Random, "random"},
    {InputMode::Split, "split"}, {InputMode::Explicit, "explicit"},
};

bool has_withholder(const RunConfig& cfg) {
  return cfg.strategy == Strategy::ChainWithholder && cfg.byzantine > 0;
}

}  // namespace

const char* protocol_name(Protocol p) { return name_of(kProtocols, p); }
std::optional<Protocol> parse_protocol(std::string_view s) { return lookup(kProtocols, s); }
const char* strategy_name(Strategy s) { return name_of(kStrategies, s); }
std::optional<Strategy> parse_strategy(std::string_view s) { return lookup(kStrategies, s); }
const char* delay_name(DelayKind d) { return name_of(kDelays, d); }
std::optional<DelayKind> parse_delay(std::string_view s) { return lookup(kDelays, s); }
const char* input_mode_name(InputMode m) { return name_of(kInputs, m); }
std::optional<InputMode> parse_input_mode(std::string_view s) { return lookup(kInputs, s); }

std::vector<std::string> builtin_strategies() {
  std::vector<std::string> out;
  for (const auto& [e, name] : kStrategies) out.emplace_back(name);
  return out;
}

std::vector<std::string> check_config(const RunConfig& cfg) {
  std::vector<std::string> errs = validate(cfg.params).failures();
  const auto n = cfg.params.n;
  if (cfg.horizon < 1) errs.emplace_back("horizon must be at least 1");
  if (cfg.gst < 0) errs.emplace_back("gst must be non-negative");
  if (cfg.byzantine > cfg.params.f) errs.emplace_back("byzantine count exceeds f");
  if (cfg.byzantine > n) errs.emplace_back("byzantine count exceeds n");
  if (!cfg.byzantine_ids.empty()) {
    std::set<ProcessId> ids(cfg.byzantine_ids.begin(), cfg.byzantine_ids.end());
    if (ids.size() != cfg.byzantine_ids.size()) errs.emplace_back("byzantine ids repeat");
    if (cfg.byzantine_ids.size() != cfg.byzantine) errs.emplace_back("byzantine ids do not match the byzantine count");
    if (!ids.empty() && *ids.rbegin() >= n) errs.emplace_back("byzantine id out of range");
  }
  if (cfg.max_clock_offset < 0) errs.emplace_back("clock offset must be non-negative");
  if (cfg.protocol == Protocol::SnowflakePlus && cfg.max_clock_offset != 0) {
    errs.emplace_back("the lockstep protocol requires zero clock offsets");
  }
  if (cfg.params.delta_star && cfg.max_clock_offset > *cfg.params.delta_star) {
    errs.emplace_back("clock offsets exceed delta_star");
  }
  for (const auto& c : cfg.crashes) {
    if (c.id >= n) errs.emplace_back("crash id out of range");
    if (c.at < 0) errs.emplace_back("crash slot must be non-negative");
  }
  if (cfg.inputs == InputMode::Explicit) {
    if (cfg.explicit_inputs.size() != n) errs.emplace_back("explicit inputs must list one bit per process");
    for (auto b : cfg.explicit_inputs) {
      if (b > 1) errs.emplace_back("explicit inputs must be bits");
    }
  }
  if (cfg.hash_bits < 1 || cfg.hash_bits > kMaxHashBits) errs.emplace_back("hash_bits must lie in [1, 256]");
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& b = cfg.blocks[i];
    if (b.parent < -1 || b.parent >= static_cast<std::int64_t>(i)) {
      errs.emplace_back("block " + std::to_string(i) + " must name an earlier parent or -1");
    }
    if (b.at < 0) errs.emplace_back("block " + std::to_string(i) + " has a negative creation slot");
  }
  if (cfg.block_spread < 1) errs.emplace_back("block_spread must be at least 1");
  switch (cfg.delay.kind) {
    case DelayKind::Constant:
      if (cfg.delay.value < 1) errs.emplace_back("constant delay must be at least 1");
      break;
    case DelayKind::Uniform:
      if (cfg.delay.lo < 1 || cfg.delay.hi < cfg.delay.lo) errs.emplace_back("uniform delay needs 1 <= lo <= hi");
      break;
    case DelayKind::Custom:
      if (!cfg.delay.custom) errs.emplace_back("custom delay policy has no callback");
      break;
    default:
      break;
  }
  return errs;
}

RunSetup derive_setup(const RunConfig& cfg, std::uint64_t seed) {
  const auto n = cfg.params.n;
  RunSetup s;
  s.byzantine.assign(n, false);
  if (!cfg.byzantine_ids.empty()) {
    for (auto id : cfg.byzantine_ids) s.byzantine[id] = true;
  } else {
    Rng rng(seed, StreamRole::Schedule, 0);
    std::vector<ProcessId> ids(n);
    std::iota(ids.begin(), ids.end(), 0);
    for (std::uint32_t i = 0; i < cfg.byzantine; ++i) {
      const auto j = i + static_cast<std::uint32_t>(rng.below(n - i));
      std::swap(ids[i], ids[j]);
      s.byzantine[ids[i]] = true;
    }
  }

  s.inputs.assign(n, 0);
  {
    Rng rng(seed, StreamRole::Input, 0);
    for (ProcessId i = 0; i < n; ++i) {
      switch (cfg.inputs) {
        case InputMode::Zero: s.inputs[i] = 0; break;
        case InputMode::One: s.inputs[i] = 1; break;
        case InputMode::Random: s.inputs[i] = rng.coin() ? 1 : 0; break;
        case InputMode::Split: s.inputs[i] = i < n / 2 ? 0 : 1; break;
        case InputMode::Explicit: s.inputs[i] = cfg.explicit_inputs[i]; break;
      }
    }
  }

  s.offsets.assign(n, 0);
  if (cfg.protocol != Protocol::SnowflakePlus && cfg.max_clock_offset > 0) {
    Rng rng(seed, StreamRole::Schedule, 1);
    for (auto& o : s.offsets) o = rng.between(0, cfg.max_clock_offset);
  }

  s.crash_at.assign(n, std::nullopt);
  for (const auto& c : cfg.crashes) {
    s.crash_at[c.id] = s.crash_at[c.id] ? std::min(*s.crash_at[c.id], c.at) : c.at;
  }

  s.blocks.push_back(make_genesis(cfg.hash_bits));
  s.block_emit.push_back(0);
  s.arrival.emplace_back(n, 0);
  if (cfg.protocol != Protocol::Snowman) return s;

  // With a chain withholder present, every other correct process gets each
  // block only at the latest admissible slot.
  std::vector<bool> withheld(n, false);
  if (has_withholder(cfg)) {
    std::uint32_t correct_seen = 0;
    for (ProcessId i = 0; i < n; ++i) {
      if (s.byzantine[i]) continue;
      withheld[i] = (correct_seen++ % 2) == 1;
    }
  }
  for (std::size_t i = 0; i < cfg.blocks.size(); ++i) {
    const auto& plan = cfg.blocks[i];
    const BlockPtr& parent = s.blocks[static_cast<std::size_t>(plan.parent + 1)];
    const std::string label = "block-" + std::to_string(i);
    s.blocks.push_back(make_block(parent, std::vector<std::uint8_t>(label.begin(), label.end())));
    s.block_emit.push_back(plan.at);
    Rng rng(seed, StreamRole::Blocks, i + 1);
    const Slot deadline = delivery_deadline(plan.at, cfg.gst, cfg.params.delta);
    std::vector<Slot> arr(n);
    for (ProcessId p = 0; p < n; ++p) {
      Slot a = plan.at + rng.between(1, cfg.block_spread);
      if (withheld[p]) a = deadline;
      arr[p] = s.byzantine[p] ? plan.at : std::min(a, deadline);
    }
    s.arrival.push_back(std::move(arr));
  }
  return s;
}

std::unique_ptr<ProcessNode> make_node(const RunConfig& cfg, const RunSetup& setup, ProcessId id,
                                       std::uint64_t seed) {
  Rng rng(seed, StreamRole::Sample, id);
  switch (cfg.protocol) {
    case Protocol::SnowflakePlus:
      return std::make_unique<SnowflakePlus>(cfg.params, id, setup.inputs[id], rng);
    case Protocol::SnowflakeDiamond:
      return std::make_unique<SnowflakeDiamond>(cfg.params, id, setup.inputs[id], rng);
    case Protocol::Snowman:
      return std::make_unique<SnowmanDiamond>(cfg.params, id, cfg.variant, setup.blocks[0], rng);
  }
  return nullptr;
}

ChainPtr World::chain_to(const BlockPtr& tip) const {
  auto it = chains_.find(tip->id);
  if (it != chains_.end()) return it->second;
  std::vector<BlockPtr> blocks;
  for (BlockPtr b = tip; b; b = b->parent ? blocks_->find(*b->parent) : nullptr) blocks.push_back(b);
  std::reverse(blocks.begin(), blocks.end());
  auto c = make_chain(std::move(blocks), blocks_->genesis()->id);
  chains_.emplace(tip->id, c);
  return c;
}

std::vector<BlockPtr> World::leaves() const {
  std::vector<BlockPtr> out;
  for (const auto& b : blocks_->blocks_in_order()) {
    if (blocks_->children(b->id).empty()) out.push_back(b);
  }
  return out;
}

namespace {

// True when the two correct processes currently disagree, as seen by an
// omniscient scheduler.
bool views_conflict(const ProcessNode* a, const ProcessNode* b) {
  if (!a || !b) return false;
  const auto ba = a->current_bit();
  const auto bb = b->current_bit();
  if (ba && bb) return *ba != *bb;
  const BitString* pa = a->current_pref();
  const BitString* pb = b->current_pref();
  return pa && pb && !pa->compatible_with(*pb);
}

class Simulator {
 public:
  Simulator(const RunConfig& cfg, std::uint64_t seed, const RunOptions& opts, World& world, Trace& trace)
      : cfg_(cfg), opts_(opts), world_(world), trace_(trace), delay_rng_(seed, StreamRole::Delay, 0) {
    buckets_.resize(static_cast<std::size_t>(cfg.horizon));
  }

  void send(ProcessId from, MessagePtr msg, ProcessId to, Slot now) {
    const auto& setup = world_.setup();
    const Slot delta = cfg_.params.delta;
    const bool constrained = !setup.byzantine[from] || !setup.byzantine[to];
    const Slot deadline = delivery_deadline(now, cfg_.gst, delta);
    Slot want = now + 1;
    if (constrained) {
      switch (cfg_.delay.kind) {
        case DelayKind::Constant: want = now + cfg_.delay.value; break;
        case DelayKind::Uniform: want = now + delay_rng_.between(cfg_.delay.lo, cfg_.delay.hi); break;
        case DelayKind::Max: want = deadline; break;
        case DelayKind::Starve:
          want = now < cfg_.gst ? deadline : now + delay_rng_.between(1, delta);
          break;
        case DelayKind::Split:
          want = views_conflict(world_.node(from), world_.node(to)) ? deadline : now + 1;
          break;
        case DelayKind::Custom:
          want = cfg_.delay.custom(EnvelopeInfo{from, to, now, msg.get()}, world_);
          break;
      }
    }
    Slot at = want;
    bool clamped = false;
    if (at < now + 1) {
      at = now + 1;
      clamped = true;
    }
    if (constrained && at > deadline) {
      at = deadline;
      clamped = true;
    }
    const std::uint64_t idx = trace_.envelopes.size();
    EnvelopeRec rec{from, to, now, at, want, nullptr};
    if (opts_.keep_payloads) rec.msg = msg;
    trace_.envelopes.push_back(std::move(rec));
    trace_.events.push_back({EventKind::Send, now, from, idx, 0});
    if (clamped) trace_.events.push_back({EventKind::ScheduleViolation, now, from, idx, 0});
    if (at < cfg_.horizon) buckets_[static_cast<std::size_t>(at)].push_back({idx, from, to, std::move(msg)});
  }

  struct Pending {
    std::uint64_t idx;
    ProcessId from;
    ProcessId to;
    MessagePtr msg;
  };

  const RunConfig& cfg_;
  const RunOptions& opts_;
  World& world_;
  Trace& trace_;
  Rng delay_rng_;
  std::vector<std::vector<Pending>> buckets_;
};

}  // namespace

Trace run(const RunConfig& cfg, std::uint64_t seed, const RunOptions& opts) {
  const auto errs = check_config(cfg);
  if (!errs.empty()) throw std::invalid_argument("invalid run config: " + errs.front());

  Trace trace;
  trace.config = cfg;
  trace.seed = seed;
  trace.setup = derive_setup(cfg, seed);
  trace.payloads = opts.keep_payloads;
  const RunSetup& setup = trace.setup;
  const auto n = cfg.params.n;

  World world;
  world.cfg_ = &trace.config;
  world.setup_ = &setup;
  world.blocks_ = std::make_unique<ChainStore>(setup.blocks[0]);
  world.nodes_.resize(n);
  std::vector<std::unique_ptr<ByzantineStrategy>> byz(n);
  std::vector<Rng> byz_rng;
  byz_rng.reserve(n);
  for (ProcessId i = 0; i < n; ++i) {
    if (setup.byzantine[i]) {
      byz[i] = make_strategy(cfg.strategy);
    } else {
      world.nodes_[i] = make_node(cfg, setup, i, seed);
    }
    byz_rng.emplace_back(seed, StreamRole::Byzantine, i);
  }

  // Block creation and arrival events per slot.
  std::vector<std::vector<std::size_t>> emit_at(static_cast<std::size_t>(cfg.horizon));
  std::vector<std::vector<std::pair<std::size_t, ProcessId>>> arrive_at(static_cast<std::size_t>(cfg.horizon));
  for (std::size_t b = 1; b < setup.blocks.size(); ++b) {
    if (setup.block_emit[b] < cfg.horizon) emit_at[static_cast<std::size_t>(setup.block_emit[b])].push_back(b);
    for (ProcessId p = 0; p < n; ++p) {
      const Slot a = setup.arrival[b][p];
      if (!setup.byzantine[p] && a < cfg.horizon) arrive_at[static_cast<std::size_t>(a)].push_back({b, p});
    }
  }

  Simulator sim(cfg, seed, opts, world, trace);
  std::vector<std::vector<Inbound>> inbox(n);
  std::vector<std::uint64_t> last_digest(n, 0);
  std::vector<bool> has_digest(n, false);
  std::vector<Outbound> out;

  for (Slot g = 0; g < cfg.horizon; ++g) {
    world.now_ = g;
    const auto gi = static_cast<std::size_t>(g);
    for (std::size_t b : emit_at[gi]) world.blocks_->insert(setup.blocks[b]);
    for (auto& box : inbox) box.clear();
    for (auto& p : sim.buckets_[gi]) {
      trace.events.push_back({EventKind::Deliver, g, p.to, p.idx, 0});
      inbox[p.to].push_back({p.from, std::move(p.msg)});
    }
    sim.buckets_[gi].clear();
    sim.buckets_[gi].shrink_to_fit();
    for (const auto& [b, p] : arrive_at[gi]) {
      trace.events.push_back({EventKind::Block, g, p, b, 0});
      if (setup.crash_at[p] && *setup.crash_at[p] <= g) continue;
      world.nodes_[p]->receive_block(setup.blocks[b]);
    }

    for (ProcessId i = 0; i < n; ++i) {
      if (!setup.byzantine[i]) continue;
      if (setup.crash_at[i] && *setup.crash_at[i] <= g) continue;
      out.clear();
      byz[i]->tick(i, inbox[i], world, byz_rng[i], out);
      if (out.size() > cfg.byzantine_budget) out.resize(cfg.byzantine_budget);
      for (auto& o : out) sim.send(i, std::move(o.msg), o.to, g);
    }

    for (ProcessId i = 0; i < n; ++i) {
      if (setup.byzantine[i]) continue;
      if (setup.crash_at[i] && *setup.crash_at[i] <= g) continue;
      ProcessNode& node = *world.nodes_[i];
      out.clear();
      node.tick(g + setup.offsets[i], inbox[i], out);
      for (auto& o : out) sim.send(i, std::move(o.msg), o.to, g);
      for (auto& v : node.take_violations()) {
        trace.events.push_back({EventKind::Violation, g, i, trace.violations.size(), 0});
        trace.violations.push_back(std::move(v));
      }
      const NodeSnapshot& snap = node.snapshot();
      const std::uint64_t d = snap.digest();
      if (!has_digest[i] || d != last_digest[i]) {
        has_digest[i] = true;
        last_digest[i] = d;
        trace.events.push_back({EventKind::State, g, i, trace.states.size(), d});
        trace.states.push_back(snap);
      }
    }
  }
  trace.complete = true;
  return trace;
}

}  // namespace snowsim
