#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "snowsim/chainstore.hpp"
#include "snowsim/message.hpp"
#include "snowsim/node.hpp"
#include "snowsim/params.hpp"
#include "snowsim/snowman_diamond.hpp"

namespace snowsim {

enum class Protocol { SnowflakePlus, SnowflakeDiamond, Snowman };

enum class Strategy { Silent, Equivocator, SplitKeeper, LockLiar, ChainWithholder };

enum class DelayKind { Constant, Uniform, Max, Starve, Split, Custom };

enum class InputMode { Zero, One, Random, Split, Explicit };

const char* protocol_name(Protocol p);
std::optional<Protocol> parse_protocol(std::string_view s);
const char* strategy_name(Strategy s);
std::optional<Strategy> parse_strategy(std::string_view s);
const char* delay_name(DelayKind d);
std::optional<DelayKind> parse_delay(std::string_view s);
const char* input_mode_name(InputMode m);
std::optional<InputMode> parse_input_mode(std::string_view s);

// Names of every builtin adversary strategy.
std::vector<std::string> builtin_strategies();

struct EnvelopeInfo {
  ProcessId from = 0;
  ProcessId to = 0;
  Slot send = 0;
  const Message* msg = nullptr;
};

class World;
using DelayFn = std::function<Slot(const EnvelopeInfo&, const World&)>;

struct DelaySpec {
  DelayKind kind = DelayKind::Constant;
  Slot value = 1;  // Constant
  Slot lo = 1;     // Uniform
  Slot hi = 1;
  DelayFn custom;  // test hook; not serialised
};

struct BlockPlan {
  // Index into the plan, or -1 for the genesis block.
  std::int64_t parent = -1;
  Slot at = 0;
};

struct Crash {
  ProcessId id = 0;
  Slot at = 0;
};

struct RunConfig {
  ProtocolParams params;
  Protocol protocol = Protocol::SnowflakePlus;
  SnowmanVariant variant = SnowmanVariant::Base;
  Slot horizon = 100;
  Slot gst = 0;
  DelaySpec delay;
  Strategy strategy = Strategy::Silent;
  std::uint32_t byzantine = 0;                 // how many processes are Byzantine
  std::vector<ProcessId> byzantine_ids;        // explicit choice; drawn at random when empty
  Slot max_clock_offset = 0;
  std::vector<Crash> crashes;
  InputMode inputs = InputMode::Zero;
  std::vector<std::uint8_t> explicit_inputs;
  std::size_t hash_bits = kDefaultHashBits;
  std::vector<BlockPlan> blocks;
  Slot block_spread = 1;                       // arrival delay drawn from [1, block_spread]
  std::uint32_t byzantine_budget = 4096;       // messages per Byzantine process per slot
};

// Everything a run derives from (config, seed) before the first slot.
struct RunSetup {
  std::vector<std::uint8_t> inputs;
  std::vector<Slot> offsets;
  std::vector<bool> byzantine;
  std::vector<std::optional<Slot>> crash_at;
  std::vector<BlockPtr> blocks;           // blocks[0] is genesis
  std::vector<Slot> block_emit;           // creation slot per block; genesis at 0
  std::vector<std::vector<Slot>> arrival; // [block][process]
};

// Validation errors as human-readable strings; empty when the config is usable.
std::vector<std::string> check_config(const RunConfig& cfg);
RunSetup derive_setup(const RunConfig& cfg, std::uint64_t seed);
// Builds the state machine of a correct process exactly as run() does.
std::unique_ptr<ProcessNode> make_node(const RunConfig& cfg, const RunSetup& setup, ProcessId id,
                                       std::uint64_t seed);

enum class EventKind : std::uint8_t { Send, Deliver, Block, State, Violation, ScheduleViolation };

struct EnvelopeRec {
  ProcessId from = 0;
  ProcessId to = 0;
  Slot send = 0;
  Slot deliver = 0;
  Slot requested = 0;  // what the delay policy asked for before clamping
  MessagePtr msg;      // kept only when payloads are retained
};

struct TraceEvent {
  EventKind kind = EventKind::Send;
  Slot slot = 0;
  ProcessId process = 0;  // sender / receiver / subject
  // Send, Deliver, ScheduleViolation: envelope index. Block: block index.
  // State: index into states. Violation: index into violations.
  std::uint64_t ref = 0;
  std::uint64_t digest = 0;  // State only
};

struct Trace {
  RunConfig config;
  std::uint64_t seed = 0;
  RunSetup setup;
  std::vector<EnvelopeRec> envelopes;
  std::vector<TraceEvent> events;
  std::vector<NodeSnapshot> states;
  std::vector<Violation> violations;
  bool payloads = false;
  bool complete = false;
};

struct RunOptions {
  bool keep_payloads = false;
};

// Read-only view of the run for adversaries and delay policies.
class World {
 public:
  const RunConfig& config() const { return *cfg_; }
  const RunSetup& setup() const { return *setup_; }
  Slot now() const { return now_; }
  bool is_byzantine(ProcessId id) const { return setup_->byzantine[id]; }
  // nullptr for Byzantine processes.
  const ProcessNode* node(ProcessId id) const { return nodes_[id].get(); }
  // Blocks created so far, as known to the adversary.
  const ChainStore& blocks() const { return *blocks_; }
  ChainPtr chain_to(const BlockPtr& tip) const;
  std::vector<BlockPtr> leaves() const;

 private:
  friend Trace run(const RunConfig&, std::uint64_t, const RunOptions&);
  const RunConfig* cfg_ = nullptr;
  const RunSetup* setup_ = nullptr;
  Slot now_ = 0;
  std::vector<std::unique_ptr<ProcessNode>> nodes_;
  std::unique_ptr<ChainStore> blocks_;
  mutable std::unordered_map<BitString, ChainPtr, BitStringHash> chains_;
};

class ByzantineStrategy {
 public:
  virtual ~ByzantineStrategy() = default;
  virtual void tick(ProcessId self, std::span<const Inbound> inbox, const World& world, Rng& rng,
                    std::vector<Outbound>& out) = 0;
};

std::unique_ptr<ByzantineStrategy> make_strategy(Strategy s);

// Latest slot at which an envelope may be delivered when a correct process
// is at either end.
inline Slot delivery_deadline(Slot send, Slot gst, Slot delta) { return std::max(send, gst) + delta; }

Trace run(const RunConfig& cfg, std::uint64_t seed, const RunOptions& opts = {});

}  // namespace snowsim
