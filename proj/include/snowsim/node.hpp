#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "snowsim/bitstring.hpp"
#include "snowsim/message.hpp"
#include "snowsim/params.hpp"
#include "snowsim/rng.hpp"

namespace snowsim {

struct Inbound {
  ProcessId from = 0;
  MessagePtr msg;
};

struct Outbound {
  ProcessId to = 0;
  MessagePtr msg;
};

// All prefixes of top whose length lies in [from_len, top.size()] are locked,
// each since local time `since`.
struct LockRun {
  BitString top;
  std::size_t from_len = 0;
  Slot since = 0;
  bool operator==(const LockRun&) const = default;
};

struct TempFinalEntry {
  BitString sigma;
  // Round whose replies made sigma temporarily final.
  Round round = 0;
  bool operator==(const TempFinalEntry&) const = default;
};

// Observable state of one process after a tick. Binary protocols encode the
// colours 0 and 1 as the one-bit strings "0" and "1" so that the observer can
// treat all protocols uniformly.
struct NodeSnapshot {
  Round round = 0;
  Round rounds_started = 0;
  BitString pref;
  BitString final;
  std::vector<LockRun> locks;
  // Maximal temporarily final strings; every prefix of one is temp-final.
  std::vector<TempFinalEntry> temp_final;
  std::optional<std::uint8_t> output;
  bool terminated = false;

  bool operator==(const NodeSnapshot&) const = default;
  std::uint64_t digest() const;
};

struct Violation {
  std::string kind;
  std::string detail;
};

class ProcessNode {
 public:
  virtual ~ProcessNode() = default;

  // One timeslot of the protocol at local time `now`. `inbox` holds every
  // message delivered to this process in the current slot.
  virtual void tick(Slot now, std::span<const Inbound> inbox, std::vector<Outbound>& out) = 0;
  virtual void receive_block(const BlockPtr&) {}

  virtual const NodeSnapshot& snapshot() = 0;
  // Invariant failures detected since the last call.
  std::vector<Violation> take_violations() { return std::exchange(violations_, {}); }

  // Cheap views used by adversaries and delay policies.
  virtual std::optional<std::uint8_t> current_bit() const { return std::nullopt; }
  virtual const BitString* current_pref() const { return nullptr; }

 protected:
  void violate(std::string kind, std::string detail) {
    violations_.push_back({std::move(kind), std::move(detail)});
  }

 private:
  std::vector<Violation> violations_;
};

// Draws k ids uniformly with replacement from [0, n).
std::vector<ProcessId> draw_sample(Rng& rng, std::uint32_t n, std::uint32_t k);

}  // namespace snowsim
