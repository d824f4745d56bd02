#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snowsim/bitstring.hpp"
#include "snowsim/simnet.hpp"
#include "json.hpp"

namespace snowsim {

enum class Verdict { Pass, Fail, Unknown };
const char* verdict_name(Verdict v);

struct Counterexample {
  std::uint64_t seq = 0;  // index into Trace::events
  Slot slot = 0;
  ProcessId process = 0;
  std::string detail;
};

struct CheckResult {
  Verdict verdict = Verdict::Pass;
  std::uint64_t checked = 0;
  std::optional<Counterexample> counterexample;
  std::string reason;

  bool passed() const { return verdict == Verdict::Pass; }
  void fail(std::uint64_t seq, Slot slot, ProcessId p, std::string detail);
};

// A string that may be "infinite": every extension of `base` along some
// process's preference qualifies.
struct OpenString {
  BitString base;
  bool unbounded = false;
};

struct BlockLatency {
  std::size_t block = 0;
  Slot emitted = 0;
  // Per correct process; nullopt when it never happened within the horizon.
  std::vector<std::optional<Slot>> arrival;
  std::vector<std::optional<Slot>> first_lock;
  std::vector<std::optional<Slot>> first_temp_final;
  std::vector<std::optional<Round>> temp_final_rounds;
  std::vector<std::optional<Slot>> first_final;
};

struct LatencyReport {
  std::vector<BlockLatency> blocks;
  std::vector<std::optional<Slot>> output_slot;
  std::vector<std::optional<Round>> output_round;
  nlohmann::json to_json() const;
};

struct ObserverReport {
  CheckResult consistency;   // pairwise compatibility of finals / outputs
  CheckResult clause_i;      // per-process monotone final, final ⊆ pref
  CheckResult dagger1;       // 75%/2Δ locks persist
  CheckResult dagger2;       // finalization preceded by a covering σ_t (informational)
  CheckResult delivery;      // delivery contract audit
  CheckResult invariants;    // other per-tick invariants reported by nodes
  std::uint64_t lock_intervals = 0;
  std::uint64_t schedule_violations = 0;
  LatencyReport latency;

  // Checks that decide whether a run passes; dagger2 is reported only.
  bool ok() const;
  nlohmann::json to_json() const;
};

ObserverReport observe(const Trace& trace);

CheckResult check_consistency(const Trace& trace);
CheckResult check_dagger1(const Trace& trace);
CheckResult check_dagger2(const Trace& trace);
CheckResult audit_delivery(const Trace& trace);
LatencyReport latency_report(const Trace& trace);

// Ground-truth strings at global slot t, computed from the states in effect
// after slot t.
BitString sigma_t(const Trace& trace, Slot t);
BitString sigma_t_star(const Trace& trace, Slot t);
BitString tau_t(const Trace& trace, Slot t);
OpenString tau_t_star(const Trace& trace, Slot t);

// Longest σ that is an initial segment of some string of at least
// `threshold` of the given groups (each group counts once). nullopt when
// fewer than `threshold` groups are non-empty.
std::optional<BitString> longest_covered(const std::vector<std::vector<BitString>>& groups,
                                         std::size_t threshold);

// ceil(num/den * count)
std::size_t fraction_threshold(std::size_t count, std::size_t num, std::size_t den);

}  // namespace snowsim
