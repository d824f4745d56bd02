#pragma once

#include <map>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

#include "snowsim/node.hpp"
#include "snowsim/params.hpp"
#include "snowsim/rng.hpp"

namespace snowsim {

// Raised when the driver calls the lockstep machine out of order.
struct ProtocolViolation : std::logic_error {
  using std::logic_error::logic_error;
};

// Lockstep binary agreement. Round s occupies global time [2Δs, 2Δ(s+1)):
// requests go out at 2Δs, replies at 2Δs+Δ, and the round is evaluated at
// 2Δ(s+1) just before the next round starts.
class SnowflakePlus final : public ProcessNode {
 public:
  SnowflakePlus(const ProtocolParams& params, ProcessId self, std::uint8_t input, Rng rng);

  // Samples k ids with replacement and returns one request per position.
  std::vector<Outbound> begin_round(Round s);
  std::vector<Outbound> begin_round(Round s, Rng& rng);
  BitReply respond(Round s) const;
  // responses[i] is the value reported by sample position i, or nullopt.
  void end_round(Round s, std::span<const std::optional<std::uint8_t>> responses);

  void tick(Slot now, std::span<const Inbound> inbox, std::vector<Outbound>& out) override;
  const NodeSnapshot& snapshot() override;
  std::optional<std::uint8_t> current_bit() const override { return val_; }

  std::uint8_t val() const { return val_; }
  std::uint32_t count() const { return count_; }
  std::optional<std::uint8_t> output() const { return output_; }
  bool terminated() const { return terminated_; }
  Round next_round() const { return next_round_; }
  std::optional<Round> output_round() const { return output_round_; }
  const std::vector<ProcessId>& sample(Round s) const { return samples_.at(s); }

 private:
  std::vector<std::optional<std::uint8_t>> matched_responses(Round s) const;

  ProtocolParams params_;
  ProcessId self_;
  Rng rng_;
  std::uint8_t val_;
  std::uint32_t count_ = 0;
  std::optional<std::uint8_t> output_;
  std::optional<Round> output_round_;
  bool terminated_ = false;
  Round next_round_ = 0;
  std::optional<Round> open_round_;
  std::map<Round, std::vector<ProcessId>> samples_;
  // First (s, v) received from each sender, per round.
  std::map<Round, std::map<ProcessId, std::uint8_t>> received_;
  std::map<Round, std::set<ProcessId>> requests_;
  std::set<Round> answered_rounds_;
  NodeSnapshot snap_;
  bool dirty_ = true;
};

}  // namespace snowsim
