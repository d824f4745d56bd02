#pragma once

#include <array>
#include <optional>
#include <span>
#include <unordered_set>
#include <vector>

#include "snowsim/node.hpp"
#include "snowsim/params.hpp"
#include "snowsim/rng.hpp"

namespace snowsim {

// Partially synchronous binary agreement with locks. Each process paces its
// own rounds on its local clock.
class SnowflakeDiamond final : public ProcessNode {
 public:
  struct RoundState {
    Slot start = 0;
    std::vector<ProcessId> sample;
    std::vector<std::int8_t> v;   // -1 while undefined
    std::vector<Slot> lock_from;  // t_i(j,s): receiver-side lock start estimate
    std::array<std::uint32_t, 2> with_value{0, 0};
    // Positions reporting d with lock_from <= start - 2Δ.
    std::array<std::uint32_t, 2> old_lock{0, 0};
    std::optional<std::uint8_t> val_after;
    std::array<bool, 2> suppout{false, false};
  };

  SnowflakeDiamond(const ProtocolParams& params, ProcessId self, std::uint8_t input, Rng rng);

  void tick(Slot now, std::span<const Inbound> inbox, std::vector<Outbound>& out) override;
  const NodeSnapshot& snapshot() override;
  std::optional<std::uint8_t> current_bit() const override { return val_; }

  bool is_locked_on(std::uint8_t d, Slot duration, Slot now) const;

  std::uint8_t val() const { return val_; }
  bool locked() const { return locktime_.has_value(); }
  std::optional<Slot> locktime() const { return locktime_; }
  Round lockbound() const { return lockbound_; }
  Round round() const { return s_; }
  std::optional<std::uint8_t> output() const { return output_; }
  bool terminated() const { return output_.has_value(); }
  const std::vector<RoundState>& rounds() const { return rounds_; }

 private:
  void start_round(Slot now, std::vector<Outbound>& out);
  void record(Slot now, ProcessId from, const LockReply& r);
  void update_lock(Slot now);
  void advance(Slot now);
  void check_output(Round changed_from);
  void finish_round(std::uint8_t new_val);

  ProtocolParams params_;
  ProcessId self_;
  Rng rng_;
  std::uint8_t val_;
  std::optional<Slot> locktime_;
  Round lockbound_ = 0;
  bool newround_ = true;
  Round s_ = 0;
  // Last completed round whose value differs from the present one, or -1.
  Round last_other_ = -1;
  std::optional<std::uint8_t> output_;
  std::optional<Slot> last_tick_;
  std::vector<RoundState> rounds_;
  std::unordered_set<std::uint64_t> answered_;
  NodeSnapshot snap_;
  bool dirty_ = true;
};

}  // namespace snowsim
