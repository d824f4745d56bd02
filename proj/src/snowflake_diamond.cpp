#include "snowsim/snowflake_diamond.hpp"

#include <limits>
#include <string>

namespace snowsim {

namespace {

constexpr Slot kFarPast = std::numeric_limits<Slot>::min() / 4;

constexpr Round kMaxRound = Round{1} << 39;

std::uint64_t answer_key(ProcessId from, Round r) {
  return (static_cast<std::uint64_t>(r) << 24) | (from & 0xffffffu);
}

}  // namespace

SnowflakeDiamond::SnowflakeDiamond(const ProtocolParams& params, ProcessId self, std::uint8_t input,
                                   Rng rng)
    : params_(params), self_(self), rng_(rng), val_(input & 1u) {}

bool SnowflakeDiamond::is_locked_on(std::uint8_t d, Slot duration, Slot now) const {
  return locktime_ && val_ == d && now - *locktime_ >= duration;
}

void SnowflakeDiamond::start_round(Slot now, std::vector<Outbound>& out) {
  RoundState r;
  r.start = now;
  r.sample = draw_sample(rng_, params_.n, params_.k);
  r.v.assign(params_.k, -1);
  r.lock_from.assign(params_.k, 0);
  const auto req = make_message(Request{s_, std::nullopt});
  for (ProcessId id : r.sample) out.push_back({id, req});
  rounds_.push_back(std::move(r));
  newround_ = false;
  dirty_ = true;
}

void SnowflakeDiamond::record(Slot now, ProcessId from, const LockReply& rep) {
  if (rep.round < 0 || rep.round > s_ || rep.round >= static_cast<Round>(rounds_.size())) return;
  if (rep.value > 1) return;
  RoundState& r = rounds_[static_cast<std::size_t>(rep.round)];
  if (!(now > r.start && r.start >= now - 2 * params_.delta)) return;
  // Lock ages beyond the run's time range all mean "locked forever".
  const Slot from_time = rep.lock_age > static_cast<std::uint64_t>(now - kFarPast)
                             ? kFarPast
                             : now - static_cast<Slot>(rep.lock_age);
  const bool old = from_time <= r.start - 2 * params_.delta;
  for (std::size_t i = 0; i < r.sample.size(); ++i) {
    if (r.sample[i] != from || r.v[i] >= 0) continue;
    r.v[i] = static_cast<std::int8_t>(rep.value);
    r.lock_from[i] = from_time;
    ++r.with_value[rep.value];
    if (old) ++r.old_lock[rep.value];
  }
  for (std::uint8_t d = 0; d < 2; ++d) {
    if (!r.suppout[d] && r.old_lock[d] >= params_.alpha2) {
      r.suppout[d] = true;
      dirty_ = true;
    }
  }
}

void SnowflakeDiamond::update_lock(Slot now) {
  if (locktime_) return;
  const Round lo = std::max(lockbound_, last_other_ + 1);
  for (Round sp = lo; sp <= s_ && sp < static_cast<Round>(rounds_.size()); ++sp) {
    if (rounds_[static_cast<std::size_t>(sp)].with_value[val_] >= params_.alpha2) {
      locktime_ = now;
      lockbound_ = sp + 1;
      dirty_ = true;
      return;
    }
  }
}

void SnowflakeDiamond::finish_round(std::uint8_t new_val) {
  if (new_val != val_) {
    last_other_ = s_ - 1;
    val_ = new_val;
  }
  rounds_[static_cast<std::size_t>(s_)].val_after = val_;
  ++s_;
  newround_ = true;
  dirty_ = true;
}

void SnowflakeDiamond::advance(Slot now) {
  const RoundState& r = rounds_[static_cast<std::size_t>(s_)];
  const std::uint8_t keep = val_;
  const std::uint8_t flip = 1 - val_;
  const std::uint32_t k = params_.k;
  if (!locktime_) {
    if (r.with_value[keep] >= k - params_.alpha1 + 1) return finish_round(keep);
    if (r.with_value[flip] >= params_.alpha1) return finish_round(flip);
  } else {
    const std::uint32_t keep_count = r.with_value[keep] + (r.with_value[flip] - r.old_lock[flip]);
    if (keep_count >= k - params_.alpha2 + 1) return finish_round(keep);
    if (r.old_lock[flip] >= params_.alpha2) {
      locktime_.reset();
      return finish_round(flip);
    }
  }
  if (r.start <= now - 2 * params_.delta) finish_round(val_);
}

void SnowflakeDiamond::check_output(Round changed_from) {
  if (output_) return;
  const auto beta = static_cast<Round>(params_.beta);
  const auto n = static_cast<Round>(rounds_.size());
  for (std::uint8_t d = 0; d < 2; ++d) {
    Round run = 0;
    // A run ending at or after changed_from is the only kind that can be new.
    for (Round sp = std::max<Round>(0, changed_from - beta + 1); sp < n; ++sp) {
      run = rounds_[static_cast<std::size_t>(sp)].suppout[d] ? run + 1 : 0;
      if (run >= beta) {
        output_ = d;
        dirty_ = true;
        return;
      }
    }
  }
}

void SnowflakeDiamond::tick(Slot now, std::span<const Inbound> inbox, std::vector<Outbound>& out) {
  if (last_tick_ && now <= *last_tick_) {
    violate("clock", "tick at " + std::to_string(now) + " after " + std::to_string(*last_tick_));
    return;
  }
  last_tick_ = now;
  if (!output_) {
    if (newround_) start_round(now, out);
    Round earliest_changed = s_ + 1;
    for (const auto& in : inbox) {
      if (const auto* rep = std::get_if<LockReply>(in.msg.get())) {
        record(now, in.from, *rep);
        earliest_changed = std::min(earliest_changed, rep->round);
      }
    }
    update_lock(now);
    advance(now);
    if (earliest_changed <= s_) check_output(std::max<Round>(0, earliest_changed));
  }
  for (const auto& in : inbox) {
    const auto* req = std::get_if<Request>(in.msg.get());
    if (!req || req->round < 0 || req->round >= kMaxRound) continue;
    if (!answered_.insert(answer_key(in.from, req->round)).second) continue;
    LockReply rep{req->round, output_ ? *output_ : val_, 0};
    if (locktime_ && rep.value == val_) rep.lock_age = static_cast<std::uint64_t>(now - *locktime_);
    out.push_back({in.from, make_message(rep)});
  }
}

const NodeSnapshot& SnowflakeDiamond::snapshot() {
  if (dirty_) {
    snap_.round = s_;
    snap_.rounds_started = static_cast<Round>(rounds_.size());
    snap_.pref = BitString::single(val_ != 0);
    snap_.final = output_ ? BitString::single(*output_ != 0) : BitString{};
    snap_.locks.clear();
    if (locktime_) snap_.locks.push_back({snap_.pref, 1, *locktime_});
    snap_.output = output_;
    snap_.terminated = output_.has_value();
    dirty_ = false;
  }
  return snap_;
}

}  // namespace snowsim
