#include "snowsim/snowflake_plus.hpp"

namespace snowsim {

SnowflakePlus::SnowflakePlus(const ProtocolParams& params, ProcessId self, std::uint8_t input, Rng rng)
    : params_(params), self_(self), rng_(rng), val_(input & 1u) {}

std::vector<Outbound> SnowflakePlus::begin_round(Round s) { return begin_round(s, rng_); }

std::vector<Outbound> SnowflakePlus::begin_round(Round s, Rng& rng) {
  if (terminated_) throw ProtocolViolation("begin_round after termination");
  if (s != next_round_ || open_round_) throw ProtocolViolation("begin_round out of order");
  auto sample = draw_sample(rng, params_.n, params_.k);
  std::vector<Outbound> out;
  out.reserve(sample.size());
  const auto req = make_message(Request{s, std::nullopt});
  for (ProcessId id : sample) out.push_back({id, req});
  samples_[s] = std::move(sample);
  open_round_ = s;
  ++next_round_;
  dirty_ = true;
  return out;
}

BitReply SnowflakePlus::respond(Round s) const {
  return BitReply{s, terminated_ ? *output_ : val_};
}

void SnowflakePlus::end_round(Round s, std::span<const std::optional<std::uint8_t>> responses) {
  if (!open_round_ || *open_round_ != s) throw ProtocolViolation("end_round for a round that is not open");
  if (responses.size() != params_.k) throw std::domain_error("response vector length differs from k");
  open_round_.reset();
  // Counts are taken against the value held when the round began, so a flip
  // and an increment can never happen in the same round.
  const std::uint8_t before = val_;
  std::uint32_t same = 0;
  std::uint32_t other = 0;
  for (const auto& r : responses) {
    if (!r) continue;
    if (*r == before) {
      ++same;
    } else {
      ++other;
    }
  }
  if (other >= params_.alpha1) {
    val_ = 1 - before;
    count_ = 0;
  }
  if (same < params_.alpha2) count_ = 0;
  if (same >= params_.alpha2) ++count_;
  if (count_ >= params_.beta) {
    output_ = val_;
    output_round_ = s;
    terminated_ = true;
  }
  received_.erase(s);
  dirty_ = true;
}

std::vector<std::optional<std::uint8_t>> SnowflakePlus::matched_responses(Round s) const {
  std::vector<std::optional<std::uint8_t>> out(params_.k);
  const auto& sample = samples_.at(s);
  auto it = received_.find(s);
  if (it == received_.end()) return out;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    auto v = it->second.find(sample[i]);
    if (v != it->second.end()) out[i] = v->second;
  }
  return out;
}

void SnowflakePlus::tick(Slot now, std::span<const Inbound> inbox, std::vector<Outbound>& out) {
  for (const auto& in : inbox) {
    if (const auto* req = std::get_if<Request>(in.msg.get())) {
      if (req->round >= 0 && answered_rounds_.count(req->round) == 0) requests_[req->round].insert(in.from);
    } else if (const auto* rep = std::get_if<BitReply>(in.msg.get())) {
      if (open_round_ && rep->round == *open_round_ && rep->value <= 1) {
        received_[rep->round].emplace(in.from, rep->value);
      }
    }
  }
  const Slot period = 2 * params_.delta;
  if (now < 0) return;
  if (now % period == 0) {
    const Round s = now / period;
    if (open_round_ && *open_round_ == s - 1) end_round(s - 1, matched_responses(s - 1));
    if (!terminated_ && s == next_round_) {
      auto reqs = begin_round(s);
      out.insert(out.end(), reqs.begin(), reqs.end());
    }
  } else if (now % period == params_.delta) {
    const Round s = now / period;
    auto it = requests_.find(s);
    if (it != requests_.end()) {
      const auto reply = make_message(respond(s));
      for (ProcessId j : it->second) out.push_back({j, reply});
    }
    answered_rounds_.insert(s);
    requests_.erase(requests_.begin(), requests_.upper_bound(s));
  }
}

const NodeSnapshot& SnowflakePlus::snapshot() {
  if (dirty_) {
    snap_.round = next_round_;
    snap_.rounds_started = next_round_;
    snap_.pref = BitString::single(val_ != 0);
    snap_.final = output_ ? BitString::single(*output_ != 0) : BitString{};
    snap_.output = output_;
    snap_.terminated = terminated_;
    dirty_ = false;
  }
  return snap_;
}

}  // namespace snowsim
