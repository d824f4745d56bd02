#include <map>

#include "doctest.h"
#include "snowsim/simnet.hpp"
#include "snowsim/snowflake_diamond.hpp"

using namespace snowsim;

namespace {

ProtocolParams big(Slot delta = 1) { return {1000, 0, 80, 41, 72, 12, delta, std::nullopt}; }

// Replies from distinct sampled processes covering exactly `positions`
// sample positions.
std::vector<Inbound> replies(const SnowflakeDiamond::RoundState& r, Round s, std::size_t positions, std::uint8_t v,
                             std::uint64_t age, std::vector<ProcessId>* used = nullptr) {
  std::map<ProcessId, std::size_t> mult;
  for (ProcessId id : r.sample) ++mult[id];
  std::vector<Inbound> out;
  std::size_t covered = 0;
  for (const auto& [id, m] : mult) {
    if (used && std::find(used->begin(), used->end(), id) != used->end()) continue;
    if (covered + m > positions) continue;
    covered += m;
    out.push_back({id, make_message(LockReply{s, v, age})});
    if (used) used->push_back(id);
  }
  REQUIRE(covered == positions);
  return out;
}

}  // namespace

TEST_CASE("unlocked: k - alpha1 + 1 matching values end the round without a flip") {
  SnowflakeDiamond p(big(), 0, 0, Rng(1));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  CHECK(out.size() == 80);
  p.tick(1, replies(p.rounds()[0], 0, 39, 0, 0), out);
  CHECK(p.round() == 0);
  SnowflakeDiamond q(big(), 0, 0, Rng(1));
  q.tick(0, {}, out);
  q.tick(1, replies(q.rounds()[0], 0, 40, 0, 0), out);
  CHECK(q.round() == 1);
  CHECK(q.val() == 0);
  CHECK_FALSE(q.locked());
}

TEST_CASE("unlocked: alpha1 opposing values flip") {
  SnowflakeDiamond p(big(), 0, 0, Rng(1));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  p.tick(1, replies(p.rounds()[0], 0, 41, 1, 0), out);
  CHECK(p.round() == 1);
  CHECK(p.val() == 1);
}

TEST_CASE("locked: alpha2 old opposing locks unlock and flip") {
  SnowflakeDiamond p(big(), 0, 1, Rng(1));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  p.tick(1, replies(p.rounds()[0], 0, 72, 1, 0), out);
  REQUIRE(p.locked());
  CHECK(p.locktime() == Slot{1});
  CHECK(p.round() == 1);
  p.tick(2, {}, out);
  const Slot start = p.rounds()[1].start;
  const Slot now = 3;
  // t - t_q must lie at or before start - 2Δ.
  const auto age = static_cast<std::uint64_t>(now - (start - 2));
  p.tick(now, replies(p.rounds()[1], 1, 72, 0, age), out);
  CHECK(p.val() == 0);
  CHECK_FALSE(p.locked());
  CHECK(p.round() == 2);
}

TEST_CASE("locked: opposing reports with fresh locks count toward keeping the value") {
  SnowflakeDiamond p(big(), 0, 1, Rng(1));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  p.tick(1, replies(p.rounds()[0], 0, 72, 1, 0), out);
  p.tick(2, {}, out);
  p.tick(3, replies(p.rounds()[1], 1, 72, 0, 1), out);
  CHECK(p.val() == 1);
  CHECK(p.locked());
  CHECK(p.round() == 2);
}

TEST_CASE("without replies a round lasts exactly 2Δ") {
  SnowflakeDiamond p(big(2), 0, 0, Rng(1));
  std::vector<Outbound> out;
  for (Slot t = 0; t < 4; ++t) {
    p.tick(t, {}, out);
    CHECK(p.round() == 0);
  }
  p.tick(4, {}, out);
  CHECK(p.round() == 1);
  CHECK(p.val() == 0);
  CHECK(p.rounds().size() == 1);
  p.tick(5, {}, out);
  CHECK(p.rounds().size() == 2);
  CHECK(p.rounds()[1].start == 5);
}

TEST_CASE("lock duration query") {
  SnowflakeDiamond p(big(2), 0, 1, Rng(1));
  CHECK_FALSE(p.is_locked_on(0, 0, 0));
  CHECK_FALSE(p.is_locked_on(1, 0, 0));
  std::vector<Outbound> out;
  p.tick(4, {}, out);
  p.tick(5, replies(p.rounds()[0], 0, 72, 1, 0), out);
  REQUIRE(p.locktime() == Slot{5});
  CHECK(p.is_locked_on(1, 4, 9));
  CHECK_FALSE(p.is_locked_on(0, 4, 9));
  CHECK_FALSE(p.is_locked_on(1, 4, 5));
}

TEST_CASE("an inflated lock age is recorded as reported") {
  SnowflakeDiamond p(big(), 0, 0, Rng(1));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  std::vector<ProcessId> used;
  const auto in = replies(p.rounds()[0], 0, 1, 1, 1000000, &used);
  p.tick(1, in, out);
  const auto& r = p.rounds()[0];
  for (std::size_t i = 0; i < r.sample.size(); ++i) {
    if (r.sample[i] == used[0]) {
      CHECK(r.v[i] == 1);
      CHECK(r.lock_from[i] == 1 - 1000000);
    }
  }
  CHECK(r.old_lock[1] == 1);
  CHECK(r.with_value[1] == 1);
}

TEST_CASE("replies outside the 2Δ window are ignored") {
  SnowflakeDiamond p(big(1), 0, 0, Rng(1));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  const auto in = replies(p.rounds()[0], 0, 10, 1, 0);
  p.tick(1, {}, out);
  p.tick(2, {}, out);
  p.tick(3, in, out);
  CHECK(p.rounds()[0].with_value[1] == 0);
}

TEST_CASE("replies carry the lock age only for the locked value") {
  SnowflakeDiamond p(big(), 0, 1, Rng(1));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  p.tick(1, replies(p.rounds()[0], 0, 72, 1, 0), out);
  out.clear();
  std::vector<Inbound> req{{7, make_message(Request{4, std::nullopt})}};
  p.tick(6, req, out);
  const auto it = std::find_if(out.begin(), out.end(), [](const Outbound& o) { return o.to == 7; });
  REQUIRE(it != out.end());
  const auto& rep = std::get<LockReply>(*it->msg);
  CHECK(rep.round == 4);
  CHECK(rep.value == 1);
  CHECK(rep.lock_age == 5);
  out.clear();
  p.tick(7, req, out);
  CHECK(std::none_of(out.begin(), out.end(), [](const Outbound& o) { return o.to == 7; }));
}

TEST_CASE("three-process hand trace with unit delays") {
  // n=3, k=2, alpha1=alpha2=2, beta=2, Δ=2, every input 1, every message
  // takes one slot. Round 0 starts at 0 and its replies land at 2, where
  // every process locks and moves on. Round r>0 starts at 3r and its
  // replies land at 3r+2 claiming a lock held since slot 3. The lock is
  // old enough once 3 <= 3r - 4, i.e. from round 3, so rounds 3 and 4
  // support output and every process outputs 1 at slot 14.
  RunConfig cfg;
  cfg.params = {3, 0, 2, 2, 2, 2, 2, std::nullopt};
  cfg.protocol = Protocol::SnowflakeDiamond;
  cfg.horizon = 20;
  cfg.inputs = InputMode::One;
  cfg.delay = {DelayKind::Constant, 1, 1, 1, {}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Trace t = run(cfg, seed);
    for (ProcessId p = 0; p < 3; ++p) {
      std::optional<Slot> locked_at, output_at;
      for (const auto& e : t.events) {
        if (e.kind != EventKind::State || e.process != p) continue;
        const auto& s = t.states[e.ref];
        if (!locked_at && !s.locks.empty()) {
          locked_at = e.slot;
          CHECK(s.locks[0].since == 2);
        }
        if (!output_at && s.output) {
          output_at = e.slot;
          CHECK(*s.output == 1);
          CHECK(s.round == 5);
        }
      }
      CHECK(locked_at == Slot{2});
      CHECK(output_at == Slot{14});
    }
  }
}
