#include <random>

#include "doctest.h"
#include "snowsim/observer.hpp"
#include "snowsim/simnet.hpp"

using namespace snowsim;

namespace {

BitString bits(const char* s) { return BitString::from_bits(s); }

// Hand-built trace with no messages; states are added explicitly.
struct Synthetic {
  Trace t;

  Synthetic(std::uint32_t n, Slot delta, Slot horizon, Protocol proto = Protocol::SnowflakeDiamond) {
    t.config.protocol = proto;
    t.config.params = {n, 0, 1, 1, 1, 1, delta, std::nullopt};
    t.config.horizon = horizon;
    t.setup = derive_setup(t.config, 0);
    t.complete = true;
  }

  void state(Slot g, ProcessId p, NodeSnapshot s) {
    t.events.push_back({EventKind::State, g, p, t.states.size(), s.digest()});
    t.states.push_back(std::move(s));
  }

  static NodeSnapshot locked(const BitString& top, Slot since) {
    NodeSnapshot s;
    s.pref = top;
    s.locks.push_back({top, 1, since});
    return s;
  }
};

std::optional<BitString> brute_covered(const std::vector<std::vector<BitString>>& groups, std::size_t thr) {
  std::size_t nonempty = 0;
  for (const auto& g : groups) nonempty += g.empty() ? 0 : 1;
  if (nonempty < std::max<std::size_t>(thr, 1)) return std::nullopt;
  std::optional<BitString> best;
  for (const auto& g : groups) {
    for (const auto& s : g) {
      for (std::size_t len = 0; len <= s.size(); ++len) {
        const BitString c = s.prefix(len);
        std::size_t cover = 0;
        for (const auto& h : groups) {
          bool any = false;
          for (const auto& x : h) any = any || c.is_prefix_of(x);
          cover += any ? 1 : 0;
        }
        if (cover >= thr && (!best || c.size() > best->size())) best = c;
      }
    }
  }
  return best;
}

}  // namespace

TEST_CASE("fraction thresholds round up") {
  CHECK(fraction_threshold(100, 3, 4) == 75);
  CHECK(fraction_threshold(41, 3, 4) == 31);
  CHECK(fraction_threshold(41, 3, 5) == 25);
  CHECK(fraction_threshold(0, 3, 4) == 0);
}

TEST_CASE("longest covered string matches brute force") {
  std::mt19937_64 gen(17);
  for (int trial = 0; trial < 400; ++trial) {
    const std::size_t ngroups = 1 + gen() % 8;
    std::vector<std::vector<BitString>> groups(ngroups);
    for (auto& g : groups) {
      const std::size_t m = gen() % 3;
      for (std::size_t i = 0; i < m; ++i) {
        std::string s;
        const std::size_t len = 1 + gen() % 5;
        for (std::size_t j = 0; j < len; ++j) s += (gen() & 1) ? '1' : '0';
        g.push_back(bits(s.c_str()));
      }
    }
    const std::size_t thr = 1 + gen() % ngroups;
    CAPTURE(trial);
    const auto got = longest_covered(groups, thr);
    const auto want = brute_covered(groups, thr);
    REQUIRE(got.has_value() == want.has_value());
    if (got) CHECK(got->size() == want->size());
    if (got) {
      std::size_t cover = 0;
      for (const auto& g : groups) {
        bool any = false;
        for (const auto& x : g) any = any || got->is_prefix_of(x);
        cover += any ? 1 : 0;
      }
      CHECK(cover >= thr);
    }
  }
}

TEST_CASE("sigma_t needs three quarters of correct processes locked for two delta") {
  SUBCASE("74 of 100 on the deeper string") {
    Synthetic s(100, 2, 20);
    for (ProcessId p = 0; p < 100; ++p) s.state(0, p, Synthetic::locked(bits(p < 74 ? "0110" : "0111"), 0));
    CHECK(sigma_t(s.t, 4) == bits("011"));
  }
  SUBCASE("75 of 100 on the deeper string") {
    Synthetic s(100, 2, 20);
    for (ProcessId p = 0; p < 100; ++p) s.state(0, p, Synthetic::locked(bits(p < 75 ? "0110" : "0111"), 0));
    CHECK(sigma_t(s.t, 4) == bits("0110"));
  }
  SUBCASE("locks younger than two delta do not count") {
    Synthetic s(8, 3, 30);
    for (ProcessId p = 0; p < 8; ++p) s.state(5, p, Synthetic::locked(bits("1"), 5));
    CHECK(sigma_t(s.t, 10) == BitString());
    CHECK(sigma_t(s.t, 11) == bits("1"));
    CHECK(sigma_t_star(s.t, 5) == bits("1"));
  }
  SUBCASE("unanimous lock") {
    Synthetic s(10, 1, 10);
    for (ProcessId p = 0; p < 10; ++p) s.state(0, p, Synthetic::locked(bits("1"), 0));
    for (Slot g = 2; g < 10; ++g) CHECK(sigma_t(s.t, g) == bits("1"));
  }
  SUBCASE("snowman falls back to the genesis id") {
    Synthetic s(4, 1, 10, Protocol::Snowman);
    CHECK(sigma_t(s.t, 5) == s.t.setup.blocks[0]->id);
  }
}

TEST_CASE("dagger1 catches a dropped lock") {
  Synthetic s(8, 1, 20);
  for (ProcessId p = 0; p < 8; ++p) s.state(0, p, Synthetic::locked(bits("1"), 0));
  const auto clean = observe(s.t);
  CHECK(clean.dagger1.passed());
  CHECK(clean.dagger1.checked > 0);
  CHECK(clean.lock_intervals == 18);

  NodeSnapshot unlocked;
  unlocked.pref = bits("0");
  s.state(10, 3, unlocked);
  const auto bad = observe(s.t);
  CHECK(bad.dagger1.verdict == Verdict::Fail);
  REQUIRE(bad.dagger1.counterexample);
  CHECK(bad.dagger1.counterexample->slot == 10);
  CHECK(bad.dagger1.counterexample->process == 3);
  CHECK(!bad.ok());
}

TEST_CASE("dagger2 flags an uncovered finalization without failing the run") {
  Synthetic s(4, 1, 10);
  NodeSnapshot out;
  out.pref = bits("1");
  out.final = bits("1");
  out.output = 1;
  s.state(0, 0, out);
  const auto rep = observe(s.t);
  CHECK(rep.dagger2.verdict == Verdict::Fail);
  CHECK(rep.consistency.passed());
  CHECK(rep.ok());
}

TEST_CASE("conflicting outputs break consistency") {
  Synthetic s(4, 1, 10);
  NodeSnapshot one;
  one.pref = one.final = bits("1");
  one.output = 1;
  NodeSnapshot zero;
  zero.pref = zero.final = bits("0");
  zero.output = 0;
  s.state(1, 0, one);
  s.state(3, 2, zero);
  const auto rep = observe(s.t);
  CHECK(rep.consistency.verdict == Verdict::Fail);
  REQUIRE(rep.consistency.counterexample);
  CHECK(rep.consistency.counterexample->seq == 1);
  CHECK(rep.consistency.counterexample->process == 2);
}

TEST_CASE("clause i: final must only grow and stay under pref") {
  Synthetic s(3, 1, 10, Protocol::Snowman);
  const BitString g = s.t.setup.blocks[0]->id;
  NodeSnapshot a;
  a.pref = concat(g, bits("1010"));
  a.final = concat(g, bits("10"));
  s.state(1, 0, a);
  CHECK(observe(s.t).clause_i.passed());

  NodeSnapshot b = a;
  b.final = concat(g, bits("11"));
  b.pref = b.final;
  s.state(2, 0, b);
  CHECK(observe(s.t).clause_i.verdict == Verdict::Fail);

  Synthetic u(3, 1, 10, Protocol::Snowman);
  NodeSnapshot c;
  c.pref = concat(g, bits("0"));
  c.final = concat(g, bits("1"));
  u.state(1, 1, c);
  CHECK(observe(u.t).clause_i.verdict == Verdict::Fail);
}

TEST_CASE("truncated traces are UNKNOWN") {
  Synthetic s(4, 1, 10);
  s.t.complete = false;
  const auto rep = observe(s.t);
  for (const auto* c : {&rep.consistency, &rep.clause_i, &rep.dagger1, &rep.delivery, &rep.invariants}) {
    CHECK(c->verdict == Verdict::Unknown);
    CHECK(c->reason == "trace truncated");
  }
  CHECK(!rep.ok());
}

TEST_CASE("node-reported violations land in the invariants check") {
  Synthetic s(4, 1, 10);
  s.t.violations.push_back({"pref_not_lock_extension", "detail"});
  s.t.events.push_back({EventKind::Violation, 2, 1, 0, 0});
  const auto rep = observe(s.t);
  CHECK(rep.invariants.verdict == Verdict::Fail);
  CHECK(rep.clause_i.passed());

  s.t.violations[0].kind = "consistency_i";
  CHECK(observe(s.t).clause_i.verdict == Verdict::Fail);
}

TEST_CASE("a run without blocks has an empty latency table") {
  RunConfig cfg;
  cfg.protocol = Protocol::Snowman;
  cfg.params = {5, 0, 3, 2, 3, 2, 1, std::nullopt};
  cfg.horizon = 8;
  const Trace t = run(cfg, 0);
  const auto lat = latency_report(t);
  CHECK(lat.blocks.empty());
  const auto j = lat.to_json();
  CHECK(j["blocks"].empty());
}

TEST_CASE("latency records arrival, lock and finality per block") {
  RunConfig cfg;
  cfg.protocol = Protocol::Snowman;
  cfg.params = {7, 0, 5, 3, 5, 2, 1, std::nullopt};
  cfg.horizon = 40;
  cfg.blocks = {{-1, 2}};
  const Trace t = run(cfg, 1);
  const auto lat = latency_report(t);
  REQUIRE(lat.blocks.size() == 1);
  const auto& b = lat.blocks[0];
  CHECK(b.emitted == 2);
  for (ProcessId p = 0; p < 7; ++p) {
    REQUIRE(b.arrival[p]);
    CHECK(*b.arrival[p] > 2);
    REQUIRE(b.first_final[p]);
    CHECK(*b.first_final[p] >= *b.arrival[p]);
    if (b.first_lock[p]) CHECK(*b.first_lock[p] <= *b.first_final[p]);
  }
}

TEST_CASE("tau strings from preferences") {
  Synthetic s(5, 1, 10);
  for (ProcessId p = 0; p < 5; ++p) {
    NodeSnapshot n;
    n.pref = bits(p < 3 ? "10" : "11");
    s.state(0, p, n);
  }
  const OpenString open = tau_t_star(s.t, 5);
  CHECK(open.unbounded);
  CHECK(open.base == bits("10"));
  // No locks, so nothing is safely held.
  CHECK(tau_t(s.t, 5) == BitString());
}

TEST_CASE("binary locks split between colours carry no lock obligation") {
  Synthetic s(8, 1, 20);
  for (ProcessId p = 0; p < 8; ++p) s.state(0, p, Synthetic::locked(bits(p < 5 ? "1" : "0"), 0));
  NodeSnapshot unlocked;
  unlocked.pref = bits("0");
  s.state(10, 6, unlocked);
  const auto rep = observe(s.t);
  CHECK(rep.lock_intervals == 0);
  CHECK(rep.dagger1.passed());
  CHECK(rep.dagger1.checked == 0);
}
