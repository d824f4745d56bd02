#include <map>
#include <random>
#include <set>

#include "doctest.h"
#include "snowsim/simnet.hpp"
#include "snowsim/snowman_diamond.hpp"

using namespace snowsim;

namespace {

std::vector<std::uint8_t> bytes(const std::string& s) { return {s.begin(), s.end()}; }

ProtocolParams big(Slot delta = 1) { return {1000, 0, 80, 41, 72, 12, delta, Slot{0}}; }

std::vector<Inbound> replies(const SnowmanDiamond::RoundState& r, const ChainReply& body, std::size_t positions) {
  std::map<ProcessId, std::size_t> mult;
  for (ProcessId id : r.sample) ++mult[id];
  std::vector<Inbound> out;
  std::size_t covered = 0;
  const auto msg = make_message(body);
  for (const auto& [id, m] : mult) {
    if (covered + m > positions) continue;
    covered += m;
    out.push_back({id, msg});
  }
  REQUIRE(covered == positions);
  return out;
}

// Brute force: every prefix of every value is a candidate.
std::optional<BitString> brute_longest(const ReportSet& rs, std::uint32_t threshold) {
  std::optional<BitString> best;
  for (const auto& v : rs.values) {
    for (std::size_t len = 0; len <= v.size(); ++len) {
      const BitString c = v.prefix(len);
      if (rs.count_extending(c) >= threshold && (!best || c.size() > best->size())) best = c;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("a store holding only genesis: no candidates, pref and final stay at genesis") {
  auto g = make_genesis(32);
  SnowmanDiamond p(big(2), 0, SnowmanVariant::Base, g, Rng(1));
  CHECK(p.pref() == g->id);
  CHECK(p.final_string() == g->id);
  std::vector<Outbound> out;
  for (Slot t = 0; t < 5; ++t) p.tick(t, {}, out);
  CHECK(p.pref() == g->id);
  CHECK(p.final_string() == g->id);
  // With nothing to decide, each round lasts one slot.
  CHECK(p.round() == 5);
}

TEST_CASE("reported strings: longest supported prefix matches brute force") {
  std::mt19937_64 rng(11);
  for (int iter = 0; iter < 3000; ++iter) {
    ReportSet rs;
    const int n = 1 + static_cast<int>(rng() % 12);
    const std::string base = "0110";
    for (int i = 0; i < n; ++i) {
      std::string s = base.substr(0, rng() % 5);
      const std::size_t extra = rng() % 5;
      for (std::size_t j = 0; j < extra; ++j) s.push_back(rng() & 1 ? '1' : '0');
      rs.add(BitString::from_bits(s));
    }
    for (std::uint32_t thr = n / 2 + 1; thr <= static_cast<std::uint32_t>(n); ++thr) {
      const auto got = rs.longest_supported(thr);
      const auto want = brute_longest(rs, thr);
      REQUIRE(got.has_value() == want.has_value());
      if (got) CHECK(*got == *want);
    }
  }
}

TEST_CASE("locks form after a full-support round and flip on alpha2 conflicting locks") {
  auto g = make_genesis(32);
  auto a = make_block(g, bytes("a"));
  auto b = make_block(g, bytes("b"));
  const auto ca = make_chain({g, a}, g->id);
  const auto cb = make_chain({g, b}, g->id);
  const std::size_t diverge = common_prefix(a->id, b->id);

  SnowmanDiamond p(big(), 0, SnowmanVariant::Base, g, Rng(3));
  p.receive_block(a);
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  CHECK(p.pref() == ca->hashes);
  CHECK(p.round() == 0);
  p.tick(1, replies(p.rounds()[0], {0, ca, g->id, std::nullopt}, 80), out);
  CHECK(p.round() == 1);
  CHECK(p.is_locked(ca->hashes));
  CHECK(p.locktime(ca->hashes) == Slot{1});
  CHECK(p.is_locked(g->id));

  p.tick(2, {}, out);
  p.tick(3, replies(p.rounds()[1], {1, cb, cb->hashes, std::nullopt}, 72), out);
  CHECK(p.pref() == cb->hashes);
  const BitString shared = concat(g->id, a->id.prefix(diverge));
  CHECK(p.is_locked(shared));
  CHECK_FALSE(p.is_locked(ca->hashes));
  CHECK_FALSE(p.is_locked(concat(g->id, a->id.prefix(diverge + 1))));
  CHECK(p.val(shared) == std::uint8_t{b->id.bit(diverge)});
  CHECK(p.take_violations().empty());
}

TEST_CASE("fewer than alpha1 conflicting preferences do not move an unlocked preference") {
  auto g = make_genesis(32);
  auto a = make_block(g, bytes("a"));
  auto b = make_block(g, bytes("b"));
  const auto ca = make_chain({g, a}, g->id);
  const auto cb = make_chain({g, b}, g->id);
  SnowmanDiamond p(big(), 0, SnowmanVariant::Base, g, Rng(3));
  p.receive_block(a);
  p.receive_block(b);
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  // Both children known; the first enumerated one is preferred.
  CHECK(p.pref() == ca->hashes);
  p.tick(1, replies(p.rounds()[0], {0, cb, g->id, std::nullopt}, 40), out);
  CHECK(p.pref() == ca->hashes);
  p.tick(2, replies(p.rounds()[0], {0, cb, g->id, std::nullopt}, 0), out);
  SnowmanDiamond q(big(), 0, SnowmanVariant::Base, g, Rng(3));
  q.receive_block(a);
  q.receive_block(b);
  q.tick(0, {}, out);
  q.tick(1, replies(q.rounds()[0], {0, cb, g->id, std::nullopt}, 41), out);
  CHECK(q.pref() == cb->hashes);
}

TEST_CASE("temporary finality needs alpha2 safe reports in one round") {
  auto g = make_genesis(32);
  auto a = make_block(g, bytes("a"));
  const auto ca = make_chain({g, a}, g->id);
  for (std::size_t count : {71u, 72u}) {
    SnowmanDiamond p(big(), 0, SnowmanVariant::TempFinal, g, Rng(3));
    p.receive_block(a);
    std::vector<Outbound> out;
    p.tick(0, {}, out);
    p.tick(1, replies(p.rounds()[0], {0, ca, g->id, ca->hashes}, count), out);
    CHECK(p.is_temp_final(g->id) == (count == 72));
    CHECK(p.is_temp_final(ca->hashes) == (count == 72));
    CHECK(p.is_temp_final(ca->hashes.prefix(40)) == (count == 72));
    CHECK_FALSE(p.is_temp_final(ca->hashes.with_bit(true)));
  }
  SnowmanDiamond base(big(), 0, SnowmanVariant::Base, g, Rng(3));
  CHECK_THROWS_AS(base.is_temp_final(g->id), std::domain_error);
}

TEST_CASE("safe reports are ignored outside the temporary-finality variant") {
  auto g = make_genesis(32);
  auto a = make_block(g, bytes("a"));
  const auto ca = make_chain({g, a}, g->id);
  SnowmanDiamond p(big(), 0, SnowmanVariant::ClockSync, g, Rng(3));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  p.tick(1, replies(p.rounds()[0], {0, ca, g->id, ca->hashes}, 80), out);
  CHECK(p.rounds()[0].safes.total == 0);
  CHECK(p.snapshot().temp_final.empty());
}

TEST_CASE("malformed replies are dropped") {
  auto g = make_genesis(32);
  auto a = make_block(g, bytes("a"));
  auto forged = make_raw_block(a->id, g->id, 1, bytes("x"));
  const auto ca = make_chain({g, a}, g->id);
  SnowmanDiamond p(big(), 0, SnowmanVariant::Base, g, Rng(3));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  std::vector<Inbound> bad;
  const auto& r = p.rounds()[0];
  bad.push_back({r.sample[0], make_message(ChainReply{0, make_chain({g, forged}, g->id), g->id, std::nullopt})});
  bad.push_back({r.sample[1], make_message(ChainReply{0, ca, a->id, std::nullopt})});
  bad.push_back({r.sample[2], make_message(ChainReply{0, nullptr, {}, std::nullopt})});
  bad.push_back({r.sample[3], make_message(ChainReply{0, make_chain({a}, g->id), {}, std::nullopt})});
  p.tick(1, bad, out);
  CHECK(p.rounds()[0].prefs.total == 0);
  CHECK_FALSE(p.store().contains(a->id));
}

TEST_CASE("replies report locks by age, per variant") {
  auto g = make_genesis(32);
  auto a = make_block(g, bytes("a"));
  const auto ca = make_chain({g, a}, g->id);
  auto locked_at = [&](SnowmanVariant v, Slot now, std::optional<Slot> clock) {
    SnowmanDiamond p(big(), 0, v, g, Rng(3));
    p.receive_block(a);
    std::vector<Outbound> out;
    p.tick(0, {}, out);
    p.tick(1, replies(p.rounds()[0], {0, ca, g->id, std::nullopt}, 80), out);
    REQUIRE(p.locktime(ca->hashes) == Slot{1});
    out.clear();
    std::vector<Inbound> req{{999, make_message(Request{0, clock})}};
    p.tick(now, req, out);
    const auto it = std::find_if(out.begin(), out.end(), [](const Outbound& o) { return o.to == 999; });
    REQUIRE(it != out.end());
    const auto& rep = std::get<ChainReply>(*it->msg);
    CHECK(rep.chain->hashes == ca->hashes);
    return rep.locked;
  };
  // Everything was locked at slot 1; Δ = 1, Δ* = 0.
  CHECK(locked_at(SnowmanVariant::Base, 4, std::nullopt).empty());
  CHECK(locked_at(SnowmanVariant::Base, 5, std::nullopt) == ca->hashes);
  CHECK(locked_at(SnowmanVariant::ClockSync, 6, Slot{2}).empty());
  CHECK(locked_at(SnowmanVariant::ClockSync, 6, Slot{3}) == ca->hashes);
}

TEST_CASE("five-process happy path finalizes the single block everywhere") {
  RunConfig cfg;
  cfg.params = {5, 0, 3, 2, 3, 2, 1, std::nullopt};
  cfg.protocol = Protocol::Snowman;
  cfg.horizon = 40;
  cfg.hash_bits = 32;
  cfg.blocks = {{-1, 0}};
  cfg.delay = {DelayKind::Constant, 1, 1, 1, {}};
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Trace t = run(cfg, seed);
    const BitString want = concat(t.setup.blocks[0]->id, t.setup.blocks[1]->id);
    std::vector<const NodeSnapshot*> last(5, nullptr);
    std::vector<std::optional<Slot>> pref_at(5);
    for (const auto& e : t.events) {
      if (e.kind != EventKind::State) continue;
      last[e.process] = &t.states[e.ref];
      if (!pref_at[e.process] && t.states[e.ref].pref == want) pref_at[e.process] = e.slot;
    }
    for (ProcessId p = 0; p < 5; ++p) {
      REQUIRE(last[p]);
      CHECK(last[p]->pref == want);
      CHECK(last[p]->final == want);
      CHECK(pref_at[p] == Slot{1});
    }
    CHECK(t.violations.empty());
  }
}
