#include <random>
#include <set>

#include "doctest.h"
#include "snowsim/snowflake_plus.hpp"

using namespace snowsim;

namespace {

ProtocolParams params(std::uint32_t n, std::uint32_t k, std::uint32_t a1, std::uint32_t a2, std::uint32_t beta) {
  return {n, 0, k, a1, a2, beta, 1, std::nullopt};
}

using Responses = std::vector<std::optional<std::uint8_t>>;

Responses fill(std::size_t k, std::size_t count, std::uint8_t v) {
  Responses r(k);
  for (std::size_t i = 0; i < count; ++i) r[i] = v;
  return r;
}

}  // namespace

TEST_CASE("a round sends exactly k requests, with replacement") {
  SnowflakePlus p(params(5, 80, 41, 72, 12), 0, 0, Rng(1));
  const auto out = p.begin_round(0);
  CHECK(out.size() == 80);
  std::set<ProcessId> distinct;
  for (const auto& o : out) {
    CHECK(o.to < 5);
    distinct.insert(o.to);
    CHECK(std::get<Request>(*o.msg).round == 0);
  }
  CHECK(distinct.size() < 80);
}

TEST_CASE("a one-process system samples itself") {
  SnowflakePlus p(params(1, 1, 1, 1, 1), 0, 0, Rng(1));
  const auto out = p.begin_round(0);
  REQUIRE(out.size() == 1);
  CHECK(out[0].to == 0);
}

TEST_CASE("samples match a separately written uniform draw") {
  const std::uint64_t seed = 99;
  SnowflakePlus p(params(5, 3, 2, 3, 1), 2, 0, Rng(seed, StreamRole::Sample, 2));
  p.begin_round(0);
  std::mt19937_64 ref(derive_seed(seed, StreamRole::Sample, 2));
  const std::uint64_t limit = ~0ull - (~0ull % 5 + 1) % 5;
  for (ProcessId id : p.sample(0)) {
    std::uint64_t x;
    do x = ref(); while (x > limit);
    CHECK(id == x % 5);
  }
}

TEST_CASE("replies report the current value and the output once terminated") {
  SnowflakePlus p(params(5, 2, 2, 2, 1), 0, 1, Rng(1));
  CHECK(p.respond(3).round == 3);
  CHECK(p.respond(3).value == 1);

  SnowflakePlus q(params(5, 2, 2, 2, 3), 0, 0, Rng(1));
  q.begin_round(0);
  q.end_round(0, fill(2, 0, 0));
  q.begin_round(1);
  q.end_round(1, fill(2, 0, 0));
  q.begin_round(2);
  q.end_round(2, fill(2, 2, 1));
  CHECK(q.val() == 1);
  CHECK(q.respond(3).value == 1);

  SnowflakePlus t(params(5, 2, 2, 2, 1), 0, 0, Rng(1));
  t.begin_round(0);
  t.end_round(0, fill(2, 2, 0));
  REQUIRE(t.terminated());
  CHECK(t.respond(7).value == 0);
  CHECK_THROWS_AS(t.begin_round(1), ProtocolViolation);
}

TEST_CASE("alpha1 opposing responses flip the value and reset the count") {
  SnowflakePlus p(params(250, 80, 41, 72, 12), 0, 0, Rng(1));
  p.begin_round(0);
  p.end_round(0, fill(80, 80, 0));
  CHECK(p.count() == 1);
  p.begin_round(1);
  p.end_round(1, fill(80, 41, 1));
  CHECK(p.val() == 1);
  CHECK(p.count() == 0);

  SnowflakePlus q(params(250, 80, 41, 72, 12), 0, 0, Rng(1));
  q.begin_round(0);
  q.end_round(0, fill(80, 40, 1));
  CHECK(q.val() == 0);
}

TEST_CASE("beta consecutive alpha2 rounds produce an output") {
  SnowflakePlus p(params(250, 80, 41, 72, 12), 0, 1, Rng(1));
  for (Round s = 0; s < 12; ++s) {
    CHECK_FALSE(p.terminated());
    p.begin_round(s);
    p.end_round(s, fill(80, 80, 1));
  }
  CHECK(p.output() == std::uint8_t{1});
  CHECK(p.output_round() == Round{11});
}

TEST_CASE("a round below alpha2 restarts the count") {
  SnowflakePlus p(params(250, 80, 41, 72, 12), 0, 1, Rng(1));
  for (Round s = 0; s < 11; ++s) {
    p.begin_round(s);
    p.end_round(s, fill(80, 80, 1));
  }
  p.begin_round(11);
  p.end_round(11, fill(80, 71, 1));
  CHECK(p.count() == 0);
  CHECK_FALSE(p.terminated());
}

TEST_CASE("no responses leaves the value and clears the count") {
  SnowflakePlus p(params(250, 80, 41, 72, 12), 0, 1, Rng(1));
  p.begin_round(0);
  p.end_round(0, fill(80, 80, 1));
  p.begin_round(1);
  p.end_round(1, Responses(80));
  CHECK(p.val() == 1);
  CHECK(p.count() == 0);
}

TEST_CASE("two-position instance: flip then output") {
  SnowflakePlus p(params(3, 2, 2, 2, 1), 0, 0, Rng(1));
  p.begin_round(0);
  p.end_round(0, fill(2, 2, 1));
  CHECK(p.val() == 1);
  CHECK(p.count() == 0);
  CHECK_FALSE(p.terminated());
  p.begin_round(1);
  p.end_round(1, fill(2, 2, 1));
  CHECK(p.output() == std::uint8_t{1});
}

TEST_CASE("rounds must be driven in order") {
  SnowflakePlus p(params(3, 2, 2, 2, 1), 0, 0, Rng(1));
  CHECK_THROWS_AS(p.begin_round(1), ProtocolViolation);
  CHECK_THROWS_AS(p.end_round(0, fill(2, 0, 0)), ProtocolViolation);
  p.begin_round(0);
  CHECK_THROWS_AS(p.begin_round(1), ProtocolViolation);
  CHECK_THROWS_AS(p.end_round(0, fill(3, 0, 0)), std::domain_error);
}

TEST_CASE("tick follows the lockstep timetable") {
  // Δ = 1: requests at even slots, replies at odd slots.
  SnowflakePlus p(params(2, 2, 2, 2, 1), 0, 1, Rng(5));
  std::vector<Outbound> out;
  p.tick(0, {}, out);
  CHECK(out.size() == 2);
  out.clear();
  std::vector<Inbound> in{{1, make_message(Request{0, std::nullopt})}};
  p.tick(1, in, out);
  REQUIRE(out.size() == 1);
  CHECK(out[0].to == 1);
  CHECK(std::get<BitReply>(*out[0].msg).value == 1);
  out.clear();
  std::vector<Inbound> replies;
  for (ProcessId id : p.sample(0)) replies.push_back({id, make_message(BitReply{0, 1})});
  p.tick(2, replies, out);
  CHECK(p.output() == std::uint8_t{1});
  CHECK(out.empty());
  // A second request for an answered round is ignored.
  out.clear();
  p.tick(3, in, out);
  CHECK(out.empty());
}
