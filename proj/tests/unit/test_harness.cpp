#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "snowsim/harness.hpp"

using namespace snowsim;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "name": "small",
  "protocol": "SNOWMAN",
  "variant": "TEMP_FINAL",
  "params": {"n": 7, "f": 1, "k": 5, "alpha1": 3, "alpha2": 5, "beta": 2, "delta": 2, "delta_star": 1},
  "horizon": 30,
  "seeds": 3,
  "adversary": {"strategy": "LOCK_LIAR", "count": 1},
  "schedule": {"gst": 6, "delay": {"kind": "uniform", "lo": 1, "hi": 2}, "max_clock_offset": 1},
  "blocks": {"chain": {"count": 2, "start": 1, "interval": 6}, "spread": 2},
  "hash_bits": 16
})";

std::string error_of(const std::string& text, const std::vector<std::string>& overrides = {}) {
  try {
    parse_scenario(text, overrides);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("snowsim_test_" + tag + "_" + std::to_string(::getpid()));
    fs::remove_all(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("scenario parse and canonical round trip") {
  const Scenario s = parse_scenario(kSmall);
  CHECK(s.name == "small");
  CHECK(s.seeds == std::vector<std::uint64_t>{0, 1, 2});
  CHECK(s.config.protocol == Protocol::Snowman);
  CHECK(s.config.variant == SnowmanVariant::TempFinal);
  CHECK(s.config.strategy == Strategy::LockLiar);
  CHECK(s.config.byzantine == 1);
  REQUIRE(s.config.blocks.size() == 2);
  CHECK(s.config.blocks[0].parent == -1);
  CHECK(s.config.blocks[1].parent == 0);
  CHECK(s.config.blocks[1].at == 7);

  const Scenario back = scenario_from_json(scenario_to_json(s));
  CHECK(scenario_to_json(back) == scenario_to_json(s));
  CHECK(back.config.params == s.config.params);
}

TEST_CASE("scenario errors name the offending field") {
  CHECK(error_of("{\"name\": ").find("JSON syntax error at byte") == 0);
  CHECK(error_of(R"({"name": "x"})") == "protocol: missing");

  auto with = [](const std::string& from, const std::string& to) {
    std::string t = kSmall;
    const auto at = t.find(from);
    REQUIRE(at != std::string::npos);
    return t.replace(at, from.size(), to);
  };
  CHECK(error_of(with("\"hash_bits\"", "\"hash_bitz\"")) == "hash_bitz: unknown field");
  CHECK(error_of(with("\"k\": 5", "\"k\": -5")) == "params.k: expected a non-negative integer");
  CHECK(error_of(with("\"k\": 5", "\"kk\": 5")).find("params.kk") == 0);
  CHECK(error_of(with("LOCK_LIAR", "NOPE")) == "adversary.strategy: unknown strategy 'NOPE'");
  CHECK(error_of(with("\"uniform\"", "\"custom\"")).find("schedule.delay.kind") == 0);
  CHECK(error_of(with("\"alpha1\": 3", "\"alpha1\": 2")).find("scenario 'small'") == 0);
  CHECK(error_of(with("\"small\"", "\"../x\"")).find("name:") == 0);
}

TEST_CASE("overrides use dotted keys") {
  const Scenario s = parse_scenario(kSmall, {"params.k=6", "params.alpha1=4", "horizon=50", "adversary.strategy=SILENT"});
  CHECK(s.config.params.k == 6);
  CHECK(s.config.horizon == 50);
  CHECK(s.config.strategy == Strategy::Silent);
  CHECK(error_of(kSmall, {"params.k"}).find("expected key=value") != std::string::npos);
  CHECK(error_of(kSmall, {"params..k=3"}).find("empty key segment") != std::string::npos);
  CHECK(error_of(kSmall, {"params.q=3"}) == "params.q: unknown field");
}

TEST_CASE("config files") {
  TempDir dir("cfg");
  fs::create_directories(dir.path);
  const fs::path good = dir.path / "good.cfg";
  std::ofstream(good) << "# comment\n\n params.k = 4   # trailing\nhorizon=12\n";
  CHECK(load_config_file(good) == std::vector<std::string>{"params.k=4", "horizon=12"});

  const fs::path bad = dir.path / "bad.cfg";
  std::ofstream(bad) << "horizon=12\nnonsense\n";
  try {
    load_config_file(bad);
    FAIL("expected an error");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()) == bad.string() + ":2: expected key=value");
  }
  CHECK_THROWS_AS(load_config_file(dir.path / "missing.cfg"), ConfigError);
}

TEST_CASE("trace files round trip and replay") {
  const Scenario s = parse_scenario(kSmall);
  const Trace t = run(s.config, 1, {true});
  const std::string text = trace_to_string(t, "small");

  std::istringstream in(text);
  std::string name;
  const Trace back = read_trace(in, &name);
  CHECK(name == "small");
  CHECK(back.complete);
  CHECK(back.events.size() == t.events.size());
  CHECK(trace_digest(back) == trace_digest(t));
  CHECK(trace_to_string(back, "small") == text);

  const ReplayResult r = replay_check(back);
  CHECK(r.ok);
  CHECK(r.mismatch.empty());
  CHECK(r.ticks > 0);
  CHECK(r.sends > 0);

  SUBCASE("truncated file") {
    // Drop the end line.
    const std::string cut = text.substr(0, text.rfind('\n', text.size() - 2) + 1);
    REQUIRE(text.substr(cut.size()).find("\"end\"") != std::string::npos);
    std::istringstream part(cut);
    const Trace tr = read_trace(part);
    CHECK(!tr.complete);
    CHECK(observe(tr).consistency.verdict == Verdict::Unknown);
  }
  SUBCASE("malformed line") {
    std::istringstream garbage(text.substr(0, text.find('\n') + 1) + "not json\n");
    try {
      read_trace(garbage);
      FAIL("expected an error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
  }
  SUBCASE("tampered payload is caught by replay") {
    Trace bad = back;
    for (auto& env : bad.envelopes) {
      if (!bad.setup.byzantine[env.from] && std::holds_alternative<Request>(*env.msg)) {
        env.msg = make_message(Request{std::get<Request>(*env.msg).round + 7, std::nullopt});
        break;
      }
    }
    const ReplayResult m = replay_check(bad);
    CHECK(!m.ok);
    CHECK(!m.mismatch.empty());
  }
  SUBCASE("tampered state is caught by replay") {
    Trace bad = back;
    for (auto& e : bad.events) {
      if (e.kind == EventKind::State && !bad.setup.byzantine[e.process]) {
        e.digest ^= 1;
        break;
      }
    }
    CHECK(!replay_check(bad).ok);
  }
}

TEST_CASE("harness writes summaries and traces") {
  TempDir dir("run");
  Scenario s = parse_scenario(kSmall);
  HarnessOptions opts;
  opts.out_dir = dir.path;
  opts.traces = TracePolicy::All;
  opts.workers = 2;
  const ScenarioReport rep = run_scenario(s, opts);
  REQUIRE(rep.runs.size() == 3);
  for (const auto& r : rep.runs) {
    REQUIRE(r.trace_file);
    CHECK(fs::exists(*r.trace_file));
    std::ifstream in(*r.trace_file);
    CHECK(trace_digest(read_trace(in)) == r.digest);
  }
  const auto sums = collect_summaries(dir.path);
  REQUIRE(sums.size() == 1);
  CHECK(sums[0]["scenario"] == "small");
  CHECK(sums[0]["runs"] == 3);
  CHECK(sums[0]["config"] == scenario_to_json(s));
  CHECK(collect_summaries(dir.path / "small").size() == 1);

  // Worker count does not change any result.
  HarnessOptions serial;
  serial.workers = 1;
  const ScenarioReport one = run_scenario(s, serial);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(one.runs[i].digest == rep.runs[i].digest);
    CHECK(one.runs[i].ok == rep.runs[i].ok);
    CHECK(!one.runs[i].trace_file);
  }
}

TEST_CASE("trace policy names") {
  CHECK(parse_trace_policy("all") == TracePolicy::All);
  CHECK(parse_trace_policy("failed") == TracePolicy::Failed);
  CHECK(parse_trace_policy("none") == TracePolicy::None);
  CHECK(!parse_trace_policy("some"));
  CHECK(worker_count(3) == 3);
}
