#include <cstdio>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "snowsim/binom.hpp"
#include "snowsim/harness.hpp"

using namespace snowsim;
using nlohmann::json;

namespace {

constexpr int kConfigError = 2;

std::string fmt_opt(const json& v) {
  if (v.is_null()) return "-";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v.get<double>());
  return buf;
}

int cmd_run(const std::string& file, std::optional<std::uint64_t> seeds, const std::optional<std::string>& out,
            const std::optional<std::string>& config, const std::vector<std::string>& sets,
            const std::string& traces) {
  Scenario s;
  HarnessOptions opts;
  try {
    std::vector<std::string> overrides;
    if (config) overrides = load_config_file(*config);
    overrides.insert(overrides.end(), sets.begin(), sets.end());
    s = load_scenario(file, overrides);
    if (seeds) {
      if (*seeds == 0) throw ConfigError("--seeds must be positive");
      s.seeds.clear();
      for (std::uint64_t i = 0; i < *seeds; ++i) s.seeds.push_back(i);
    }
    const auto policy = parse_trace_policy(traces);
    if (!policy) throw ConfigError("--traces: expected all, failed or none");
    opts.traces = *policy;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  }
  if (out) opts.out_dir = *out;
  const ScenarioReport rep = run_scenario(s, opts);
  const json sum = rep.summary();
  std::cout << s.name << ": " << rep.passed() << "/" << rep.runs.size() << " runs passed";
  std::cout << "  median output round " << fmt_opt(sum["median_output_round"]);
  std::cout << "  median final delay " << fmt_opt(sum["median_final_delay"]) << '\n';
  for (const auto& r : rep.runs) {
    if (r.ok) continue;
    std::cout << "  seed " << r.seed << " FAILED";
    if (r.trace_file) std::cout << "  trace " << r.trace_file->generic_string();
    std::cout << '\n';
  }
  return rep.ok() ? 0 : 1;
}

int cmd_verify_bounds(bool as_json, bool inject) {
  const BoundReport rep = verify_paper_bounds({inject});
  if (as_json) {
    std::cout << rep.to_json().dump(2) << '\n';
  } else {
    std::cout << rep.table();
  }
  return rep.all_pass() ? 0 : 1;
}

int cmd_replay(const std::string& file, bool check) {
  std::ifstream in(file, std::ios::binary);
  if (!in) {
    std::cerr << file << ": cannot open\n";
    return kConfigError;
  }
  Trace t;
  std::string name;
  try {
    t = read_trace(in, &name);
  } catch (const std::exception& e) {
    std::cerr << file << ": " << e.what() << '\n';
    return kConfigError;
  }
  std::cout << "scenario " << name << " seed " << t.seed << ": " << t.events.size() << " events"
            << (t.complete ? "" : " (truncated)") << '\n';
  const ObserverReport rep = observe(t);
  const json j = rep.to_json();
  for (const char* c : {"consistency", "clause_i", "dagger1", "dagger2", "delivery", "invariants"}) {
    std::cout << "  " << c << ": " << j[c]["verdict"].get<std::string>();
    if (j[c].contains("counterexample")) {
      const auto& ce = j[c]["counterexample"];
      std::cout << "  (seq " << ce["seq"] << ", slot " << ce["slot"] << ", process " << ce["process"] << ": "
                << ce["detail"].get<std::string>() << ")";
    }
    std::cout << '\n';
  }
  std::cout << "  trace digest " << trace_digest(t) << '\n';
  if (!check) return 0;
  const ReplayResult r = replay_check(t);
  if (!r.ok) {
    std::cout << "replay MISMATCH: " << r.mismatch << '\n';
    return 1;
  }
  std::cout << "replay OK: " << r.ticks << " ticks, " << r.sends << " sends, all state digests match\n";
  return 0;
}

int cmd_report(const std::string& dir, bool as_json) {
  std::vector<json> sums;
  try {
    sums = collect_summaries(dir);
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return kConfigError;
  }
  if (sums.empty()) {
    std::cerr << dir << ": no summaries found\n";
    return kConfigError;
  }
  bool ok = true;
  if (as_json) {
    json all = json::array();
    for (auto& s : sums) {
      s.erase("results");
      all.push_back(s);
    }
    std::cout << all.dump(2) << '\n';
  }
  for (const auto& s : sums) ok = ok && s["ok"].get<bool>();
  if (!as_json) {
    std::printf("%-28s %6s %6s %6s %8s %8s %8s\n", "scenario", "runs", "pass", "fail", "out_rd", "lock_d", "final_d");
    for (const auto& s : sums) {
      std::printf("%-28s %6zu %6zu %6zu %8s %8s %8s\n", s["scenario"].get<std::string>().c_str(),
                  s["runs"].get<std::size_t>(), s["passed"].get<std::size_t>(), s["failed"].get<std::size_t>(),
                  fmt_opt(s["median_output_round"]).c_str(), fmt_opt(s["median_lock_delay"]).c_str(),
                  fmt_opt(s["median_final_delay"]).c_str());
    }
  }
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial partial-synchrony simulator for Snowflake-family consensus"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "Run every seed of a scenario and check each trace");
  std::string scenario_file;
  std::optional<std::uint64_t> seeds;
  std::optional<std::string> out_dir, config_file;
  std::vector<std::string> sets;
  std::string traces = "failed";
  run->add_option("scenario", scenario_file, "Scenario JSON file")->required();
  run->add_option("--seeds", seeds, "Use seeds 0..N-1");
  run->add_option("--out", out_dir, "Output directory for traces and summary");
  run->add_option("--config", config_file, "key=value overrides file");
  run->add_option("--set", sets, "Override one field, e.g. params.k=20");
  run->add_option("--traces", traces, "Which traces to keep: all, failed or none");

  auto* vb = app.add_subcommand("verify-bounds", "Check the probability bounds in exact arithmetic");
  bool vb_json = false, inject = false;
  vb->add_flag("--json", vb_json, "Machine-readable output");
  vb->add_flag("--inject-wrong-bound", inject, "Negative control: corrupt one bound");

  auto* rp = app.add_subcommand("replay", "Re-run the correct processes of a trace against their inboxes");
  std::string trace_file;
  bool check = false;
  rp->add_option("trace", trace_file, "trace.ndjson file")->required();
  rp->add_flag("--check", check, "Verify sends and state digests");

  auto* rep = app.add_subcommand("report", "Summarise the scenario summaries below a directory");
  std::string report_dir;
  bool rep_json = false;
  rep->add_option("dir", report_dir, "Output directory")->required();
  rep->add_flag("--json", rep_json, "Machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }
  try {
    if (*run) return cmd_run(scenario_file, seeds, out_dir, config_file, sets, traces);
    if (*vb) return cmd_verify_bounds(vb_json, inject);
    if (*rp) return cmd_replay(trace_file, check);
    if (*rep) return cmd_report(report_dir, rep_json);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
