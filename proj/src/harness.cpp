#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include "snowsim/harness.hpp"

namespace snowsim {

namespace fs = std::filesystem;
using nlohmann::json;

std::optional<TracePolicy> parse_trace_policy(std::string_view s) {
  if (s == "all") return TracePolicy::All;
  if (s == "failed") return TracePolicy::Failed;
  if (s == "none") return TracePolicy::None;
  return std::nullopt;
}

std::size_t ScenarioReport::passed() const {
  return static_cast<std::size_t>(std::count_if(runs.begin(), runs.end(), [](const RunResult& r) { return r.ok; }));
}

std::size_t ScenarioReport::failed() const { return runs.size() - passed(); }

namespace {

const char* const kChecks[] = {"consistency", "clause_i", "dagger1", "dagger2", "delivery", "invariants"};

std::optional<double> median(std::vector<double> xs) {
  if (xs.empty()) return std::nullopt;
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : (xs[m - 1] + xs[m]) / 2;
}

json opt(std::optional<double> v) { return v ? json(*v) : json(nullptr); }

}  // namespace

json ScenarioReport::summary() const {
  json runs_json = json::array();
  std::map<std::string, std::map<std::string, std::size_t>> verdicts;
  std::vector<double> output_rounds, final_delays, temp_delays, lock_delays;
  for (const auto& r : runs) {
    const json rep = r.report.to_json();
    json j{{"seed", r.seed}, {"ok", r.ok}, {"digest", r.digest}};
    json checks;
    for (const char* c : kChecks) {
      const std::string v = rep[c]["verdict"].get<std::string>();
      checks[c] = v;
      ++verdicts[c][v];
    }
    j["checks"] = checks;
    j["lock_intervals"] = r.report.lock_intervals;
    j["schedule_violations"] = r.report.schedule_violations;
    if (!r.ok) j["report"] = rep;
    if (r.trace_file) j["trace"] = r.trace_file->generic_string();
    runs_json.push_back(std::move(j));

    for (const auto& o : r.report.latency.output_round) {
      if (o) output_rounds.push_back(static_cast<double>(*o));
    }
    for (const auto& b : rep["latency"]["blocks"]) {
      if (!b["median_final_delay"].is_null()) final_delays.push_back(b["median_final_delay"].get<double>());
      if (!b["median_temp_final_delay"].is_null()) temp_delays.push_back(b["median_temp_final_delay"].get<double>());
      if (!b["median_lock_delay"].is_null()) lock_delays.push_back(b["median_lock_delay"].get<double>());
    }
  }
  return {{"scenario", name},
          {"ok", ok()},
          {"runs", runs.size()},
          {"passed", passed()},
          {"failed", failed()},
          {"verdicts", verdicts},
          {"median_output_round", opt(median(output_rounds))},
          {"median_lock_delay", opt(median(lock_delays))},
          {"median_temp_final_delay", opt(median(temp_delays))},
          {"median_final_delay", opt(median(final_delays))},
          {"results", runs_json}};
}

unsigned worker_count(unsigned requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("SNOWSIM_WORKERS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

RunResult run_one(const Scenario& s, std::uint64_t seed, const HarnessOptions& opts) {
  const bool want_all = opts.out_dir && opts.traces == TracePolicy::All;
  Trace trace = run(s.config, seed, {want_all});
  RunResult r;
  r.seed = seed;
  r.report = observe(trace);
  r.ok = trace.complete && r.report.ok();
  r.digest = trace_digest(trace);
  const bool keep = opts.out_dir && (want_all || (opts.traces == TracePolicy::Failed && !r.ok));
  if (keep) {
    // Runs are pure functions of (config, seed), so a rerun with payloads
    // yields the same trace.
    if (!trace.payloads) trace = run(s.config, seed, {true});
    const fs::path dir = *opts.out_dir / s.name / std::to_string(seed);
    fs::create_directories(dir);
    const fs::path file = dir / "trace.ndjson";
    std::ofstream out(file, std::ios::binary);
    write_trace(trace, out, s.name);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    r.trace_file = file;
  }
  return r;
}

ScenarioReport run_scenario(const Scenario& s, const HarnessOptions& opts) {
  ScenarioReport rep;
  rep.name = s.name;
  rep.runs.resize(s.seeds.size());
  const unsigned workers = std::min<unsigned>(worker_count(opts.workers), static_cast<unsigned>(s.seeds.size()));
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < s.seeds.size();) {
      try {
        rep.runs[i] = run_one(s, s.seeds[i], opts);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  if (opts.out_dir) {
    const fs::path dir = *opts.out_dir / s.name;
    fs::create_directories(dir);
    json summary = rep.summary();
    summary["config"] = scenario_to_json(s);
    std::ofstream out(dir / "summary.json", std::ios::binary);
    out << summary.dump(2) << '\n';
    if (!out) throw std::runtime_error("cannot write " + (dir / "summary.json").string());
  }
  return rep;
}

std::vector<json> collect_summaries(const fs::path& dir) {
  std::vector<fs::path> files;
  if (fs::is_regular_file(dir / "summary.json")) files.push_back(dir / "summary.json");
  if (fs::is_directory(dir)) {
    for (const auto& entry : fs::directory_iterator(dir)) {
      if (entry.is_directory() && fs::is_regular_file(entry.path() / "summary.json")) {
        files.push_back(entry.path() / "summary.json");
      }
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<json> out;
  for (const auto& f : files) {
    std::ifstream in(f);
    json j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw std::runtime_error(f.string() + ": not valid JSON");
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace snowsim
