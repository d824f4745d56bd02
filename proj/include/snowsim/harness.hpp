#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "snowsim/observer.hpp"
#include "snowsim/simnet.hpp"

namespace snowsim {

// Raised for malformed scenario files, config files and overrides. The
// message names the offending location.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Scenario {
  std::string name;
  RunConfig config;
  std::vector<std::uint64_t> seeds;
};

Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);
// Parses text; errors carry the line/column or the field path.
Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides = {});
Scenario load_scenario(const std::filesystem::path& file, const std::vector<std::string>& overrides = {});

// key=value lines; '#' starts a comment. Returns "key=value" overrides in
// file order. Keys use dots for nesting, e.g. params.k=20.
std::vector<std::string> load_config_file(const std::filesystem::path& file);
void apply_override(nlohmann::json& scenario, const std::string& assignment);

// Trace files: one JSON object per line. Writing needs a trace recorded with
// payloads. `name` is stored with the scenario in the header line.
void write_trace(const Trace& trace, std::ostream& out, const std::string& name = "run");
std::string trace_to_string(const Trace& trace, const std::string& name = "run");
// Throws std::runtime_error naming the line on malformed input. A file
// without its end line comes back with complete == false.
Trace read_trace(std::istream& in, std::string* name = nullptr);
// SHA-256 over the schedule, events and states. Payload bytes are not
// included, so the value is the same with or without retained payloads.
std::string trace_digest(const Trace& trace);

struct ReplayResult {
  bool ok = true;
  std::uint64_t ticks = 0;
  std::uint64_t sends = 0;
  std::string mismatch;
};

// Re-executes every correct process against its recorded inbox and compares
// outgoing messages and state digests with the trace.
ReplayResult replay_check(const Trace& trace);

enum class TracePolicy { All, Failed, None };
std::optional<TracePolicy> parse_trace_policy(std::string_view s);

struct RunResult {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string digest;
  ObserverReport report;
  std::optional<std::filesystem::path> trace_file;
};

struct ScenarioReport {
  std::string name;
  std::vector<RunResult> runs;
  std::size_t passed() const;
  std::size_t failed() const;
  bool ok() const { return failed() == 0; }
  nlohmann::json summary() const;
};

struct HarnessOptions {
  std::optional<std::filesystem::path> out_dir;
  TracePolicy traces = TracePolicy::Failed;
  unsigned workers = 0;  // 0: from SNOWSIM_WORKERS, else hardware concurrency
};

unsigned worker_count(unsigned requested);

RunResult run_one(const Scenario& s, std::uint64_t seed, const HarnessOptions& opts);
ScenarioReport run_scenario(const Scenario& s, const HarnessOptions& opts);

// Reads every <out>/<scenario>/summary.json below dir.
std::vector<nlohmann::json> collect_summaries(const std::filesystem::path& dir);

}  // namespace snowsim
