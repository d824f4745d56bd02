#include <fstream>
#include <set>
#include <sstream>

#include "snowsim/harness.hpp"

namespace snowsim {

namespace {

using nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  throw ConfigError(path + ": " + what);
}

void only_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) bad(path, "expected an object");
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (const char* a : allowed) known = known || key == a;
    if (!known) bad(path.empty() ? key : path + "." + key, "unknown field");
  }
}

std::string join(const std::string& path, const char* key) { return path.empty() ? key : path + "." + key; }

std::uint64_t get_uint(const json& j, const std::string& path) {
  if (!j.is_number_unsigned()) bad(path, "expected a non-negative integer");
  return j.get<std::uint64_t>();
}

std::int64_t get_int(const json& j, const std::string& path) {
  if (!j.is_number_integer()) bad(path, "expected an integer");
  if (j.is_number_unsigned() && j.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) bad(path, "out of range");
  return j.get<std::int64_t>();
}

std::uint32_t get_u32(const json& j, const std::string& path) {
  const auto v = get_uint(j, path);
  if (v > UINT32_MAX) bad(path, "out of range");
  return static_cast<std::uint32_t>(v);
}

std::string get_string(const json& j, const std::string& path) {
  if (!j.is_string()) bad(path, "expected a string");
  return j.get<std::string>();
}

template <typename T>
T get_opt(const json& obj, const char* key, const std::string& path, T fallback,
          T (*reader)(const json&, const std::string&)) {
  auto it = obj.find(key);
  if (it == obj.end()) return fallback;
  return reader(*it, join(path, key));
}

std::uint32_t read_u32(const json& j, const std::string& p) { return get_u32(j, p); }
std::int64_t read_int(const json& j, const std::string& p) { return get_int(j, p); }

const json& required(const json& obj, const char* key, const std::string& path) {
  auto it = obj.find(key);
  if (it == obj.end()) bad(join(path, key), "missing");
  return *it;
}

ProtocolParams read_params(const json& j, const std::string& path) {
  only_keys(j, path, {"n", "f", "k", "alpha1", "alpha2", "beta", "delta", "delta_star"});
  ProtocolParams p;
  p.n = get_u32(required(j, "n", path), join(path, "n"));
  p.f = get_opt<std::uint32_t>(j, "f", path, 0, read_u32);
  p.k = get_u32(required(j, "k", path), join(path, "k"));
  p.alpha1 = get_u32(required(j, "alpha1", path), join(path, "alpha1"));
  p.alpha2 = get_u32(required(j, "alpha2", path), join(path, "alpha2"));
  p.beta = get_u32(required(j, "beta", path), join(path, "beta"));
  p.delta = get_opt<std::int64_t>(j, "delta", path, 1, read_int);
  auto ds = j.find("delta_star");
  if (ds != j.end() && !ds->is_null()) p.delta_star = get_int(*ds, join(path, "delta_star"));
  return p;
}

DelaySpec read_delay(const json& j, const std::string& path) {
  only_keys(j, path, {"kind", "value", "lo", "hi"});
  DelaySpec d;
  const auto kind = get_string(required(j, "kind", path), join(path, "kind"));
  const auto k = parse_delay(kind);
  if (!k || *k == DelayKind::Custom) bad(join(path, "kind"), "unknown delay policy '" + kind + "'");
  d.kind = *k;
  d.value = get_opt<std::int64_t>(j, "value", path, 1, read_int);
  d.lo = get_opt<std::int64_t>(j, "lo", path, 1, read_int);
  d.hi = get_opt<std::int64_t>(j, "hi", path, d.lo, read_int);
  return d;
}

json delay_json(const DelaySpec& d) {
  json j{{"kind", delay_name(d.kind)}};
  if (d.kind == DelayKind::Constant) j["value"] = d.value;
  if (d.kind == DelayKind::Uniform) {
    j["lo"] = d.lo;
    j["hi"] = d.hi;
  }
  return j;
}

}  // namespace

Scenario scenario_from_json(const json& j) {
  only_keys(j, "", {"name", "protocol", "variant", "params", "horizon", "seeds", "inputs", "adversary", "schedule",
                    "blocks", "hash_bits"});
  Scenario s;
  RunConfig& c = s.config;
  s.name = get_string(required(j, "name", ""), "name");
  if (s.name.empty() || s.name.find_first_of("/\\") != std::string::npos || s.name == "." || s.name == "..") {
    bad("name", "must be a plain, non-empty file name");
  }
  const auto proto = get_string(required(j, "protocol", ""), "protocol");
  const auto p = parse_protocol(proto);
  if (!p) bad("protocol", "unknown protocol '" + proto + "'");
  c.protocol = *p;
  if (auto it = j.find("variant"); it != j.end()) {
    const auto v = get_string(*it, "variant");
    const auto pv = parse_variant(v);
    if (!pv) bad("variant", "unknown variant '" + v + "'");
    c.variant = *pv;
  }
  c.params = read_params(required(j, "params", ""), "params");
  c.horizon = get_int(required(j, "horizon", ""), "horizon");

  const json& seeds = required(j, "seeds", "");
  if (seeds.is_array()) {
    for (std::size_t i = 0; i < seeds.size(); ++i) s.seeds.push_back(get_uint(seeds[i], "seeds[" + std::to_string(i) + "]"));
  } else {
    const auto count = get_uint(seeds, "seeds");
    for (std::uint64_t i = 0; i < count; ++i) s.seeds.push_back(i);
  }
  if (s.seeds.empty()) bad("seeds", "at least one seed is required");

  if (auto it = j.find("inputs"); it != j.end()) {
    if (it->is_array()) {
      c.inputs = InputMode::Explicit;
      for (std::size_t i = 0; i < it->size(); ++i) {
        const auto b = get_uint((*it)[i], "inputs[" + std::to_string(i) + "]");
        if (b > 1) bad("inputs[" + std::to_string(i) + "]", "expected 0 or 1");
        c.explicit_inputs.push_back(static_cast<std::uint8_t>(b));
      }
    } else {
      const auto m = get_string(*it, "inputs");
      const auto mode = parse_input_mode(m);
      if (!mode || *mode == InputMode::Explicit) bad("inputs", "unknown input mode '" + m + "'");
      c.inputs = *mode;
    }
  }

  if (auto it = j.find("adversary"); it != j.end()) {
    only_keys(*it, "adversary", {"strategy", "count", "ids", "budget"});
    if (auto st = it->find("strategy"); st != it->end()) {
      const auto name = get_string(*st, "adversary.strategy");
      const auto parsed = parse_strategy(name);
      if (!parsed) bad("adversary.strategy", "unknown strategy '" + name + "'");
      c.strategy = *parsed;
    }
    c.byzantine = get_opt<std::uint32_t>(*it, "count", "adversary", 0, read_u32);
    if (auto ids = it->find("ids"); ids != it->end()) {
      if (!ids->is_array()) bad("adversary.ids", "expected an array");
      for (std::size_t i = 0; i < ids->size(); ++i) {
        c.byzantine_ids.push_back(get_u32((*ids)[i], "adversary.ids[" + std::to_string(i) + "]"));
      }
    }
    c.byzantine_budget = get_opt<std::uint32_t>(*it, "budget", "adversary", c.byzantine_budget, read_u32);
  }

  if (auto it = j.find("schedule"); it != j.end()) {
    only_keys(*it, "schedule", {"gst", "delay", "max_clock_offset", "crashes"});
    c.gst = get_opt<std::int64_t>(*it, "gst", "schedule", 0, read_int);
    if (auto d = it->find("delay"); d != it->end()) c.delay = read_delay(*d, "schedule.delay");
    c.max_clock_offset = get_opt<std::int64_t>(*it, "max_clock_offset", "schedule", 0, read_int);
    if (auto cr = it->find("crashes"); cr != it->end()) {
      if (!cr->is_array()) bad("schedule.crashes", "expected an array");
      for (std::size_t i = 0; i < cr->size(); ++i) {
        const std::string path = "schedule.crashes[" + std::to_string(i) + "]";
        only_keys((*cr)[i], path, {"id", "at"});
        c.crashes.push_back({get_u32(required((*cr)[i], "id", path), path + ".id"),
                             get_int(required((*cr)[i], "at", path), path + ".at")});
      }
    }
  }

  if (auto it = j.find("blocks"); it != j.end()) {
    only_keys(*it, "blocks", {"plan", "chain", "spread"});
    c.block_spread = get_opt<std::int64_t>(*it, "spread", "blocks", 1, read_int);
    if (auto plan = it->find("plan"); plan != it->end()) {
      if (!plan->is_array()) bad("blocks.plan", "expected an array");
      for (std::size_t i = 0; i < plan->size(); ++i) {
        const std::string path = "blocks.plan[" + std::to_string(i) + "]";
        only_keys((*plan)[i], path, {"parent", "at"});
        c.blocks.push_back({get_opt<std::int64_t>((*plan)[i], "parent", path, static_cast<std::int64_t>(i) - 1, read_int),
                            get_int(required((*plan)[i], "at", path), path + ".at")});
      }
    }
    if (auto chain = it->find("chain"); chain != it->end()) {
      if (it->contains("plan")) bad("blocks", "give either plan or chain, not both");
      only_keys(*chain, "blocks.chain", {"count", "start", "interval"});
      const auto count = get_u32(required(*chain, "count", "blocks.chain"), "blocks.chain.count");
      const auto start = get_opt<std::int64_t>(*chain, "start", "blocks.chain", 0, read_int);
      const auto interval = get_opt<std::int64_t>(*chain, "interval", "blocks.chain", 1, read_int);
      for (std::uint32_t i = 0; i < count; ++i) {
        c.blocks.push_back({static_cast<std::int64_t>(i) - 1, start + interval * static_cast<std::int64_t>(i)});
      }
    }
  }
  if (auto it = j.find("hash_bits"); it != j.end()) c.hash_bits = get_uint(*it, "hash_bits");

  const auto errs = check_config(c);
  if (!errs.empty()) throw ConfigError("scenario '" + s.name + "': " + errs.front());
  return s;
}

json scenario_to_json(const Scenario& s) {
  const RunConfig& c = s.config;
  json j;
  j["name"] = s.name;
  j["protocol"] = protocol_name(c.protocol);
  j["variant"] = variant_name(c.variant);
  json p{{"n", c.params.n},         {"f", c.params.f},         {"k", c.params.k},
         {"alpha1", c.params.alpha1}, {"alpha2", c.params.alpha2}, {"beta", c.params.beta},
         {"delta", c.params.delta}};
  p["delta_star"] = c.params.delta_star ? json(*c.params.delta_star) : json(nullptr);
  j["params"] = p;
  j["horizon"] = c.horizon;
  bool counted = true;
  for (std::size_t i = 0; i < s.seeds.size(); ++i) counted = counted && s.seeds[i] == i;
  j["seeds"] = counted ? json(s.seeds.size()) : json(s.seeds);
  if (c.inputs == InputMode::Explicit) {
    j["inputs"] = c.explicit_inputs;
  } else {
    j["inputs"] = input_mode_name(c.inputs);
  }
  json adv{{"strategy", strategy_name(c.strategy)}, {"count", c.byzantine}, {"budget", c.byzantine_budget}};
  if (!c.byzantine_ids.empty()) adv["ids"] = c.byzantine_ids;
  j["adversary"] = adv;
  json crashes = json::array();
  for (const auto& cr : c.crashes) crashes.push_back({{"id", cr.id}, {"at", cr.at}});
  j["schedule"] = {{"gst", c.gst}, {"delay", delay_json(c.delay)}, {"max_clock_offset", c.max_clock_offset},
                   {"crashes", crashes}};
  json plan = json::array();
  for (const auto& b : c.blocks) plan.push_back({{"parent", b.parent}, {"at", b.at}});
  j["blocks"] = {{"plan", plan}, {"spread", c.block_spread}};
  j["hash_bits"] = c.hash_bits;
  return j;
}

void apply_override(json& scenario, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("override '" + assignment + "': expected key=value");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  json value = json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string pointer;
  std::stringstream ss(key);
  std::string part;
  while (std::getline(ss, part, '.')) {
    if (part.empty()) throw ConfigError("override '" + assignment + "': empty key segment");
    pointer += "/" + part;
  }
  try {
    scenario[json::json_pointer(pointer)] = value;
  } catch (const json::exception& e) {
    throw ConfigError("override '" + assignment + "': " + e.what());
  }
}

std::vector<std::string> load_config_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot open");
  std::vector<std::string> out;
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const auto eq = line.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto a = s.find_first_not_of(" \t");
      const auto b = s.find_last_not_of(" \t");
      return a == std::string::npos ? std::string{} : s.substr(a, b - a + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(file.string() + ":" + std::to_string(lineno) + ": empty key");
    out.push_back(key + "=" + trim(line.substr(eq + 1)));
  }
  return out;
}

Scenario parse_scenario(const std::string& text, const std::vector<std::string>& overrides) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("JSON syntax error at byte ") + std::to_string(e.byte) + ": " + e.what());
  }
  for (const auto& o : overrides) apply_override(j, o);
  return scenario_from_json(j);
}

Scenario load_scenario(const std::filesystem::path& file, const std::vector<std::string>& overrides) {
  std::ifstream in(file);
  if (!in) throw ConfigError(file.string() + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_scenario(ss.str(), overrides);
  } catch (const ConfigError& e) {
    throw ConfigError(file.string() + ": " + e.what());
  }
}

}  // namespace snowsim
