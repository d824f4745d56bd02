#include <openssl/evp.h>

#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <sstream>

#include "snowsim/harness.hpp"

namespace snowsim {

namespace {

using nlohmann::json;

constexpr const char* kFormat = "snowsim-trace/1";

const char* kind_name(EventKind k) {
  switch (k) {
    case EventKind::Send: return "send";
    case EventKind::Deliver: return "deliver";
    case EventKind::Block: return "block";
    case EventKind::State: return "state";
    case EventKind::Violation: return "violation";
    case EventKind::ScheduleViolation: return "schedule_violation";
  }
  return "?";
}

std::optional<EventKind> parse_kind(const std::string& s) {
  for (auto k : {EventKind::Send, EventKind::Deliver, EventKind::Block, EventKind::State, EventKind::Violation,
                 EventKind::ScheduleViolation}) {
    if (s == kind_name(k)) return k;
  }
  return std::nullopt;
}

std::string hex64(std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
  return to_hex(b);
}

std::uint64_t parse_hex64(const std::string& s) {
  const auto bytes = from_hex(s);
  if (bytes.size() != 8) throw std::invalid_argument("digest must be 16 hex digits");
  std::uint64_t v = 0;
  for (auto b : bytes) v = v << 8 | b;
  return v;
}

std::string bits_text(const BitString& s) { return std::to_string(s.size()) + ":" + s.to_hex(); }

BitString parse_bits(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw std::invalid_argument("bit string must be len:hex");
  const auto len = std::stoull(text.substr(0, colon));
  const auto bytes = from_hex(std::string_view(text).substr(colon + 1));
  if (bytes.size() != (len + 7) / 8) throw std::invalid_argument("bit string length does not match its hex");
  BitString s = BitString::from_bytes(bytes, len);
  if (s.to_hex() != text.substr(colon + 1)) throw std::invalid_argument("bit string has stray trailing bits");
  return s;
}

json state_json(const NodeSnapshot& s) {
  json locks = json::array();
  for (const auto& l : s.locks) locks.push_back({bits_text(l.top), l.from_len, l.since});
  json tf = json::array();
  for (const auto& t : s.temp_final) tf.push_back({bits_text(t.sigma), t.round});
  return {{"round", s.round},
          {"rounds_started", s.rounds_started},
          {"pref", bits_text(s.pref)},
          {"final", bits_text(s.final)},
          {"locks", locks},
          {"temp_final", tf},
          {"output", s.output ? json(*s.output) : json(nullptr)},
          {"terminated", s.terminated}};
}

NodeSnapshot parse_state(const json& j) {
  NodeSnapshot s;
  s.round = j.at("round").get<Round>();
  s.rounds_started = j.at("rounds_started").get<Round>();
  s.pref = parse_bits(j.at("pref").get<std::string>());
  s.final = parse_bits(j.at("final").get<std::string>());
  for (const auto& l : j.at("locks")) {
    s.locks.push_back({parse_bits(l.at(0).get<std::string>()), l.at(1).get<std::size_t>(), l.at(2).get<Slot>()});
  }
  for (const auto& t : j.at("temp_final")) {
    s.temp_final.push_back({parse_bits(t.at(0).get<std::string>()), t.at(1).get<Round>()});
  }
  if (!j.at("output").is_null()) s.output = j.at("output").get<std::uint8_t>();
  s.terminated = j.at("terminated").get<bool>();
  return s;
}

json setup_json(const RunSetup& s) {
  json byz = json::array();
  for (std::size_t i = 0; i < s.byzantine.size(); ++i) {
    if (s.byzantine[i]) byz.push_back(i);
  }
  json crash = json::array();
  for (const auto& c : s.crash_at) crash.push_back(c ? json(*c) : json(nullptr));
  json blocks = json::array();
  for (std::size_t b = 0; b < s.blocks.size(); ++b) {
    json jb{{"index", b}, {"block", to_hex(encode_block(*s.blocks[b]))}, {"emit", s.block_emit[b]}};
    if (b > 0) jb["arrival"] = s.arrival[b];
    blocks.push_back(std::move(jb));
  }
  return {{"inputs", s.inputs}, {"offsets", s.offsets}, {"byzantine", byz}, {"crash_at", crash}, {"blocks", blocks}};
}

class Sha256 {
 public:
  Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free) { EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr); }
  void add(const void* p, std::size_t n) { EVP_DigestUpdate(ctx_.get(), p, n); }
  void add_u64(std::uint64_t v) {
    std::uint8_t b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>(v >> (56 - 8 * i));
    add(b, 8);
  }
  void add_i64(std::int64_t v) { add_u64(static_cast<std::uint64_t>(v)); }
  void add_str(const std::string& s) {
    add_u64(s.size());
    add(s.data(), s.size());
  }
  std::string hex() {
    std::uint8_t md[EVP_MAX_MD_SIZE];
    unsigned len = 0;
    EVP_DigestFinal_ex(ctx_.get(), md, &len);
    return to_hex(std::span<const std::uint8_t>(md, len));
  }

 private:
  std::unique_ptr<EVP_MD_CTX, void (*)(EVP_MD_CTX*)> ctx_;
};

[[noreturn]] void malformed(std::size_t line, const std::string& what) {
  throw std::runtime_error("trace line " + std::to_string(line) + ": " + what);
}

}  // namespace

void write_trace(const Trace& trace, std::ostream& out, const std::string& name) {
  if (!trace.payloads) throw std::logic_error("write_trace needs a trace recorded with payloads");
  Scenario sc{name, trace.config, {trace.seed}};
  json header{{"kind", "header"},
              {"format", kFormat},
              {"scenario", scenario_to_json(sc)},
              {"seed", trace.seed},
              {"setup", setup_json(trace.setup)}};
  out << header.dump() << '\n';
  for (std::size_t seq = 0; seq < trace.events.size(); ++seq) {
    const auto& e = trace.events[seq];
    json j{{"seq", seq}, {"slot", e.slot}, {"kind", kind_name(e.kind)}};
    switch (e.kind) {
      case EventKind::Send: {
        const auto& env = trace.envelopes[e.ref];
        j["envelope"] = e.ref;
        j["sender"] = env.from;
        j["receiver"] = env.to;
        j["deliver"] = env.deliver;
        if (env.requested != env.deliver) j["requested"] = env.requested;
        j["payload"] = to_hex(encode(*env.msg));
        break;
      }
      case EventKind::Deliver: {
        const auto& env = trace.envelopes[e.ref];
        j["envelope"] = e.ref;
        j["sender"] = env.from;
        j["receiver"] = env.to;
        break;
      }
      case EventKind::Block:
        j["receiver"] = e.process;
        j["block"] = e.ref;
        break;
      case EventKind::State:
        j["process"] = e.process;
        j["digest"] = hex64(e.digest);
        j["state"] = state_json(trace.states[e.ref]);
        break;
      case EventKind::Violation:
        j["process"] = e.process;
        j["violation"] = trace.violations[e.ref].kind;
        j["detail"] = trace.violations[e.ref].detail;
        break;
      case EventKind::ScheduleViolation: {
        const auto& env = trace.envelopes[e.ref];
        j["envelope"] = e.ref;
        j["sender"] = env.from;
        j["requested"] = env.requested;
        j["deliver"] = env.deliver;
        break;
      }
    }
    out << j.dump() << '\n';
  }
  if (trace.complete) out << json{{"kind", "end"}, {"events", trace.events.size()}}.dump() << '\n';
}

std::string trace_to_string(const Trace& trace, const std::string& name) {
  std::ostringstream ss;
  write_trace(trace, ss, name);
  return ss.str();
}

Trace read_trace(std::istream& in, std::string* name) {
  Trace t;
  t.payloads = true;
  std::string line;
  std::size_t lineno = 0;
  bool ended = false;
  BitString genesis_id;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (ended) malformed(lineno, "content after the end line");
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) malformed(lineno, "not a JSON object");
    try {
      const auto kind = j.at("kind").get<std::string>();
      if (lineno == 1) {
        if (kind != "header") malformed(lineno, "expected the header line");
        if (j.at("format").get<std::string>() != kFormat) malformed(lineno, "unknown trace format");
        Scenario sc = scenario_from_json(j.at("scenario"));
        if (name) *name = sc.name;
        t.config = sc.config;
        t.seed = j.at("seed").get<std::uint64_t>();
        t.setup = derive_setup(t.config, t.seed);
        if (setup_json(t.setup) != j.at("setup")) malformed(lineno, "setup does not match the scenario and seed");
        genesis_id = t.setup.blocks[0]->id;
        continue;
      }
      if (kind == "end") {
        if (j.at("events").get<std::size_t>() != t.events.size()) malformed(lineno, "event count mismatch");
        ended = true;
        continue;
      }
      const auto k = parse_kind(kind);
      if (!k) malformed(lineno, "unknown event kind '" + kind + "'");
      if (j.at("seq").get<std::size_t>() != t.events.size()) malformed(lineno, "sequence number out of order");
      TraceEvent e;
      e.kind = *k;
      e.slot = j.at("slot").get<Slot>();
      if (!t.events.empty() && e.slot < t.events.back().slot) malformed(lineno, "slot goes backwards");
      switch (*k) {
        case EventKind::Send: {
          e.ref = j.at("envelope").get<std::uint64_t>();
          if (e.ref != t.envelopes.size()) malformed(lineno, "envelope index out of order");
          EnvelopeRec env;
          env.from = j.at("sender").get<ProcessId>();
          env.to = j.at("receiver").get<ProcessId>();
          env.send = e.slot;
          env.deliver = j.at("deliver").get<Slot>();
          env.requested = j.contains("requested") ? j.at("requested").get<Slot>() : env.deliver;
          const auto bytes = from_hex(j.at("payload").get<std::string>());
          env.msg = std::make_shared<const Message>(decode(bytes, genesis_id));
          if (env.from >= t.config.params.n || env.to >= t.config.params.n) malformed(lineno, "unknown process");
          e.process = env.from;
          t.envelopes.push_back(std::move(env));
          break;
        }
        case EventKind::Deliver: {
          e.ref = j.at("envelope").get<std::uint64_t>();
          if (e.ref >= t.envelopes.size()) malformed(lineno, "delivery of an unknown envelope");
          e.process = t.envelopes[e.ref].to;
          break;
        }
        case EventKind::Block:
          e.process = j.at("receiver").get<ProcessId>();
          e.ref = j.at("block").get<std::uint64_t>();
          if (e.ref == 0 || e.ref >= t.setup.blocks.size()) malformed(lineno, "unknown block");
          break;
        case EventKind::State: {
          e.process = j.at("process").get<ProcessId>();
          e.digest = parse_hex64(j.at("digest").get<std::string>());
          NodeSnapshot s = parse_state(j.at("state"));
          if (s.digest() != e.digest) malformed(lineno, "state digest does not match the state");
          e.ref = t.states.size();
          t.states.push_back(std::move(s));
          break;
        }
        case EventKind::Violation:
          e.process = j.at("process").get<ProcessId>();
          e.ref = t.violations.size();
          t.violations.push_back({j.at("violation").get<std::string>(), j.at("detail").get<std::string>()});
          break;
        case EventKind::ScheduleViolation:
          e.ref = j.at("envelope").get<std::uint64_t>();
          if (e.ref >= t.envelopes.size()) malformed(lineno, "unknown envelope");
          e.process = t.envelopes[e.ref].from;
          break;
      }
      if (e.process >= t.config.params.n) malformed(lineno, "unknown process");
      t.events.push_back(e);
    } catch (const json::exception& ex) {
      malformed(lineno, ex.what());
    } catch (const ConfigError& ex) {
      malformed(lineno, ex.what());
    } catch (const std::invalid_argument& ex) {
      malformed(lineno, ex.what());
    }
  }
  if (lineno == 0) throw std::runtime_error("empty trace file");
  t.complete = ended;
  return t;
}

std::string trace_digest(const Trace& trace) {
  Sha256 h;
  Scenario sc{"run", trace.config, {trace.seed}};
  h.add_str(scenario_to_json(sc).dump());
  h.add_u64(trace.seed);
  h.add_str(setup_json(trace.setup).dump());
  h.add_u64(trace.envelopes.size());
  for (const auto& env : trace.envelopes) {
    h.add_u64(env.from);
    h.add_u64(env.to);
    h.add_i64(env.send);
    h.add_i64(env.deliver);
    h.add_i64(env.requested);
  }
  h.add_u64(trace.events.size());
  for (const auto& e : trace.events) {
    h.add_u64(static_cast<std::uint64_t>(e.kind));
    h.add_i64(e.slot);
    h.add_u64(e.process);
    h.add_u64(e.ref);
    h.add_u64(e.digest);
  }
  for (const auto& v : trace.violations) {
    h.add_str(v.kind);
    h.add_str(v.detail);
  }
  h.add_u64(trace.complete);
  return h.hex();
}

ReplayResult replay_check(const Trace& trace) {
  ReplayResult r;
  auto fail = [&r](std::string why) {
    if (r.ok) {
      r.ok = false;
      r.mismatch = std::move(why);
    }
    return r;
  };
  if (!trace.payloads) return fail("trace has no payloads");
  const auto& cfg = trace.config;
  const auto& setup = trace.setup;
  const auto n = cfg.params.n;

  // Per-process view of the recorded events, in trace order.
  struct Item {
    Slot slot;
    EventKind kind;
    std::uint64_t ref;
    std::uint64_t digest;
  };
  std::vector<std::vector<Item>> per(n);
  for (const auto& e : trace.events) {
    if (setup.byzantine[e.process] && e.kind != EventKind::Deliver) continue;
    if (e.kind == EventKind::ScheduleViolation) continue;
    per[e.process].push_back({e.slot, e.kind, e.ref, e.digest});
  }

  const auto tag = [](ProcessId p, Slot g) {
    return "process " + std::to_string(p) + " slot " + std::to_string(g) + ": ";
  };
  std::vector<Inbound> inbox;
  std::vector<Outbound> out;
  for (ProcessId p = 0; p < n; ++p) {
    if (setup.byzantine[p]) continue;
    auto node = make_node(cfg, setup, p, trace.seed);
    const auto& items = per[p];
    std::size_t i = 0;
    std::optional<std::uint64_t> last;
    for (Slot g = 0; g < cfg.horizon; ++g) {
      inbox.clear();
      std::vector<std::size_t> blocks;
      while (i < items.size() && items[i].slot == g &&
             (items[i].kind == EventKind::Deliver || items[i].kind == EventKind::Block)) {
        if (items[i].kind == EventKind::Deliver) {
          const auto& env = trace.envelopes[items[i].ref];
          inbox.push_back({env.from, env.msg});
        } else {
          blocks.push_back(items[i].ref);
        }
        ++i;
      }
      const bool crashed = setup.crash_at[p] && *setup.crash_at[p] <= g;
      if (crashed) {
        if (i < items.size() && items[i].slot == g) return fail(tag(p, g) + "activity after crash");
        continue;
      }
      for (auto b : blocks) node->receive_block(setup.blocks[b]);
      out.clear();
      node->tick(g + setup.offsets[p], inbox, out);
      ++r.ticks;
      for (const auto& o : out) {
        if (i >= items.size() || items[i].slot != g || items[i].kind != EventKind::Send) {
          return fail(tag(p, g) + "replay sends a message the trace does not have");
        }
        const auto& env = trace.envelopes[items[i].ref];
        if (env.to != o.to || encode(*env.msg) != encode(*o.msg)) {
          return fail(tag(p, g) + "outgoing message differs from envelope " + std::to_string(items[i].ref));
        }
        ++r.sends;
        ++i;
      }
      if (i < items.size() && items[i].slot == g && items[i].kind == EventKind::Send) {
        return fail(tag(p, g) + "trace has a send the replay does not produce");
      }
      const auto violations = node->take_violations();
      for (const auto& v : violations) {
        if (i >= items.size() || items[i].slot != g || items[i].kind != EventKind::Violation ||
            trace.violations[items[i].ref].kind != v.kind) {
          return fail(tag(p, g) + "invariant report '" + v.kind + "' differs");
        }
        ++i;
      }
      const std::uint64_t d = node->snapshot().digest();
      if (i < items.size() && items[i].slot == g && items[i].kind == EventKind::State) {
        if (items[i].digest != d) return fail(tag(p, g) + "state digest differs");
        ++i;
      } else if (!last || *last != d) {
        return fail(tag(p, g) + "state changed without a state record");
      }
      last = d;
      if (i < items.size() && items[i].slot == g) return fail(tag(p, g) + "unexpected extra record");
    }
    if (i != items.size()) return fail("process " + std::to_string(p) + ": records past the horizon");
  }
  return r;
}

}  // namespace snowsim
