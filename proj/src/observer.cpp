#include "snowsim/observer.hpp"

#include <algorithm>
#include <deque>

namespace snowsim {

namespace {

using nlohmann::json;

struct Population {
  std::vector<ProcessId> correct;     // neither Byzantine nor crashed
  std::vector<ProcessId> non_byzantine;
  std::vector<bool> byzantine;
  BitString fallback;
};

Population population(const Trace& trace) {
  Population p;
  const auto& s = trace.setup;
  p.byzantine = s.byzantine;
  for (ProcessId i = 0; i < trace.config.params.n; ++i) {
    if (s.byzantine[i]) continue;
    p.non_byzantine.push_back(i);
    if (!s.crash_at[i]) p.correct.push_back(i);
  }
  if (trace.config.protocol == Protocol::Snowman) p.fallback = s.blocks[0]->id;
  return p;
}

// Deepest locked strings whose lock started at or before `latest` (global).
std::vector<BitString> locked_tops(const NodeSnapshot& snap, Slot offset, std::optional<Slot> latest) {
  std::vector<BitString> out;
  for (const auto& run : snap.locks) {
    if (latest && run.since - offset > *latest) continue;
    out.push_back(run.top);
  }
  // Keep maximal strings only.
  std::vector<BitString> maximal;
  for (std::size_t i = 0; i < out.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < out.size() && !dominated; ++j) {
      if (i == j) continue;
      if (out[i].is_prefix_of(out[j]) && (out[i] != out[j] || j < i)) dominated = true;
    }
    if (!dominated) maximal.push_back(out[i]);
  }
  return maximal;
}

bool has_lock_extending(const NodeSnapshot& snap, const BitString& sigma) {
  return std::any_of(snap.locks.begin(), snap.locks.end(),
                     [&](const LockRun& r) { return sigma.is_prefix_of(r.top); });
}

// Hash strings H(b0)∗…∗H(b) for every block of the plan.
std::vector<BitString> block_strings(const RunSetup& s) {
  std::vector<BitString> out(s.blocks.size());
  out[0] = s.blocks[0]->id;
  for (std::size_t b = 1; b < s.blocks.size(); ++b) {
    for (std::size_t p = 0; p < b; ++p) {
      if (s.blocks[b]->parent && *s.blocks[b]->parent == s.blocks[p]->id) {
        out[b] = concat(out[p], s.blocks[b]->id);
        break;
      }
    }
  }
  return out;
}

template <typename T>
json opt_vec(const std::vector<std::optional<T>>& v) {
  json a = json::array();
  for (const auto& x : v) a.push_back(x ? json(*x) : json(nullptr));
  return a;
}

template <typename T>
std::optional<double> median_of(const std::vector<std::optional<T>>& v, Slot base) {
  std::vector<double> xs;
  for (const auto& x : v) {
    if (x) xs.push_back(static_cast<double>(*x - base));
  }
  if (xs.empty()) return std::nullopt;
  std::sort(xs.begin(), xs.end());
  const std::size_t m = xs.size() / 2;
  return xs.size() % 2 ? xs[m] : (xs[m - 1] + xs[m]) / 2;
}

json check_json(const CheckResult& c) {
  json j{{"verdict", verdict_name(c.verdict)}, {"checked", c.checked}};
  if (!c.reason.empty()) j["reason"] = c.reason;
  if (c.counterexample) {
    j["counterexample"] = {{"seq", c.counterexample->seq},
                           {"slot", c.counterexample->slot},
                           {"process", c.counterexample->process},
                           {"detail", c.counterexample->detail}};
  }
  return j;
}

// Replays the state events of a trace slot by slot.
class Walker {
 public:
  explicit Walker(const Trace& t) : trace_(t), cur_(t.config.params.n, nullptr) {}

  // Applies every event with slot <= g. `on_event` sees each event first.
  template <typename F>
  void advance_to(Slot g, F&& on_event) {
    while (next_ < trace_.events.size() && trace_.events[next_].slot <= g) {
      const auto& e = trace_.events[next_];
      on_event(next_, e);
      if (e.kind == EventKind::State) cur_[e.process] = &trace_.states[e.ref];
      ++next_;
    }
  }
  void advance_to(Slot g) {
    advance_to(g, [](std::uint64_t, const TraceEvent&) {});
  }
  const NodeSnapshot* state(ProcessId p) const { return cur_[p]; }
  std::uint64_t last_seq() const { return next_ == 0 ? 0 : next_ - 1; }

 private:
  const Trace& trace_;
  std::vector<const NodeSnapshot*> cur_;
  std::size_t next_ = 0;
};

std::vector<std::vector<BitString>> lock_groups(const Trace& trace, const Walker& w,
                                                const std::vector<ProcessId>& who, std::optional<Slot> latest) {
  std::vector<std::vector<BitString>> groups;
  groups.reserve(who.size());
  for (ProcessId p : who) {
    const auto* s = w.state(p);
    groups.push_back(s ? locked_tops(*s, trace.setup.offsets[p], latest) : std::vector<BitString>{});
  }
  return groups;
}

}  // namespace

const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Pass: return "PASS";
    case Verdict::Fail: return "FAIL";
    case Verdict::Unknown: return "UNKNOWN";
  }
  return "?";
}

void CheckResult::fail(std::uint64_t seq, Slot slot, ProcessId p, std::string detail) {
  if (verdict == Verdict::Fail) return;
  verdict = Verdict::Fail;
  counterexample = Counterexample{seq, slot, p, std::move(detail)};
}

std::size_t fraction_threshold(std::size_t count, std::size_t num, std::size_t den) {
  return (count * num + den - 1) / den;
}

std::optional<BitString> longest_covered(const std::vector<std::vector<BitString>>& groups,
                                         std::size_t threshold) {
  std::size_t nonempty = 0;
  std::vector<BitString> cands;
  for (const auto& g : groups) {
    if (!g.empty()) ++nonempty;
    for (const auto& s : g) {
      if (std::find(cands.begin(), cands.end(), s) == cands.end()) cands.push_back(s);
    }
  }
  if (threshold == 0) threshold = 1;
  if (nonempty < threshold) return std::nullopt;
  std::optional<BitString> best;
  std::vector<std::size_t> depth;
  for (const auto& c : cands) {
    depth.clear();
    for (const auto& g : groups) {
      if (g.empty()) continue;
      std::size_t d = 0;
      for (const auto& s : g) d = std::max(d, common_prefix(c, s));
      depth.push_back(d);
    }
    std::nth_element(depth.begin(), depth.begin() + static_cast<std::ptrdiff_t>(threshold - 1), depth.end(),
                     std::greater<>());
    const std::size_t d = depth[threshold - 1];
    if (!best || d > best->size()) best = c.prefix(d);
  }
  return best;
}

bool ObserverReport::ok() const {
  return consistency.passed() && clause_i.passed() && dagger1.passed() && delivery.passed() &&
         invariants.passed();
}

json LatencyReport::to_json() const {
  json blocks_json = json::array();
  for (const auto& b : blocks) {
    json j{{"block", b.block},
           {"emitted", b.emitted},
           {"arrival", opt_vec(b.arrival)},
           {"first_lock", opt_vec(b.first_lock)},
           {"first_temp_final", opt_vec(b.first_temp_final)},
           {"temp_final_rounds", opt_vec(b.temp_final_rounds)},
           {"first_final", opt_vec(b.first_final)}};
    auto put = [&](const char* key, std::optional<double> v) { j[key] = v ? json(*v) : json(nullptr); };
    put("median_lock_delay", median_of(b.first_lock, b.emitted));
    put("median_temp_final_delay", median_of(b.first_temp_final, b.emitted));
    put("median_temp_final_rounds", median_of(b.temp_final_rounds, 0));
    put("median_final_delay", median_of(b.first_final, b.emitted));
    blocks_json.push_back(std::move(j));
  }
  return {{"blocks", blocks_json}, {"output_slot", opt_vec(output_slot)}, {"output_round", opt_vec(output_round)}};
}

json ObserverReport::to_json() const {
  return {{"ok", ok()},
          {"consistency", check_json(consistency)},
          {"clause_i", check_json(clause_i)},
          {"dagger1", check_json(dagger1)},
          {"dagger2", check_json(dagger2)},
          {"delivery", check_json(delivery)},
          {"invariants", check_json(invariants)},
          {"lock_intervals", lock_intervals},
          {"schedule_violations", schedule_violations},
          {"latency", latency.to_json()}};
}

ObserverReport observe(const Trace& trace) {
  ObserverReport rep;
  const auto& cfg = trace.config;
  const auto& setup = trace.setup;
  const auto n = cfg.params.n;
  const Slot two_delta = 2 * cfg.params.delta;
  const Population pop = population(trace);
  const bool binary = cfg.protocol != Protocol::Snowman;
  const bool has_locks = cfg.protocol != Protocol::SnowflakePlus;
  const std::size_t thr75 = fraction_threshold(pop.correct.size(), 3, 4);

  if (!trace.complete) {
    for (auto* c : {&rep.consistency, &rep.clause_i, &rep.dagger1, &rep.dagger2, &rep.delivery, &rep.invariants}) {
      c->verdict = Verdict::Unknown;
      c->reason = "trace truncated";
    }
    return rep;
  }
  if (!has_locks) {
    rep.dagger2.verdict = Verdict::Unknown;
    rep.dagger2.reason = "the lockstep protocol keeps no locks";
  }

  std::vector<bool> correct(n, false);
  for (ProcessId p : pop.correct) correct[p] = true;

  // Latency bookkeeping.
  const auto hstrings = block_strings(setup);
  const std::size_t nblocks = binary ? 0 : setup.blocks.size() - 1;
  auto& lat = rep.latency;
  lat.blocks.resize(nblocks);
  std::vector<std::vector<Round>> arrival_rounds(nblocks, std::vector<Round>(n, 0));
  for (std::size_t b = 0; b < nblocks; ++b) {
    auto& bl = lat.blocks[b];
    bl.block = b + 1;
    bl.emitted = setup.block_emit[b + 1];
    bl.arrival.assign(n, std::nullopt);
    bl.first_lock.assign(n, std::nullopt);
    bl.first_temp_final.assign(n, std::nullopt);
    bl.temp_final_rounds.assign(n, std::nullopt);
    bl.first_final.assign(n, std::nullopt);
  }
  lat.output_slot.assign(n, std::nullopt);
  lat.output_round.assign(n, std::nullopt);

  std::vector<BitString> prev_final(n, pop.fallback);
  std::vector<bool> has_final(n, false);
  BitString longest_final;
  bool any_final = false;
  std::optional<ProcessId> longest_owner;
  std::vector<std::vector<BitString>> obligations(n);
  std::vector<BitString> sigma_history;
  std::vector<std::uint32_t> delivered(trace.envelopes.size(), 0);
  std::vector<std::uint64_t> send_seq(trace.envelopes.size(), 0);

  Walker w(trace);
  auto on_event = [&](std::uint64_t seq, const TraceEvent& e) {
    switch (e.kind) {
      case EventKind::Send: send_seq[e.ref] = seq; break;
      case EventKind::Deliver: ++delivered[e.ref]; break;
      case EventKind::ScheduleViolation: ++rep.schedule_violations; break;
      case EventKind::Violation: {
        const auto& v = trace.violations[e.ref];
        auto& target = v.kind == "consistency_i" ? rep.clause_i : rep.invariants;
        target.fail(seq, e.slot, e.process, v.kind + ": " + v.detail);
        break;
      }
      case EventKind::Block: {
        const std::size_t b = e.ref - 1;
        if (b < nblocks && !lat.blocks[b].arrival[e.process]) {
          lat.blocks[b].arrival[e.process] = e.slot;
          const auto* s = w.state(e.process);
          arrival_rounds[b][e.process] = s ? s->rounds_started : 0;
        }
        break;
      }
      case EventKind::State: {
        const ProcessId p = e.process;
        if (pop.byzantine[p]) break;
        const NodeSnapshot& s = trace.states[e.ref];
        const bool final_now = binary ? s.output.has_value() : true;
        if (final_now) {
          ++rep.clause_i.checked;
          if (has_final[p] && !prev_final[p].is_prefix_of(s.final)) {
            rep.clause_i.fail(seq, e.slot, p, "final moved from " + prev_final[p].to_bits() + " to " + s.final.to_bits());
          }
          if (!binary && !s.final.is_prefix_of(s.pref)) rep.clause_i.fail(seq, e.slot, p, "final is not a prefix of pref");
          ++rep.consistency.checked;
          if (any_final && !s.final.compatible_with(longest_final)) {
            rep.consistency.fail(seq, e.slot, p,
                                 "final " + s.final.to_hex() + " conflicts with process " +
                                     std::to_string(longest_owner.value_or(0)) + " final " + longest_final.to_hex());
          }
          if (!any_final || s.final.size() > longest_final.size()) {
            longest_final = s.final;
            longest_owner = p;
          }
          any_final = true;
          // A correct process newly finalizing something must have been
          // preceded by a covering σ_t.
          if (has_locks && s.final.size() > prev_final[p].size()) {
            ++rep.dagger2.checked;
            const bool covered = std::any_of(sigma_history.begin(), sigma_history.end(),
                                             [&](const BitString& h) { return s.final.is_prefix_of(h); });
            if (!covered) rep.dagger2.fail(seq, e.slot, p, "finalized " + s.final.to_hex() + " with no covering sigma_t");
          }
          prev_final[p] = s.final;
          has_final[p] = true;
        }
        if (binary && s.output && !lat.output_slot[p]) {
          lat.output_slot[p] = e.slot;
          lat.output_round[p] = s.rounds_started - 1;
        }
        for (std::size_t b = 0; b < nblocks; ++b) {
          auto& bl = lat.blocks[b];
          const BitString& h = hstrings[b + 1];
          if (!bl.first_lock[p] && has_lock_extending(s, h)) bl.first_lock[p] = e.slot;
          if (!bl.first_temp_final[p]) {
            std::optional<Round> r;
            for (const auto& tf : s.temp_final) {
              if (h.is_prefix_of(tf.sigma)) r = r ? std::min(*r, tf.round) : tf.round;
            }
            if (r) {
              bl.first_temp_final[p] = e.slot;
              bl.temp_final_rounds[p] = *r - arrival_rounds[b][p] + 1;
            }
          }
          if (!bl.first_final[p] && h.is_prefix_of(s.final)) bl.first_final[p] = e.slot;
        }
        break;
      }
    }
  };

  for (Slot g = 0; g < cfg.horizon; ++g) {
    w.advance_to(g, on_event);
    if (!has_locks) continue;
    const auto groups = lock_groups(trace, w, pop.correct, g - two_delta);
    auto sigma = longest_covered(groups, thr75);
    // Binary locks are on a colour; the empty string only says the locked
    // majority is split between colours.
    if (binary && sigma && sigma->empty()) sigma.reset();
    if (sigma) {
      ++rep.lock_intervals;
      if (std::find(sigma_history.begin(), sigma_history.end(), *sigma) == sigma_history.end()) {
        sigma_history.push_back(*sigma);
      }
      for (std::size_t gi = 0; gi < groups.size(); ++gi) {
        const bool covers = std::any_of(groups[gi].begin(), groups[gi].end(),
                                        [&](const BitString& s) { return sigma->is_prefix_of(s); });
        if (!covers) continue;
        auto& ob = obligations[pop.correct[gi]];
        if (std::any_of(ob.begin(), ob.end(), [&](const BitString& o) { return sigma->is_prefix_of(o); })) continue;
        std::erase_if(ob, [&](const BitString& o) { return o.is_prefix_of(*sigma); });
        ob.push_back(*sigma);
      }
    }
    for (ProcessId p : pop.correct) {
      const auto* s = w.state(p);
      for (const auto& o : obligations[p]) {
        ++rep.dagger1.checked;
        if (!s || !has_lock_extending(*s, o)) {
          rep.dagger1.fail(w.last_seq(), g, p, "no longer locked on an extension of " + o.to_hex());
        }
      }
    }
  }
  w.advance_to(std::numeric_limits<Slot>::max(), on_event);

  for (std::size_t i = 0; i < trace.envelopes.size(); ++i) {
    const auto& env = trace.envelopes[i];
    const bool constrained = !pop.byzantine[env.from] || !pop.byzantine[env.to];
    ++rep.delivery.checked;
    if (env.deliver <= env.send) {
      rep.delivery.fail(send_seq[i], env.send, env.from, "envelope " + std::to_string(i) + " not delivered strictly later");
    }
    if (constrained && env.deliver > delivery_deadline(env.send, cfg.gst, cfg.params.delta)) {
      rep.delivery.fail(send_seq[i], env.send, env.from, "envelope " + std::to_string(i) + " delivered after the deadline");
    }
    const std::uint32_t expect = env.deliver < cfg.horizon ? 1 : 0;
    if (delivered[i] != expect) {
      rep.delivery.fail(send_seq[i], env.send, env.from,
                        "envelope " + std::to_string(i) + " delivered " + std::to_string(delivered[i]) + " times");
    }
  }
  return rep;
}

CheckResult check_consistency(const Trace& trace) { return observe(trace).consistency; }
CheckResult check_dagger1(const Trace& trace) { return observe(trace).dagger1; }
CheckResult check_dagger2(const Trace& trace) { return observe(trace).dagger2; }
CheckResult audit_delivery(const Trace& trace) { return observe(trace).delivery; }
LatencyReport latency_report(const Trace& trace) { return observe(trace).latency; }

BitString sigma_t(const Trace& trace, Slot t) {
  const Population pop = population(trace);
  Walker w(trace);
  w.advance_to(t);
  const auto groups = lock_groups(trace, w, pop.correct, t - 2 * trace.config.params.delta);
  return longest_covered(groups, fraction_threshold(pop.correct.size(), 3, 4)).value_or(pop.fallback);
}

BitString sigma_t_star(const Trace& trace, Slot t) {
  const Population pop = population(trace);
  Walker w(trace);
  w.advance_to(t);
  const auto groups = lock_groups(trace, w, pop.correct, std::nullopt);
  return longest_covered(groups, fraction_threshold(pop.correct.size(), 3, 4)).value_or(pop.fallback);
}

BitString tau_t(const Trace& trace, Slot t) {
  const Population pop = population(trace);
  const Slot from = t - 2 * trace.config.params.delta;
  // Preferences in effect at some slot of [from, t], per process.
  std::vector<std::vector<BitString>> prefs(trace.config.params.n);
  std::vector<const NodeSnapshot*> before(trace.config.params.n, nullptr);
  Walker w(trace);
  w.advance_to(t, [&](std::uint64_t, const TraceEvent& e) {
    if (e.kind != EventKind::State) return;
    const auto& s = trace.states[e.ref];
    if (e.slot < from) {
      before[e.process] = &s;
    } else {
      prefs[e.process].push_back(s.pref);
    }
  });
  std::vector<std::vector<BitString>> groups;
  for (ProcessId p : pop.non_byzantine) {
    std::vector<BitString> window = prefs[p];
    if (before[p]) window.push_back(before[p]->pref);
    std::vector<BitString> safe;
    if (const auto* s = w.state(p)) {
      for (const auto& run : s->locks) {
        std::size_t cap = run.top.size();
        for (const auto& pr : window) {
          if (!pr.is_prefix_of(run.top)) cap = std::min(cap, common_prefix(pr, run.top));
        }
        if (cap >= run.from_len) safe.push_back(run.top.prefix(cap));
      }
    }
    groups.push_back(std::move(safe));
  }
  return longest_covered(groups, fraction_threshold(pop.non_byzantine.size(), 3, 5)).value_or(pop.fallback);
}

OpenString tau_t_star(const Trace& trace, Slot t) {
  const Population pop = population(trace);
  Walker w(trace);
  w.advance_to(t);
  std::vector<BitString> prefs;
  for (ProcessId p : pop.non_byzantine) {
    if (const auto* s = w.state(p)) prefs.push_back(s->pref);
  }
  const std::size_t thr = std::max<std::size_t>(1, fraction_threshold(pop.non_byzantine.size(), 3, 5));
  OpenString best{pop.fallback, false};
  // Unbounded: enough preferences lie on one chain ending at p.
  for (const auto& p : prefs) {
    const auto below = static_cast<std::size_t>(
        std::count_if(prefs.begin(), prefs.end(), [&](const BitString& q) { return q.is_prefix_of(p); }));
    if (below >= thr && (!best.unbounded || p.size() > best.base.size())) best = {p, true};
  }
  if (best.unbounded) return best;
  for (const auto& p : prefs) {
    for (const auto& q : prefs) {
      const std::size_t len = common_prefix(p, q);
      const BitString sigma = p.prefix(len);
      const auto compat = static_cast<std::size_t>(
          std::count_if(prefs.begin(), prefs.end(), [&](const BitString& r) { return r.compatible_with(sigma); }));
      if (compat >= thr && sigma.size() > best.base.size()) best = {sigma, false};
    }
  }
  return best;
}

}  // namespace snowsim
