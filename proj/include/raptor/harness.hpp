/*
 * Copyright (c) 2026, the raptor authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef RAPTOR_HARNESS_HPP_
#define RAPTOR_HARNESS_HPP_

#include <algorithm>
#include <cstdlib>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "raptor/engine.hpp"
#include "raptor/generator.hpp"
#include "raptor/invariants.hpp"
#include "raptor/oracle.hpp"

// Run/diff plumbing shared by the command-line tool and the test suites.

namespace raptor {

struct RunCounts {
  size_t static_races = 0;
  size_t dynamic_races = 0;
  size_t hb_races = 0;
  size_t cp_only_races = 0;
};

struct RunReport {
  std::vector<RaceReport> races;
  RunCounts counts;
  size_t events_processed = 0;
  double elapsed_seconds = 0.0;
};

inline RunCounts count_races(const Trace& tr, const std::vector<RaceReport>& races) {
  RunCounts c;
  c.dynamic_races = races.size();
  for (const RaceReport& r : races)
    (r.is_hb_race ? c.hb_races : c.cp_only_races)++;
  c.static_races = dedup_static(tr, races).size();
  return c;
}

inline RunReport make_run_report(const Trace& tr, std::vector<RaceReport> races,
                                 double elapsed) {
  RunReport rep;
  sort_races(races);
  rep.races = std::move(races);
  rep.counts = count_races(tr, rep.races);
  rep.events_processed = tr.size();
  rep.elapsed_seconds = elapsed;
  return rep;
}

/// One race per line, tab-separated:
/// kind, var, firstPos, secondPos, isHbRace, distance, staticKey
inline std::string format_race_machine(const Trace& tr, const RaceReport& r) {
  std::string out;
  out += to_string(r.kind);
  out += '\t';
  out += tr.var_name(r.var);
  out += '\t';
  out += std::to_string(r.first_pos);
  out += '\t';
  out += std::to_string(r.second_pos);
  out += '\t';
  out += r.is_hb_race ? '1' : '0';
  out += '\t';
  out += std::to_string(r.event_distance);
  out += '\t';
  out += static_key(tr, r);
  out += '\n';
  return out;
}

inline std::string format_race_human(const Trace& tr, const RaceReport& r) {
  std::string out = "race ";
  out += to_string(r.kind);
  out += " on " + tr.var_name(r.var);
  out += ": " + event_label(tr, tr.events[r.first_pos]) + " (pos " +
         std::to_string(r.first_pos) + ")";
  out += " vs " + event_label(tr, tr.events[r.second_pos]) + " (pos " +
         std::to_string(r.second_pos) + ")";
  out += r.is_hb_race ? " [HB-race]" : " [CP-only]";
  out += " distance=" + std::to_string(r.event_distance);
  out += "\n";
  return out;
}

/// Min-max event distance per static key, over the dynamic instances.
inline std::vector<std::pair<std::string, std::pair<uint32_t, uint32_t>>> distance_ranges(
    const Trace& tr, const std::vector<RaceReport>& races) {
  std::vector<std::pair<std::string, std::pair<uint32_t, uint32_t>>> out;
  std::map<std::string, size_t> index;
  for (const RaceReport& r : races) {
    std::string key = static_key(tr, r);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.push_back({key, {r.event_distance, r.event_distance}});
    } else {
      auto& range = out[it->second].second;
      range.first = std::min(range.first, r.event_distance);
      range.second = std::max(range.second, r.event_distance);
    }
  }
  return out;
}

/// Default cap on the oracle's trace size; RAPTOR_ORACLE_CAP overrides.
inline size_t oracle_cap() {
  if (const char* env = std::getenv("RAPTOR_ORACLE_CAP")) {
    char* end = nullptr;
    unsigned long v = std::strtoul(env, &end, 10);
    if (end && *end == '\0' && v > 0) return static_cast<size_t>(v);
  }
  return 500;
}

struct DiffResult {
  bool match = true;
  std::vector<RaceReport> engine_races;
  std::vector<RaceReport> oracle_races;
  std::vector<RaceReport> engine_only;
  std::vector<RaceReport> oracle_only;
};

/// Splits two sorted race lists into the one-sided remainders.
inline void race_symmetric_difference(const std::vector<RaceReport>& a,
                                      const std::vector<RaceReport>& b,
                                      std::vector<RaceReport>& a_only,
                                      std::vector<RaceReport>& b_only) {
  size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j >= b.size() || (i < a.size() && race_key(a[i]) < race_key(b[j]))) {
      a_only.push_back(a[i++]);
    } else if (i >= a.size() || race_key(b[j]) < race_key(a[i])) {
      b_only.push_back(b[j++]);
    } else {
      ++i;
      ++j;
    }
  }
}

/// Soundness/completeness differential: finalized engine vs adjacent-forcing oracle,
/// compared as access pairs with HB flags. Traces that end with held locks
/// are canonicalized by appending the releases the engine's finalize would
/// simulate, so both sides see the same execution.
inline DiffResult diff_trace(const Trace& tr_in, EngineOptions opts = {}) {
  const Trace* tr = &tr_in;
  Trace drained;
  {
    std::vector<std::vector<LockId>> held(tr_in.threads.size());
    for (const Event& e : tr_in.events) {
      if (e.kind == EventKind::Acquire) held[e.thread].push_back(e.object);
      if (e.kind == EventKind::Release && !held[e.thread].empty()) held[e.thread].pop_back();
    }
    bool any = false;
    for (auto& h : held) any = any || !h.empty();
    if (any) {
      std::string text = serialize_trace(tr_in);
      for (uint32_t t = 0; t < tr_in.threads.size(); ++t)
        for (size_t i = held[t].size(); i-- > 0;)
          text += tr_in.thread_name(t) + " rel " + tr_in.lock_name(held[t][i]) + "\n";
      drained = load_trace_text(text);
      tr = &drained;
    }
  }

  DiffResult res;
  res.engine_races = run_engine(*tr, opts);
  res.oracle_races = enumerate_races_adjacent_forcing(*tr);
  race_symmetric_difference(res.engine_races, res.oracle_races, res.engine_only,
                            res.oracle_only);
  res.match = res.engine_only.empty() && res.oracle_only.empty();
  return res;
}

struct FuzzFailure {
  uint32_t index = 0;
  std::string reason;
  Trace trace;
};

struct FuzzSummary {
  uint32_t checked = 0;
  uint32_t failed = 0;
  size_t total_events = 0;
  size_t total_races = 0;
  std::vector<FuzzFailure> failures;
};

/// Deterministic fuzz: every generated trace must validate, diff clean
/// against the oracle, and (optionally) pass the per-event invariant check.
inline FuzzSummary fuzz_run(const FuzzConfig& cfg, bool check_invariants_too = true) {
  FuzzSummary sum;
  for (uint32_t i = 0; i < cfg.count; ++i) {
    Trace tr = gen_random_trace(cfg, i);
    ++sum.checked;
    sum.total_events += tr.size();
    std::string reason;
    if (!validate_well_formed(tr).empty()) {
      reason = "generated trace is not well formed";
    } else {
      DiffResult d = diff_trace(tr);
      sum.total_races += d.engine_races.size();
      if (!d.match) {
        reason = "engine/oracle race sets differ (" + std::to_string(d.engine_only.size()) +
                 " engine-only, " + std::to_string(d.oracle_only.size()) + " oracle-only)";
      } else if (check_invariants_too) {
        auto v = check_invariants_every_event(tr);
        if (!v.empty())
          reason = "invariant " + v.front().invariant + " violated for " + v.front().owner +
                   ": " + v.front().detail;
      }
    }
    if (!reason.empty()) {
      ++sum.failed;
      sum.failures.push_back({i, std::move(reason), tr});
      if (!cfg.keep_going) break;
    }
  }
  return sum;
}

}  // namespace raptor

#endif  // RAPTOR_HARNESS_HPP_
