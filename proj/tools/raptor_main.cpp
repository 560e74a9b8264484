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

#include <chrono>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "raptor/explain.hpp"
#include "raptor/harness.hpp"

// Exit codes: 0 clean / no race, 1 races found, 2 input error,
// 3 differential mismatch, 4 invariant violation.

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRaces = 1;
constexpr int kExitInput = 2;
constexpr int kExitDiff = 3;
constexpr int kExitInvariant = 4;

struct LoadedTrace {
  raptor::Trace trace;
  bool ok = false;
};

LoadedTrace load_trace_file(const std::string& path) {
  LoadedTrace lt;
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    std::cerr << "error: cannot open " << path << "\n";
    return lt;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    lt.trace = raptor::load_trace_text(ss.str());
  } catch (const raptor::TraceError& e) {
    std::cerr << path << ": " << e.what() << "\n";
    return lt;
  }
  auto violations = raptor::validate_well_formed(lt.trace);
  if (!violations.empty()) {
    for (const auto& v : violations)
      std::cerr << path << ": event " << v.pos << ": " << v.what << "\n";
    return lt;
  }
  lt.ok = true;
  return lt;
}

void print_report(const raptor::Trace& tr, const raptor::RunReport& rep,
                  const std::string& format, bool distances) {
  if (format == "machine") {
    for (const auto& r : rep.races) std::cout << raptor::format_race_machine(tr, r);
  } else {
    for (const auto& r : rep.races) std::cout << raptor::format_race_human(tr, r);
    std::cout << "events: " << rep.events_processed << "  static races: "
              << rep.counts.static_races << "  dynamic: " << rep.counts.dynamic_races
              << " (hb " << rep.counts.hb_races << ", cp-only " << rep.counts.cp_only_races
              << ")  elapsed: " << rep.elapsed_seconds << "s\n";
  }
  if (distances) {
    for (const auto& [key, range] : raptor::distance_ranges(tr, rep.races)) {
      std::cout << "distance\t" << key << "\t" << range.first;
      if (range.second != range.first) std::cout << "-" << range.second;
      std::cout << "\n";
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"raptor: online causally-precedes race detection over event traces"};
  app.require_subcommand(1);

  std::string path;
  std::string format = "human";
  bool no_removal = false;
  bool check_invariants = false;
  bool distances = false;
  bool naive_prerelease = false;

  auto* analyze = app.add_subcommand("analyze", "run the online analysis on a trace file");
  analyze->add_option("path", path)->required();
  analyze->add_flag("--no-removal", no_removal, "disable obsolete-owner removal");
  analyze->add_flag("--check-invariants", check_invariants,
                    "verify analysis-state invariants after every event (oracle-sized traces)");
  analyze->add_flag("--distances", distances, "print min-max event distance per static race");
  analyze->add_flag("--naive-prerelease", naive_prerelease,
                    "use the unoptimized pre-release scan");
  analyze->add_option("--format", format, "human|machine")
      ->check(CLI::IsMember({"human", "machine"}));

  std::string mode = "all-pairs";
  auto* oracle = app.add_subcommand("oracle", "brute-force fixpoint oracle on a trace file");
  oracle->add_option("path", path)->required();
  oracle->add_option("--mode", mode, "all-pairs|adjacent-forcing")
      ->check(CLI::IsMember({"all-pairs", "adjacent-forcing"}));
  oracle->add_option("--format", format, "human|machine")
      ->check(CLI::IsMember({"human", "machine"}));

  auto* diff = app.add_subcommand("diff", "differential test: engine vs oracle");
  diff->add_option("path", path)->required();

  raptor::FuzzConfig cfg;
  bool skip_invariants = false;
  std::string repro = "raptor-fuzz-repro.trace";
  auto* fuzz = app.add_subcommand("fuzz", "differential fuzzing with random well-formed traces");
  fuzz->add_option("--seed", cfg.seed);
  fuzz->add_option("--count", cfg.count);
  fuzz->add_option("--max-threads", cfg.max_threads);
  fuzz->add_option("--max-locks", cfg.max_locks);
  fuzz->add_option("--max-vars", cfg.max_vars);
  fuzz->add_option("--max-events", cfg.max_events);
  fuzz->add_option("--lock-bias", cfg.lock_bias);
  fuzz->add_flag("--keep-going", cfg.keep_going, "continue past the first failure");
  fuzz->add_flag("--skip-invariants", skip_invariants, "diff only, skip per-event invariants");
  fuzz->add_option("--repro", repro, "file for the first failing trace");

  uint32_t gen_index = 0;
  std::string out_path;
  auto* gen = app.add_subcommand("gen", "emit one generated trace");
  gen->add_option("--seed", cfg.seed);
  gen->add_option("--index", gen_index);
  gen->add_option("--max-threads", cfg.max_threads);
  gen->add_option("--max-locks", cfg.max_locks);
  gen->add_option("--max-vars", cfg.max_vars);
  gen->add_option("--max-events", cfg.max_events);
  gen->add_option("--lock-bias", cfg.lock_bias);
  gen->add_option("-o,--output", out_path, "write to file instead of stdout");

  std::string owner_sel = "all";
  auto* explain = app.add_subcommand("explain", "per-event state deltas (no-removal mode)");
  explain->add_option("path", path)->required();
  explain->add_option("--owner", owner_sel, "comma-separated owner labels (e.g. x^1,m^2) or 'all'");

  CLI11_PARSE(app, argc, argv);

  if (analyze->parsed()) {
    LoadedTrace lt = load_trace_file(path);
    if (!lt.ok) return kExitInput;
    raptor::EngineOptions opts;
    opts.removal = !no_removal;
    opts.fast_prerelease = !naive_prerelease;
    auto t0 = std::chrono::steady_clock::now();
    auto races = raptor::run_engine(lt.trace, opts);
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto rep = raptor::make_run_report(lt.trace, races, dt);
    print_report(lt.trace, rep, format, distances);
    if (check_invariants) {
      if (lt.trace.size() > raptor::oracle_cap()) {
        std::cerr << "error: trace exceeds the oracle cap (" << raptor::oracle_cap()
                  << " events); set RAPTOR_ORACLE_CAP to raise it\n";
        return kExitInput;
      }
      auto v = raptor::check_invariants_every_event(lt.trace);
      if (!v.empty()) {
        for (const auto& viol : v)
          std::cerr << "invariant " << viol.invariant << " violated for " << viol.owner << ": "
                    << viol.detail << "\n";
        return kExitInvariant;
      }
      std::cout << "invariants: ok after every event\n";
    }
    return rep.races.empty() ? kExitOk : kExitRaces;
  }

  if (oracle->parsed()) {
    LoadedTrace lt = load_trace_file(path);
    if (!lt.ok) return kExitInput;
    if (lt.trace.size() > raptor::oracle_cap()) {
      std::cerr << "error: trace has " << lt.trace.size() << " events, oracle cap is "
                << raptor::oracle_cap() << " (set RAPTOR_ORACLE_CAP to raise it)\n";
      return kExitInput;
    }
    auto t0 = std::chrono::steady_clock::now();
    auto races = mode == "all-pairs" ? raptor::enumerate_races_all_pairs(lt.trace)
                                     : raptor::enumerate_races_adjacent_forcing(lt.trace);
    double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    auto rep = raptor::make_run_report(lt.trace, races, dt);
    print_report(lt.trace, rep, format, false);
    return rep.races.empty() ? kExitOk : kExitRaces;
  }

  if (diff->parsed()) {
    LoadedTrace lt = load_trace_file(path);
    if (!lt.ok) return kExitInput;
    if (lt.trace.size() > raptor::oracle_cap()) {
      std::cerr << "error: trace exceeds the oracle cap (" << raptor::oracle_cap() << ")\n";
      return kExitInput;
    }
    auto res = raptor::diff_trace(lt.trace);
    if (res.match) {
      std::cout << "diff: ok (" << res.engine_races.size() << " races on both sides)\n";
      return kExitOk;
    }
    for (const auto& r : res.engine_only)
      std::cout << "engine-only: " << raptor::format_race_machine(lt.trace, r);
    for (const auto& r : res.oracle_only)
      std::cout << "oracle-only: " << raptor::format_race_machine(lt.trace, r);
    return kExitDiff;
  }

  if (fuzz->parsed()) {
    auto sum = raptor::fuzz_run(cfg, !skip_invariants);
    std::cout << "fuzz: " << sum.checked << " traces, " << sum.total_events << " events, "
              << sum.total_races << " races, " << sum.failed << " failures\n";
    if (sum.failed) {
      const auto& f = sum.failures.front();
      std::cerr << "first failure at index " << f.index << ": " << f.reason << "\n";
      std::ofstream out(repro, std::ios::binary);
      out << "# seed " << cfg.seed << " index " << f.index << "\n"
          << raptor::serialize_trace(f.trace);
      std::cerr << "repro written to " << repro << "\n";
      return kExitRaces;
    }
    return kExitOk;
  }

  if (gen->parsed()) {
    raptor::Trace tr = raptor::gen_random_trace(cfg, gen_index);
    std::string text = raptor::serialize_trace(tr);
    if (out_path.empty()) {
      std::cout << text;
    } else {
      std::ofstream out(out_path, std::ios::binary);
      out << text;
    }
    return kExitOk;
  }

  if (explain->parsed()) {
    LoadedTrace lt = load_trace_file(path);
    if (!lt.ok) return kExitInput;
    raptor::ExplainResult res = raptor::explain_trace(lt.trace);
    std::set<std::string> filter;
    if (owner_sel != "all") {
      size_t i = 0;
      while (i < owner_sel.size()) {
        size_t j = owner_sel.find(',', i);
        if (j == std::string::npos) j = owner_sel.size();
        filter.insert(owner_sel.substr(i, j - i));
        i = j + 1;
      }
      bool known = false;
      for (const auto& label : res.owner_labels)
        if (filter.count(label)) known = true;
      if (!known) {
        std::cerr << "error: no owner matches selector `" << owner_sel << "`\n";
        return kExitInput;
      }
    }
    std::cout << raptor::format_explain(lt.trace, res, filter);
    return kExitOk;
  }

  return kExitInput;
}
