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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "raptor/generator.hpp"
#include "raptor/invariants.hpp"
#include "test_util.hpp"

using namespace raptor;
using raptor::test::load_golden;
using raptor::test::pos_of;

TEST_CASE("invariants hold after every event on all goldens") {
  for (const char* name :
       {"fig_simple_race.trace", "fig_simple_norace.trace", "fig_delayed.trace",
        "fig_transfer4.trace", "fig_transfer5.trace", "fig_transfer5_swapped.trace",
        "triple_write.trace"}) {
    auto v = check_invariants_every_event(load_golden(name));
    INFO(name);
    for (auto& viol : v) FAIL_CHECK(viol.invariant << " " << viol.owner << ": " << viol.detail);
    CHECK(v.empty());
  }
}

TEST_CASE("empty state against an empty prefix is clean") {
  Trace tr = load_trace_text("T1 wr x\n");
  EngineOptions opts;
  opts.removal = false;
  Engine eng = Engine::for_trace(tr, opts);
  eng.process_event(tr.events[0]);
  auto prefix = knowable_prefix(tr, 0);
  CHECK(check_invariants(eng.state(), tr, prefix, 0).empty());
}

TEST_CASE("corrupted state is flagged: dropped CP marker") {
  Trace tr = load_golden("fig_delayed.trace");
  EngineOptions opts;
  opts.removal = false;
  Engine eng = Engine::for_trace(tr, opts);
  size_t rel_m2 = pos_of(tr, "Rel m^2");
  for (size_t k = 0; k <= rel_m2; ++k) eng.process_event(tr.events[k]);

  AnalysisState& st = eng.state();
  OwnerIdx x1 = st.find_write_owner(*tr.find_var("x"), 1);
  REQUIRE(x1 != kNoOwner);
  ThreadId t3 = *tr.find_thread("T3");
  REQUIRE(st.owner(x1).cp.contains(elem::xi_t(t3)));
  st.owner(x1).cp.erase(elem::xi_t(t3));

  auto prefix = knowable_prefix(tr, rel_m2);
  auto v = check_invariants(st, tr, prefix, rel_m2);
  REQUIRE(!v.empty());
  bool found = false;
  for (auto& viol : v)
    if (viol.invariant == "I-CP" && viol.owner == "x^1") found = true;
  CHECK(found);
}

TEST_CASE("corrupted state is flagged: spurious CP element") {
  Trace tr = load_golden("fig_simple_race.trace");
  EngineOptions opts;
  opts.removal = false;
  Engine eng = Engine::for_trace(tr, opts);
  for (const Event& e : tr.events) eng.process_event(e);

  AnalysisState& st = eng.state();
  OwnerIdx x1 = st.find_write_owner(*tr.find_var("x"), 1);
  REQUIRE(x1 != kNoOwner);
  st.owner(x1).cp.insert(elem::xi_t(*tr.find_thread("T2")));  // not CP ordered

  auto prefix = knowable_prefix(tr, tr.size() - 1);
  auto v = check_invariants(st, tr, prefix, tr.size() - 1);
  REQUIRE(!v.empty());
  CHECK(v.front().invariant == "I-CP");
}

TEST_CASE("corrupted state is flagged: wrong star flag") {
  Trace tr = load_golden("fig_simple_norace.trace");
  EngineOptions opts;
  opts.removal = false;
  Engine eng = Engine::for_trace(tr, opts);
  for (const Event& e : tr.events) eng.process_event(e);

  AnalysisState& st = eng.state();
  OwnerIdx y1 = st.find_write_owner(*tr.find_var("y"), 1);
  REQUIRE(y1 != kNoOwner);
  st.owner(y1).hb_locks.clear();
  st.owner(y1).hb_locks.insert(*tr.find_lock("m"), 1, /*star=*/false);  // was starred

  auto prefix = knowable_prefix(tr, tr.size() - 1);
  auto v = check_invariants(st, tr, prefix, tr.size() - 1);
  bool found = false;
  for (auto& viol : v)
    if (viol.invariant == "I-HBcs") found = true;
  CHECK(found);
}

TEST_CASE("invariants hold on fuzz traces after every event") {
  FuzzConfig cfg;
  cfg.seed = 23;
  cfg.max_threads = 4;
  cfg.max_locks = 3;
  cfg.max_vars = 3;
  cfg.max_events = 25;
  for (uint32_t i = 0; i < 400; ++i) {
    Trace tr = gen_random_trace(cfg, i);
    auto v = check_invariants_every_event(tr);
    if (!v.empty()) {
      FAIL_CHECK("trace " << i << ": " << v.front().invariant << " " << v.front().owner << ": "
                          << v.front().detail);
      break;
    }
  }
}

TEST_CASE("self-transfer regression trace keeps the invariants") {
  auto v = check_invariants_every_event(raptor::test::load_golden("self_transfer.trace"));
  for (auto& viol : v) FAIL_CHECK(viol.invariant << " " << viol.owner << ": " << viol.detail);
  CHECK(v.empty());
}
