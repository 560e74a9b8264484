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
#include "raptor/oracle.hpp"
#include "test_util.hpp"

using namespace raptor;
using raptor::test::load_golden;
using raptor::test::pos_of;

TEST_CASE("po: different threads give the empty relation") {
  Trace tr = load_trace_text("T1 wr x\nT2 wr x\n");
  CHECK(compute_po(tr).count() == 0);
}

TEST_CASE("po: same-thread pair") {
  Trace tr = load_trace_text("T1 wr x\nT1 wr x\n");
  auto po = compute_po(tr);
  CHECK(po.count() == 1);
  CHECK(po.at(0, 1));
}

TEST_CASE("po: fig 1a has 6+6 ordered pairs") {
  // Each thread executes 4 events: C(4,2) = 6 pairs per thread.
  Trace tr = load_golden("fig_simple_race.trace");
  CHECK(compute_po(tr).count() == 12);
}

TEST_CASE("hb: fig 1a orders the conflicting accesses to x") {
  Trace tr = load_golden("fig_simple_race.trace");
  auto hb = compute_hb(tr);
  CHECK(hb.at(pos_of(tr, "Wr x^1"), pos_of(tr, "Rd x^1_T2")));
}

TEST_CASE("hb: without locks HB equals PO") {
  Trace tr = load_trace_text("T1 wr x\nT2 wr y\nT1 rd y\nT2 rd x\n");
  CHECK(compute_hb(tr) == compute_po(tr));
}

TEST_CASE("hb: transitive and contains PO on a random trace") {
  // 20 fixed events exercising both lock and program order.
  Trace tr = load_trace_text(
      "T1 acq m\nT1 wr x\nT1 rel m\nT2 acq m\nT2 rd x\nT2 acq n\nT2 wr y\nT2 rel n\nT2 rel m\n"
      "T3 acq n\nT3 rd y\nT3 rel n\nT1 wr z\nT3 rd z\nT1 acq m\nT1 rel m\nT2 wr x\nT3 wr y\n"
      "T1 rd x\nT2 rd y\n");
  auto po = compute_po(tr);
  auto hb = compute_hb(tr);
  CHECK(po.subset_of(hb));
  size_t n = tr.size();
  for (size_t a = 0; a < n; ++a)
    for (size_t b = 0; b < n; ++b)
      for (size_t c = 0; c < n; ++c)
        if (hb.at(a, b) && hb.at(b, c)) CHECK(hb.at(a, c));
}

TEST_CASE("cp: fig 1b orders the x accesses, fig 1a does not") {
  Trace yes = load_golden("fig_simple_norace.trace");
  auto cp1 = compute_cp_fixpoint(yes);
  CHECK(cp1.at(pos_of(yes, "Wr x^1"), pos_of(yes, "Rd x^1_T2")));

  Trace no = load_golden("fig_simple_race.trace");
  auto cp2 = compute_cp_fixpoint(no);
  CHECK(!cp2.at(pos_of(no, "Wr x^1"), pos_of(no, "Rd x^1_T2")));
}

TEST_CASE("cp: fig 2 chains rule (a) through rules (c) and (b)") {
  Trace tr = load_golden("fig_delayed.trace");
  auto cp = compute_cp_fixpoint(tr);
  CHECK(cp.at(pos_of(tr, "Rel u^1"), pos_of(tr, "Acq u^2")));
  CHECK(cp.at(pos_of(tr, "Acq m^1"), pos_of(tr, "Rel m^2")));
  CHECK(cp.at(pos_of(tr, "Rel m^1"), pos_of(tr, "Acq m^2")));
  CHECK(cp.at(pos_of(tr, "Wr x^1"), pos_of(tr, "Rd x^1_T3")));
}

TEST_CASE("cp: transfer goldens order the writes to x") {
  for (const char* name : {"fig_transfer4.trace", "fig_transfer5.trace"}) {
    Trace tr = load_golden(name);
    auto cp = compute_cp_fixpoint(tr);
    CHECK_MESSAGE(cp.at(pos_of(tr, "Wr x^1"), pos_of(tr, "Wr x^2")), name);
  }
  Trace sw = load_golden("fig_transfer5_swapped.trace");
  auto cp = compute_cp_fixpoint(sw);
  CHECK(!cp.at(pos_of(sw, "Wr x^1"), pos_of(sw, "Wr x^2")));
}

TEST_CASE("races all-pairs: goldens") {
  auto r1 = enumerate_races_all_pairs(load_golden("fig_simple_race.trace"));
  REQUIRE(r1.size() == 1);
  CHECK(r1[0].kind == RaceKind::WR);
  CHECK(r1[0].first_pos == 0);
  CHECK(r1[0].second_pos == 7);
  CHECK(!r1[0].is_hb_race);  // HB-ordered: a CP-only race
  CHECK(r1[0].event_distance == 7);

  CHECK(enumerate_races_all_pairs(load_golden("fig_simple_norace.trace")).empty());
  CHECK(enumerate_races_all_pairs(load_golden("fig_delayed.trace")).empty());

  // Conflicting accesses need different threads.
  CHECK(enumerate_races_all_pairs(load_trace_text("T1 wr x\nT1 rd x\nT1 wr x\n")).empty());
}

TEST_CASE("races: triple write, all-pairs 3 vs adjacent-forcing 2") {
  Trace tr = load_golden("triple_write.trace");
  auto all = enumerate_races_all_pairs(tr);
  CHECK(all.size() == 3);
  auto adj = enumerate_races_adjacent_forcing(tr);
  REQUIRE(adj.size() == 2);
  CHECK(adj[0].first_pos == 0);
  CHECK(adj[0].second_pos == 1);
  CHECK(adj[1].first_pos == 1);
  CHECK(adj[1].second_pos == 2);
  CHECK(adj[0].is_hb_race);
  CHECK(adj[1].is_hb_race);
  CHECK(adj[0].kind == RaceKind::WW);
}

TEST_CASE("races adjacent-forcing: goldens") {
  auto r1 = enumerate_races_adjacent_forcing(load_golden("fig_simple_race.trace"));
  REQUIRE(r1.size() == 1);
  CHECK(r1[0].kind == RaceKind::WR);
  CHECK(!r1[0].is_hb_race);
  CHECK(enumerate_races_adjacent_forcing(load_golden("fig_simple_norace.trace")).empty());
  CHECK(enumerate_races_adjacent_forcing(load_golden("fig_delayed.trace")).empty());
  auto sw = enumerate_races_adjacent_forcing(load_golden("fig_transfer5_swapped.trace"));
  REQUIRE(sw.size() == 1);
  CHECK(sw[0].kind == RaceKind::WW);
  CHECK(!sw[0].is_hb_race);
}

TEST_CASE("knowable prefix: fig 2 ordering appears only at Rd y^1_T2") {
  Trace tr = load_golden("fig_delayed.trace");
  uint32_t rd_x = pos_of(tr, "Rd x^1_T3");
  uint32_t rd_y = pos_of(tr, "Rd y^1_T2");

  auto at_rd_x = knowable_prefix(tr, rd_x);
  CHECK(!at_rd_x.cp.at(pos_of(tr, "Wr x^1"), rd_x));

  auto at_rd_y = knowable_prefix(tr, rd_y);
  CHECK(at_rd_y.cp.at(pos_of(tr, "Rel u^1"), pos_of(tr, "Acq u^2")));
  // The x ordering still waits on Rule (b) for m, which fires at Rel m^2.
  CHECK(!at_rd_y.cp.at(pos_of(tr, "Wr x^1"), rd_x));
  auto at_rel_m2 = knowable_prefix(tr, pos_of(tr, "Rel m^2"));
  CHECK(at_rel_m2.cp.at(pos_of(tr, "Rel m^1"), pos_of(tr, "Acq m^2")));
  CHECK(at_rel_m2.cp.at(pos_of(tr, "Wr x^1"), rd_x));

  auto at_zero = knowable_prefix(tr, 0);
  CHECK(at_zero.cp.count() == 0);
  CHECK(at_zero.hb.count() == 0);

  CHECK_THROWS_AS(knowable_prefix(tr, tr.size()), std::out_of_range);
}

TEST_CASE("cp prefix is monotone on fig 2") {
  Trace tr = load_golden("fig_delayed.trace");
  RelationMatrix prev;
  for (size_t k = 0; k < tr.size(); ++k) {
    auto res = knowable_prefix(tr, k);
    if (k > 0) {
      // restricted to events <= k-1, previous CP is contained in the new one
      for (size_t a = 0; a < k; ++a)
        for (size_t b = 0; b < k; ++b)
          if (prev.at(a, b)) CHECK(res.cp.at(a, b));
    }
    prev = res.cp;
  }
}

TEST_CASE("cp_distance: golden values") {
  Trace fig1b = load_golden("fig_simple_norace.trace");
  auto m = fig1b.find_lock("m");
  REQUIRE(m);
  CHECK(cp_distance(fig1b, *m, 2, 1) == std::optional<uint32_t>{0});

  Trace fig2 = load_golden("fig_delayed.trace");
  auto m2 = fig2.find_lock("m");
  auto u2 = fig2.find_lock("u");
  REQUIRE(m2);
  REQUIRE(u2);
  CHECK(cp_distance(fig2, *u2, 2, 1) == std::optional<uint32_t>{0});
  CHECK(cp_distance(fig2, *m2, 2, 1) == std::optional<uint32_t>{1});

  // Unrelated critical sections: undefined.
  Trace fig1a = load_golden("fig_simple_race.trace");
  auto m1 = fig1a.find_lock("m");
  CHECK(!cp_distance(fig1a, *m1, 2, 1).has_value());
}

TEST_CASE("shadowed reads do not seed rule (a) or race") {
  // First read of x is inside the critical section, but a later read by the
  // same thread in the same write generation shadows it.
  Trace tr = load_trace_text(
      "T1 acq m\nT1 rd y\nT1 rel m\nT1 rd y\n"
      "T2 acq m\nT2 wr y\nT2 rel m\n");
  auto cp = compute_cp_fixpoint(tr);
  CHECK(!cp.at(pos_of(tr, "Rel m^1"), pos_of(tr, "Acq m^2")));
  auto races = enumerate_races_adjacent_forcing(tr);
  // The canonical Rd y^0_T1 (pos 3) races with Wr y^1.
  REQUIRE(races.size() == 1);
  CHECK(races[0].first_pos == 3);
  CHECK(races[0].kind == RaceKind::RW);
}

TEST_CASE("fuzz: prefix monotonicity and race-freedom agreement") {
  FuzzConfig cfg;
  cfg.seed = 41;
  cfg.max_threads = 3;
  cfg.max_locks = 3;
  cfg.max_vars = 2;
  cfg.max_events = 16;
  for (uint32_t i = 0; i < 150; ++i) {
    Trace tr = gen_random_trace(cfg, i);
    if (tr.size() == 0) continue;
    // CP knowledge only grows along prefixes (restricted to earlier events).
    RelationMatrix prev;
    for (size_t k = 0; k < tr.size(); ++k) {
      auto res = knowable_prefix(tr, k);
      for (size_t a = 0; a + 1 < k + 1; ++a)
        for (size_t b = 0; b + 1 < k + 1; ++b)
          if (k > 0 && prev.at(a, b)) REQUIRE(res.cp.at(a, b));
      prev = res.cp;
    }
    // A trace is all-pairs race-free iff it is adjacent-pairs race-free.
    bool all = enumerate_races_all_pairs(tr).empty();
    bool adj = enumerate_races_adjacent_forcing(tr).empty();
    REQUIRE(all == adj);
  }
}
