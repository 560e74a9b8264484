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

#include "raptor/trace.hpp"
#include "test_util.hpp"

using namespace raptor;

TEST_CASE("parse: single line") {
  auto evs = parse_trace("T1 wr x");
  REQUIRE(evs.size() == 1);
  CHECK(evs[0].thread == "T1");
  CHECK(evs[0].op == RawOp::Wr);
  CHECK(evs[0].object == "x");
  CHECK(evs[0].loc.empty());
}

TEST_CASE("parse: optional location tag") {
  auto evs = parse_trace("T2 acq m @Main.java:40");
  REQUIRE(evs.size() == 1);
  CHECK(evs[0].op == RawOp::Acq);
  CHECK(evs[0].loc == "Main.java:40");
}

TEST_CASE("parse: unknown op reports the line") {
  try {
    parse_trace("T1 hug x");
    FAIL("expected TraceError");
  } catch (const TraceError& e) {
    CHECK(e.line == 1);
  }
}

TEST_CASE("parse: comments, blanks, crlf") {
  auto evs = parse_trace("# header\r\n\r\nT1 wr x # trailing\r\nT2 rd x\n");
  REQUIRE(evs.size() == 2);
  CHECK(evs[0].line == 3);
  CHECK(evs[1].thread == "T2");
}

TEST_CASE("parse: malformed line") {
  CHECK_THROWS_AS(parse_trace("T1 wr"), TraceError);
  CHECK_THROWS_AS(parse_trace("T1 wr x y z"), TraceError);
}

TEST_CASE("desugar: volatile write becomes a locked write") {
  auto evs = desugar(parse_trace("T1 vwr v"));
  REQUIRE(evs.size() == 3);
  CHECK(evs[0].op == RawOp::Acq);
  CHECK(evs[0].object == "$Lv");
  CHECK(evs[1].op == RawOp::Wr);
  CHECK(evs[1].object == "$Vv");
  CHECK(evs[2].op == RawOp::Rel);
  CHECK(evs[2].object == "$Lv");
}

TEST_CASE("desugar: fork emits parent-write then child-read") {
  auto evs = desugar(parse_trace("T1 fork T2"));
  REQUIRE(evs.size() == 6);
  CHECK(evs[0].thread == "T1");
  CHECK(evs[1].op == RawOp::Wr);
  CHECK(evs[1].thread == "T1");
  CHECK(evs[3].thread == "T2");
  CHECK(evs[4].op == RawOp::Rd);
  CHECK(evs[4].thread == "T2");
  CHECK(evs[1].object == evs[4].object);
  // Same lock around both halves, inline at the fork line.
  CHECK(evs[0].object == evs[3].object);
}

TEST_CASE("desugar: join emits child-write then parent-read") {
  auto evs = desugar(parse_trace("T1 fork T2\nT1 join T2"));
  REQUIRE(evs.size() == 12);
  CHECK(evs[6].thread == "T2");  // child side first
  CHECK(evs[7].op == RawOp::Wr);
  CHECK(evs[10].op == RawOp::Rd);
  CHECK(evs[10].thread == "T1");
}

TEST_CASE("desugar: errors") {
  CHECK_THROWS_AS(desugar(parse_trace("T1 wr $x")), TraceError);
  CHECK_THROWS_AS(desugar(parse_trace("T2 wr x\nT1 fork T2")), TraceError);
  CHECK_THROWS_AS(desugar(parse_trace("T1 join T2")), TraceError);
  CHECK(desugar(std::vector<RawEvent>{}).empty());
}

TEST_CASE("desugar output is well formed when fork/join usage is consistent") {
  Trace tr = load_trace_text("T1 wr x\nT1 fork T2\nT2 vrd v\nT1 join T2\nT1 rd x\n");
  CHECK(validate_well_formed(tr).empty());
}

TEST_CASE("annotate: write counters and read indexes") {
  Trace tr = load_trace_text("T1 wr x\nT2 rd x\nT1 wr x\n");
  REQUIRE(tr.events.size() == 3);
  CHECK(tr.events[0].inst == 1);
  CHECK(tr.events[1].inst == 1);
  CHECK(tr.events[1].kind == EventKind::Read);
  CHECK(tr.events[2].inst == 2);
}

TEST_CASE("annotate: read before any write carries index 0") {
  Trace tr = load_trace_text("T2 rd x\n");
  CHECK(tr.events[0].inst == 0);
}

TEST_CASE("annotate: fig 1a instances") {
  Trace tr = test::load_golden("fig_simple_race.trace");
  REQUIRE(tr.events.size() == 8);
  CHECK(event_label(tr, tr.events[0]) == "Wr x^1");
  CHECK(event_label(tr, tr.events[1]) == "Acq m^1");
  CHECK(event_label(tr, tr.events[4]) == "Acq m^2");
  CHECK(event_label(tr, tr.events[5]) == "Rd z^0_T2");  // z never written
  CHECK(event_label(tr, tr.events[7]) == "Rd x^1_T2");
}

TEST_CASE("validate: reentrant acquire") {
  Trace tr = load_trace_text("T1 acq m\nT1 acq m\n");
  auto v = validate_well_formed(tr);
  REQUIRE(v.size() == 1);
  CHECK(v[0].pos == 1);
}

TEST_CASE("validate: non-LIFO release") {
  Trace tr = load_trace_text("T1 acq m\nT1 acq n\nT1 rel m\n");
  auto v = validate_well_formed(tr);
  REQUIRE(v.size() == 1);
  CHECK(v[0].pos == 2);
}

TEST_CASE("validate: cross-thread release and unheld release") {
  CHECK(validate_well_formed(load_trace_text("T1 acq m\nT2 rel m\n")).size() == 1);
  CHECK(validate_well_formed(load_trace_text("T1 rel m\n")).size() == 1);
}

TEST_CASE("validate: fig 2 trace is well formed") {
  Trace tr = test::load_golden("fig_delayed.trace");
  REQUIRE(tr.events.size() == 16);
  CHECK(validate_well_formed(tr).empty());
}

TEST_CASE("event_distance") {
  Trace tr = test::load_golden("fig_simple_race.trace");
  CHECK(event_distance(tr.events[3], tr.events[3]) == 0);
  CHECK(event_distance(tr.events[0], tr.events[7]) == 7);
  Event a, b;
  a.pos = 10;
  b.pos = 4;
  CHECK(event_distance(a, b) == 6);
}

TEST_CASE("serialize: trivial cases") {
  CHECK(serialize_trace(load_trace_text("")).empty());
  CHECK(serialize_trace(load_trace_text("T1 wr x\n")) == "T1 wr x\n");
}

TEST_CASE("serialize then parse is the identity on annotated traces") {
  // Deterministic mini-fuzz over desugared op mixes.
  uint64_t seed = 12345;
  auto next = [&seed]() {
    seed = seed * 6364136223846793005ull + 1442695040888963407ull;
    return static_cast<uint32_t>(seed >> 33);
  };
  for (int iter = 0; iter < 200; ++iter) {
    std::string text;
    int n = static_cast<int>(next() % 20);
    for (int i = 0; i < n; ++i) {
      const char* threads[] = {"T1", "T2", "T3"};
      const char* ops[] = {"wr", "rd", "acq", "rel"};
      const char* objs[] = {"x", "y", "m"};
      text += threads[next() % 3];
      text += ' ';
      text += ops[next() % 4];
      text += ' ';
      text += objs[next() % 3];
      if (next() % 4 == 0) text += " @f.c:1";
      text += '\n';
    }
    Trace tr = load_trace_text(text);
    Trace rt = load_trace_text(serialize_trace(tr));
    REQUIRE(rt.events.size() == tr.events.size());
    for (size_t i = 0; i < tr.events.size(); ++i) {
      CHECK(rt.events[i].kind == tr.events[i].kind);
      CHECK(rt.events[i].inst == tr.events[i].inst);
      CHECK(rt.events[i].loc == tr.events[i].loc);
      CHECK(tr.thread_name(tr.events[i].thread) == rt.thread_name(rt.events[i].thread));
    }
  }
}

TEST_CASE("annotate: sum of write counters equals number of writes") {
  Trace tr = test::load_golden("fig_transfer4.trace");
  std::map<VarId, uint32_t> max_inst;
  size_t writes = 0;
  for (const Event& e : tr.events) {
    if (!e.is_write()) continue;
    ++writes;
    max_inst[e.object] = std::max(max_inst[e.object], e.inst);
  }
  size_t total = 0;
  for (auto& [v, c] : max_inst) total += c;
  CHECK(total == writes);
}

TEST_CASE("desugared synthetics are immediately nested around one access") {
  auto evs = desugar(parse_trace("T1 vwr v\nT1 fork T2\nT2 vrd w\nT1 join T2\n"));
  for (const RawEvent& e : evs) {
    CHECK(e.op != RawOp::Vwr);
    CHECK(e.op != RawOp::Vrd);
    CHECK(e.op != RawOp::Fork);
    CHECK(e.op != RawOp::Join);
  }
  // acq, one access, rel triples, adjacent
  REQUIRE(evs.size() % 3 == 0);
  for (size_t i = 0; i < evs.size(); i += 3) {
    CHECK(evs[i].op == RawOp::Acq);
    CHECK((evs[i + 1].op == RawOp::Wr || evs[i + 1].op == RawOp::Rd));
    CHECK(evs[i + 2].op == RawOp::Rel);
    CHECK(evs[i].object == evs[i + 2].object);
    CHECK(evs[i].thread == evs[i + 1].thread);
  }
}
