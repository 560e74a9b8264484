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

#ifndef RAPTOR_EXPLAIN_HPP_
#define RAPTOR_EXPLAIN_HPP_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "raptor/engine.hpp"

// Per-event state-delta capture, in the style of the worked state tables:
// for each event, which elements entered or left which owner's sets.

namespace raptor {

struct EventDeltas {
  uint32_t pos;
  std::string label;
  std::vector<Delta> deltas;
};

struct ExplainResult {
  std::vector<EventDeltas> events;
  std::vector<std::string> owner_labels;  // by OwnerIdx
  std::vector<RaceReport> reports;
};

/// Runs the engine in no-removal mode with delta capture.
inline ExplainResult explain_trace(const Trace& tr, bool fast_prerelease = true) {
  EngineOptions opts;
  opts.removal = false;
  opts.fast_prerelease = fast_prerelease;
  Engine eng = Engine::for_trace(tr, opts);
  std::vector<Delta> log;
  eng.state().delta_log = &log;

  ExplainResult res;
  for (const Event& e : tr.events) {
    log.clear();
    eng.process_event(e);
    res.events.push_back({e.pos, event_label(tr, e), log});
  }
  log.clear();
  eng.state().delta_log = nullptr;
  eng.finalize();
  res.reports = eng.reports();

  NameTable nt(tr);
  for (const Owner& o : eng.state().owners) res.owner_labels.push_back(format_owner(nt, o));
  return res;
}

inline const char* set_name(SetId s) {
  switch (s) {
    case SetId::PO: return "PO";
    case SetId::HB: return "HB";
    case SetId::CP: return "CP";
    case SetId::CCP: return "CCP";
  }
  return "?";
}

inline std::string format_delta_elem(const NameTable& nt, const Delta& d) {
  switch (d.shape) {
    case Delta::Shape::Simple: return format_simple(nt, d.simple);
    case Delta::Shape::HbLock: return format_hb_entry(nt, d.hb_entry);
    case Delta::Shape::Cond: return format_cond(nt, d.cond);
  }
  return "?";
}

/// Keyed delta sets: (event pos, owner label, set, added?) -> elements.
/// PO updates are conventionally omitted from the state tables, so callers
/// usually filter them.
using DeltaTable = std::map<std::tuple<uint32_t, std::string, std::string, bool>,
                            std::set<std::string>>;

inline DeltaTable delta_table(const Trace& tr, const ExplainResult& res,
                              bool include_po = false) {
  NameTable nt(tr);
  DeltaTable out;
  for (const EventDeltas& ed : res.events) {
    for (const Delta& d : ed.deltas) {
      if (!include_po && d.set == SetId::PO) continue;
      out[{ed.pos, res.owner_labels[d.owner], set_name(d.set), d.added}].insert(
          format_delta_elem(nt, d));
    }
  }
  return out;
}

/// Printable listing, one line per (owner, set) with changes per event:
///   Rel m^2: CP(x^1) += {T2, m}
///   Rel m^2: CCP(x^1) -= {(T2|m^1)}
inline std::string format_explain(const Trace& tr, const ExplainResult& res,
                                  const std::set<std::string>& owner_filter = {},
                                  bool include_po = false) {
  NameTable nt(tr);
  std::string out;
  for (const EventDeltas& ed : res.events) {
    // group by (owner, set, added)
    std::map<std::tuple<std::string, uint8_t, bool>, std::vector<std::string>> groups;
    for (const Delta& d : ed.deltas) {
      if (!include_po && d.set == SetId::PO) continue;
      const std::string& ow = res.owner_labels[d.owner];
      if (!owner_filter.empty() && !owner_filter.count(ow)) continue;
      groups[{ow, static_cast<uint8_t>(d.set), d.added}].push_back(format_delta_elem(nt, d));
    }
    for (auto& [key, elems] : groups) {
      out += ed.label;
      out += ": ";
      out += set_name(static_cast<SetId>(std::get<1>(key)));
      out += "(" + std::get<0>(key) + ") ";
      out += std::get<2>(key) ? "+= {" : "-= {";
      for (size_t i = 0; i < elems.size(); ++i) {
        if (i) out += ", ";
        out += elems[i];
      }
      out += "}\n";
    }
  }
  return out;
}

}  // namespace raptor

#endif  // RAPTOR_EXPLAIN_HPP_
