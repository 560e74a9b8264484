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

#ifndef RAPTOR_INVARIANTS_HPP_
#define RAPTOR_INVARIANTS_HPP_

#include <optional>
#include <string>
#include <vector>

#include "raptor/engine.hpp"
#include "raptor/oracle.hpp"

// Mechanical check of the seven analysis-state invariants against the
// brute-force prefix oracle. The engine must have run in no-removal mode
// over events 0..k of the trace.
//
// The matching predicate comp(sigma, e'):
//   Thread(T)  matches any e' executed by T
//   LockPlain(m) matches any executed Rel m^j
//   xi   of owner (x,i,.) matches Wr x^{i+1}
//   xi_T of owner x^i     matches the canonical (latest) Rd x^i_T
//
// Thread elements are seeded anticipatorily at owner initialization (the
// owner's own thread), so the PO/HB thread checks accept the owner thread
// without a later witness event. The synthetic Wr x^0 owners carry their
// markers by construction and are skipped for marker checks.

namespace raptor {

struct InvariantViolation {
  std::string owner;
  std::string invariant;
  std::string detail;
};

namespace detail_inv {

struct PrefixIndex {
  const Trace& tr;
  size_t n;
  // (var, inst) -> write pos
  std::map<std::pair<VarId, uint32_t>, uint32_t> write_at;
  // (var, inst, thread) -> canonical (latest) read pos within prefix
  std::map<std::tuple<VarId, uint32_t, ThreadId>, uint32_t> read_at;
  // (lock, inst) -> acquire / release pos
  std::map<std::pair<LockId, uint32_t>, uint32_t> acq_at, rel_at;
  std::vector<std::vector<uint32_t>> events_of_thread;

  PrefixIndex(const Trace& tr_, size_t n_) : tr(tr_), n(n_) {
    events_of_thread.resize(tr.threads.size());
    for (size_t p = 0; p < n; ++p) {
      const Event& e = tr.events[p];
      events_of_thread[e.thread].push_back(e.pos);
      switch (e.kind) {
        case EventKind::Write: write_at[{e.object, e.inst}] = e.pos; break;
        case EventKind::Read: read_at[{e.object, e.inst, e.thread}] = e.pos; break;
        case EventKind::Acquire: acq_at[{e.object, e.inst}] = e.pos; break;
        case EventKind::Release: rel_at[{e.object, e.inst}] = e.pos; break;
      }
    }
  }

  std::optional<uint32_t> owner_event_pos(const Owner& o) const {
    switch (o.kind) {
      case OwnerKind::WriteInstance: {
        auto it = write_at.find({o.object, o.inst});
        if (it == write_at.end()) return std::nullopt;
        return it->second;
      }
      case OwnerKind::ReadInstance: {
        auto it = read_at.find({o.object, o.inst, o.thread});
        if (it == read_at.end()) return std::nullopt;
        return it->second;
      }
      case OwnerKind::AcquireInstance: {
        auto it = acq_at.find({o.object, o.inst});
        if (it == acq_at.end()) return std::nullopt;
        return it->second;
      }
    }
    return std::nullopt;
  }

  /// Positions of events matched by comp(sigma, .) for this owner.
  std::vector<uint32_t> comp_positions(const Owner& o, SimpleElem sigma) const {
    std::vector<uint32_t> out;
    if (elem::is_thread(sigma)) {
      return events_of_thread[elem::id(sigma)];
    }
    if (elem::is_lock_plain(sigma)) {
      for (auto& [key, pos] : rel_at)
        if (key.first == elem::id(sigma)) out.push_back(pos);
      return out;
    }
    if (elem::is_xi(sigma)) {
      auto it = write_at.find({o.object, o.inst + 1});
      if (it != write_at.end()) out.push_back(it->second);
      return out;
    }
    // xi_T: the canonical read of this generation by T (write owners only)
    auto it = read_at.find({o.object, o.inst, elem::id(sigma)});
    if (it != read_at.end()) out.push_back(it->second);
    return out;
  }
};

}  // namespace detail_inv

/// Verifies the PO, HB, HB-index, HB-critical-section, CP, CP-rule-A and
/// CCP-constraint invariants for every live owner after events 0..k.
inline std::vector<InvariantViolation> check_invariants(const AnalysisState& st,
                                                        const Trace& tr,
                                                        const OracleResult& prefix, size_t k) {
  size_t n = k + 1;
  std::vector<InvariantViolation> out;
  detail_inv::PrefixIndex ix(tr, n);
  NameTable nt(tr);

  auto flag = [&](const Owner& o, const char* inv, std::string detail) {
    out.push_back({format_owner(nt, o), inv, std::move(detail)});
  };

  // Universe of candidate elements for the by-equality checks.
  std::vector<SimpleElem> universe;
  for (uint32_t t = 0; t < tr.threads.size(); ++t) universe.push_back(elem::thread(t));
  for (uint32_t m = 0; m < tr.locks.size(); ++m) universe.push_back(elem::lock_plain(m));
  universe.push_back(elem::xi());
  for (uint32_t t = 0; t < tr.threads.size(); ++t) universe.push_back(elem::xi_t(t));

  for (const Owner& o : st.owners) {
    if (!o.live) continue;
    bool synthetic = o.is_synthetic();
    std::optional<uint32_t> def = synthetic ? std::nullopt : ix.owner_event_pos(o);
    if (!synthetic && !def) continue;  // owner's event beyond the prefix

    // I-PO: thread elements are exactly the owner's thread; markers reflect
    // PO order to the next write / next read by T.
    for (SimpleElem s : o.po.items()) {
      if (elem::is_thread(s)) {
        if (synthetic || elem::id(s) != o.thread)
          flag(o, "I-PO", "foreign thread " + format_simple(nt, s));
      } else if (!synthetic) {
        bool want = false;
        for (uint32_t p : ix.comp_positions(o, s))
          if (prefix.po.at(*def, p)) want = true;
        if (!want) flag(o, "I-PO", "stale marker " + format_simple(nt, s));
      }
    }
    if (!synthetic) {
      for (SimpleElem s : universe) {
        if (elem::is_thread(s) || elem::is_lock_plain(s)) continue;
        if (!o.is_access_owner()) continue;  // markers track access pairs only
        if (elem::is_xi_t(s) && o.kind != OwnerKind::WriteInstance) continue;
        bool want = false;
        for (uint32_t p : ix.comp_positions(o, s))
          if (prefix.po.at(*def, p)) want = true;
        if (want && !o.po.contains(s))
          flag(o, "I-PO", "missing marker " + format_simple(nt, s));
      }
    }

    // I-HB (thread-like part).
    for (SimpleElem s : o.hb.items()) {
      if (synthetic) {
        flag(o, "I-HB", "synthetic owner grew HB");
        continue;
      }
      if (elem::is_thread(s) && elem::id(s) == o.thread) continue;  // anticipatory
      if (elem::is_marker(s) && !o.is_access_owner()) {
        flag(o, "I-HB", "marker on a lock owner");
        continue;
      }
      bool want = false;
      for (uint32_t p : ix.comp_positions(o, s))
        if (prefix.hb.at(*def, p)) want = true;
      if (!want) flag(o, "I-HB", "unjustified " + format_simple(nt, s));
    }
    if (!synthetic) {
      for (SimpleElem s : universe) {
        if (elem::is_lock_plain(s)) continue;
        if (elem::is_marker(s) && !o.is_access_owner()) continue;
        if (elem::is_xi_t(s) && o.kind != OwnerKind::WriteInstance) continue;
        if (elem::is_thread(s) && elem::id(s) == o.thread) continue;
        bool want = false;
        for (uint32_t p : ix.comp_positions(o, s))
          if (prefix.hb.at(*def, p)) want = true;
        if (want && !o.hb.contains(s))
          flag(o, "I-HB", "missing " + format_simple(nt, s));
      }

      // I-HB-index: each lock entry names the earliest HB-reachable release;
      // I-HB-critical-section: the star marks bracketing by the owner's own
      // critical section.
      for (uint32_t m = 0; m < tr.locks.size(); ++m) {
        const HbLockEntry* he = o.hb_locks.find(m);
        std::optional<uint32_t> min_rel;
        for (auto& [key, rpos] : ix.rel_at) {
          if (key.first != m) continue;
          if (prefix.hb.at(*def, rpos) && (!min_rel || key.second < *min_rel))
            min_rel = key.second;
        }
        if (!he) {
          if (min_rel)
            flag(o, "I-HBidx", "missing entry for " + nt.lock(m) + "^" + std::to_string(*min_rel));
          continue;
        }
        if (min_rel && *min_rel < he->index)
          flag(o, "I-HBidx", "entry " + format_hb_entry(nt, *he) + " but HB to release " +
                                 std::to_string(*min_rel));
        auto rel_it = ix.rel_at.find({m, he->index});
        if (rel_it != ix.rel_at.end() && (!min_rel || *min_rel != he->index))
          flag(o, "I-HBidx", "entry " + format_hb_entry(nt, *he) + " not HB-justified");
        // star: Acq m^i PO e_rho PO Rel m^i on the owner's own thread
        if (o.is_access_owner()) {
          auto acq_it = ix.acq_at.find({m, he->index});
          bool bracketed = false;
          if (acq_it != ix.acq_at.end()) {
            const Event& acq = tr.events[acq_it->second];
            bool rel_ok = rel_it == ix.rel_at.end() || rel_it->second > *def;
            bracketed = acq.thread == tr.events[*def].thread && acq.pos < *def && rel_ok;
          }
          if (he->star != bracketed)
            flag(o, "I-HBcs", "star flag wrong on " + format_hb_entry(nt, *he));
        } else if (he->star) {
          flag(o, "I-HBcs", "star entry on a lock owner");
        }
      }
    }

    // I-CCP-constraint: every conditional names a currently ongoing
    // critical section's lock.
    for (const CondElem& c : o.ccp.items()) {
      if (st.lock_holder[c.cond_lock] == 0)
        flag(o, "I-CCP", "conditional on free lock " + format_cond(nt, c));
      if (elem::is_xi_t(c.target) && o.kind != OwnerKind::WriteInstance)
        flag(o, "I-CCP", "xi_T conditional on a non-write owner");
    }

    // I-CP: CP(rho) plus triggered conditionals equals the set of sigma
    // with an executed CP-ordered witness, per comp.
    if (!synthetic) {
      for (SimpleElem s : universe) {
        if (elem::is_marker(s) && !o.is_access_owner()) continue;
        if (elem::is_xi_t(s) && o.kind != OwnerKind::WriteInstance) continue;

        bool lhs = o.cp.contains(s);
        if (!lhs) {
          for (const CondElem& c : o.ccp.items()) {
            if (c.target != s) continue;
            // triggered when some executed CP(Rel n^k, Acq n^j) exists
            auto rel_it = ix.rel_at.find({c.cond_lock, c.cond_index});
            if (rel_it == ix.rel_at.end()) continue;
            for (auto& [key, apos] : ix.acq_at) {
              if (key.first != c.cond_lock) continue;
              if (prefix.cp.at(rel_it->second, apos)) {
                lhs = true;
                break;
              }
            }
            if (lhs) break;
          }
        }
        bool rhs = false;
        for (uint32_t p : ix.comp_positions(o, s))
          if (prefix.cp.at(*def, p)) rhs = true;
        if (lhs != rhs)
          flag(o, "I-CP",
               std::string(lhs ? "spurious " : "missing ") + format_simple(nt, s));
      }
    }
  }

  // I-RuleA: for every Rule-(a)-patterned pair of critical sections on one
  // lock whose second conflicting access has executed, the second access's
  // thread is eagerly in CP of some mediating acquire owner.
  {
    auto cs = detail::critical_sections(tr, n);
    std::vector<uint32_t> horizon = detail::shadow_horizon(tr, n);
    for (size_t i = 0; i < cs.size(); ++i) {
      if (!cs[i].closed) continue;
      for (size_t j = 0; j < cs.size(); ++j) {
        if (i == j || cs[i].lock != cs[j].lock || cs[i].inst >= cs[j].inst) continue;
        for (uint32_t p : cs[i].accesses) {
          for (uint32_t q : cs[j].accesses) {
            if (p >= q || horizon[p] <= q) continue;
            if (!detail::conflicting(tr.events[p], tr.events[q])) continue;
            ThreadId t = tr.events[q].thread;
            bool found = false;
            for (uint32_t l = cs[i].inst; l < cs[j].inst && !found; ++l) {
              OwnerIdx oi = st.find_lock_owner(cs[i].lock, l);
              if (oi != kNoOwner && st.owner(oi).live &&
                  st.owner(oi).cp.contains(elem::thread(t)))
                found = true;
            }
            if (!found) {
              Owner dummy;
              dummy.kind = OwnerKind::AcquireInstance;
              dummy.object = cs[i].lock;
              dummy.inst = cs[i].inst;
              out.push_back({format_owner(nt, dummy), "I-RuleA",
                             "thread " + nt.thread(t) + " not eagerly CP-ordered"});
            }
          }
        }
      }
    }
  }

  return out;
}

/// Runs the engine in no-removal mode and checks the invariants after every
/// event of the prefix 0..upto (default: whole trace). Returns the first
/// violations found, tagged with the event position.
inline std::vector<InvariantViolation> check_invariants_every_event(const Trace& tr,
                                                                    size_t upto = SIZE_MAX) {
  if (upto == SIZE_MAX) upto = tr.size();
  EngineOptions opts;
  opts.removal = false;
  Engine eng = Engine::for_trace(tr, opts);
  for (size_t k = 0; k < upto; ++k) {
    eng.process_event(tr.events[k]);
    OracleResult prefix = knowable_prefix(tr, k);
    auto v = check_invariants(eng.state(), tr, prefix, k);
    if (!v.empty()) {
      for (auto& viol : v) viol.detail += " (after event " + std::to_string(k) + ")";
      return v;
    }
  }
  return {};
}

}  // namespace raptor

#endif  // RAPTOR_INVARIANTS_HPP_
