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

#ifndef RAPTOR_ENGINE_HPP_
#define RAPTOR_ENGINE_HPP_

#include <stdexcept>
#include <string>
#include <vector>

#include "raptor/lifecycle.hpp"
#include "raptor/race.hpp"
#include "raptor/state.hpp"
#include "raptor/trace.hpp"

// The online analysis. Each event updates the per-owner PO/HB/CP/CCP sets;
// conditions are always evaluated against the pre-event (for releases:
// pre-phase) state, so set iteration order never matters.

namespace raptor {

struct EngineOptions {
  bool removal = true;          // run obsolescence sweeps during the run
  bool fast_prerelease = true;  // precompute pre-release lookups per released lock
  bool check_rule_a = false;    // cross-check the Rule (a) table against a full scan
};

class Engine {
 public:
  Engine(uint32_t num_threads, uint32_t num_vars, uint32_t num_locks,
         EngineOptions opts = {})
      : opts_(opts) {
    st_.num_threads = num_threads;
    st_.num_vars = num_vars;
    st_.num_locks = num_locks;
    st_.var_write_owners.resize(num_vars);
    st_.var_read_owners.resize(num_vars);
    st_.lock_owners.resize(num_locks);
    st_.held.resize(num_threads);
    st_.lock_holder.assign(num_locks, 0);
    st_.write_count.assign(num_vars, 0);
    st_.lock_instance.assign(num_locks, 0);
    st_.rule_a.resize(num_vars);
    st_.hb_ref.resize(num_locks);
    st_.ccp_ref.resize(num_locks);
    st_.lock_dirty.assign(num_locks, 0);

    // The fake initial access Wr x^0 for every variable: PO holds xi and
    // every xi_T so the first write and any pre-first-write reads appear
    // ordered to it without special-casing.
    for (uint32_t x = 0; x < num_vars; ++x) {
      OwnerIdx oi = new_owner(OwnerKind::WriteInstance, x, 0, 0, kNoPos, "");
      Owner& o = st_.owner(oi);
      o.po.insert(elem::xi());
      for (uint32_t t = 0; t < num_threads; ++t) o.po.insert(elem::xi_t(t));
    }
  }

  static Engine for_trace(const Trace& tr, EngineOptions opts = {}) {
    return Engine(static_cast<uint32_t>(tr.threads.size()),
                  static_cast<uint32_t>(tr.variables.size()),
                  static_cast<uint32_t>(tr.locks.size()), opts);
  }

  AnalysisState& state() { return st_; }
  const AnalysisState& state() const { return st_; }
  const EngineOptions& options() const { return opts_; }

  /// Processes one event (trace order) and returns the race verdicts that
  /// became determinable at this event.
  std::vector<RaceReport> process_event(const Event& e) {
    size_t before = st_.pending_reports.size();
    switch (e.kind) {
      case EventKind::Write: handle_write(e); break;
      case EventKind::Read: handle_read(e); break;
      case EventKind::Acquire: handle_acquire(e); break;
      case EventKind::Release:
        pre_release(e);
        handle_release(e);
        break;
    }
    next_pos_ = e.pos + 1;
    if (opts_.removal) lifecycle::sweep_lock_owners(st_);
    track_peak();
    return drain(before);
  }

  /// End of trace: simulates the release of all still-held locks
  /// (innermost-first per thread, threads in id order), then runs the
  /// terminal verdict pass over every live owner.
  std::vector<RaceReport> finalize() {
    size_t before = st_.pending_reports.size();
    for (uint32_t t = 0; t < st_.num_threads; ++t) {
      while (!st_.held[t].empty()) {
        HeldLock h = st_.held[t].back();
        Event ev;
        ev.pos = next_pos_++;
        ev.thread = t;
        ev.kind = EventKind::Release;
        ev.object = h.lock;
        ev.inst = h.inst;
        pre_release(ev);
        handle_release(ev);
      }
    }
    // Terminal sweep: every adjacency obligation now has a decidable
    // verdict (all CCP sets are empty once no lock is held).
    for (OwnerIdx oi = 0; oi < st_.owners.size(); ++oi) {
      if (!st_.owner(oi).live || !st_.owner(oi).is_access_owner()) continue;
      bool closed = st_.owner(oi).next_write_pos != kNoPos;
      lifecycle::sweep_variable_owner(st_, oi, next_pos_, /*finalizing=*/true,
                                      /*allow_removal=*/opts_.removal && closed);
    }
    // Nothing can trigger Rule (b) after the last event; every lock owner
    // is obsolete at termination.
    if (opts_.removal) {
      for (uint32_t m = 0; m < st_.num_locks; ++m)
        for (OwnerIdx oi : std::vector<OwnerIdx>(st_.lock_owners[m]))
          lifecycle::remove_owner(st_, oi);
    }
    track_peak();
    finalized_ = true;
    return drain(before);
  }

  bool finalized() const { return finalized_; }

  /// All reports so far, in detection order.
  const std::vector<RaceReport>& reports() const { return st_.pending_reports; }

 private:
  OwnerIdx new_owner(OwnerKind kind, uint32_t object, uint32_t inst, ThreadId thread,
                     uint32_t def_pos, const std::string& loc) {
    Owner o;
    o.kind = kind;
    o.object = object;
    o.inst = inst;
    o.thread = thread;
    o.def_pos = def_pos;
    o.loc = loc;
    OwnerIdx oi = static_cast<OwnerIdx>(st_.owners.size());
    st_.owners.push_back(std::move(o));
    st_.live_owners.push_back(oi);
    switch (kind) {
      case OwnerKind::WriteInstance: st_.var_write_owners[object].push_back(oi); break;
      case OwnerKind::ReadInstance: st_.var_read_owners[object].push_back(oi); break;
      case OwnerKind::AcquireInstance: st_.lock_owners[object].push_back(oi); break;
    }
    ++st_.live_owner_count;
    return oi;
  }

  void track_peak() {
    st_.peak_live_owners = std::max(st_.peak_live_owners, st_.live_owner_count);
  }

  std::vector<RaceReport> drain(size_t from) {
    return {st_.pending_reports.begin() + from, st_.pending_reports.end()};
  }

  [[noreturn]] void desync(const Event& e, const char* what) {
    throw std::logic_error("engine/trace desync at pos " + std::to_string(e.pos) + ": " + what);
  }

  // --- Rule (a) -------------------------------------------------------------

  /// Max critical-section instance of lock m containing an access to x that
  /// conflicts with an access by `t` (0 = none). `include_reads` is set for
  /// write events, which conflict with prior reads as well.
  uint32_t rule_a_index(VarId x, LockId m, ThreadId t, bool include_reads) const {
    const RuleAIndex& tab = st_.rule_a[x];
    uint32_t j = tab.max_write_inst(m, t);
    if (include_reads) j = std::max(j, tab.max_read_inst(m, t));
    return j;
  }

  /// Reference implementation: scan the retained owners' HB star entries.
  uint32_t rule_a_scan(VarId x, LockId m, ThreadId t, bool include_reads) const {
    uint32_t j = 0;
    auto visit = [&](OwnerIdx oi) {
      const Owner& o = st_.owner(oi);
      if (!o.live || o.po.contains(elem::thread(t))) return;
      const HbLockEntry* he = o.hb_locks.find(m);
      if (he && he->star) j = std::max(j, he->index);
    };
    for (OwnerIdx oi : st_.var_write_owners[x]) visit(oi);
    if (include_reads)
      for (OwnerIdx oi : st_.var_read_owners[x]) visit(oi);
    return j;
  }

  void establish_rule_a(const Event& e, bool include_reads) {
    for (const HeldLock& h : st_.held[e.thread]) {
      uint32_t j = rule_a_index(e.object, h.lock, e.thread, include_reads);
      if (opts_.check_rule_a) {
        uint32_t js = rule_a_scan(e.object, h.lock, e.thread, include_reads);
        if (js != j) desync(e, "rule (a) table/scan divergence");
      }
      if (j == 0) continue;
      OwnerIdx oi = st_.find_lock_owner(h.lock, j);
      if (oi != kNoOwner && st_.owner(oi).live)
        st_.add_cp(oi, elem::thread(e.thread));
    }
  }

  // --- write ----------------------------------------------------------------

  void handle_write(const Event& e) {
    VarId x = e.object;
    if (e.inst != st_.write_count[x] + 1) desync(e, "write instance");
    ThreadId t = e.thread;

    establish_rule_a(e, /*include_reads=*/true);

    // xi joins every set of the generation i-1 owners that contains the
    // writing thread; CCP conditionals on the thread are mirrored for xi.
    auto add_xi_links = [&](OwnerIdx oi) {
      Owner& o = st_.owner(oi);
      SimpleElem tt = elem::thread(t);
      if (o.po.contains(tt)) st_.add_po(oi, elem::xi());
      if (o.hb.contains(tt)) st_.add_hb(oi, elem::xi());
      if (o.cp.contains(tt)) st_.add_cp(oi, elem::xi());
      std::vector<CondElem> mirrors;
      for (const CondElem& c : o.ccp.items())
        if (c.target == tt) mirrors.push_back(c);
      for (const CondElem& c : mirrors) st_.add_ccp(oi, c.cond_lock, elem::xi(), c.cond_index);
      o.next_write_pos = e.pos;
      o.next_write_loc = e.loc;
    };

    OwnerIdx prev_w = st_.find_write_owner(x, e.inst - 1);
    if (prev_w != kNoOwner) add_xi_links(prev_w);
    std::vector<OwnerIdx> prev_reads;
    for (OwnerIdx oi : st_.var_read_owners[x])
      if (st_.owner(oi).inst == e.inst - 1) prev_reads.push_back(oi);
    for (OwnerIdx oi : prev_reads) add_xi_links(oi);

    // The write closes generation i-1: current canonical reads become history.
    st_.rule_a[x].freeze_reads();
    for (const HeldLock& h : st_.held[t]) st_.rule_a[x].record_write(h.lock, t, h.inst);

    OwnerIdx oi = new_owner(OwnerKind::WriteInstance, x, e.inst, t, e.pos, e.loc);
    st_.add_po(oi, elem::thread(t));
    st_.add_hb(oi, elem::thread(t));
    for (const HeldLock& h : st_.held[t]) st_.add_hb_lock(oi, h.lock, h.inst, /*star=*/true);
    st_.write_count[x] = e.inst;

    if (opts_.removal) {
      if (prev_w != kNoOwner)
        lifecycle::sweep_variable_owner(st_, prev_w, e.pos, false, true);
      for (OwnerIdx r : prev_reads)
        lifecycle::sweep_variable_owner(st_, r, e.pos, false, true);
    }
  }

  // --- read -----------------------------------------------------------------

  void handle_read(const Event& e) {
    VarId x = e.object;
    if (e.inst != st_.write_count[x]) desync(e, "read instance");
    ThreadId t = e.thread;

    establish_rule_a(e, /*include_reads=*/false);

    // xi_T joins every set of the write owner x^i that contains the reader.
    OwnerIdx w = st_.find_write_owner(x, e.inst);
    if (w != kNoOwner) {
      Owner& o = st_.owner(w);
      SimpleElem tt = elem::thread(t);
      SimpleElem marker = elem::xi_t(t);
      if (o.po.contains(tt)) st_.add_po(w, marker);
      if (o.hb.contains(tt)) st_.add_hb(w, marker);
      if (o.cp.contains(tt)) st_.add_cp(w, marker);
      std::vector<CondElem> mirrors;
      for (const CondElem& c : o.ccp.items())
        if (c.target == tt) mirrors.push_back(c);
      for (const CondElem& c : mirrors) st_.add_ccp(w, c.cond_lock, marker, c.cond_index);
      // Track the write->read obligation against the canonical read.
      bool found = false;
      for (auto& ob : o.readers)
        if (ob.thread == t) {
          ob.read_pos = e.pos;
          ob.read_loc = e.loc;
          found = true;
        }
      if (!found) o.readers.push_back({t, e.pos, e.loc});
    }

    st_.rule_a[x].reset_current_read(t);
    for (const HeldLock& h : st_.held[t]) st_.rule_a[x].record_read(h.lock, t, h.inst);

    // (Re)initialize the read owner; a prior read by the same thread in this
    // generation is superseded, so its lazy CP/CCP state is cleared.
    OwnerIdx oi = st_.find_read_owner(x, e.inst, t);
    if (oi != kNoOwner) {
      reset_read_owner(oi, e);
    } else {
      oi = new_owner(OwnerKind::ReadInstance, x, e.inst, t, e.pos, e.loc);
    }
    st_.add_po(oi, elem::thread(t));
    st_.add_hb(oi, elem::thread(t));
    for (const HeldLock& h : st_.held[t]) st_.add_hb_lock(oi, h.lock, h.inst, /*star=*/true);
  }

  void reset_read_owner(OwnerIdx oi, const Event& e) {
    Owner& o = st_.owner(oi);
    if (st_.delta_log) {
      for (SimpleElem s : o.po.items()) st_.log(oi, SetId::PO, false, s);
      for (SimpleElem s : o.hb.items()) st_.log(oi, SetId::HB, false, s);
      for (SimpleElem s : o.cp.items()) st_.log(oi, SetId::CP, false, s);
      for (const auto& he : o.hb_locks.items()) {
        Delta d;
        d.owner = oi;
        d.set = SetId::HB;
        d.added = false;
        d.shape = Delta::Shape::HbLock;
        d.hb_entry = he;
        st_.delta_log->push_back(d);
      }
      for (const auto& c : o.ccp.items()) {
        Delta d;
        d.owner = oi;
        d.set = SetId::CCP;
        d.added = false;
        d.shape = Delta::Shape::Cond;
        d.cond = c;
        st_.delta_log->push_back(d);
      }
    }
    for (const auto& he : o.hb_locks.items())
      if (!o.cp.contains(elem::lock_plain(he.lock))) st_.ref_drop(st_.hb_ref, he.lock, he.index);
    for (const auto& c : o.ccp.items()) st_.ref_drop(st_.ccp_ref, c.cond_lock, c.cond_index);
    o.po.clear();
    o.hb.clear();
    o.hb_locks.clear();
    o.cp.clear();
    o.ccp.clear();
    o.def_pos = e.pos;
    o.loc = e.loc;
    o.rw_done = false;
  }

  // --- acquire ----------------------------------------------------------------

  void handle_acquire(const Event& e) {
    LockId m = e.object;
    ThreadId t = e.thread;
    if (st_.lock_holder[m] != 0) desync(e, "acquire of held lock");

    SimpleElem mplain = elem::lock_plain(m);
    for_each_live([&](OwnerIdx oi) {
      Owner& o = st_.owner(oi);
      bool cp_has_lock = o.cp.contains(mplain);
      std::vector<CondElem> via;  // (LockPlain(m)|n^k) elements, pre-state
      for (const CondElem& c : o.ccp.items())
        if (c.target == mplain) via.push_back(c);
      const HbLockEntry* he = o.hb_locks.find(m);

      if (cp_has_lock) st_.add_cp(oi, elem::thread(t));
      for (const CondElem& c : via) st_.add_ccp(oi, c.cond_lock, elem::thread(t), c.cond_index);
      if (he) {
        st_.add_hb(oi, elem::thread(t));
        st_.add_ccp(oi, m, elem::thread(t), he->index);
      }
    });

    OwnerIdx oi = new_owner(OwnerKind::AcquireInstance, m, e.inst, t, e.pos, e.loc);
    st_.add_po(oi, elem::thread(t));
    st_.add_hb(oi, elem::thread(t));
    st_.held[t].push_back({m, e.inst});
    st_.lock_holder[m] = t + 1;
    st_.lock_instance[m] = e.inst;
  }

  // --- release ----------------------------------------------------------------

  /// Rule (b): conditionals on the released lock m either fire (the section
  /// they await turned out CP ordered to this release) or transfer to the
  /// lock(s) the CP ordering still depends on.
  ///
  /// Transfers through m itself matter: a conditional (sigma|m^j) may be
  /// answerable only via (T|m^k) in some CCP(m^l), l >= j, with k < j --
  /// the premise is itself still lazy, recorded against a smaller instance
  /// of the same lock. The pass therefore saturates: a conditional's index
  /// is lowered along such self-edges until the trigger/transfer checks are
  /// evaluated at the smallest reachable instance. Indices strictly
  /// decrease, so this terminates.
  void pre_release(const Event& e) {
    LockId m = e.object;
    ThreadId t = e.thread;
    if (st_.lock_holder[m] != t + 1) desync(e, "release of unheld lock");
    SimpleElem tt = elem::thread(t);

    if (opts_.fast_prerelease) {
      // Snapshot of the m lock owners' pre-phase state:
      //   max_trigger   = max l with Thread(t) in CP(m^l)
      //   self[k]       = max l with (Thread(t)|m^k) in CCP(m^l)
      //   ext (n, k, L) = transfers to other locks, L = max such l
      uint32_t max_trigger = 0;
      std::vector<std::pair<uint32_t, uint32_t>> self;            // (k, max l)
      std::vector<std::tuple<LockId, uint32_t, uint32_t>> ext;    // (n, k, max l)
      for (OwnerIdx li : st_.lock_owners[m]) {
        const Owner& lo = st_.owner(li);
        if (!lo.live) continue;
        if (lo.cp.contains(tt)) max_trigger = std::max(max_trigger, lo.inst);
        for (const CondElem& c : lo.ccp.items()) {
          if (c.target != tt) continue;
          if (c.cond_lock == m) {
            bool merged = false;
            for (auto& [k, l] : self)
              if (k == c.cond_index) {
                l = std::max(l, lo.inst);
                merged = true;
              }
            if (!merged) self.emplace_back(c.cond_index, lo.inst);
          } else {
            bool merged = false;
            for (auto& [n, k, l] : ext)
              if (n == c.cond_lock && k == c.cond_index) {
                l = std::max(l, lo.inst);
                merged = true;
              }
            if (!merged) ext.emplace_back(c.cond_lock, c.cond_index, lo.inst);
          }
        }
      }

      // Smallest instance reachable from j along self-edges.
      auto lowest = [&](uint32_t j) {
        uint32_t cur = j;
        bool moved = true;
        while (moved) {
          moved = false;
          for (const auto& [k, l] : self)
            if (l >= cur && k < cur) {
              cur = k;
              moved = true;
            }
        }
        return cur;
      };

      for_each_live([&](OwnerIdx oi) {
        Owner& o = st_.owner(oi);
        auto [b, eidx] = o.ccp.range_of(m);
        if (b == eidx) return;
        std::vector<CondElem> conds(o.ccp.items().begin() + b, o.ccp.items().begin() + eidx);
        for (const CondElem& c : conds) {
          uint32_t j = lowest(c.cond_index);
          if (max_trigger >= j) st_.add_cp(oi, c.target);
          for (const auto& [n, k, l] : ext)
            if (l >= j) st_.add_ccp(oi, n, c.target, k);
        }
      });
    } else {
      // Reference path: literal per-conditional saturation against the
      // pre-phase snapshot of the m lock owners' CP and CCP sets.
      std::vector<std::pair<uint32_t, SimpleSet>> lock_cp;  // (inst, CP of m^inst)
      std::vector<std::pair<uint32_t, CondSet>> lock_ccp;
      for (OwnerIdx li : st_.lock_owners[m]) {
        const Owner& lo = st_.owner(li);
        if (!lo.live) continue;
        lock_cp.emplace_back(lo.inst, lo.cp);
        lock_ccp.emplace_back(lo.inst, lo.ccp);
      }
      for_each_live([&](OwnerIdx oi) {
        Owner& o = st_.owner(oi);
        auto [b, eidx] = o.ccp.range_of(m);
        if (b == eidx) return;
        std::vector<std::pair<SimpleElem, uint32_t>> work;
        for (size_t ci = b; ci < eidx; ++ci)
          work.emplace_back(o.ccp.items()[ci].target, o.ccp.items()[ci].cond_index);
        std::vector<std::pair<SimpleElem, uint32_t>> seen = work;
        while (!work.empty()) {
          auto [sigma, j] = work.back();
          work.pop_back();
          for (const auto& [inst, cpset] : lock_cp)
            if (inst >= j && cpset.contains(tt)) {
              st_.add_cp(oi, sigma);
              break;
            }
          for (const auto& [inst, ccpset] : lock_ccp) {
            if (inst < j) continue;
            for (const CondElem& lc : ccpset.items()) {
              if (lc.target != tt) continue;
              if (lc.cond_lock != m) {
                st_.add_ccp(oi, lc.cond_lock, sigma, lc.cond_index);
              } else if (lc.cond_index < j) {
                // Premise still lazy on an earlier instance of m itself.
                std::pair<SimpleElem, uint32_t> next{sigma, lc.cond_index};
                bool known = false;
                for (auto& s : seen)
                  if (s == next) known = true;
                if (!known) {
                  seen.push_back(next);
                  work.push_back(next);
                }
              }
            }
          }
        }
      });
    }
  }

  void handle_release(const Event& e) {
    LockId m = e.object;
    ThreadId t = e.thread;
    SimpleElem tt = elem::thread(t);

    std::vector<OwnerIdx> shrunk;
    for_each_live([&](OwnerIdx oi) {
      Owner& o = st_.owner(oi);
      if (o.cp.contains(tt)) st_.add_cp(oi, elem::lock_plain(m));
      std::vector<CondElem> conds;
      for (const CondElem& c : o.ccp.items())
        if (c.target == tt && c.cond_lock != m) conds.push_back(c);
      for (const CondElem& c : conds)
        st_.add_ccp(oi, c.cond_lock, elem::lock_plain(m), c.cond_index);
      if (o.hb.contains(tt)) st_.add_hb_lock(oi, m, e.inst, /*star=*/false);
      if (purge_ccp_lock(oi, m) && o.is_access_owner()) shrunk.push_back(oi);
    });

    auto& stack = st_.held[t];
    if (stack.empty() || stack.back().lock != m) desync(e, "non-LIFO release");
    stack.pop_back();
    st_.lock_holder[m] = 0;

    if (opts_.removal)
      for (OwnerIdx oi : shrunk)
        lifecycle::sweep_variable_owner(st_, oi, e.pos, false, true);
  }

  /// Removes all CCP elements conditional on m from one owner; true if any.
  bool purge_ccp_lock(OwnerIdx oi, LockId m) {
    Owner& o = st_.owner(oi);
    std::vector<CondElem> removed;
    o.ccp.erase_lock(m, &removed);
    for (const CondElem& c : removed) {
      if (st_.delta_log) {
        Delta d;
        d.owner = oi;
        d.set = SetId::CCP;
        d.added = false;
        d.shape = Delta::Shape::Cond;
        d.cond = c;
        st_.delta_log->push_back(d);
      }
      st_.ref_drop(st_.ccp_ref, c.cond_lock, c.cond_index);
    }
    return !removed.empty();
  }

  template <class F>
  void for_each_live(F&& f) {
    // Owner indexes are stable; new owners created during f would not be
    // visited (none of the handlers create owners inside these loops).
    compact_live();
    size_t n = st_.live_owners.size();
    for (size_t i = 0; i < n; ++i) {
      OwnerIdx oi = st_.live_owners[i];
      if (st_.owners[oi].live) f(oi);
    }
  }

  void compact_live() {
    auto& lv = st_.live_owners;
    if (lv.size() < 32 || st_.live_owner_count * 2 > lv.size()) return;
    size_t w = 0;
    for (size_t r = 0; r < lv.size(); ++r)
      if (st_.owners[lv[r]].live) lv[w++] = lv[r];
    lv.resize(w);
  }

  EngineOptions opts_;
  AnalysisState st_;
  uint32_t next_pos_ = 0;
  bool finalized_ = false;
};

/// Runs the whole trace through a fresh engine and finalizes.
inline std::vector<RaceReport> run_engine(const Trace& tr, EngineOptions opts = {},
                                          AnalysisState* out_state = nullptr) {
  Engine eng = Engine::for_trace(tr, opts);
  for (const Event& e : tr.events) eng.process_event(e);
  eng.finalize();
  std::vector<RaceReport> reports = eng.reports();
  sort_races(reports);
  if (out_state) *out_state = eng.state();
  return reports;
}

}  // namespace raptor

#endif  // RAPTOR_ENGINE_HPP_
