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

#ifndef RAPTOR_STATE_HPP_
#define RAPTOR_STATE_HPP_

#include <algorithm>
#include <cassert>
#include <cstdint>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "raptor/trace.hpp"

// Analysis state: every set owner (write instance x^i, read instance x^i_T,
// acquire instance m^i) carries PO, HB, CP and CCP sets whose elements are
// threads, locks and the xi markers. Elements are packed integers so the
// sets stay small sorted vectors.

namespace raptor {

constexpr uint32_t kNoPos = std::numeric_limits<uint32_t>::max();

/// Thread-like and plain-lock elements (members of PO, HB, CP and the
/// target slot of CCP conditionals), packed as [31:30 tag][29:0 id].
///   tag 0: Thread(id)   tag 1: xi   tag 2: xi_T(id)   tag 3: LockPlain(id)
using SimpleElem = uint32_t;

namespace elem {

constexpr uint32_t kTagShift = 30;
constexpr SimpleElem kXi = 1u << kTagShift;

inline SimpleElem thread(ThreadId t) { return t; }
inline SimpleElem xi() { return kXi; }
inline SimpleElem xi_t(ThreadId t) { return (2u << kTagShift) | t; }
inline SimpleElem lock_plain(LockId m) { return (3u << kTagShift) | m; }

inline uint32_t tag(SimpleElem e) { return e >> kTagShift; }
inline uint32_t id(SimpleElem e) { return e & ((1u << kTagShift) - 1); }
inline bool is_thread(SimpleElem e) { return tag(e) == 0; }
inline bool is_xi(SimpleElem e) { return tag(e) == 1; }
inline bool is_xi_t(SimpleElem e) { return tag(e) == 2; }
inline bool is_lock_plain(SimpleElem e) { return tag(e) == 3; }
inline bool is_marker(SimpleElem e) { return is_xi(e) || is_xi_t(e); }

}  // namespace elem

/// Sorted small set of SimpleElem.
class SimpleSet {
 public:
  bool contains(SimpleElem e) const {
    return std::binary_search(v_.begin(), v_.end(), e);
  }
  bool insert(SimpleElem e) {
    auto it = std::lower_bound(v_.begin(), v_.end(), e);
    if (it != v_.end() && *it == e) return false;
    v_.insert(it, e);
    return true;
  }
  bool erase(SimpleElem e) {
    auto it = std::lower_bound(v_.begin(), v_.end(), e);
    if (it == v_.end() || *it != e) return false;
    v_.erase(it);
    return true;
  }
  bool empty() const { return v_.empty(); }
  size_t size() const { return v_.size(); }
  void clear() { v_.clear(); }
  const std::vector<SimpleElem>& items() const { return v_; }

 private:
  std::vector<SimpleElem> v_;
};

/// HB lock entries: at most one per lock, the minimal HB-reachable release
/// instance; `star` records that the owner's event executed inside that
/// critical section.
struct HbLockEntry {
  LockId lock;
  uint32_t index;
  bool star;
};

class HbLockSet {
 public:
  const HbLockEntry* find(LockId m) const {
    for (const auto& e : v_)
      if (e.lock == m) return &e;
    return nullptr;
  }
  /// Keeps the minimal index per lock; returns true when the set changed.
  bool insert(LockId m, uint32_t index, bool star) {
    for (auto& e : v_) {
      if (e.lock != m) continue;
      if (index < e.index) {  // does not occur for well-formed inputs
        e.index = index;
        e.star = star;
        return true;
      }
      return false;
    }
    v_.push_back({m, index, star});
    return true;
  }
  bool empty() const { return v_.empty(); }
  void clear() { v_.clear(); }
  const std::vector<HbLockEntry>& items() const { return v_; }

 private:
  std::vector<HbLockEntry> v_;
};

/// A CCP element (target | condLock^condIndex): target enters the owner's CP
/// set if the critical section begun at Acq condLock^condIndex turns out CP
/// ordered to the ongoing release of condLock.
struct CondElem {
  LockId cond_lock;
  SimpleElem target;
  uint32_t cond_index;

  bool operator<(const CondElem& o) const {
    if (cond_lock != o.cond_lock) return cond_lock < o.cond_lock;
    return target < o.target;
  }
};

class CondSet {
 public:
  /// Minimal cond_index kept per (target, cond_lock).
  /// Returns 0: no effect, 1: added, 2: replaced a larger index.
  int insert(LockId n, SimpleElem target, uint32_t k) {
    CondElem probe{n, target, k};
    auto it = std::lower_bound(v_.begin(), v_.end(), probe);
    if (it != v_.end() && it->cond_lock == n && it->target == target) {
      if (k < it->cond_index) {
        it->cond_index = k;
        return 2;
      }
      return 0;
    }
    v_.insert(it, probe);
    return 1;
  }
  const CondElem* find(LockId n, SimpleElem target) const {
    CondElem probe{n, target, 0};
    auto it = std::lower_bound(v_.begin(), v_.end(), probe);
    if (it != v_.end() && it->cond_lock == n && it->target == target) return &*it;
    return nullptr;
  }
  /// All elements conditional on lock n (contiguous by the sort order).
  std::pair<size_t, size_t> range_of(LockId n) const {
    CondElem lo{n, 0, 0};
    CondElem hi{n + 1, 0, 0};
    auto b = std::lower_bound(v_.begin(), v_.end(), lo);
    auto e = std::lower_bound(v_.begin(), v_.end(), hi);
    return {static_cast<size_t>(b - v_.begin()), static_cast<size_t>(e - v_.begin())};
  }
  /// Removes all elements conditional on n; the removed elements are
  /// appended to `removed` when non-null.
  void erase_lock(LockId n, std::vector<CondElem>* removed = nullptr) {
    auto [b, e] = range_of(n);
    if (removed)
      for (size_t i = b; i < e; ++i) removed->push_back(v_[i]);
    v_.erase(v_.begin() + b, v_.begin() + e);
  }
  bool any_marker_target() const {
    for (const auto& c : v_)
      if (elem::is_marker(c.target)) return true;
    return false;
  }
  bool has_marker_target(SimpleElem marker) const {
    for (const auto& c : v_)
      if (c.target == marker) return true;
    return false;
  }
  bool empty() const { return v_.empty(); }
  size_t size() const { return v_.size(); }
  void clear() { v_.clear(); }
  const std::vector<CondElem>& items() const { return v_; }

 private:
  std::vector<CondElem> v_;
};

enum class OwnerKind : uint8_t { WriteInstance, ReadInstance, AcquireInstance };

/// One pending write->read verdict of a write owner: has the thread's
/// canonical read of this generation been ordered after the write?
struct ReaderObligation {
  ThreadId thread;
  uint32_t read_pos;
  std::string read_loc;
};

struct Owner {
  OwnerKind kind;
  uint32_t object;  // variable for accesses, lock for acquires
  uint32_t inst;
  ThreadId thread;  // executing thread (for reads: the reading thread)
  uint32_t def_pos = kNoPos;  // position of the defining event (kNoPos for synthetic Wr x^0)
  std::string loc;
  bool live = true;

  SimpleSet po;
  SimpleSet hb;  // thread-like part; lock entries live in hb_locks
  HbLockSet hb_locks;
  SimpleSet cp;  // thread-like and plain-lock elements
  CondSet ccp;

  // Variable-owner verdict bookkeeping.
  uint32_t next_write_pos = kNoPos;  // set once Wr x^{i+1} executes
  std::string next_write_loc;
  std::vector<ReaderObligation> readers;  // write owners only
  bool ww_done = false;                   // write owner: verdict vs next write reached
  bool rw_done = false;                   // read owner: verdict vs next write reached

  bool is_access_owner() const { return kind != OwnerKind::AcquireInstance; }
  bool is_synthetic() const { return kind == OwnerKind::WriteInstance && inst == 0; }
};

using OwnerIdx = uint32_t;
constexpr OwnerIdx kNoOwner = std::numeric_limits<OwnerIdx>::max();

enum class SetId : uint8_t { PO, HB, CP, CCP };

/// Recorded state change, for the explain listing and golden tests.
struct Delta {
  OwnerIdx owner;
  SetId set;
  bool added;  // false = removed
  // One of: simple element, hb lock entry, conditional.
  enum class Shape : uint8_t { Simple, HbLock, Cond } shape;
  SimpleElem simple = 0;
  HbLockEntry hb_entry{0, 0, false};
  CondElem cond{0, 0, 0};
};

/// Per-(variable, lock, thread) record of the maximal critical-section
/// instance containing a conflicting access, split into write and read
/// tables. This is what Rule (a) consults; it survives owner removal.
/// Read entries track the canonical read of the current generation
/// separately so read-owner resets are reflected exactly.
struct RuleAIndex {
  struct Entry {
    LockId lock;
    ThreadId thread;
    uint32_t inst;
  };
  // writes: accumulated over all generations
  std::vector<Entry> writes;
  // reads: frozen max over closed generations
  std::vector<Entry> reads_hist;
  // reads: current generation's canonical read per thread (star set)
  std::vector<Entry> reads_cur;

  static void bump(std::vector<Entry>& v, LockId m, ThreadId t, uint32_t inst) {
    for (auto& e : v) {
      if (e.lock == m && e.thread == t) {
        e.inst = std::max(e.inst, inst);
        return;
      }
    }
    v.push_back({m, t, inst});
  }

  static uint32_t max_other(const std::vector<Entry>& v, LockId m, ThreadId t) {
    uint32_t best = 0;
    for (const auto& e : v)
      if (e.lock == m && e.thread != t) best = std::max(best, e.inst);
    return best;
  }

  void record_write(LockId m, ThreadId t, uint32_t inst) { bump(writes, m, t, inst); }

  void reset_current_read(ThreadId t) {
    reads_cur.erase(std::remove_if(reads_cur.begin(), reads_cur.end(),
                                   [t](const Entry& e) { return e.thread == t; }),
                    reads_cur.end());
  }
  void record_read(LockId m, ThreadId t, uint32_t inst) { bump(reads_cur, m, t, inst); }

  /// Generation closed: current canonical reads become history.
  void freeze_reads() {
    for (const auto& e : reads_cur) bump(reads_hist, e.lock, e.thread, e.inst);
    reads_cur.clear();
  }

  /// Max instance of a write to this variable by a thread other than t
  /// inside a critical section on m (0 = none).
  uint32_t max_write_inst(LockId m, ThreadId t) const { return max_other(writes, m, t); }

  /// Same over reads (canonical instances only).
  uint32_t max_read_inst(LockId m, ThreadId t) const {
    return std::max(max_other(reads_hist, m, t), max_other(reads_cur, m, t));
  }
};

struct HeldLock {
  LockId lock;
  uint32_t inst;
};

/// The complete analysis state plus trace-shaped bookkeeping.
struct AnalysisState {
  uint32_t num_threads = 0;
  uint32_t num_vars = 0;
  uint32_t num_locks = 0;

  std::vector<Owner> owners;
  std::vector<OwnerIdx> live_owners;  // compacted lazily

  // Lookup structures.
  std::vector<std::vector<OwnerIdx>> var_write_owners;  // var -> live write owners (inst asc)
  std::vector<std::vector<OwnerIdx>> var_read_owners;   // var -> live read owners
  std::vector<std::vector<OwnerIdx>> lock_owners;       // lock -> live acquire owners (inst asc)

  std::vector<std::vector<HeldLock>> held;  // thread -> stack
  std::vector<ThreadId> lock_holder;        // lock -> holder + 1, 0 = free
  std::vector<uint32_t> write_count;        // var -> writes so far
  std::vector<uint32_t> lock_instance;      // lock -> acquires so far
  std::vector<RuleAIndex> rule_a;           // per variable

  std::vector<RaceReport> pending_reports;

  // Observer for explain/tests; null when disabled.
  std::vector<Delta>* delta_log = nullptr;

  size_t live_owner_count = 0;
  size_t peak_live_owners = 0;

  Owner& owner(OwnerIdx i) { return owners[i]; }
  const Owner& owner(OwnerIdx i) const { return owners[i]; }

  OwnerIdx find_write_owner(VarId x, uint32_t inst) const {
    for (OwnerIdx i : var_write_owners[x])
      if (owners[i].inst == inst) return i;
    return kNoOwner;
  }
  OwnerIdx find_read_owner(VarId x, uint32_t inst, ThreadId t) const {
    for (OwnerIdx i : var_read_owners[x])
      if (owners[i].inst == inst && owners[i].thread == t) return i;
    return kNoOwner;
  }
  OwnerIdx find_lock_owner(LockId m, uint32_t inst) const {
    for (OwnerIdx i : lock_owners[m])
      if (owners[i].inst == inst) return i;
    return kNoOwner;
  }

  bool holds(ThreadId t, LockId m) const {
    for (const auto& h : held[t])
      if (h.lock == m) return true;
    return false;
  }

  // --- mutation helpers (all set changes go through these so the delta
  // log and reference counts stay consistent) -------------------------------

  void log(OwnerIdx o, SetId s, bool added, SimpleElem e) {
    if (!delta_log) return;
    Delta d;
    d.owner = o;
    d.set = s;
    d.added = added;
    d.shape = Delta::Shape::Simple;
    d.simple = e;
    delta_log->push_back(d);
  }

  bool add_po(OwnerIdx o, SimpleElem e) {
    if (!owners[o].po.insert(e)) return false;
    log(o, SetId::PO, true, e);
    return true;
  }
  bool add_hb(OwnerIdx o, SimpleElem e) {
    if (!owners[o].hb.insert(e)) return false;
    log(o, SetId::HB, true, e);
    return true;
  }
  bool add_cp(OwnerIdx o, SimpleElem e);       // defined below (ref counting)
  bool add_hb_lock(OwnerIdx o, LockId m, uint32_t index, bool star);
  int add_ccp(OwnerIdx o, LockId n, SimpleElem target, uint32_t k);

  // --- lock owner obsolescence bookkeeping ---------------------------------
  //
  // For each lock m, index -> number of live references that keep instances
  // with index >= that value alive: HB entries for m held by owners lacking
  // LockPlain(m) in CP, and CCP conditionals on m. A lock owner m^j (with
  // Rel m^j executed) is obsolete when no reference with index <= j exists
  // other than m^j's own HB entry.
  std::vector<std::map<uint32_t, uint32_t>> hb_ref;   // lock -> index -> count
  std::vector<std::map<uint32_t, uint32_t>> ccp_ref;  // lock -> index -> count
  std::vector<char> lock_dirty;
  std::vector<LockId> dirty_locks;

  void mark_dirty(LockId m) {
    if (!lock_dirty[m]) {
      lock_dirty[m] = 1;
      dirty_locks.push_back(m);
    }
  }

  void ref_add(std::vector<std::map<uint32_t, uint32_t>>& refs, LockId m, uint32_t idx) {
    ++refs[m][idx];
  }
  void ref_drop(std::vector<std::map<uint32_t, uint32_t>>& refs, LockId m, uint32_t idx) {
    auto it = refs[m].find(idx);
    assert(it != refs[m].end());
    if (--it->second == 0) refs[m].erase(it);
    mark_dirty(m);
  }

  /// Count of references with index <= j (used by the obsolescence check).
  static uint32_t refs_leq(const std::map<uint32_t, uint32_t>& m, uint32_t j) {
    uint32_t c = 0;
    for (auto it = m.begin(); it != m.end() && it->first <= j; ++it) c += it->second;
    return c;
  }
};

inline bool AnalysisState::add_cp(OwnerIdx o, SimpleElem e) {
  Owner& ow = owners[o];
  if (!ow.cp.insert(e)) return false;
  log(o, SetId::CP, true, e);
  // LockPlain(m) entering CP voids this owner's HB reference on m.
  if (elem::is_lock_plain(e)) {
    const HbLockEntry* he = ow.hb_locks.find(elem::id(e));
    if (he) ref_drop(hb_ref, he->lock, he->index);
  }
  return true;
}

inline bool AnalysisState::add_hb_lock(OwnerIdx o, LockId m, uint32_t index, bool star) {
  Owner& ow = owners[o];
  const HbLockEntry* prev = ow.hb_locks.find(m);
  uint32_t prev_index = prev ? prev->index : 0;
  bool had_prev = prev != nullptr;
  if (!ow.hb_locks.insert(m, index, star)) return false;
  if (delta_log) {
    Delta d;
    d.owner = o;
    d.set = SetId::HB;
    d.added = true;
    d.shape = Delta::Shape::HbLock;
    d.hb_entry = {m, index, star};
    delta_log->push_back(d);
  }
  if (!ow.cp.contains(elem::lock_plain(m))) {
    if (had_prev) ref_drop(hb_ref, m, prev_index);
    ref_add(hb_ref, m, index);
  }
  return true;
}

inline int AnalysisState::add_ccp(OwnerIdx o, LockId n, SimpleElem target, uint32_t k) {
  // A conditional whose target is already CP-ordered is superfluous: its
  // only effect would be re-adding a present element. CP sets never shrink
  // (the read-owner reset clears CCP along with CP), so this cannot lose
  // information.
  if (owners[o].cp.contains(target)) return 0;
  const CondElem* prev = owners[o].ccp.find(n, target);
  uint32_t prev_index = prev ? prev->cond_index : 0;
  int r = owners[o].ccp.insert(n, target, k);
  if (r == 0) return 0;
  if (delta_log) {
    if (r == 2) {
      Delta d;
      d.owner = o;
      d.set = SetId::CCP;
      d.added = false;
      d.shape = Delta::Shape::Cond;
      d.cond = {n, target, prev_index};
      delta_log->push_back(d);
    }
    Delta d;
    d.owner = o;
    d.set = SetId::CCP;
    d.added = true;
    d.shape = Delta::Shape::Cond;
    d.cond = {n, target, k};
    delta_log->push_back(d);
  }
  if (r == 2) ref_drop(ccp_ref, n, prev_index);
  ref_add(ccp_ref, n, k);
  return r;
}

// --- element / set formatting (used by explain and tests) ------------------

struct NameTable {
  const std::vector<std::string>* threads = nullptr;
  const std::vector<std::string>* locks = nullptr;
  const std::vector<std::string>* vars = nullptr;

  explicit NameTable(const Trace& tr)
      : threads(&tr.threads), locks(&tr.locks), vars(&tr.variables) {}

  std::string thread(ThreadId t) const { return (*threads)[t]; }
  std::string lock(LockId m) const { return (*locks)[m]; }
  std::string var(VarId x) const { return (*vars)[x]; }
};

inline std::string format_simple(const NameTable& nt, SimpleElem e) {
  switch (elem::tag(e)) {
    case 0: return nt.thread(elem::id(e));
    case 1: return "ξ";  // xi
    case 2: return "ξ_" + nt.thread(elem::id(e));
    default: return nt.lock(elem::id(e));
  }
}

inline std::string format_hb_entry(const NameTable& nt, const HbLockEntry& e) {
  std::string s = nt.lock(e.lock) + "^" + std::to_string(e.index);
  if (e.star) s += "*";
  return s;
}

inline std::string format_cond(const NameTable& nt, const CondElem& c) {
  return "(" + format_simple(nt, c.target) + "|" + nt.lock(c.cond_lock) + "^" +
         std::to_string(c.cond_index) + ")";
}

inline std::string format_owner(const NameTable& nt, const Owner& o) {
  switch (o.kind) {
    case OwnerKind::WriteInstance:
      return nt.var(o.object) + "^" + std::to_string(o.inst);
    case OwnerKind::ReadInstance:
      return nt.var(o.object) + "^" + std::to_string(o.inst) + "_" + nt.thread(o.thread);
    case OwnerKind::AcquireInstance:
      return nt.lock(o.object) + "^" + std::to_string(o.inst);
  }
  return "?";
}

}  // namespace raptor

#endif  // RAPTOR_STATE_HPP_
