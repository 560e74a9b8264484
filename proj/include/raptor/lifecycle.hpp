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

#ifndef RAPTOR_LIFECYCLE_HPP_
#define RAPTOR_LIFECYCLE_HPP_

#include <vector>

#include "raptor/race.hpp"
#include "raptor/state.hpp"

// Obsolete-owner detection, CP-race verdicts and post-report forcing.
//
// A variable access owner becomes obsolete once the analysis has decided,
// for every adjacent conflicting pair it participates in, whether the pair
// is CP ordered; deciding is the race check itself. A lock owner becomes
// obsolete once nothing can trigger Rule (b) through it anymore.

namespace raptor {

namespace lifecycle {

inline bool marker_resolved(const Owner& o, SimpleElem marker) {
  return o.cp.contains(marker) || o.po.contains(marker);
}

/// Race verdict reached: append the report and force the marker into the
/// owner's CP set so downstream verdicts treat the pair as ordered (and the
/// same pair is never reported twice).
inline void report_and_force(AnalysisState& st, OwnerIdx oi, SimpleElem marker,
                             RaceKind kind, uint32_t first_pos, uint32_t second_pos,
                             const std::string& first_loc, const std::string& second_loc,
                             uint32_t detected_at) {
  Owner& o = st.owner(oi);
  RaceReport r;
  r.kind = kind;
  r.var = o.object;
  r.first_pos = first_pos;
  r.second_pos = second_pos;
  r.is_hb_race = !o.hb.contains(marker);
  r.detected_at = detected_at;
  r.event_distance = second_pos > first_pos ? second_pos - first_pos : first_pos - second_pos;
  r.first_loc = first_loc;
  r.second_loc = second_loc;
  st.pending_reports.push_back(std::move(r));
  st.add_cp(oi, marker);
}

/// Drops an owner and every reference it contributes.
inline void remove_owner(AnalysisState& st, OwnerIdx oi) {
  Owner& o = st.owner(oi);
  if (!o.live) return;
  o.live = false;
  for (const auto& e : o.hb_locks.items())
    if (!o.cp.contains(elem::lock_plain(e.lock))) st.ref_drop(st.hb_ref, e.lock, e.index);
  for (const auto& c : o.ccp.items()) st.ref_drop(st.ccp_ref, c.cond_lock, c.cond_index);

  auto detach = [oi](std::vector<OwnerIdx>& v) {
    for (size_t i = 0; i < v.size(); ++i)
      if (v[i] == oi) {
        v.erase(v.begin() + i);
        return;
      }
  };
  switch (o.kind) {
    case OwnerKind::WriteInstance: detach(st.var_write_owners[o.object]); break;
    case OwnerKind::ReadInstance: detach(st.var_read_owners[o.object]); break;
    case OwnerKind::AcquireInstance: detach(st.lock_owners[o.object]); break;
  }
  --st.live_owner_count;
}

/// Verdict pass for one variable access owner (Algorithm for detecting and
/// removing obsolete access owners). `finalizing` relaxes nothing about
/// which pairs exist; it only means no further events can arrive, so every
/// remaining check is decisive. Returns true if the owner was removed.
inline bool sweep_variable_owner(AnalysisState& st, OwnerIdx oi, uint32_t detected_at,
                                 bool finalizing, bool allow_removal) {
  Owner& o = st.owner(oi);
  if (!o.live || o.kind == OwnerKind::AcquireInstance) return false;
  bool gen_closed = o.next_write_pos != kNoPos;

  if (o.kind == OwnerKind::WriteInstance) {
    if (gen_closed && !o.ww_done) {
      if (marker_resolved(o, elem::xi())) {
        o.ww_done = true;
      } else if (!o.ccp.has_marker_target(elem::xi())) {
        report_and_force(st, oi, elem::xi(), RaceKind::WW, o.def_pos, o.next_write_pos,
                         o.loc, o.next_write_loc, detected_at);
        o.ww_done = true;
      }
    }
    // Write->read pairs become final only once the generation is closed (a
    // later read by the same thread would shift the canonical read).
    if (gen_closed || finalizing) {
      for (size_t i = 0; i < o.readers.size();) {
        const ReaderObligation& ob = o.readers[i];
        SimpleElem marker = elem::xi_t(ob.thread);
        if (marker_resolved(o, marker)) {
          o.readers.erase(o.readers.begin() + i);
        } else if (!o.ccp.has_marker_target(marker)) {
          report_and_force(st, oi, marker, RaceKind::WR, o.def_pos, ob.read_pos, o.loc,
                           ob.read_loc, detected_at);
          o.readers.erase(o.readers.begin() + i);
        } else {
          ++i;
        }
      }
    }
    if (allow_removal && gen_closed && o.ww_done && o.readers.empty()) {
      remove_owner(st, oi);
      return true;
    }
  } else {  // ReadInstance
    if (gen_closed && !o.rw_done) {
      if (marker_resolved(o, elem::xi())) {
        o.rw_done = true;  // race-free toward the next write
        if (allow_removal) {
          remove_owner(st, oi);
          return true;
        }
      } else if (!o.ccp.has_marker_target(elem::xi())) {
        report_and_force(st, oi, elem::xi(), RaceKind::RW, o.def_pos, o.next_write_pos,
                         o.loc, o.next_write_loc, detected_at);
        o.rw_done = true;
        if (allow_removal) {
          remove_owner(st, oi);
          return true;
        }
      }
    }
  }
  return false;
}

/// Lock-owner obsolescence (the release-side removal algorithm): m^j whose
/// release has executed is obsolete when no other live owner holds an
/// HB entry on m with index <= j (unless LockPlain(m) is already in that
/// owner's CP set) and no CCP set holds a conditional on m with index <= j.
inline void sweep_lock_owners(AnalysisState& st) {
  while (!st.dirty_locks.empty()) {
    LockId m = st.dirty_locks.back();
    st.dirty_locks.pop_back();
    st.lock_dirty[m] = 0;
    // ascending instances: removing a low owner can unblock higher ones
    std::vector<OwnerIdx> insts = st.lock_owners[m];
    for (OwnerIdx oi : insts) {
      Owner& o = st.owner(oi);
      if (!o.live) continue;
      bool released = st.lock_holder[m] == 0 || o.inst < st.lock_instance[m];
      if (!released) continue;
      uint32_t self = 0;
      const HbLockEntry* he = o.hb_locks.find(m);
      if (he && he->index <= o.inst && !o.cp.contains(elem::lock_plain(m))) self = 1;
      if (AnalysisState::refs_leq(st.hb_ref[m], o.inst) != self) continue;
      if (AnalysisState::refs_leq(st.ccp_ref[m], o.inst) != 0) continue;
      remove_owner(st, oi);
    }
  }
}

}  // namespace lifecycle

}  // namespace raptor

#endif  // RAPTOR_LIFECYCLE_HPP_
