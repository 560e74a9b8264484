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

#ifndef RAPTOR_ORACLE_HPP_
#define RAPTOR_ORACLE_HPP_

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <tuple>
#include <vector>

#include "raptor/race.hpp"
#include "raptor/trace.hpp"

// Brute-force reference computation of PO, HB and CP over a complete trace
// (or prefix) as the least fixpoint of the relation rules. Only meant for
// desk-scale traces; the online engine is checked against it.

namespace raptor {

/// Dense boolean relation over event positions; bit(a,b) means a precedes b.
class RelationMatrix {
 public:
  RelationMatrix() = default;
  explicit RelationMatrix(size_t n) : n_(n), words_((n + 63) / 64), bits_(n * words_, 0) {}

  size_t size() const { return n_; }

  bool at(size_t a, size_t b) const {
    return (bits_[a * words_ + b / 64] >> (b % 64)) & 1;
  }
  void set(size_t a, size_t b) {
    bits_[a * words_ + b / 64] |= uint64_t{1} << (b % 64);
  }

  /// OR of row `src` into row `dst`; returns true if `dst` changed.
  bool or_row(size_t dst, size_t src) { return or_row_from(dst, *this, src); }

  bool or_row_from(size_t dst, const RelationMatrix& other, size_t src) {
    bool changed = false;
    uint64_t* d = &bits_[dst * words_];
    const uint64_t* s = &other.bits_[src * words_];
    for (size_t w = 0; w < words_; ++w) {
      uint64_t nv = d[w] | s[w];
      changed |= nv != d[w];
      d[w] = nv;
    }
    return changed;
  }

  size_t count() const {
    size_t c = 0;
    for (uint64_t w : bits_) c += static_cast<size_t>(__builtin_popcountll(w));
    return c;
  }

  bool subset_of(const RelationMatrix& other) const {
    for (size_t i = 0; i < bits_.size(); ++i)
      if (bits_[i] & ~other.bits_[i]) return false;
    return true;
  }

  bool operator==(const RelationMatrix& o) const { return n_ == o.n_ && bits_ == o.bits_; }

  /// In-place transitive closure (iterate to fixpoint).
  void close_transitive() {
    bool changed = true;
    while (changed) {
      changed = false;
      for (size_t a = 0; a < n_; ++a)
        for (size_t c = a + 1; c < n_; ++c)
          if (at(a, c)) changed |= or_row(a, c);
    }
  }

 private:
  size_t n_ = 0;
  size_t words_ = 0;
  std::vector<uint64_t> bits_;
};

namespace detail {

/// A read is "shadowed" when a later read with the same (var, generation,
/// thread) exists; only the latest such read bears identity for conflicts
/// and race pairs (the engine's read-owner reset gives the same semantics).
inline std::vector<bool> canonical_access_mask(const Trace& tr, size_t n) {
  std::vector<bool> canon(n, false);
  std::map<std::tuple<VarId, uint32_t, ThreadId>, uint32_t> latest_read;
  for (size_t p = 0; p < n; ++p) {
    const Event& e = tr.events[p];
    if (e.is_write()) canon[p] = true;
    if (e.is_read()) latest_read[{e.object, e.inst, e.thread}] = e.pos;
  }
  for (auto& [key, pos] : latest_read) canon[pos] = true;
  return canon;
}

/// For each read position, the position of the next read with the same
/// (var, generation, thread), or n when none exists. A read is superseded
/// from that point on: the online analysis resets the read's state there,
/// so the read stops being visible to later Rule (a) checks.
inline std::vector<uint32_t> shadow_horizon(const Trace& tr, size_t n) {
  std::vector<uint32_t> horizon(n, static_cast<uint32_t>(n));
  std::map<std::tuple<VarId, uint32_t, ThreadId>, uint32_t> last;
  for (size_t p = 0; p < n; ++p) {
    const Event& e = tr.events[p];
    if (!e.is_read()) continue;
    auto key = std::make_tuple(e.object, e.inst, e.thread);
    auto it = last.find(key);
    if (it != last.end()) horizon[it->second] = e.pos;
    last[key] = e.pos;
  }
  return horizon;
}

struct CriticalSection {
  LockId lock;
  uint32_t inst;
  ThreadId thread;
  uint32_t acq_pos;
  uint32_t rel_pos = 0;  // valid only when closed
  bool closed = false;
  std::vector<uint32_t> accesses;  // access events bracketed inside
};

/// Critical sections over the first n events. An access is "inside" a
/// section when PO-bracketed by its acquire and release; a still-open
/// section contains everything the holder did after the acquire (the
/// release is inevitable in a well-formed execution).
inline std::vector<CriticalSection> critical_sections(const Trace& tr, size_t n) {
  std::vector<CriticalSection> cs;
  std::map<std::pair<LockId, uint32_t>, size_t> open;
  std::vector<std::vector<size_t>> held_by;  // thread -> open cs indexes
  for (size_t p = 0; p < n; ++p) {
    const Event& e = tr.events[p];
    if (e.thread >= held_by.size()) held_by.resize(e.thread + 1);
    if (e.kind == EventKind::Acquire) {
      open[{e.object, e.inst}] = cs.size();
      held_by[e.thread].push_back(cs.size());
      CriticalSection c;
      c.lock = e.object;
      c.inst = e.inst;
      c.thread = e.thread;
      c.acq_pos = e.pos;
      cs.push_back(std::move(c));
    } else if (e.kind == EventKind::Release) {
      auto it = open.find({e.object, e.inst});
      if (it != open.end()) {
        cs[it->second].rel_pos = e.pos;
        cs[it->second].closed = true;
        auto& held = held_by[e.thread];
        for (size_t i = held.size(); i-- > 0;)
          if (held[i] == it->second) { held.erase(held.begin() + i); break; }
        open.erase(it);
      }
    } else {
      for (size_t idx : held_by[e.thread]) cs[idx].accesses.push_back(e.pos);
    }
  }
  return cs;
}

inline bool conflicting(const Event& a, const Event& b) {
  return a.is_access() && b.is_access() && a.object == b.object &&
         a.thread != b.thread && (a.is_write() || b.is_write());
}

/// Any conflicting pair with the first access in `a` and the second in `b`.
/// The first access only counts while not yet superseded by a later read of
/// the same (var, generation, thread): the second access's Rule (a) check
/// sees the state of the moment it executes.
inline bool sections_conflict(const Trace& tr, const CriticalSection& a,
                              const CriticalSection& b,
                              const std::vector<uint32_t>& horizon) {
  for (uint32_t p : a.accesses)
    for (uint32_t q : b.accesses)
      if (p < q && horizon[p] > q && conflicting(tr.events[p], tr.events[q])) return true;
  return false;
}

}  // namespace detail

/// PO: same-thread pairs in trace order.
inline RelationMatrix compute_po(const Trace& tr, size_t n = SIZE_MAX) {
  if (n == SIZE_MAX) n = tr.size();
  RelationMatrix po(n);
  for (size_t a = 0; a < n; ++a)
    for (size_t b = a + 1; b < n; ++b)
      if (tr.events[a].thread == tr.events[b].thread) po.set(a, b);
  return po;
}

/// HB: transitive closure of PO plus release->acquire on the same lock.
inline RelationMatrix compute_hb(const Trace& tr, size_t n = SIZE_MAX) {
  if (n == SIZE_MAX) n = tr.size();
  RelationMatrix hb = compute_po(tr, n);
  for (size_t a = 0; a < n; ++a) {
    if (tr.events[a].kind != EventKind::Release) continue;
    for (size_t b = a + 1; b < n; ++b)
      if (tr.events[b].kind == EventKind::Acquire && tr.events[b].object == tr.events[a].object)
        hb.set(a, b);
  }
  hb.close_transitive();
  return hb;
}

namespace detail {

inline void close_cp_rule_c(RelationMatrix& cp, const RelationMatrix& hb, size_t n) {
  bool grow = true;
  while (grow) {
    grow = false;
    for (size_t a = 0; a < n; ++a) {
      for (size_t c = a + 1; c < n; ++c) {
        if (hb.at(a, c)) grow |= cp.or_row(a, c);          // HB(a,c) o CP(c,*)
        if (cp.at(a, c)) grow |= cp.or_row_from(a, hb, c);  // CP(a,c) o HB(c,*)
      }
    }
  }
}

}  // namespace detail

/// CP least fixpoint over the first n events.
///
/// Seeds Rule (a) edges (same-lock critical sections containing conflicting
/// accesses, release of the first to acquire of the second), then round-robins
/// Rule (c) (HB composition on either side) and Rule (b) (CP-ordered section
/// interiors order their release->acquire) until no bit changes.
inline RelationMatrix compute_cp_fixpoint(const Trace& tr, size_t n = SIZE_MAX,
                                          const RelationMatrix* hb_in = nullptr) {
  if (n == SIZE_MAX) n = tr.size();
  const RelationMatrix hb = hb_in ? *hb_in : compute_hb(tr, n);
  RelationMatrix cp(n);

  std::vector<detail::CriticalSection> cs = detail::critical_sections(tr, n);
  std::vector<uint32_t> horizon = detail::shadow_horizon(tr, n);

  for (size_t i = 0; i < cs.size(); ++i) {
    if (!cs[i].closed) continue;  // the edge source Rel m^i must have executed
    for (size_t j = 0; j < cs.size(); ++j) {
      if (i == j || cs[i].lock != cs[j].lock || cs[i].inst >= cs[j].inst) continue;
      if (detail::sections_conflict(tr, cs[i], cs[j], horizon))
        cp.set(cs[i].rel_pos, cs[j].acq_pos);
    }
  }

  bool changed = true;
  while (changed) {
    changed = false;
    detail::close_cp_rule_c(cp, hb, n);
    for (size_t i = 0; i < cs.size(); ++i) {
      if (!cs[i].closed) continue;
      for (size_t j = 0; j < cs.size(); ++j) {
        if (i == j || cs[i].lock != cs[j].lock || cs[i].inst >= cs[j].inst) continue;
        if (!cs[j].closed) continue;  // Rule (b) premise ends at Rel m^j
        if (cp.at(cs[i].acq_pos, cs[j].rel_pos) && !cp.at(cs[i].rel_pos, cs[j].acq_pos)) {
          cp.set(cs[i].rel_pos, cs[j].acq_pos);
          changed = true;
        }
      }
    }
  }
  return cp;
}

struct OracleResult {
  RelationMatrix po, hb, cp;
  std::vector<RaceReport> races;
};

namespace detail {

inline RaceReport make_report(const Event& first, const Event& second,
                              const RelationMatrix& hb) {
  RaceReport r;
  if (first.is_write() && second.is_write()) r.kind = RaceKind::WW;
  else if (first.is_write()) r.kind = RaceKind::WR;
  else r.kind = RaceKind::RW;
  r.var = first.object;
  r.first_pos = first.pos;
  r.second_pos = second.pos;
  r.is_hb_race = !hb.at(first.pos, second.pos);
  r.detected_at = second.pos;
  r.event_distance = event_distance(first, second);
  r.first_loc = first.loc;
  r.second_loc = second.loc;
  return r;
}

}  // namespace detail

/// All conflicting canonical access pairs unordered by PO and CP.
inline std::vector<RaceReport> enumerate_races_all_pairs(const Trace& tr, size_t n = SIZE_MAX) {
  if (n == SIZE_MAX) n = tr.size();
  RelationMatrix po = compute_po(tr, n);
  RelationMatrix hb = compute_hb(tr, n);
  RelationMatrix cp = compute_cp_fixpoint(tr, n, &hb);
  std::vector<bool> canon = detail::canonical_access_mask(tr, n);

  std::vector<RaceReport> out;
  for (size_t a = 0; a < n; ++a) {
    if (!canon[a]) continue;
    for (size_t b = a + 1; b < n; ++b) {
      if (!canon[b]) continue;
      if (!detail::conflicting(tr.events[a], tr.events[b])) continue;
      if (po.at(a, b) || cp.at(a, b)) continue;
      out.push_back(detail::make_report(tr.events[a], tr.events[b], hb));
    }
  }
  sort_races(out);
  return out;
}

namespace detail {

struct PairObligation {
  uint32_t first_pos;
  uint32_t second_pos;
};

/// Adjacent-generation pair obligations in trace order of the second access:
/// (Wr x^i, Wr x^{i+1}), (Wr x^i, Rd x^i_t), (Rd x^i_t, Wr x^{i+1}). Reads
/// are canonical instances; the generation-0 synthetic write never
/// participates as a first access.
inline std::vector<PairObligation> adjacent_pairs(const Trace& tr, size_t n) {
  std::vector<bool> canon = canonical_access_mask(tr, n);
  std::map<std::pair<VarId, uint32_t>, uint32_t> write_at;
  std::map<std::tuple<VarId, uint32_t, ThreadId>, uint32_t> read_at;
  for (size_t p = 0; p < n; ++p) {
    const Event& e = tr.events[p];
    if (e.is_write()) write_at[{e.object, e.inst}] = e.pos;
    if (e.is_read() && canon[p]) read_at[{e.object, e.inst, e.thread}] = e.pos;
  }

  std::vector<PairObligation> out;
  for (size_t p = 0; p < n; ++p) {
    const Event& e = tr.events[p];
    if (e.is_write()) {
      if (e.inst >= 2) {
        auto it = write_at.find({e.object, e.inst - 1});
        if (it != write_at.end()) out.push_back({it->second, e.pos});
      }
      for (auto& [key, rpos] : read_at) {
        if (std::get<0>(key) == e.object && std::get<1>(key) == e.inst - 1 && rpos < e.pos)
          out.push_back({rpos, e.pos});
      }
    } else if (e.is_read() && canon[p] && e.inst >= 1) {
      auto it = write_at.find({e.object, e.inst});
      if (it != write_at.end()) out.push_back({it->second, e.pos});
    }
  }
  return out;
}

}  // namespace detail

/// Scans adjacent-generation pairs in trace order of the second access; an
/// unordered pair is reported and marked ordered before continuing, so the
/// same pair is never reported twice. This is the differential contract for
/// the online engine.
///
/// The forcing deliberately does NOT feed the reported edge back into the
/// fixpoint: the engine's post-report forcing inserts only the inert xi
/// marker, so a reported pair never orders anything else downstream (the
/// engine reports both Wr x^i--Wr x^{i+1} and Wr x^{i+1}--Wr x^{i+2} even
/// when an edge-propagating analysis would suppress one of them).
inline std::vector<RaceReport> enumerate_races_adjacent_forcing(const Trace& tr,
                                                                size_t n = SIZE_MAX) {
  if (n == SIZE_MAX) n = tr.size();
  RelationMatrix po = compute_po(tr, n);
  RelationMatrix hb = compute_hb(tr, n);
  RelationMatrix cp = compute_cp_fixpoint(tr, n, &hb);

  std::vector<detail::PairObligation> pairs = detail::adjacent_pairs(tr, n);
  std::vector<RaceReport> out;
  for (const auto& pr : pairs) {
    if (po.at(pr.first_pos, pr.second_pos) || cp.at(pr.first_pos, pr.second_pos)) continue;
    out.push_back(detail::make_report(tr.events[pr.first_pos], tr.events[pr.second_pos], hb));
    cp.set(pr.first_pos, pr.second_pos);  // dedup only; no re-closure
  }
  sort_races(out);
  return out;
}

/// Relations computed on the subtrace of events 0..k only.
inline OracleResult knowable_prefix(const Trace& tr, size_t k) {
  if (k >= tr.size()) throw std::out_of_range("knowable_prefix: position out of range");
  size_t n = k + 1;
  OracleResult res;
  res.po = compute_po(tr, n);
  res.hb = compute_hb(tr, n);
  res.cp = compute_cp_fixpoint(tr, n, &res.hb);
  res.races = enumerate_races_all_pairs(tr, n);
  return res;
}

inline OracleResult compute_oracle(const Trace& tr) {
  OracleResult res;
  size_t n = tr.size();
  res.po = compute_po(tr, n);
  res.hb = compute_hb(tr, n);
  res.cp = compute_cp_fixpoint(tr, n, &res.hb);
  res.races = enumerate_races_all_pairs(tr, n);
  return res;
}

/// CP-distance: how many Rule (b)/(c) layers must be applied to CP-order two
/// critical sections on the same lock. 0 when the conflicting-sections base
/// pattern holds between instances in [j, i]; otherwise 1 + the minimum
/// distance over mediating lock instance pairs; nullopt when the sections
/// are not CP ordered through these critical sections.
class CpDistance {
 public:
  explicit CpDistance(const Trace& tr)
      : tr_(tr),
        n_(tr.size()),
        hb_(compute_hb(tr, n_)),
        cp_(compute_cp_fixpoint(tr, n_, &hb_)),
        cs_(detail::critical_sections(tr, n_)),
        horizon_(detail::shadow_horizon(tr, n_)) {}

  std::optional<uint32_t> distance(LockId m, uint32_t i, uint32_t j) {
    if (j > i) return std::nullopt;
    std::vector<std::tuple<LockId, uint32_t, uint32_t>> path;
    return dist(m, i, j, path);
  }

 private:
  const detail::CriticalSection* section(LockId m, uint32_t inst) const {
    for (const auto& c : cs_)
      if (c.lock == m && c.inst == inst && c.closed) return &c;
    return nullptr;
  }

  bool base_pattern(LockId m, uint32_t i, uint32_t j) const {
    for (const auto& a : cs_) {
      if (a.lock != m || !a.closed || a.inst < j || a.inst >= i) continue;
      for (const auto& b : cs_) {
        if (b.lock != m || b.inst <= a.inst || b.inst > i) continue;
        if (detail::sections_conflict(tr_, a, b, horizon_)) return true;
      }
    }
    return false;
  }

  // Genuine derivations have strictly decreasing distance along the
  // recursion, so cutting cycles never loses the minimum.
  std::optional<uint32_t> dist(LockId m, uint32_t i, uint32_t j,
                               std::vector<std::tuple<LockId, uint32_t, uint32_t>>& path) {
    auto key = std::make_tuple(m, i, j);
    for (const auto& seen : path)
      if (seen == key) return std::nullopt;
    if (base_pattern(m, i, j)) return 0;

    const auto* outer_lo = section(m, j);
    const auto* outer_hi = section(m, i);
    if (!outer_lo || !outer_hi) return std::nullopt;

    path.push_back(key);
    std::optional<uint32_t> best;
    for (const auto& ck : cs_) {
      if (!ck.closed) continue;
      for (const auto& cl : cs_) {
        if (!cl.closed || ck.lock != cl.lock || ck.inst >= cl.inst) continue;
        // Acq m^j -HB-> Rel n^k -CP-> Acq n^l -HB-> Rel m^i
        if (!hb_.at(outer_lo->acq_pos, ck.rel_pos)) continue;
        if (!cp_.at(ck.rel_pos, cl.acq_pos)) continue;
        if (!hb_.at(cl.acq_pos, outer_hi->rel_pos)) continue;
        auto sub = dist(ck.lock, cl.inst, ck.inst, path);
        if (sub && (!best || *sub + 1 < *best)) best = *sub + 1;
      }
    }
    path.pop_back();
    return best;
  }

  const Trace& tr_;
  size_t n_;
  RelationMatrix hb_;
  RelationMatrix cp_;
  std::vector<detail::CriticalSection> cs_;
  std::vector<uint32_t> horizon_;
};

inline std::optional<uint32_t> cp_distance(const Trace& tr, LockId m, uint32_t i, uint32_t j) {
  return CpDistance(tr).distance(m, i, j);
}

}  // namespace raptor

#endif  // RAPTOR_ORACLE_HPP_
