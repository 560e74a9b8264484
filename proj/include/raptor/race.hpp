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

#ifndef RAPTOR_RACE_HPP_
#define RAPTOR_RACE_HPP_

#include <algorithm>
#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "raptor/trace.hpp"

namespace raptor {

enum class RaceKind : uint8_t { WW, WR, RW };

inline const char* to_string(RaceKind k) {
  switch (k) {
    case RaceKind::WW: return "ww";
    case RaceKind::WR: return "wr";
    case RaceKind::RW: return "rw";
  }
  return "?";
}

/// A detected CP-race between two conflicting accesses, first before second
/// in the observed total order. `is_hb_race` means the pair is unordered by
/// HB as well (every HB-race is also a CP-race); a CP-race that *is* HB
/// ordered is a "CP-only" race.
struct RaceReport {
  RaceKind kind = RaceKind::WW;
  VarId var = 0;
  uint32_t first_pos = 0;
  uint32_t second_pos = 0;
  bool is_hb_race = false;
  uint32_t detected_at = 0;  // event position where the verdict became determinable
  uint32_t event_distance = 0;
  std::string first_loc;
  std::string second_loc;
};

/// Identity used for differential comparison: detection position is
/// schedule-dependent and deliberately excluded.
inline std::tuple<uint32_t, uint32_t, uint8_t, bool> race_key(const RaceReport& r) {
  return {r.second_pos, r.first_pos, static_cast<uint8_t>(r.kind), r.is_hb_race};
}

inline void sort_races(std::vector<RaceReport>& races) {
  std::sort(races.begin(), races.end(), [](const RaceReport& a, const RaceReport& b) {
    return race_key(a) < race_key(b);
  });
}

inline bool same_races(const std::vector<RaceReport>& a, const std::vector<RaceReport>& b) {
  if (a.size() != b.size()) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (race_key(a[i]) != race_key(b[i])) return false;
  return true;
}

/// Static dedup key: unordered pair of source tags when both are present,
/// otherwise (variable, kind).
inline std::string static_key(const Trace& tr, const RaceReport& r) {
  if (!r.first_loc.empty() && !r.second_loc.empty()) {
    const std::string& lo = std::min(r.first_loc, r.second_loc);
    const std::string& hi = std::max(r.first_loc, r.second_loc);
    return lo + "|" + hi;
  }
  return tr.var_name(r.var) + ":" + to_string(r.kind);
}

/// Groups dynamic reports into static races with dynamic counts, in first-seen order.
inline std::vector<std::pair<std::string, uint32_t>> dedup_static(
    const Trace& tr, const std::vector<RaceReport>& reports) {
  std::vector<std::pair<std::string, uint32_t>> out;
  std::map<std::string, size_t> index;
  for (const RaceReport& r : reports) {
    std::string key = static_key(tr, r);
    auto it = index.find(key);
    if (it == index.end()) {
      index.emplace(key, out.size());
      out.emplace_back(std::move(key), 1);
    } else {
      ++out[it->second].second;
    }
  }
  return out;
}

}  // namespace raptor

#endif  // RAPTOR_RACE_HPP_
