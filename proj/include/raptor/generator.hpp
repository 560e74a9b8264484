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

#ifndef RAPTOR_GENERATOR_HPP_
#define RAPTOR_GENERATOR_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "raptor/trace.hpp"

// Deterministic random well-formed traces: per-thread lock stacks keep
// critical sections nested, a lock is only acquired while free, and every
// held lock is drained before the trace ends.

namespace raptor {

struct FuzzConfig {
  uint64_t seed = 1;
  uint32_t count = 100;
  uint32_t max_threads = 3;
  uint32_t max_locks = 2;
  uint32_t max_vars = 2;
  uint32_t max_events = 20;
  double lock_bias = 0.4;  // probability weight of sync events vs accesses
  bool keep_going = false;
};

namespace detail {

/// splitmix64; stable across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed) : s_(seed) {}
  uint64_t next() {
    uint64_t z = (s_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  uint32_t below(uint32_t n) { return n ? static_cast<uint32_t>(next() % n) : 0; }
  bool chance(double p) { return static_cast<double>(next() >> 11) * 0x1.0p-53 < p; }

 private:
  uint64_t s_;
};

}  // namespace detail

namespace detail {

inline Trace gen_trace_impl(detail::Rng& rng, uint32_t threads, uint32_t locks, uint32_t vars,
                            uint32_t budget, double lock_bias) {
  std::vector<RawEvent> raw;
  std::vector<std::vector<uint32_t>> held(threads);  // stacks of lock ids
  std::vector<bool> lock_busy(locks, false);

  auto emit = [&raw](uint32_t t, RawOp op, const std::string& obj) {
    RawEvent ev;
    ev.thread = "T" + std::to_string(t + 1);
    ev.op = op;
    ev.object = obj;
    raw.push_back(std::move(ev));
  };

  for (uint32_t n = 0; n < budget && threads > 0; ++n) {
    uint32_t t = rng.below(threads);
    bool sync = locks > 0 && rng.chance(lock_bias);
    if (sync) {
      bool can_release = !held[t].empty();
      uint32_t free_locks = 0;
      for (uint32_t m = 0; m < locks; ++m)
        if (!lock_busy[m]) ++free_locks;
      bool do_release = can_release && (free_locks == 0 || rng.chance(0.5));
      if (do_release) {
        uint32_t m = held[t].back();
        held[t].pop_back();
        lock_busy[m] = false;
        emit(t, RawOp::Rel, "m" + std::to_string(m + 1));
      } else if (free_locks > 0) {
        uint32_t pick = rng.below(free_locks);
        for (uint32_t m = 0; m < locks; ++m) {
          if (lock_busy[m]) continue;
          if (pick-- == 0) {
            lock_busy[m] = true;
            held[t].push_back(m);
            emit(t, RawOp::Acq, "m" + std::to_string(m + 1));
            break;
          }
        }
      } else if (vars > 0) {
        emit(t, rng.chance(0.5) ? RawOp::Wr : RawOp::Rd, "x" + std::to_string(rng.below(vars) + 1));
      }
    } else if (vars > 0) {
      emit(t, rng.chance(0.5) ? RawOp::Wr : RawOp::Rd, "x" + std::to_string(rng.below(vars) + 1));
    }
  }

  // Drain held locks so the trace ends clean (LIFO per thread).
  for (uint32_t t = 0; t < threads; ++t)
    while (!held[t].empty()) {
      uint32_t m = held[t].back();
      held[t].pop_back();
      emit(t, RawOp::Rel, "m" + std::to_string(m + 1));
    }

  return annotate_instances(raw);
}

}  // namespace detail

/// Generates the `index`-th trace of a fuzz run; identical (config.seed,
/// index) pairs give identical traces. Dimensions are sampled up to the
/// configured maxima.
inline Trace gen_random_trace(const FuzzConfig& cfg, uint32_t index) {
  detail::Rng rng(cfg.seed * 0x9e3779b97f4a7c15ull + index + 1);
  uint32_t threads = cfg.max_threads ? 1 + rng.below(cfg.max_threads) : 0;
  uint32_t locks = cfg.max_locks ? rng.below(cfg.max_locks + 1) : 0;
  uint32_t vars = cfg.max_vars ? 1 + rng.below(cfg.max_vars) : 0;
  uint32_t budget = cfg.max_events ? rng.below(cfg.max_events + 1) : 0;
  return detail::gen_trace_impl(rng, threads, locks, vars, budget, cfg.lock_bias);
}

/// Fixed-dimension synthetic trace of (at least) `events` events before the
/// end-of-trace lock drain; used for throughput measurements.
inline Trace gen_synthetic_trace(uint32_t threads, uint32_t locks, uint32_t vars,
                                 uint32_t events, uint64_t seed, double lock_bias = 0.4) {
  detail::Rng rng(seed * 0x9e3779b97f4a7c15ull + 1);
  return detail::gen_trace_impl(rng, threads, locks, vars, events, lock_bias);
}

}  // namespace raptor

#endif  // RAPTOR_GENERATOR_HPP_
