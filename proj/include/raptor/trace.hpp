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

#ifndef RAPTOR_TRACE_HPP_
#define RAPTOR_TRACE_HPP_

#include <cstdint>
#include <cstdlib>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace raptor {

/// Raw (pre-desugar) operation tokens as they appear in trace files.
enum class RawOp { Wr, Rd, Acq, Rel, Vwr, Vrd, Fork, Join };

inline const char* to_string(RawOp op) {
  switch (op) {
    case RawOp::Wr: return "wr";
    case RawOp::Rd: return "rd";
    case RawOp::Acq: return "acq";
    case RawOp::Rel: return "rel";
    case RawOp::Vwr: return "vwr";
    case RawOp::Vrd: return "vrd";
    case RawOp::Fork: return "fork";
    case RawOp::Join: return "join";
  }
  return "?";
}

inline std::optional<RawOp> parse_op(std::string_view tok) {
  if (tok == "wr") return RawOp::Wr;
  if (tok == "rd") return RawOp::Rd;
  if (tok == "acq") return RawOp::Acq;
  if (tok == "rel") return RawOp::Rel;
  if (tok == "vwr") return RawOp::Vwr;
  if (tok == "vrd") return RawOp::Vrd;
  if (tok == "fork") return RawOp::Fork;
  if (tok == "join") return RawOp::Join;
  return std::nullopt;
}

/// One line of a trace file: `<thread> <op> <object> [@loc]`.
struct RawEvent {
  std::string thread;
  RawOp op = RawOp::Wr;
  std::string object;
  std::string loc;   // optional source tag, empty if absent
  int line = 0;      // 1-based source line, 0 if synthesized

  bool operator==(const RawEvent& o) const {
    return thread == o.thread && op == o.op && object == o.object && loc == o.loc;
  }
};

struct TraceError : std::runtime_error {
  int line;
  TraceError(int line_, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line_) + ": " + msg), line(line_) {}
};

/// Parses line-oriented trace text. `#` starts a comment, blank lines are
/// skipped. Accepts both `\n` and `\r\n` endings.
inline std::vector<RawEvent> parse_trace(std::string_view text) {
  std::vector<RawEvent> out;
  int lineno = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t eol = text.find('\n', pos);
    std::string_view line = (eol == std::string_view::npos)
                                ? text.substr(pos)
                                : text.substr(pos, eol - pos);
    pos = (eol == std::string_view::npos) ? text.size() + 1 : eol + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);

    std::vector<std::string_view> toks;
    size_t i = 0;
    while (i < line.size()) {
      while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
      size_t j = i;
      while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
      if (j > i) toks.push_back(line.substr(i, j - i));
      i = j;
    }
    if (toks.empty()) continue;
    if (toks.size() < 3) throw TraceError(lineno, "expected `<thread> <op> <object> [@loc]`");

    RawEvent ev;
    ev.thread = std::string(toks[0]);
    auto op = parse_op(toks[1]);
    if (!op) throw TraceError(lineno, "unknown op `" + std::string(toks[1]) + "`");
    ev.op = *op;
    ev.object = std::string(toks[2]);
    ev.line = lineno;
    size_t next = 3;
    if (toks.size() > next && toks[next].size() > 1 && toks[next][0] == '@') {
      ev.loc = std::string(toks[next].substr(1));
      ++next;
    }
    if (toks.size() > next) throw TraceError(lineno, "trailing tokens");
    out.push_back(std::move(ev));
  }
  return out;
}

/// Rewrites volatile accesses and fork/join into plain lock-based events.
/// Generated objects use the reserved `$` prefix; user traces may not.
inline std::vector<RawEvent> desugar(const std::vector<RawEvent>& raw) {
  std::vector<RawEvent> out;
  out.reserve(raw.size());
  std::unordered_map<std::string, bool> seen;  // thread id -> has appeared

  auto emit = [&out](const std::string& t, RawOp op, std::string obj, const RawEvent& src) {
    RawEvent ev;
    ev.thread = t;
    ev.op = op;
    ev.object = std::move(obj);
    ev.loc = src.loc;
    ev.line = src.line;
    out.push_back(std::move(ev));
  };

  for (const RawEvent& ev : raw) {
    if (!ev.object.empty() && ev.object[0] == '$')
      throw TraceError(ev.line, "object names starting with `$` are reserved");
    switch (ev.op) {
      case RawOp::Wr:
      case RawOp::Rd:
      case RawOp::Acq:
      case RawOp::Rel:
        seen[ev.thread] = true;
        out.push_back(ev);
        break;
      case RawOp::Vwr:
      case RawOp::Vrd: {
        seen[ev.thread] = true;
        emit(ev.thread, RawOp::Acq, "$L" + ev.object, ev);
        emit(ev.thread, ev.op == RawOp::Vwr ? RawOp::Wr : RawOp::Rd, "$V" + ev.object, ev);
        emit(ev.thread, RawOp::Rel, "$L" + ev.object, ev);
        break;
      }
      case RawOp::Fork: {
        const std::string& parent = ev.thread;
        const std::string& child = ev.object;
        if (child == parent) throw TraceError(ev.line, "thread forks itself");
        if (seen.count(child)) throw TraceError(ev.line, "fork of already-seen thread `" + child + "`");
        seen[parent] = true;
        seen[child] = true;
        std::string lock = "$F:" + parent + ":" + child;
        std::string var = "$vF:" + parent + ":" + child;
        emit(parent, RawOp::Acq, lock, ev);
        emit(parent, RawOp::Wr, var, ev);
        emit(parent, RawOp::Rel, lock, ev);
        emit(child, RawOp::Acq, lock, ev);
        emit(child, RawOp::Rd, var, ev);
        emit(child, RawOp::Rel, lock, ev);
        break;
      }
      case RawOp::Join: {
        const std::string& parent = ev.thread;
        const std::string& child = ev.object;
        if (child == parent) throw TraceError(ev.line, "thread joins itself");
        if (!seen.count(child)) throw TraceError(ev.line, "join of never-seen thread `" + child + "`");
        seen[parent] = true;
        std::string lock = "$J:" + parent + ":" + child;
        std::string var = "$vJ:" + parent + ":" + child;
        emit(child, RawOp::Acq, lock, ev);
        emit(child, RawOp::Wr, var, ev);
        emit(child, RawOp::Rel, lock, ev);
        emit(parent, RawOp::Acq, lock, ev);
        emit(parent, RawOp::Rd, var, ev);
        emit(parent, RawOp::Rel, lock, ev);
        break;
      }
    }
  }
  return out;
}

enum class EventKind : uint8_t { Write, Read, Acquire, Release };

using ThreadId = uint32_t;
using VarId = uint32_t;
using LockId = uint32_t;

/// One annotated trace entry. `object` names a variable for accesses and a
/// lock for acquire/release. `inst` is the event's instance index: the i-th
/// write to x carries i (1-based); reads carry the index of the last
/// preceding write (0 before any write); acquire/release pair the i-th
/// critical section on the lock.
struct Event {
  uint32_t pos = 0;
  ThreadId thread = 0;
  EventKind kind = EventKind::Write;
  uint32_t object = 0;
  uint32_t inst = 0;
  std::string loc;

  bool is_access() const { return kind == EventKind::Write || kind == EventKind::Read; }
  bool is_write() const { return kind == EventKind::Write; }
  bool is_read() const { return kind == EventKind::Read; }
};

struct Trace {
  std::vector<Event> events;
  std::vector<std::string> threads;  // index = ThreadId
  std::vector<std::string> locks;    // index = LockId
  std::vector<std::string> variables;

  size_t size() const { return events.size(); }

  const std::string& thread_name(ThreadId t) const { return threads[t]; }
  const std::string& lock_name(LockId m) const { return locks[m]; }
  const std::string& var_name(VarId x) const { return variables[x]; }

  std::optional<uint32_t> find_thread(std::string_view name) const {
    for (uint32_t i = 0; i < threads.size(); ++i)
      if (threads[i] == name) return i;
    return std::nullopt;
  }
  std::optional<uint32_t> find_lock(std::string_view name) const {
    for (uint32_t i = 0; i < locks.size(); ++i)
      if (locks[i] == name) return i;
    return std::nullopt;
  }
  std::optional<uint32_t> find_var(std::string_view name) const {
    for (uint32_t i = 0; i < variables.size(); ++i)
      if (variables[i] == name) return i;
    return std::nullopt;
  }
};

/// Assigns instance indexes and interns names. Input must be desugared
/// (wr/rd/acq/rel only). Validation is separate; this never fails on
/// ill-nested locking.
inline Trace annotate_instances(const std::vector<RawEvent>& raw) {
  Trace tr;
  std::unordered_map<std::string, uint32_t> tid, vid, lid;
  auto intern = [](std::unordered_map<std::string, uint32_t>& m,
                   std::vector<std::string>& names, const std::string& s) {
    auto it = m.find(s);
    if (it != m.end()) return it->second;
    uint32_t id = static_cast<uint32_t>(names.size());
    m.emplace(s, id);
    names.push_back(s);
    return id;
  };

  std::vector<uint32_t> write_count;  // per variable
  std::vector<uint32_t> acq_count;    // per lock

  tr.events.reserve(raw.size());
  for (const RawEvent& rev : raw) {
    Event ev;
    ev.pos = static_cast<uint32_t>(tr.events.size());
    ev.thread = intern(tid, tr.threads, rev.thread);
    ev.loc = rev.loc;
    switch (rev.op) {
      case RawOp::Wr: {
        ev.kind = EventKind::Write;
        ev.object = intern(vid, tr.variables, rev.object);
        if (ev.object >= write_count.size()) write_count.resize(ev.object + 1, 0);
        ev.inst = ++write_count[ev.object];
        break;
      }
      case RawOp::Rd: {
        ev.kind = EventKind::Read;
        ev.object = intern(vid, tr.variables, rev.object);
        if (ev.object >= write_count.size()) write_count.resize(ev.object + 1, 0);
        ev.inst = write_count[ev.object];
        break;
      }
      case RawOp::Acq: {
        ev.kind = EventKind::Acquire;
        ev.object = intern(lid, tr.locks, rev.object);
        if (ev.object >= acq_count.size()) acq_count.resize(ev.object + 1, 0);
        ev.inst = ++acq_count[ev.object];
        break;
      }
      case RawOp::Rel: {
        ev.kind = EventKind::Release;
        ev.object = intern(lid, tr.locks, rev.object);
        if (ev.object >= acq_count.size()) acq_count.resize(ev.object + 1, 0);
        ev.inst = acq_count[ev.object];  // pairs the open critical section
        break;
      }
      default:
        throw TraceError(rev.line, "annotate_instances requires a desugared trace");
    }
    tr.events.push_back(std::move(ev));
  }
  return tr;
}

struct Violation {
  uint32_t pos;
  std::string what;
};

/// Well-formedness per the execution model: a lock is only acquired when
/// free, only released by its holder, and per-thread release order is LIFO.
inline std::vector<Violation> validate_well_formed(const Trace& tr) {
  std::vector<Violation> out;
  // lock -> holding thread (or none)
  std::vector<std::optional<ThreadId>> holder(tr.locks.size());
  // thread -> stack of held locks
  std::vector<std::vector<LockId>> stack(tr.threads.size());

  for (const Event& ev : tr.events) {
    if (ev.kind == EventKind::Acquire) {
      if (holder[ev.object]) {
        out.push_back({ev.pos, holder[ev.object] == ev.thread
                                   ? "reentrant acquire of `" + tr.lock_name(ev.object) + "`"
                                   : "acquire of held lock `" + tr.lock_name(ev.object) + "`"});
      } else {
        holder[ev.object] = ev.thread;
        stack[ev.thread].push_back(ev.object);
      }
    } else if (ev.kind == EventKind::Release) {
      if (!holder[ev.object]) {
        out.push_back({ev.pos, "release of unheld lock `" + tr.lock_name(ev.object) + "`"});
      } else if (*holder[ev.object] != ev.thread) {
        out.push_back({ev.pos, "cross-thread release of `" + tr.lock_name(ev.object) + "`"});
      } else if (stack[ev.thread].empty() || stack[ev.thread].back() != ev.object) {
        out.push_back({ev.pos, "non-LIFO release of `" + tr.lock_name(ev.object) + "`"});
        // recover: drop it from wherever it is
        auto& st = stack[ev.thread];
        for (size_t i = st.size(); i-- > 0;)
          if (st[i] == ev.object) { st.erase(st.begin() + i); break; }
        holder[ev.object].reset();
      } else {
        stack[ev.thread].pop_back();
        holder[ev.object].reset();
      }
    }
  }
  return out;
}

/// Gap in the observed total order between two events of the same trace.
inline uint32_t event_distance(const Event& a, const Event& b) {
  return a.pos > b.pos ? a.pos - b.pos : b.pos - a.pos;
}

inline const char* op_token(EventKind k) {
  switch (k) {
    case EventKind::Write: return "wr";
    case EventKind::Read: return "rd";
    case EventKind::Acquire: return "acq";
    case EventKind::Release: return "rel";
  }
  return "?";
}

/// Emits the line-oriented text form; parse . annotate round-trips.
inline std::string serialize_trace(const Trace& tr) {
  std::string out;
  for (const Event& ev : tr.events) {
    out += tr.thread_name(ev.thread);
    out += ' ';
    out += op_token(ev.kind);
    out += ' ';
    out += ev.is_access() ? tr.var_name(ev.object) : tr.lock_name(ev.object);
    if (!ev.loc.empty()) {
      out += " @";
      out += ev.loc;
    }
    out += '\n';
  }
  return out;
}

/// Human-readable event label, e.g. `Wr x^1`, `Rd x^1_T2`, `Acq m^2`.
inline std::string event_label(const Trace& tr, const Event& ev) {
  std::string s;
  switch (ev.kind) {
    case EventKind::Write: s = "Wr " + tr.var_name(ev.object); break;
    case EventKind::Read: s = "Rd " + tr.var_name(ev.object); break;
    case EventKind::Acquire: s = "Acq " + tr.lock_name(ev.object); break;
    case EventKind::Release: s = "Rel " + tr.lock_name(ev.object); break;
  }
  s += "^" + std::to_string(ev.inst);
  if (ev.kind == EventKind::Read) s += "_" + tr.thread_name(ev.thread);
  return s;
}

/// Convenience: parse, desugar and annotate in one step.
inline Trace load_trace_text(std::string_view text) {
  return annotate_instances(desugar(parse_trace(text)));
}

}  // namespace raptor

#endif  // RAPTOR_TRACE_HPP_
