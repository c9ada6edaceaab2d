#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

namespace tmlab {

using TxnId = uint32_t;     // 0 is reserved for the initializing transaction T0
using ObjectId = uint32_t;
using ProcId = uint32_t;
using Value = int64_t;

// Unique write values: value identifies (txn, per-txn op counter).
constexpr Value encode_value(TxnId txn, uint32_t op_counter) {
  return (static_cast<Value>(txn) << 20) + op_counter;
}

enum class Kind { Read, Write, TryCommit, TryAbort };
enum class Outcome { Ok, Abort, Commit };

struct Event {
  int64_t index = 0;  // original position; preserved by sub-history operations
  ProcId proc = 0;
  TxnId txn = 0;
  Kind kind = Kind::Read;
  std::optional<ObjectId> object;
  std::optional<Value> value;
  Outcome outcome = Outcome::Ok;
  std::optional<int64_t> seq;  // runtime annotation, absent in plain traces

  bool is_terminal() const { return outcome != Outcome::Ok; }
  bool is_successful_read() const {
    return kind == Kind::Read && outcome == Outcome::Ok;
  }
  bool is_successful_write() const {
    return kind == Kind::Write && outcome == Outcome::Ok;
  }
  bool is_commit() const {
    return kind == Kind::TryCommit && outcome == Outcome::Commit;
  }

  friend bool operator==(const Event& a, const Event& b) {
    return a.index == b.index && a.proc == b.proc && a.txn == b.txn &&
           a.kind == b.kind && a.object == b.object && a.value == b.value &&
           a.outcome == b.outcome && a.seq == b.seq;
  }
};

inline Event make_read(TxnId t, ObjectId x, Value v, ProcId p = 0) {
  return Event{0, p, t, Kind::Read, x, v, Outcome::Ok, {}};
}
inline Event make_read_abort(TxnId t, ObjectId x, ProcId p = 0) {
  return Event{0, p, t, Kind::Read, x, {}, Outcome::Abort, {}};
}
inline Event make_write(TxnId t, ObjectId x, Value v, ProcId p = 0) {
  return Event{0, p, t, Kind::Write, x, v, Outcome::Ok, {}};
}
inline Event make_write_abort(TxnId t, ObjectId x, Value v, ProcId p = 0) {
  return Event{0, p, t, Kind::Write, x, v, Outcome::Abort, {}};
}
inline Event make_commit(TxnId t, ProcId p = 0) {
  return Event{0, p, t, Kind::TryCommit, {}, {}, Outcome::Commit, {}};
}
inline Event make_commit_abort(TxnId t, ProcId p = 0) {
  return Event{0, p, t, Kind::TryCommit, {}, {}, Outcome::Abort, {}};
}
inline Event make_abort(TxnId t, ProcId p = 0) {
  return Event{0, p, t, Kind::TryAbort, {}, {}, Outcome::Abort, {}};
}

enum class TxnStatus { Committed, Aborted, Incomplete };

// A finite sequence of events, ordered by strictly increasing index.
// Immutable value; every derived history is a fresh value.
class History {
 public:
  History() = default;

  // Assigns indices 0..n-1 in sequence order.
  static History from_events(std::vector<Event> events) {
    for (size_t i = 0; i < events.size(); ++i)
      events[i].index = static_cast<int64_t>(i);
    return History(std::move(events));
  }

  // Keeps the indices the events already carry (sub-history construction).
  static History from_indexed(std::vector<Event> events) {
    return History(std::move(events));
  }

  const std::vector<Event>& events() const { return events_; }
  size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const Event& at(size_t pos) const { return events_.at(pos); }

  std::vector<TxnId> txns() const {
    std::vector<TxnId> out;
    std::unordered_set<TxnId> seen;
    for (const auto& e : events_)
      if (seen.insert(e.txn).second) out.push_back(e.txn);
    return out;
  }

  bool contains_txn(TxnId t) const {
    for (const auto& e : events_)
      if (e.txn == t) return true;
    return false;
  }

  TxnStatus status_of(TxnId t) const {
    bool found = false;
    for (const auto& e : events_) {
      if (e.txn != t) continue;
      found = true;
      if (e.outcome == Outcome::Commit) return TxnStatus::Committed;
      if (e.outcome == Outcome::Abort) return TxnStatus::Aborted;
    }
    if (!found) throw std::invalid_argument("status_of: unknown transaction");
    return TxnStatus::Incomplete;
  }

  std::vector<TxnId> committed() const { return with_status(TxnStatus::Committed); }
  std::vector<TxnId> aborted() const { return with_status(TxnStatus::Aborted); }
  std::vector<TxnId> incomplete() const { return with_status(TxnStatus::Incomplete); }

  // Position (not index) of the first/last event of t; npos if absent.
  static constexpr size_t npos = static_cast<size_t>(-1);
  size_t first_pos(TxnId t) const {
    for (size_t i = 0; i < events_.size(); ++i)
      if (events_[i].txn == t) return i;
    return npos;
  }
  size_t last_pos(TxnId t) const {
    for (size_t i = events_.size(); i-- > 0;)
      if (events_[i].txn == t) return i;
    return npos;
  }

  // Successful write set of t.
  std::set<ObjectId> write_set(TxnId t) const {
    std::set<ObjectId> out;
    for (const auto& e : events_)
      if (e.txn == t && e.is_successful_write()) out.insert(*e.object);
    return out;
  }

  // Value of t's last successful write to x, if any.
  std::optional<Value> last_write_value(TxnId t, ObjectId x) const {
    std::optional<Value> out;
    for (const auto& e : events_)
      if (e.txn == t && e.is_successful_write() && *e.object == x)
        out = e.value;
    return out;
  }

  friend bool operator==(const History& a, const History& b) {
    return a.events_ == b.events_;
  }

 private:
  explicit History(std::vector<Event> events) : events_(std::move(events)) {
    for (size_t i = 1; i < events_.size(); ++i)
      if (events_[i - 1].index >= events_[i].index)
        throw std::invalid_argument("History: indices must strictly increase");
  }

  std::vector<TxnId> with_status(TxnStatus s) const {
    std::vector<TxnId> out;
    for (TxnId t : txns())
      if (status_of(t) == s) out.push_back(t);
    return out;
  }

  std::vector<Event> events_;
};

using TxnOrder = std::set<std::pair<TxnId, TxnId>>;

// ---------------------------------------------------------------------------
// Well-formedness

struct Violation {
  size_t event_pos;
  std::string what;
};

// Checks the per-transaction shape (read prefix, write part, one terminal),
// per-process seriality, and per-object uniqueness of successful write
// values across transactions. Returns the first offending event, or nullopt.
inline std::optional<Violation> validate_well_formed(const History& h) {
  enum Phase { Reads, Writes, Done };
  std::unordered_map<TxnId, Phase> phase;
  std::unordered_map<TxnId, ProcId> txn_proc;
  std::unordered_map<ProcId, TxnId> active_on_proc;
  std::map<std::pair<ObjectId, Value>, TxnId> write_values;

  for (size_t i = 0; i < h.size(); ++i) {
    const Event& e = h.at(i);
    // field shape
    switch (e.kind) {
      case Kind::Read:
        if (!e.object) return Violation{i, "read without object"};
        if (e.outcome == Outcome::Ok && !e.value)
          return Violation{i, "successful read without value"};
        if (e.outcome == Outcome::Abort && e.value)
          return Violation{i, "aborting read carries a value"};
        if (e.outcome == Outcome::Commit)
          return Violation{i, "read with commit outcome"};
        break;
      case Kind::Write:
        if (!e.object || !e.value)
          return Violation{i, "write without object or value"};
        if (e.outcome == Outcome::Commit)
          return Violation{i, "write with commit outcome"};
        break;
      case Kind::TryCommit:
        if (e.object || e.value)
          return Violation{i, "tryCommit with object or value"};
        if (e.outcome == Outcome::Ok)
          return Violation{i, "tryCommit must commit or abort"};
        break;
      case Kind::TryAbort:
        if (e.object || e.value)
          return Violation{i, "tryAbort with object or value"};
        if (e.outcome != Outcome::Abort)
          return Violation{i, "tryAbort must abort"};
        break;
    }
    if (e.txn == 0) return Violation{i, "txn id 0 is reserved for T0"};

    // one process per transaction; no interleaving within a process
    auto tp = txn_proc.find(e.txn);
    if (tp == txn_proc.end()) {
      txn_proc.emplace(e.txn, e.proc);
      auto act = active_on_proc.find(e.proc);
      if (act != active_on_proc.end() && act->second != e.txn)
        return Violation{i, "transaction begins before process's previous one completes"};
      active_on_proc[e.proc] = e.txn;
    } else if (tp->second != e.proc) {
      return Violation{i, "transaction events on two processes"};
    }

    // per-transaction shape
    Phase& ph = phase.try_emplace(e.txn, Reads).first->second;
    if (ph == Done) return Violation{i, "event after terminal event"};
    switch (e.kind) {
      case Kind::Read:
        if (ph != Reads) return Violation{i, "read after write"};
        break;
      case Kind::Write:
        ph = Writes;
        break;
      case Kind::TryCommit:
      case Kind::TryAbort:
        break;
    }
    if (e.is_terminal()) {
      ph = Done;
      active_on_proc.erase(e.proc);
    }

    if (e.is_successful_write()) {
      auto [it, fresh] =
          write_values.emplace(std::make_pair(*e.object, *e.value), e.txn);
      if (!fresh && it->second != e.txn)
        return Violation{i, "write value on this object reused by another transaction"};
    }
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Completion and transaction orders

// Inserts tryA(A) immediately after the last event of every incomplete
// transaction. Result is renumbered 0..n-1.
inline History completion(const History& h) {
  std::unordered_set<TxnId> open;
  for (TxnId t : h.incomplete()) open.insert(t);
  if (open.empty()) return History::from_events(h.events());

  std::vector<Event> out;
  out.reserve(h.size() + open.size());
  for (size_t i = 0; i < h.size(); ++i) {
    const Event& e = h.at(i);
    out.push_back(e);
    if (open.count(e.txn) && h.last_pos(e.txn) == i)
      out.push_back(make_abort(e.txn, e.proc));
  }
  return History::from_events(std::move(out));
}

// (Tk, Tm) iff Tk is complete in h and Tk's last event precedes Tm's first.
inline TxnOrder real_time_order(const History& h) {
  TxnOrder out;
  auto ts = h.txns();
  for (TxnId k : ts) {
    if (h.status_of(k) == TxnStatus::Incomplete) continue;
    size_t k_last = h.last_pos(k);
    for (TxnId m : ts) {
      if (m == k) continue;
      if (k_last < h.first_pos(m)) out.emplace(k, m);
    }
  }
  return out;
}

// Union of the w-w, w-r and r-w clauses over successful operations.
inline TxnOrder conflict_order(const History& h) {
  TxnOrder out;
  auto ts = h.txns();
  std::unordered_map<TxnId, std::set<ObjectId>> wset;
  std::unordered_map<TxnId, size_t> commit_pos;
  for (TxnId t : ts) {
    wset[t] = h.write_set(t);
    for (size_t i = 0; i < h.size(); ++i)
      if (h.at(i).txn == t && h.at(i).is_commit()) commit_pos[t] = i;
  }
  // w-w: commit order on intersecting write sets
  for (auto& [k, pk] : commit_pos)
    for (auto& [m, pm] : commit_pos) {
      if (k == m || pk >= pm) continue;
      for (ObjectId x : wset[k])
        if (wset[m].count(x)) {
          out.emplace(k, m);
          break;
        }
    }
  // w-r and r-w
  for (size_t i = 0; i < h.size(); ++i) {
    const Event& e = h.at(i);
    if (!e.is_successful_read()) continue;
    for (auto& [k, pk] : commit_pos) {
      if (k == e.txn || !wset[k].count(*e.object)) continue;
      if (pk < i)
        out.emplace(k, e.txn);  // w-r
      else
        out.emplace(e.txn, k);  // r-w
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Last-write, validity, legality

// Position of the latest commit event preceding the read at read_pos whose
// transaction successfully wrote the read's object; nullopt means T0.
inline std::optional<size_t> last_write(const History& h, size_t read_pos) {
  if (read_pos >= h.size() || !h.at(read_pos).is_successful_read())
    throw std::invalid_argument("last_write: not a successful read");
  ObjectId x = *h.at(read_pos).object;
  for (size_t i = read_pos; i-- > 0;) {
    const Event& e = h.at(i);
    if (e.is_commit() && h.write_set(e.txn).count(x)) return i;
  }
  return std::nullopt;
}

// Every successful read of x returning v has some transaction committing
// before it that wrote v to x (T0 wrote 0 to every object).
inline bool is_valid(const History& h) {
  for (size_t i = 0; i < h.size(); ++i) {
    const Event& e = h.at(i);
    if (!e.is_successful_read()) continue;
    if (*e.value == 0) continue;  // T0
    bool ok = false;
    for (size_t j = 0; j < i && !ok; ++j) {
      const Event& c = h.at(j);
      if (!c.is_commit()) continue;
      for (const Event& w : h.events())
        if (w.txn == c.txn && w.is_successful_write() &&
            *w.object == *e.object && *w.value == *e.value) {
          ok = true;
          break;
        }
    }
    if (!ok) return false;
  }
  return true;
}

// Every successful read returns exactly its last-write's value
// (the last committed write to the object, 0 if none).
inline bool is_legal(const History& h) {
  for (size_t i = 0; i < h.size(); ++i) {
    if (!h.at(i).is_successful_read()) continue;
    auto lw = last_write(h, i);
    Value expect = 0;
    if (lw) {
      auto v = h.last_write_value(h.at(*lw).txn, *h.at(i).object);
      expect = *v;
    }
    if (*h.at(i).value != expect) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Sub-history constructions

// Shortest prefix of h containing all events of t.
inline History prefix_up_to(const History& h, TxnId t) {
  size_t lp = h.last_pos(t);
  if (lp == History::npos)
    throw std::invalid_argument("prefix_up_to: unknown transaction");
  std::vector<Event> out(h.events().begin(), h.events().begin() + lp + 1);
  return History::from_indexed(std::move(out));
}

// All events of t if committed; t's read events otherwise. For a
// non-committed t, the last event is kept as well even when it is not a
// read: it pins t's position so that taking sub-histories is idempotent
// (an unsuccessful terminal adds neither conflicts nor reads).
inline std::vector<Event> applicable_events(const History& h, TxnId t) {
  if (!h.contains_txn(t))
    throw std::invalid_argument("applicable_events: unknown transaction");
  bool all = h.status_of(t) == TxnStatus::Committed;
  size_t lp = h.last_pos(t);
  std::vector<Event> out;
  for (size_t i = 0; i < h.size(); ++i) {
    const Event& e = h.at(i);
    if (e.txn == t && (all || e.kind == Kind::Read || i == lp))
      out.push_back(e);
  }
  return out;
}

// Sub-history of h restricted to the given transactions, order preserved.
inline History restrict_to_txns(const History& h, const std::set<TxnId>& keep) {
  std::vector<Event> out;
  for (const Event& e : h.events())
    if (keep.count(e.txn)) out.push_back(e);
  return History::from_indexed(std::move(out));
}

// h with all events of the transactions in r removed.
inline History remove_txns(const History& h, const std::set<TxnId>& r) {
  std::vector<Event> out;
  for (const Event& e : h.events())
    if (!r.count(e.txn)) out.push_back(e);
  return History::from_indexed(std::move(out));
}

// subs(t, h): events of transactions committed in h's shortest prefix
// containing t, plus t's applicable events, in h's order.
inline History local_sub_history(const History& h, TxnId t) {
  History pre = prefix_up_to(h, t);
  std::unordered_set<TxnId> committed;
  for (TxnId c : pre.committed()) committed.insert(c);
  bool t_all = committed.count(t) != 0;
  const size_t last = pre.size() - 1;  // t's final event closes the prefix
  std::vector<Event> out;
  for (size_t i = 0; i < pre.size(); ++i) {
    const Event& e = pre.at(i);
    if (e.txn == t) {
      if (t_all || e.kind == Kind::Read || i == last) out.push_back(e);
    } else if (committed.count(e.txn)) {
      out.push_back(e);
    }
  }
  return History::from_indexed(std::move(out));
}

// The set H^{T,C}: prefix_up_to(h, t) with t's last operation replaced per
// its kind. An aborted read enumerates {0} plus every value committed on the
// object within the prefix.
inline std::vector<History> candidate_commit_variants(const History& h, TxnId t) {
  if (h.status_of(t) != TxnStatus::Aborted)
    throw std::invalid_argument("candidate_commit_variants: transaction not aborted");
  History pre = prefix_up_to(h, t);
  const size_t last = pre.size() - 1;  // prefix ends at t's last operation
  const Event& term = pre.at(last);

  std::vector<History> out;
  auto with_last = [&](Event repl) {
    std::vector<Event> ev = pre.events();
    repl.index = ev[last].index;
    ev[last] = repl;
    out.push_back(History::from_indexed(std::move(ev)));
  };

  switch (term.kind) {
    case Kind::Read: {
      std::set<Value> candidates{0};
      for (TxnId c : pre.committed()) {
        auto v = pre.last_write_value(c, *term.object);
        if (v) candidates.insert(*v);
      }
      for (Value v : candidates) {
        Event r = make_read(t, *term.object, v, term.proc);
        with_last(r);
      }
      break;
    }
    case Kind::Write:
      with_last(make_write(t, *term.object, *term.value, term.proc));
      break;
    case Kind::TryCommit:
      with_last(make_commit(t, term.proc));
      break;
    case Kind::TryAbort:
      with_last(make_commit(t, term.proc));
      break;
  }
  return out;
}

// Transactions aborted before t's terminal event, plus transactions live at
// t's terminal that never commit in h. Always a subset of aborted + incomplete.
inline std::set<TxnId> prev_aborted(const History& h, TxnId t) {
  if (h.status_of(t) == TxnStatus::Incomplete)
    throw std::invalid_argument("prev_aborted: transaction incomplete");
  size_t term = h.last_pos(t);
  std::set<TxnId> out;
  for (TxnId u : h.txns()) {
    if (u == t) continue;
    TxnStatus s = h.status_of(u);
    if (s == TxnStatus::Committed) continue;
    if (s == TxnStatus::Aborted && h.last_pos(u) < term) out.insert(u);
    if (h.first_pos(u) < term &&
        (s == TxnStatus::Incomplete || h.last_pos(u) > term))
      out.insert(u);
  }
  return out;
}

}  // namespace tmlab
