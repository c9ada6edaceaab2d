#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <vector>

#include "tmlab/history.hpp"

// Deliberately naive re-implementations used only to cross-check the library;
// they share no code with the checked implementations.
namespace tmlab::testing {

using tmlab::Event;
using tmlab::History;
using tmlab::ObjectId;
using tmlab::TxnId;
using tmlab::Value;

inline std::set<std::pair<TxnId, TxnId>> oracle_real_time(const History& h) {
  std::set<std::pair<TxnId, TxnId>> out;
  for (TxnId k : h.txns()) {
    bool complete = false;
    size_t k_max = 0;
    for (size_t i = 0; i < h.size(); ++i)
      if (h.at(i).txn == k) {
        k_max = i;
        if (h.at(i).outcome != tmlab::Outcome::Ok) complete = true;
      }
    if (!complete) continue;
    for (TxnId m : h.txns()) {
      if (m == k) continue;
      bool all_after = true;
      for (size_t i = 0; i <= k_max && all_after; ++i)
        if (h.at(i).txn == m) all_after = false;
      if (all_after) out.emplace(k, m);
    }
  }
  return out;
}

// Clause-by-clause enumeration over event pairs.
inline std::set<std::pair<TxnId, TxnId>> oracle_conflict_order(
    const History& h) {
  std::set<std::pair<TxnId, TxnId>> out;
  const auto& ev = h.events();
  auto commits = [&](TxnId t, size_t& pos) {
    for (size_t i = 0; i < ev.size(); ++i)
      if (ev[i].txn == t && ev[i].kind == tmlab::Kind::TryCommit &&
          ev[i].outcome == tmlab::Outcome::Commit) {
        pos = i;
        return true;
      }
    return false;
  };
  for (size_t i = 0; i < ev.size(); ++i) {
    const Event& a = ev[i];
    // w-w: both writers committed, commits ordered, same object written
    if (a.kind == tmlab::Kind::Write && a.outcome == tmlab::Outcome::Ok) {
      for (size_t j = 0; j < ev.size(); ++j) {
        const Event& b = ev[j];
        if (b.kind != tmlab::Kind::Write || b.outcome != tmlab::Outcome::Ok)
          continue;
        if (b.txn == a.txn || *b.object != *a.object) continue;
        size_t ca, cb;
        if (commits(a.txn, ca) && commits(b.txn, cb) && ca < cb)
          out.emplace(a.txn, b.txn);
      }
    }
    // w-r and r-w between a committed writer and another txn's read
    if (a.kind == tmlab::Kind::Read && a.outcome == tmlab::Outcome::Ok) {
      for (size_t j = 0; j < ev.size(); ++j) {
        const Event& b = ev[j];
        if (b.kind != tmlab::Kind::Write || b.outcome != tmlab::Outcome::Ok)
          continue;
        if (b.txn == a.txn || *b.object != *a.object) continue;
        size_t cb;
        if (!commits(b.txn, cb)) continue;
        if (cb < i)
          out.emplace(b.txn, a.txn);
        else
          out.emplace(a.txn, b.txn);
      }
    }
  }
  return out;
}

// completion() re-done by hand: close every incomplete transaction with
// tryA(A) right after its last event.
inline std::vector<Event> oracle_completion_events(const History& h) {
  std::vector<Event> out;
  for (size_t i = 0; i < h.size(); ++i) {
    out.push_back(h.at(i));
    const Event& e = h.at(i);
    bool is_last = true;
    for (size_t j = i + 1; j < h.size() && is_last; ++j)
      if (h.at(j).txn == e.txn) is_last = false;
    if (!is_last) continue;
    bool has_terminal = false;
    for (const Event& f : h.events())
      if (f.txn == e.txn && f.outcome != tmlab::Outcome::Ok)
        has_terminal = true;
    if (!has_terminal) out.push_back(tmlab::make_abort(e.txn, e.proc));
  }
  return out;
}

// Legality of a transaction order: walking the order, every read of a
// transaction must see the committed state before it (our histories never
// read own writes: reads precede writes within a transaction).
inline bool order_is_legal(const std::vector<Event>& completed,
                           const std::vector<TxnId>& order) {
  std::map<ObjectId, Value> state;
  for (TxnId t : order) {
    bool committed = false;
    for (const Event& e : completed)
      if (e.txn == t && e.outcome == tmlab::Outcome::Commit) committed = true;
    for (const Event& e : completed) {
      if (e.txn != t) continue;
      if (e.kind == tmlab::Kind::Read && e.outcome == tmlab::Outcome::Ok) {
        Value cur = state.count(*e.object) ? state[*e.object] : 0;
        if (*e.value != cur) return false;
      }
    }
    if (committed)
      for (const Event& e : completed)
        if (e.txn == t && e.kind == tmlab::Kind::Write &&
            e.outcome == tmlab::Outcome::Ok)
          state[*e.object] = *e.value;
  }
  return true;
}

inline bool respects(const std::vector<TxnId>& order,
                     const std::set<std::pair<TxnId, TxnId>>& must) {
  std::map<TxnId, size_t> pos;
  for (size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
  for (auto& [a, b] : must)
    if (pos.count(a) && pos.count(b) && pos[a] >= pos[b]) return false;
  return true;
}

// Definition-style opacity oracle: enumerate all permutations respecting the
// real-time order, look for a legal one.
inline bool oracle_opaque(const History& h) {
  auto completed = oracle_completion_events(h);
  std::vector<TxnId> order = h.txns();
  std::sort(order.begin(), order.end());
  auto rt = oracle_real_time(h);
  do {
    if (respects(order, rt) && order_is_legal(completed, order)) return true;
  } while (std::next_permutation(order.begin(), order.end()));
  return false;
}

// Definition-5 oracle: a legal permutation respecting both the real-time and
// the conflict order.
inline bool oracle_conflict_opaque(const History& h) {
  auto completed = oracle_completion_events(h);
  std::vector<TxnId> order = h.txns();
  std::sort(order.begin(), order.end());
  auto rt = oracle_real_time(h);
  auto co = oracle_conflict_order(h);
  do {
    if (respects(order, rt) && respects(order, co) &&
        order_is_legal(completed, order))
      return true;
  } while (std::next_permutation(order.begin(), order.end()));
  return false;
}

}  // namespace tmlab::testing
