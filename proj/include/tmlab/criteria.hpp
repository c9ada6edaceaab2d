#pragma once

#include <functional>
#include <stdexcept>
#include <string>

#include "tmlab/conflict_graph.hpp"
#include "tmlab/history.hpp"

namespace tmlab {

struct BudgetExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Brute-force checks fail explicitly instead of silently degrading.
struct CheckBudget {
  size_t max_txns_for_factorial = 8;  // permutation-based opacity checks
  size_t max_subset_bits = 12;        // non-interference subset enumeration
};

enum class Criterion {
  Opacity,
  StrictSerializability,
  ConflictOpacity,
  LocalOpacity,
  CLO,
  VWC,
};

inline const char* criterion_name(Criterion c) {
  switch (c) {
    case Criterion::Opacity: return "opacity";
    case Criterion::StrictSerializability: return "sser";
    case Criterion::ConflictOpacity: return "co-opacity";
    case Criterion::LocalOpacity: return "lo";
    case Criterion::CLO: return "clo";
    case Criterion::VWC: return "vwc";
  }
  return "?";
}

namespace detail {

// Searches for a legal linear extension of the real-time order over the
// transactions of completion(h). Legality is tracked incrementally: a
// transaction's successful reads must match the current committed value of
// each object, and a committed transaction then installs its writes.
class OpacitySearch {
 public:
  explicit OpacitySearch(const History& h) : hc_(completion(h)) {
    txns_ = hc_.txns();
    // The witness must respect the real-time order of h itself, not of its
    // completion (closing an incomplete transaction can add pairs).
    rt_ = real_time_order(h);
  }

  std::optional<std::vector<TxnId>> witness() {
    chosen_.clear();
    used_.clear();
    values_.clear();
    if (search()) return chosen_;
    return std::nullopt;
  }

 private:
  bool search() {
    if (chosen_.size() == txns_.size()) return true;
    for (TxnId t : txns_) {
      if (used_.count(t)) continue;
      bool ready = true;
      for (auto& [a, b] : rt_)
        if (b == t && !used_.count(a)) {
          ready = false;
          break;
        }
      if (!ready) continue;
      if (!reads_consistent(t)) continue;
      auto undo = apply(t);
      chosen_.push_back(t);
      used_.insert(t);
      if (search()) return true;
      used_.erase(t);
      chosen_.pop_back();
      revert(undo);
    }
    return false;
  }

  bool reads_consistent(TxnId t) const {
    for (const Event& e : hc_.events()) {
      if (e.txn != t || !e.is_successful_read()) continue;
      auto it = values_.find(*e.object);
      Value cur = it == values_.end() ? 0 : it->second;
      if (*e.value != cur) return false;
    }
    return true;
  }

  using Undo = std::vector<std::pair<ObjectId, std::optional<Value>>>;

  Undo apply(TxnId t) {
    Undo undo;
    if (hc_.status_of(t) != TxnStatus::Committed) return undo;
    for (const Event& e : hc_.events()) {
      if (e.txn != t || !e.is_successful_write()) continue;
      auto it = values_.find(*e.object);
      undo.emplace_back(*e.object, it == values_.end()
                                       ? std::nullopt
                                       : std::optional<Value>(it->second));
      values_[*e.object] = *e.value;
    }
    return undo;
  }

  void revert(const Undo& undo) {
    for (auto it = undo.rbegin(); it != undo.rend(); ++it) {
      if (it->second)
        values_[it->first] = *it->second;
      else
        values_.erase(it->first);
    }
  }

  History hc_;
  std::vector<TxnId> txns_;
  TxnOrder rt_;
  std::vector<TxnId> chosen_;
  std::set<TxnId> used_;
  std::map<ObjectId, Value> values_;
};

}  // namespace detail

// Serialization witness for an opaque history, or nullopt.
inline std::optional<std::vector<TxnId>> opacity_witness(
    const History& h, const CheckBudget& budget = {}) {
  if (h.txns().size() > budget.max_txns_for_factorial)
    throw BudgetExceeded("opacity: " + std::to_string(h.txns().size()) +
                         " transactions exceed the permutation budget");
  return detail::OpacitySearch(h).witness();
}

inline bool is_opaque(const History& h, const CheckBudget& budget = {}) {
  return opacity_witness(h, budget).has_value();
}

inline bool is_strictly_serializable(const History& h,
                                     const CheckBudget& budget = {}) {
  if (!is_valid(h)) return false;
  std::set<TxnId> keep;
  for (TxnId t : h.committed()) keep.insert(t);
  return is_opaque(restrict_to_txns(h, keep), budget);
}

inline bool is_locally_opaque(const History& h, const CheckBudget& budget = {}) {
  for (TxnId t : h.txns())
    if (!is_opaque(local_sub_history(h, t), budget)) return false;
  return true;
}

// Per-transaction serialization witnesses; nullopt if any sub-history fails.
inline std::optional<std::map<TxnId, std::vector<TxnId>>> lo_witnesses(
    const History& h, const CheckBudget& budget = {}) {
  std::map<TxnId, std::vector<TxnId>> out;
  for (TxnId t : h.txns()) {
    auto w = opacity_witness(local_sub_history(h, t), budget);
    if (!w) return std::nullopt;
    out[t] = *w;
  }
  return out;
}

inline bool is_clo(const History& h) {
  for (TxnId t : h.txns())
    if (!is_conflict_opaque(local_sub_history(h, t))) return false;
  return true;
}

// Transitive closure of same-process real-time precedence and read-from,
// plus t itself.
inline std::set<TxnId> causal_past(const History& h, TxnId t) {
  if (!h.contains_txn(t))
    throw std::invalid_argument("causal_past: unknown transaction");
  auto ts = h.txns();
  TxnOrder rt = real_time_order(h);
  std::map<TxnId, std::vector<TxnId>> preds;
  std::unordered_map<TxnId, ProcId> proc;
  for (const Event& e : h.events()) proc[e.txn] = e.proc;
  for (auto& [a, b] : rt)
    if (proc[a] == proc[b]) preds[b].push_back(a);
  for (const Event& e : h.events()) {
    if (!e.is_successful_read()) continue;
    for (TxnId w : ts) {
      if (w == e.txn || h.status_of(w) != TxnStatus::Committed) continue;
      auto v = h.last_write_value(w, *e.object);
      if (v && *v == *e.value) preds[e.txn].push_back(w);
    }
  }
  std::set<TxnId> out{t};
  std::vector<TxnId> frontier{t};
  while (!frontier.empty()) {
    TxnId v = frontier.back();
    frontier.pop_back();
    for (TxnId p : preds[v])
      if (out.insert(p).second) frontier.push_back(p);
  }
  return out;
}

inline bool is_vwc(const History& h, const CheckBudget& budget = {}) {
  std::set<TxnId> committed;
  for (TxnId t : h.committed()) committed.insert(t);
  if (!is_opaque(restrict_to_txns(h, committed), budget)) return false;
  for (TxnId t : h.txns())
    if (!is_opaque(restrict_to_txns(h, causal_past(h, t)), budget))
      return false;
  return true;
}

inline bool check(const History& h, Criterion c, const CheckBudget& budget = {}) {
  switch (c) {
    case Criterion::Opacity: return is_opaque(h, budget);
    case Criterion::StrictSerializability: return is_strictly_serializable(h, budget);
    case Criterion::ConflictOpacity: return is_conflict_opaque(h);
    case Criterion::LocalOpacity: return is_locally_opaque(h, budget);
    case Criterion::CLO: return is_clo(h);
    case Criterion::VWC: return is_vwc(h, budget);
  }
  throw std::logic_error("check: bad criterion");
}

// ---------------------------------------------------------------------------
// Permissiveness and non-interference

struct InterferenceWitness {
  TxnId txn = 0;                 // the aborted transaction that could commit
  std::set<TxnId> removed;       // the subset R of prevAborted
  size_t variant_index = 0;      // index into candidateCommitVariants
};

// H is in P and no aborted transaction's commit variant is in P.
inline bool is_permissive(const History& h, Criterion c,
                          const CheckBudget& budget = {}) {
  if (!check(h, c, budget)) return false;
  for (TxnId t : h.aborted())
    for (const History& v : candidate_commit_variants(h, t))
      if (check(v, c, budget)) return false;
  return true;
}

// H is in P and no commit variant succeeds even after removing any subset of
// the transactions aborted or live when the aborted transaction terminated.
inline std::optional<InterferenceWitness> interference_witness(
    const History& h, Criterion c, const CheckBudget& budget = {}) {
  for (TxnId t : h.aborted()) {
    std::set<TxnId> prev = prev_aborted(h, t);
    if (prev.size() > budget.max_subset_bits)
      throw BudgetExceeded("non-interference: prevAborted has " +
                           std::to_string(prev.size()) +
                           " transactions, exceeding the subset budget");
    std::vector<TxnId> pool(prev.begin(), prev.end());
    for (uint64_t mask = 0; mask < (uint64_t{1} << pool.size()); ++mask) {
      std::set<TxnId> r;
      for (size_t i = 0; i < pool.size(); ++i)
        if (mask & (uint64_t{1} << i)) r.insert(pool[i]);
      // H^{T,C}_{-R}: drop R first, then form the commit variants
      auto variants = candidate_commit_variants(remove_txns(h, r), t);
      for (size_t vi = 0; vi < variants.size(); ++vi)
        if (check(variants[vi], c, budget)) return InterferenceWitness{t, r, vi};
    }
  }
  return std::nullopt;
}

inline bool is_non_interfering(const History& h, Criterion c,
                               const CheckBudget& budget = {}) {
  if (!check(h, c, budget)) return false;
  return !interference_witness(h, c, budget).has_value();
}

}  // namespace tmlab
