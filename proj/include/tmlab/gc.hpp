#pragma once

#include <map>
#include <set>
#include <stdexcept>
#include <vector>

#include "tmlab/history.hpp"

namespace tmlab {

// Bookkeeping for obsolete-transaction detection: for every terminated
// transaction, the set of transactions that were live at its termination.
class LiveSetTable {
 public:
  // Records liveSet(t) = live_now and removes t from every other liveSet.
  void mark_termination(TxnId t, const std::set<TxnId>& live_now) {
    live_sets_[t] = live_now;
    for (auto& [u, s] : live_sets_) s.erase(t);
  }

  bool has(TxnId t) const { return live_sets_.count(t) != 0; }
  const std::set<TxnId>& live_set(TxnId t) const { return live_sets_.at(t); }
  bool obsolete(TxnId t) const {
    auto it = live_sets_.find(t);
    return it != live_sets_.end() && it->second.empty();
  }
  void forget(TxnId t) { live_sets_.erase(t); }

 private:
  std::map<TxnId, std::set<TxnId>> live_sets_;
};

// Transactions live (started, not yet terminated) at t's terminal event.
inline std::set<TxnId> live_set_at(const History& h, TxnId t) {
  if (h.status_of(t) == TxnStatus::Incomplete)
    throw std::invalid_argument("live_set_at: transaction incomplete");
  size_t term = h.last_pos(t);
  std::set<TxnId> out;
  for (TxnId u : h.txns()) {
    if (u == t || h.first_pos(u) >= term) continue;
    if (h.status_of(u) == TxnStatus::Incomplete || h.last_pos(u) > term)
      out.insert(u);
  }
  return out;
}

// A complete transaction is obsolete once everything live at its
// termination has terminated.
inline bool is_obsolete(const History& h, TxnId t) {
  if (h.status_of(t) == TxnStatus::Incomplete) return false;
  for (TxnId u : live_set_at(h, t))
    if (h.status_of(u) == TxnStatus::Incomplete) return false;
  return true;
}

// Committed transactions in commit order.
inline std::vector<TxnId> commit_order(const History& h) {
  std::vector<TxnId> out;
  for (const Event& e : h.events())
    if (e.is_commit()) out.push_back(e.txn);
  return out;
}

// The set U: the maximal prefix of the commit order consisting of obsolete
// transactions. Downward-closed in commit order by construction.
inline std::vector<TxnId> obsolete_set(const History& h) {
  std::vector<TxnId> out;
  for (TxnId t : commit_order(h)) {
    if (!is_obsolete(h, t)) break;
    out.push_back(t);
  }
  return out;
}

inline void require_downward_closed(const History& h,
                                    const std::vector<TxnId>& u) {
  std::set<TxnId> us(u.begin(), u.end());
  if (us.size() != u.size())
    throw std::invalid_argument("trim: duplicate transactions in U");
  auto order = commit_order(h);
  for (size_t i = 0; i < order.size(); ++i) {
    if (i < u.size() && order[i] != u[i])
      throw std::invalid_argument("trim: U is not a commit-order prefix");
  }
  if (u.size() > order.size())
    throw std::invalid_argument("trim: U contains uncommitted transactions");
}

// The shortest prefix of h in which every transaction live at the
// termination of U's latest member is complete.
inline History obs_prefix(const History& h, const std::vector<TxnId>& u) {
  if (u.empty()) return History();
  require_downward_closed(h, u);
  TxnId last = u.back();
  size_t boundary = h.last_pos(last);
  for (TxnId t : live_set_at(h, last)) {
    if (h.status_of(t) == TxnStatus::Incomplete)
      throw std::invalid_argument("obs_prefix: liveSet member still incomplete");
    boundary = std::max(boundary, h.last_pos(t));
  }
  std::vector<Event> out(h.events().begin(), h.events().begin() + boundary + 1);
  return History::from_indexed(std::move(out));
}

// Removes every read event preceding the commit of U's latest member; of the
// transactions in U, keeps per object only the writes of the last one to
// commit (with its commit event), removing fully shadowed transactions.
inline History trim(const History& h, const std::vector<TxnId>& u) {
  if (u.empty()) return History::from_indexed(h.events());
  require_downward_closed(h, u);
  std::set<TxnId> us(u.begin(), u.end());
  size_t last_commit_pos = h.last_pos(u.back());

  std::map<ObjectId, TxnId> last_writer;  // among U, in commit order
  for (TxnId t : u)
    for (ObjectId x : h.write_set(t)) last_writer[x] = t;
  std::set<TxnId> keep_writer;
  for (auto& [x, t] : last_writer) keep_writer.insert(t);

  std::vector<Event> out;
  for (size_t i = 0; i < h.size(); ++i) {
    const Event& e = h.at(i);
    if (e.kind == Kind::Read && i < last_commit_pos) continue;
    if (us.count(e.txn)) {
      if (!keep_writer.count(e.txn)) continue;
      if (e.is_successful_write() && last_writer.at(*e.object) != e.txn)
        continue;  // shadowed by a later obsolete writer
      if (e.kind == Kind::Read) continue;
      out.push_back(e);
    } else {
      out.push_back(e);
    }
  }
  return History::from_indexed(std::move(out));
}

}  // namespace tmlab
