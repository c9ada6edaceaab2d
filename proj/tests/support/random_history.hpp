#pragma once

#include <random>

#include "tmlab/history.hpp"

namespace tmlab::testing {

struct GenOptions {
  uint32_t max_txns = 6;
  uint32_t max_objects = 3;
  uint32_t max_procs = 3;
  uint32_t max_ops_per_txn = 4;
  // Probability that a successful read returns the value legal at its
  // position; otherwise a random committed-or-zero value is used (keeps the
  // history valid but usually not legal).
  double legal_read_bias = 1.0;
  double commit_prob = 0.6;      // vs abort, for terminated transactions
  double incomplete_prob = 0.1;  // leave the transaction open
};

// One random well-formed history; always valid, legal iff every read drew
// the legal value.
inline tmlab::History random_history(std::mt19937_64& rng,
                                     const GenOptions& opt = {}) {
  using namespace tmlab;
  auto pick = [&](uint64_t n) { return rng() % n; };
  auto coin = [&](double p) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
  };

  uint32_t n_txns = 1 + pick(opt.max_txns);
  uint32_t n_objs = 1 + pick(opt.max_objects);
  uint32_t n_procs = 1 + pick(opt.max_procs);

  struct Plan {
    TxnId txn;
    ProcId proc;
    uint32_t reads, writes;
    int fate;  // 0 commit, 1 abort, 2 incomplete
  };
  std::vector<Plan> plans;
  for (uint32_t i = 0; i < n_txns; ++i) {
    Plan p;
    p.txn = i + 1;
    p.proc = static_cast<ProcId>(pick(n_procs));
    uint32_t ops = 1 + pick(opt.max_ops_per_txn);
    p.reads = pick(ops + 1);
    p.writes = ops - p.reads;
    p.fate = coin(opt.incomplete_prob) ? 2 : (coin(opt.commit_prob) ? 0 : 1);
    plans.push_back(p);
  }

  // Interleave: a proc runs its transactions in sequence; at each step a
  // random proc with pending work emits its next event.
  std::vector<std::vector<size_t>> proc_queue(n_procs);
  for (size_t i = 0; i < plans.size(); ++i)
    proc_queue[plans[i].proc].push_back(i);
  // Only a process's final transaction may stay incomplete; an earlier one
  // would block its successors (per-process seriality).
  for (auto& q : proc_queue)
    for (size_t i = 0; i + 1 < q.size(); ++i)
      if (plans[q[i]].fate == 2) plans[q[i]].fate = 1;

  struct Cursor {
    size_t plan = 0;        // index into proc_queue entry
    uint32_t emitted = 0;   // events emitted for the current transaction
    bool done() const { return false; }
  };
  std::vector<Cursor> cur(n_procs);

  std::map<ObjectId, Value> committed_val;  // current committed value
  std::vector<std::set<Value>> ever_committed(n_objs);  // incl. 0
  for (uint32_t x = 0; x < n_objs; ++x) ever_committed[x].insert(0);

  std::vector<Event> ev;
  std::vector<uint32_t> write_ctr(n_txns + 1, 0);
  std::vector<std::map<ObjectId, Value>> txn_writes(n_txns + 1);

  auto emit_step = [&](ProcId pr) -> bool {
    auto& c = cur[pr];
    if (c.plan >= proc_queue[pr].size()) return false;
    Plan& p = plans[proc_queue[pr][c.plan]];
    uint32_t total = p.reads + p.writes;
    if (c.emitted < p.reads) {
      ObjectId x = static_cast<ObjectId>(pick(n_objs));
      Value legal = committed_val.count(x) ? committed_val[x] : 0;
      Value v = legal;
      if (!coin(opt.legal_read_bias)) {
        auto& pool = ever_committed[x];
        auto it = pool.begin();
        std::advance(it, pick(pool.size()));
        v = *it;
      }
      ev.push_back(make_read(p.txn, x, v, pr));
    } else if (c.emitted < total) {
      ObjectId x = static_cast<ObjectId>(pick(n_objs));
      Value v = encode_value(p.txn, write_ctr[p.txn]++);
      txn_writes[p.txn][x] = v;
      ev.push_back(make_write(p.txn, x, v, pr));
    } else {
      switch (p.fate) {
        case 0:
          ev.push_back(make_commit(p.txn, pr));
          for (auto& [x, v] : txn_writes[p.txn]) {
            committed_val[x] = v;
            ever_committed[x].insert(v);
          }
          break;
        case 1:
          ev.push_back(coin(0.5) ? make_commit_abort(p.txn, pr)
                                 : make_abort(p.txn, pr));
          break;
        default:
          break;  // leave incomplete: simply stop emitting
      }
      ++c.plan;
      c.emitted = 0;
      return true;
    }
    ++c.emitted;
    // An incomplete transaction stops at a random point before its terminal.
    if (p.fate == 2 && (c.emitted == total || coin(0.3))) {
      ++c.plan;
      c.emitted = 0;
    }
    return true;
  };

  std::vector<ProcId> procs;
  for (ProcId pr = 0; pr < n_procs; ++pr)
    if (!proc_queue[pr].empty()) procs.push_back(pr);
  while (!procs.empty()) {
    size_t i = pick(procs.size());
    if (!emit_step(procs[i])) procs.erase(procs.begin() + i);
  }
  return History::from_events(std::move(ev));
}

}  // namespace tmlab::testing
