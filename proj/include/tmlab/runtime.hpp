#pragma once

#include <algorithm>
#include <atomic>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "tmlab/conflict_graph.hpp"
#include "tmlab/gc.hpp"
#include "tmlab/history.hpp"

namespace tmlab {

enum class Mode { Sgt, SgtGc };

struct RuntimeOptions {
  Mode mode = Mode::Sgt;
  // Test-only mutation: skip the conflict-graph check on the read path.
  bool unsafe_skip_read_check = false;
};

// FIFO handoff: tickets are served strictly in acquisition order.
class TicketLock {
 public:
  void lock() {
    uint64_t ticket = next_.fetch_add(1, std::memory_order_relaxed);
    while (serving_.load(std::memory_order_acquire) != ticket)
      std::this_thread::yield();
  }
  void unlock() { serving_.fetch_add(1, std::memory_order_release); }

 private:
  std::atomic<uint64_t> next_{0};
  std::atomic<uint64_t> serving_{0};
};

// Immutable published view of the committed history.
struct Snapshot {
  History hist;        // annotated events of committed transactions
  int64_t seq_num = 0; // largest commit sequence number
  std::map<ObjectId, Value> last_committed;  // current value per object
};

struct TxnCtx {
  TxnId txn = 0;
  ProcId proc = 0;
  enum class St { Live, Committed, Aborted } status = St::Live;
  std::shared_ptr<const Snapshot> snap;
  std::vector<Event> own;  // this transaction's annotated events so far
  int64_t loc_seq = 0;
  bool has_op = false;
  bool has_write = false;
  std::vector<Event> buffered_writes;  // not yet in the trace
};

// Weaves a live transaction's annotated events into a committed-history
// snapshot: reads right after the commit whose sequence number they observed,
// writes after all the reads, a commit record last.
inline History merge_local(const History& snapshot,
                           const std::vector<Event>& own) {
  std::vector<Event> reads, writes;
  std::optional<Event> term;
  for (const Event& e : own) {
    if (!e.seq) throw std::logic_error("merge_local: event without seq");
    switch (e.kind) {
      case Kind::Read: reads.push_back(e); break;
      case Kind::Write: writes.push_back(e); break;
      default: term = e; break;
    }
  }
  std::vector<Event> out;
  out.reserve(snapshot.size() + own.size());
  size_t ri = 0;
  for (const Event& e : snapshot.events()) {
    if (e.is_commit()) {
      while (ri < reads.size() && *reads[ri].seq < *e.seq)
        out.push_back(reads[ri++]);
      out.push_back(e);
      // a read anchored at this commit's seq goes immediately after it
      while (ri < reads.size() && *reads[ri].seq == *e.seq)
        out.push_back(reads[ri++]);
    } else {
      out.push_back(e);
    }
  }
  while (ri < reads.size()) out.push_back(reads[ri++]);
  for (const Event& w : writes) out.push_back(w);
  if (term) out.push_back(*term);
  return History::from_events(std::move(out));
}

// Spec-facing wrapper: local is a previously merged local history; the live
// transaction is its unique non-committed one.
inline History merge_histories(const History& local, const History& snapshot) {
  std::vector<Event> own;
  for (TxnId t : local.txns())
    if (local.status_of(t) != TxnStatus::Committed)
      for (const Event& e : local.events())
        if (e.txn == t) own.push_back(e);
  return merge_local(snapshot, own);
}

class Runtime {
 public:
  struct Stats {
    uint64_t commits = 0;
    uint64_t forced_aborts = 0;
    int64_t ghist_high_water = 0;
  };

  explicit Runtime(RuntimeOptions opts = {})
      : opts_(opts), snap_(std::make_shared<Snapshot>()) {}

  Mode mode() const { return opts_.mode; }

  std::shared_ptr<TxnCtx> begin(ProcId proc) {
    auto ctx = std::make_shared<TxnCtx>();
    ctx->txn = next_txn_.fetch_add(1, std::memory_order_relaxed);
    ctx->proc = proc;
    if (opts_.mode == Mode::SgtGc) {
      std::lock_guard g(glock_);
      live_txns_.insert(ctx->txn);
    }
    {
      std::lock_guard g(ctx_mu_);
      ctxs_.push_back(ctx);
    }
    return ctx;
  }

  // Returns the value read, or nullopt on forceful abort.
  std::optional<Value> read(TxnCtx& ctx, ObjectId x) {
    require_live(ctx);
    if (ctx.has_write)
      throw std::logic_error("read after write within a transaction");

    std::shared_ptr<const Snapshot> snap;
    Value v = 0;
    size_t slot;
    {
      std::lock_guard g(trace_mu_);
      snap = snap_;
      auto it = snap->last_committed.find(x);
      if (it != snap->last_committed.end()) v = it->second;
      Event e = make_read(ctx.txn, x, v, ctx.proc);
      e.seq = snap->seq_num;
      slot = trace_.size();
      trace_.push_back(e);
      live_reads_[ctx.txn].push_back(e);
    }
    ctx.snap = snap;
    ctx.loc_seq = snap->seq_num;
    ctx.has_op = true;

    Event rec = make_read(ctx.txn, x, v, ctx.proc);
    rec.seq = snap->seq_num;
    ctx.own.push_back(rec);

    if (!opts_.unsafe_skip_read_check) {
      History merged = merge_local(snap->hist, ctx.own);
      if (find_cycle(build_graph(merged))) {
        ctx.own.pop_back();
        ctx.status = TxnCtx::St::Aborted;
        {
          std::lock_guard g(trace_mu_);
          trace_[slot].value.reset();
          trace_[slot].outcome = Outcome::Abort;
          live_reads_.erase(ctx.txn);
        }
        forced_aborts_.fetch_add(1, std::memory_order_relaxed);
        if (opts_.mode == Mode::SgtGc) terminate_gc(ctx.txn);
        return std::nullopt;
      }
    }
    return v;
  }

  void write(TxnCtx& ctx, ObjectId x, Value v) {
    require_live(ctx);
    Event w = make_write(ctx.txn, x, v, ctx.proc);
    if (!ctx.has_op) {
      std::shared_ptr<const Snapshot> snap;
      {
        std::lock_guard g(trace_mu_);
        snap = snap_;
        Event e = w;
        e.seq = snap->seq_num;
        trace_.push_back(e);
      }
      ctx.snap = snap;
      ctx.loc_seq = snap->seq_num;
    } else {
      w.seq = ctx.loc_seq;
      ctx.buffered_writes.push_back(w);
    }
    w.seq = ctx.loc_seq;
    ctx.own.push_back(w);
    ctx.has_op = true;
    ctx.has_write = true;
  }

  // COMMIT (true) or forceful ABORT (false).
  bool try_commit(TxnCtx& ctx) {
    require_live(ctx);
    std::lock_guard commit_guard(glock_);
    // Validation and publication must be atomic with respect to reads: a
    // read traced between them would sit before the commit record without
    // the check having seen it.
    std::lock_guard g(trace_mu_);

    std::shared_ptr<const Snapshot> snap = snap_;
    flush_buffered_writes(ctx);
    std::vector<Event> other_reads;
    for (const auto& [t, evs] : live_reads_)
      if (t != ctx.txn)
        other_reads.insert(other_reads.end(), evs.begin(), evs.end());
    ctx.loc_seq = snap->seq_num + 1;
    Event c = make_commit(ctx.txn, ctx.proc);
    c.seq = ctx.loc_seq;
    ctx.own.push_back(c);

    // The check must also see reads of transactions that are still live:
    // committing across such a read can close a cycle that only surfaces in
    // that reader's local sub-history once it terminates.
    History merged = merge_local(snap->hist, ctx.own);
    History check = merged;
    if (!other_reads.empty()) {
      std::stable_sort(other_reads.begin(), other_reads.end(),
                       [](const Event& a, const Event& b) { return *a.seq < *b.seq; });
      check = merge_local(merge_local(snap->hist, other_reads), ctx.own);
    }
    if (find_cycle(build_graph(check))) {
      ctx.own.pop_back();
      ctx.status = TxnCtx::St::Aborted;
      forced_aborts_.fetch_add(1, std::memory_order_relaxed);
      trace_.push_back(make_commit_abort(ctx.txn, ctx.proc));
      live_reads_.erase(ctx.txn);
      if (opts_.mode == Mode::SgtGc) terminate_gc_locked(ctx.txn);
      return false;
    }

    auto next = std::make_shared<Snapshot>();
    next->seq_num = ctx.loc_seq;
    next->last_committed = snap->last_committed;
    for (const Event& e : ctx.own)
      if (e.is_successful_write()) next->last_committed[*e.object] = *e.value;
    next->hist = std::move(merged);

    if (opts_.mode == Mode::SgtGc) {
      commit_seq_order_.push_back(ctx.txn);
      terminate_gc_locked(ctx.txn);
      collect_obsolete(*next);
    }

    snap_ = next;
    Event e = make_commit(ctx.txn, ctx.proc);
    e.seq = ctx.loc_seq;
    trace_.push_back(e);
    live_reads_.erase(ctx.txn);
    ctx.status = TxnCtx::St::Committed;
    commits_.fetch_add(1, std::memory_order_relaxed);
    int64_t len = static_cast<int64_t>(next->hist.size());
    int64_t hw = hwm_.load(std::memory_order_relaxed);
    while (len > hw && !hwm_.compare_exchange_weak(hw, len)) {
    }
    return true;
  }

  void try_abort(TxnCtx& ctx) {
    require_live(ctx);
    ctx.status = TxnCtx::St::Aborted;
    {
      std::lock_guard g(trace_mu_);
      flush_buffered_writes(ctx);
      trace_.push_back(make_abort(ctx.txn, ctx.proc));
      live_reads_.erase(ctx.txn);
    }
    if (opts_.mode == Mode::SgtGc) terminate_gc(ctx.txn);
  }

  // The externally observable sequential history. Incomplete transactions
  // get their buffered writes and a closing tryC(A) when completing.
  History record_trace(bool complete_incomplete = true,
                       bool keep_seq = false) const {
    std::vector<Event> events;
    {
      std::lock_guard g(trace_mu_);
      events = trace_;
    }
    if (complete_incomplete) {
      std::lock_guard g(ctx_mu_);
      for (const auto& ctx : ctxs_) {
        if (ctx->status != TxnCtx::St::Live) continue;
        if (!ctx->has_op) continue;
        for (const Event& w : ctx->buffered_writes) events.push_back(w);
        events.push_back(make_commit_abort(ctx->txn, ctx->proc));
      }
    }
    if (!keep_seq)
      for (Event& e : events) e.seq.reset();
    return History::from_events(std::move(events));
  }

  std::shared_ptr<const Snapshot> snapshot() const {
    std::lock_guard g(trace_mu_);
    return snap_;
  }

  Stats stats() const {
    Stats s;
    s.commits = commits_.load();
    s.forced_aborts = forced_aborts_.load();
    s.ghist_high_water = hwm_.load();
    return s;
  }

 private:
  void require_live(const TxnCtx& ctx) const {
    if (ctx.status != TxnCtx::St::Live)
      throw std::logic_error("operation on a finished transaction");
  }

  void flush_buffered_writes(TxnCtx& ctx) {
    for (const Event& w : ctx.buffered_writes) trace_.push_back(w);
    ctx.buffered_writes.clear();
  }

  void terminate_gc(TxnId t) {
    std::lock_guard g(glock_);
    terminate_gc_locked(t);
  }

  void terminate_gc_locked(TxnId t) {
    live_txns_.erase(t);
    std::set<TxnId> live = live_txns_;
    live_set_table_.mark_termination(t, live);
  }

  // Removes obsolete committed transactions from the snapshot being built.
  // Per t-object, the last obsolete writer is retained whole as the object's
  // initial-value record; a superseded writer's events are dropped outright.
  // Removing whole transactions never fabricates edges: graph edges are
  // positional, so the retained events keep exactly the edges they had.
  void collect_obsolete(Snapshot& next) {
    std::vector<TxnId> u;
    for (TxnId t : commit_seq_order_) {
      if (!live_set_table_.obsolete(t)) break;
      u.push_back(t);
    }
    if (u.empty()) return;
    std::set<TxnId> us(u.begin(), u.end());

    for (TxnId t : u)  // commit order: later writers supersede earlier ones
      for (ObjectId x : next.hist.write_set(t)) kept_obsolete_writer_[x] = t;
    std::set<TxnId> keep;
    for (const auto& [x, t] : kept_obsolete_writer_) keep.insert(t);

    std::vector<Event> kept;
    for (const Event& e : next.hist.events()) {
      bool collected = us.count(e.txn) || kept_obsolete_.count(e.txn);
      if (!collected || keep.count(e.txn)) kept.push_back(e);
    }
    next.hist = History::from_events(std::move(kept));
    kept_obsolete_ = std::move(keep);
    for (TxnId t : u) live_set_table_.forget(t);
    commit_seq_order_.erase(commit_seq_order_.begin(),
                            commit_seq_order_.begin() + u.size());
  }

  RuntimeOptions opts_;
  TicketLock glock_;
  mutable std::mutex trace_mu_;
  std::shared_ptr<const Snapshot> snap_;
  std::vector<Event> trace_;
  std::map<TxnId, std::vector<Event>> live_reads_;  // of not-yet-terminated txns
  std::atomic<TxnId> next_txn_{1};
  std::atomic<uint64_t> commits_{0};
  std::atomic<uint64_t> forced_aborts_{0};
  std::atomic<int64_t> hwm_{0};
  mutable std::mutex ctx_mu_;
  std::vector<std::shared_ptr<TxnCtx>> ctxs_;

  // gc mode, guarded by glock_
  std::set<TxnId> live_txns_;
  LiveSetTable live_set_table_;
  std::vector<TxnId> commit_seq_order_;
  std::map<ObjectId, TxnId> kept_obsolete_writer_;
  std::set<TxnId> kept_obsolete_;
};

}  // namespace tmlab
