#pragma once

#include <chrono>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "tmlab/criteria.hpp"
#include "tmlab/runtime.hpp"

namespace tmlab {

// ---------------------------------------------------------------------------
// Workload specification and deterministic intent generation

struct WorkloadSpec {
  uint32_t threads = 1;
  uint32_t objects = 4;
  uint32_t txns_per_thread = 1;
  uint32_t ops_min = 1;
  uint32_t ops_max = 4;
  double read_fraction = 0.5;
  uint64_t seed = 0;
  uint32_t retry_limit = 3;
  Mode mode = Mode::Sgt;

  void validate() const {
    if (threads == 0) throw std::invalid_argument("threads must be positive");
    if (objects == 0) throw std::invalid_argument("objects must be positive");
    if (ops_min == 0 || ops_min > ops_max)
      throw std::invalid_argument("need 1 <= ops-min <= ops-max");
    if (read_fraction < 0.0 || read_fraction > 1.0)
      throw std::invalid_argument("read fraction must be in [0,1]");
  }

  RuntimeOptions options() const { return RuntimeOptions{mode, false}; }
};

struct OpIntent {
  bool is_read = true;
  ObjectId object = 0;
};

struct TxnIntent {
  std::vector<OpIntent> ops;  // reads first, then writes
};

namespace detail {

// Draws only via the raw engine output so sequences are identical across
// standard-library implementations.
inline uint64_t bounded(std::mt19937_64& rng, uint64_t n) { return rng() % n; }

inline bool coin(std::mt19937_64& rng, double p) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53 < p;
}

}  // namespace detail

// Identical spec + seed produce identical intents.
inline std::vector<std::vector<TxnIntent>> generate_intents(
    const WorkloadSpec& spec) {
  spec.validate();
  std::vector<std::vector<TxnIntent>> out(spec.threads);
  for (uint32_t th = 0; th < spec.threads; ++th) {
    std::mt19937_64 rng(spec.seed * 0x9e3779b97f4a7c15ULL + th + 1);
    for (uint32_t k = 0; k < spec.txns_per_thread; ++k) {
      TxnIntent txn;
      size_t len = spec.ops_min + detail::bounded(rng, spec.ops_max - spec.ops_min + 1);
      std::vector<OpIntent> reads, writes;
      for (size_t i = 0; i < len; ++i) {
        OpIntent op;
        op.is_read = detail::coin(rng, spec.read_fraction);
        op.object = static_cast<ObjectId>(detail::bounded(rng, spec.objects));
        (op.is_read ? reads : writes).push_back(op);
      }
      txn.ops = std::move(reads);
      txn.ops.insert(txn.ops.end(), writes.begin(), writes.end());
      out[th].push_back(std::move(txn));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free-running workload execution

// Design bound on the retained committed history in gc mode: its length
// stays below ghist_bound_k * (objects + threads) regardless of how many
// transactions the run executes.
inline constexpr int64_t ghist_bound_k = 16;

struct RunSummary {
  uint64_t commits = 0;
  uint64_t forced_aborts = 0;
  uint64_t give_ups = 0;  // intents dropped after exhausting retries
  int64_t ghist_high_water = 0;
  double wall_ms = 0.0;
  double max_op_latency_ms = 0.0;
};

struct RunResult {
  History trace;
  RunSummary summary;
};

// Runs one transaction attempt; false means forcefully aborted.
inline bool attempt_txn(Runtime& rt, ProcId proc, const TxnIntent& intent,
                        double& max_latency_ms) {
  auto ctx = rt.begin(proc);
  uint32_t ctr = 0;
  auto timed = [&](auto&& f) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = f();
    std::chrono::duration<double, std::milli> d =
        std::chrono::steady_clock::now() - t0;
    if (d.count() > max_latency_ms) max_latency_ms = d.count();
    return r;
  };
  for (const OpIntent& op : intent.ops) {
    if (op.is_read) {
      if (!timed([&] { return rt.read(*ctx, op.object).has_value(); }))
        return false;
    } else {
      Value v = encode_value(ctx->txn, ctr++);
      timed([&] { rt.write(*ctx, op.object, v); return true; });
    }
  }
  return timed([&] { return rt.try_commit(*ctx); });
}

inline RunResult run_workload(const WorkloadSpec& spec) {
  spec.validate();
  auto intents = generate_intents(spec);
  Runtime rt(spec.options());

  auto t0 = std::chrono::steady_clock::now();
  std::vector<double> max_latency(spec.threads, 0.0);
  std::vector<uint64_t> give_ups(spec.threads, 0);
  std::vector<std::thread> workers;
  for (uint32_t th = 0; th < spec.threads; ++th)
    workers.emplace_back([&, th] {
      for (const TxnIntent& intent : intents[th]) {
        bool done = false;
        for (uint32_t a = 0; a <= spec.retry_limit && !done; ++a)
          done = attempt_txn(rt, th, intent, max_latency[th]);
        if (!done) ++give_ups[th];
      }
    });
  for (auto& w : workers) w.join();

  RunResult out;
  out.trace = rt.record_trace();
  std::chrono::duration<double, std::milli> wall =
      std::chrono::steady_clock::now() - t0;
  auto stats = rt.stats();
  out.summary.commits = stats.commits;
  out.summary.forced_aborts = stats.forced_aborts;
  out.summary.ghist_high_water = stats.ghist_high_water;
  out.summary.wall_ms = wall.count();
  for (uint32_t th = 0; th < spec.threads; ++th) {
    out.summary.give_ups += give_ups[th];
    out.summary.max_op_latency_ms =
        std::max(out.summary.max_op_latency_ms, max_latency[th]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Scripted deterministic schedules

struct Step {
  enum class Op { Begin, Read, Write, Commit, Abort };
  uint32_t thread = 0;
  Op op = Op::Read;
  ObjectId object = 0;
  std::optional<Value> value;  // writes only; auto-encoded when absent
};

using ScriptedSchedule = std::vector<Step>;

struct StepResult {
  bool executed = false;  // false: skipped (transaction already dead)
  bool ok = false;        // operation succeeded (read value / COMMIT)
  std::optional<Value> value;
};

struct ScriptedRun {
  History trace;
  std::vector<StepResult> results;
  Runtime::Stats stats;
};

// Executes the steps in order on a single OS thread; the runtime sees one
// logical process per schedule thread. A forcefully aborted transaction's
// remaining steps are skipped up to and including its terminal step.
inline ScriptedRun run_scripted(const ScriptedSchedule& schedule,
                                RuntimeOptions opts,
                                bool complete_incomplete = true) {
  Runtime rt(opts);
  std::map<uint32_t, std::shared_ptr<TxnCtx>> cur;
  std::map<uint32_t, uint32_t> write_ctr;
  std::map<uint32_t, bool> dead;  // consuming a dead transaction's steps
  ScriptedRun out;

  for (const Step& s : schedule) {
    StepResult r;
    bool terminal = s.op == Step::Op::Commit || s.op == Step::Op::Abort;
    if (dead[s.thread]) {
      if (terminal) dead[s.thread] = false;
      out.results.push_back(r);
      continue;
    }
    auto it = cur.find(s.thread);
    if (it == cur.end() || !it->second ||
        it->second->status != TxnCtx::St::Live) {
      cur[s.thread] = rt.begin(s.thread);
      write_ctr[s.thread] = 0;
    }
    TxnCtx& ctx = *cur[s.thread];
    r.executed = true;
    switch (s.op) {
      case Step::Op::Begin:
        r.ok = true;  // context was created above
        break;
      case Step::Op::Read: {
        auto v = rt.read(ctx, s.object);
        r.ok = v.has_value();
        r.value = v;
        if (!v) dead[s.thread] = true;
        break;
      }
      case Step::Op::Write: {
        Value v = s.value ? *s.value
                          : encode_value(ctx.txn, write_ctr[s.thread]++);
        rt.write(ctx, s.object, v);
        r.ok = true;
        r.value = v;
        break;
      }
      case Step::Op::Commit:
        r.ok = rt.try_commit(ctx);
        cur[s.thread].reset();
        break;
      case Step::Op::Abort:
        rt.try_abort(ctx);
        r.ok = true;
        cur[s.thread].reset();
        break;
    }
    out.results.push_back(r);
  }
  out.trace = rt.record_trace(complete_incomplete);
  out.stats = rt.stats();
  return out;
}

// Deterministic random interleaving of the workload's generated intents.
inline ScriptedSchedule random_schedule(const WorkloadSpec& spec) {
  auto intents = generate_intents(spec);
  std::vector<std::vector<Step>> queues(spec.threads);
  for (uint32_t th = 0; th < spec.threads; ++th) {
    for (const TxnIntent& txn : intents[th]) {
      for (const OpIntent& op : txn.ops) {
        Step s;
        s.thread = th;
        s.op = op.is_read ? Step::Op::Read : Step::Op::Write;
        s.object = op.object;
        queues[th].push_back(s);
      }
      queues[th].push_back(Step{th, Step::Op::Commit, 0, {}});
    }
  }
  std::mt19937_64 rng(spec.seed ^ 0xd1b54a32d192ed03ULL);
  ScriptedSchedule out;
  std::vector<size_t> pos(spec.threads, 0);
  std::vector<uint32_t> alive;
  for (uint32_t th = 0; th < spec.threads; ++th)
    if (!queues[th].empty()) alive.push_back(th);
  while (!alive.empty()) {
    size_t pick = detail::bounded(rng, alive.size());
    uint32_t th = alive[pick];
    out.push_back(queues[th][pos[th]++]);
    if (pos[th] == queues[th].size()) alive.erase(alive.begin() + pick);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Demo scenarios

// Two fixed three-transaction interleavings over objects x=0, y=1 used
// throughout the docs and tests. "fig1" leaves T1 aborted at its commit
// attempt and T2 incomplete; "fig3" is identical except T1 commits.
inline History demo_scenario(const std::string& name) {
  bool t1_commits;
  if (name == "fig1") t1_commits = false;
  else if (name == "fig3") t1_commits = true;
  else throw std::invalid_argument("unknown scenario: " + name);

  constexpr ObjectId x = 0, y = 1;
  std::vector<Event> ev{
      make_read(1, x, 0, 0),
      make_write(3, x, 1, 2),
      make_commit(3, 2),
      make_read(2, x, 1, 1),
      make_read(2, y, 0, 1),
      make_write(1, y, 1, 0),
      t1_commits ? make_commit(1, 0) : make_commit_abort(1, 0),
  };
  return History::from_events(std::move(ev));
}

// The same interleaving replayed against a live runtime.
inline ScriptedRun replay_demo_schedule(RuntimeOptions opts = {}) {
  ScriptedSchedule sched{
      // fix transaction ids: thread 0 -> T1, thread 1 -> T2, thread 2 -> T3
      {0, Step::Op::Begin, 0, {}},
      {1, Step::Op::Begin, 0, {}},
      {2, Step::Op::Begin, 0, {}},
      {0, Step::Op::Read, 0, {}},           // r1(x)
      {2, Step::Op::Write, 0, Value{1}},    // w3(x,1)
      {2, Step::Op::Commit, 0, {}},         // c3
      {1, Step::Op::Read, 0, {}},           // r2(x)
      {1, Step::Op::Read, 1, {}},           // r2(y)
      {0, Step::Op::Write, 1, Value{1}},    // w1(y,1)
      {0, Step::Op::Commit, 0, {}},         // tryC1
  };
  return run_scripted(sched, opts, /*complete_incomplete=*/false);
}

// ---------------------------------------------------------------------------
// Criterion specs (plain criteria plus permissive:/ni: wrappers)

struct CheckSpec {
  enum class Wrap { Plain, Permissive, NonInterfering };
  Wrap wrap = Wrap::Plain;
  Criterion crit = Criterion::Opacity;
};

inline std::optional<Criterion> criterion_from_name(const std::string& s) {
  for (Criterion c : {Criterion::Opacity, Criterion::StrictSerializability,
                      Criterion::ConflictOpacity, Criterion::LocalOpacity,
                      Criterion::CLO, Criterion::VWC})
    if (s == criterion_name(c)) return c;
  return std::nullopt;
}

inline std::optional<CheckSpec> parse_check_spec(const std::string& s) {
  CheckSpec out;
  std::string name = s;
  if (s.rfind("permissive:", 0) == 0) {
    out.wrap = CheckSpec::Wrap::Permissive;
    name = s.substr(11);
  } else if (s.rfind("ni:", 0) == 0) {
    out.wrap = CheckSpec::Wrap::NonInterfering;
    name = s.substr(3);
  }
  auto c = criterion_from_name(name);
  if (!c) return std::nullopt;
  out.crit = *c;
  return out;
}

inline std::string check_spec_name(const CheckSpec& s) {
  switch (s.wrap) {
    case CheckSpec::Wrap::Plain: return criterion_name(s.crit);
    case CheckSpec::Wrap::Permissive:
      return std::string("permissive:") + criterion_name(s.crit);
    case CheckSpec::Wrap::NonInterfering:
      return std::string("ni:") + criterion_name(s.crit);
  }
  return "?";
}

// May throw BudgetExceeded.
inline bool run_check(const History& h, const CheckSpec& s,
                      const CheckBudget& budget = {}) {
  switch (s.wrap) {
    case CheckSpec::Wrap::Plain: return check(h, s.crit, budget);
    case CheckSpec::Wrap::Permissive: return is_permissive(h, s.crit, budget);
    case CheckSpec::Wrap::NonInterfering:
      return is_non_interfering(h, s.crit, budget);
  }
  throw std::logic_error("run_check: bad spec");
}

// ---------------------------------------------------------------------------
// Fuzzing with greedy minimization

struct FuzzFailure {
  uint64_t iteration = 0;
  CheckSpec spec;
  History trace;      // as produced
  History minimized;  // after greedy shrinking
};

struct FuzzReport {
  uint64_t iterations = 0;
  uint64_t checks_run = 0;
  uint64_t checks_skipped = 0;  // budget exceeded
  std::vector<FuzzFailure> failures;
};

// Greedy shrink: drop whole transactions, then truncate the suffix, as long
// as the violation persists.
inline History minimize_failure(History h, const CheckSpec& spec,
                                const CheckBudget& budget = {}) {
  auto still_fails = [&](const History& c) {
    try {
      return !run_check(c, spec, budget);
    } catch (const BudgetExceeded&) {
      return false;
    }
  };
  bool progress = true;
  while (progress) {
    progress = false;
    for (TxnId t : h.txns()) {
      History c = remove_txns(h, {t});
      if (!c.empty() && still_fails(c)) {
        h = std::move(c);
        progress = true;
        break;
      }
    }
  }
  while (h.size() > 1) {
    std::vector<Event> ev(h.events().begin(), h.events().end() - 1);
    History c = History::from_indexed(std::move(ev));
    if (!still_fails(c)) break;
    h = std::move(c);
  }
  return h;
}

// Each iteration runs the workload with a derived seed and checks the trace
// against every listed criterion; the first failing trace per iteration is
// kept, minimized.
inline FuzzReport fuzz(const WorkloadSpec& base, uint64_t iterations,
                       const std::vector<CheckSpec>& specs,
                       const CheckBudget& budget = {},
                       bool unsafe_skip_read_check = false) {
  FuzzReport rep;
  rep.iterations = iterations;
  for (uint64_t it = 0; it < iterations; ++it) {
    WorkloadSpec spec = base;
    spec.seed = base.seed + it;
    History trace;
    if (unsafe_skip_read_check) {
      // scripted interleaving so every iteration is reproducible from the seed
      RuntimeOptions opts = spec.options();
      opts.unsafe_skip_read_check = true;
      trace = run_scripted(random_schedule(spec), opts).trace;
    } else {
      trace = run_workload(spec).trace;
    }
    for (const CheckSpec& cs : specs) {
      bool ok;
      try {
        ok = run_check(trace, cs, budget);
        ++rep.checks_run;
      } catch (const BudgetExceeded&) {
        ++rep.checks_skipped;
        continue;
      }
      if (!ok) {
        FuzzFailure f;
        f.iteration = it;
        f.spec = cs;
        f.trace = trace;
        f.minimized = minimize_failure(trace, cs, budget);
        rep.failures.push_back(std::move(f));
        break;
      }
    }
  }
  return rep;
}

}  // namespace tmlab
