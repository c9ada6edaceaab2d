#include <doctest.h>

#include <random>

#include "support/builders.hpp"
#include "support/random_history.hpp"
#include "tmlab/criteria.hpp"
#include "tmlab/gc.hpp"
#include "tmlab/harness.hpp"
#include "tmlab/jsonl.hpp"

using namespace tmlab;
using tmlab::testing::mk;

TEST_CASE("live-set table tracks obsolescence") {
  LiveSetTable t;
  t.mark_termination(1, {});
  CHECK(t.obsolete(1));  // solo transaction

  LiveSetTable u;
  u.mark_termination(1, {2});
  CHECK(!u.obsolete(1));
  u.mark_termination(2, {});
  CHECK(u.obsolete(1));
  CHECK(u.obsolete(2));

  // three overlapping transactions terminate 3, 1, 2
  LiveSetTable v;
  v.mark_termination(3, {1, 2});
  v.mark_termination(1, {2});
  CHECK(!v.obsolete(3));
  CHECK(!v.obsolete(1));
  v.mark_termination(2, {});
  CHECK(v.obsolete(3));
  CHECK(v.obsolete(1));
  CHECK(v.obsolete(2));
}

TEST_CASE("live sets and obsolescence from a history") {
  // T1 commits while T2 is running; T2 commits alone afterwards
  History h = mk({make_read(1, 0, 0, 0), make_read(2, 0, 0, 1),
                  make_commit(1, 0), make_commit(2, 1)});
  CHECK(live_set_at(h, 1) == std::set<TxnId>{2});
  CHECK(live_set_at(h, 2).empty());
  CHECK(is_obsolete(h, 1));
  CHECK(is_obsolete(h, 2));

  // an incomplete overlapper blocks obsolescence
  History h2 = mk({make_read(1, 0, 0, 0), make_read(2, 0, 0, 1),
                   make_commit(1, 0)});
  CHECK(live_set_at(h2, 1) == std::set<TxnId>{2});
  CHECK(!is_obsolete(h2, 1));
  CHECK_THROWS_AS((void)live_set_at(h2, 2), std::invalid_argument);
}

TEST_CASE("the obsolete set is a commit-order prefix") {
  std::mt19937_64 rng(59);
  for (int i = 0; i < 300; ++i) {
    History h = tmlab::testing::random_history(rng);
    auto u = obsolete_set(h);
    auto order = commit_order(h);
    REQUIRE(u.size() <= order.size());
    for (size_t j = 0; j < u.size(); ++j) {
      CHECK(u[j] == order[j]);
      CHECK(is_obsolete(h, u[j]));
    }
    if (u.size() < order.size())
      CHECK(!is_obsolete(h, order[u.size()]));
  }
}

TEST_CASE("trim: empty set, shadowing, vanishing read-only transactions") {
  History h = mk({make_write(1, 0, 5, 0), make_commit(1, 0),
                  make_write(2, 0, 6, 1), make_commit(2, 1),
                  make_read(3, 0, 6, 0), make_commit(3, 0)});
  CHECK(trim(h, {}) == History::from_indexed(h.events()));

  // both writers of x obsolete: only the later one's write survives
  History t = trim(h, {1, 2});
  bool saw_t1 = false, saw_t2w = false;
  for (const Event& e : t.events()) {
    if (e.txn == 1) saw_t1 = true;
    if (e.txn == 2 && e.is_successful_write()) saw_t2w = true;
  }
  CHECK(!saw_t1);
  CHECK(saw_t2w);
  CHECK(!validate_well_formed(t));

  // a read-only obsolete transaction vanishes entirely
  History r = mk({make_read(1, 0, 0, 0), make_commit(1, 0),
                  make_write(2, 0, 5, 0), make_commit(2, 0)});
  History rt = trim(r, {1});
  for (const Event& e : rt.events()) CHECK(e.txn != 1);

  // U must be a commit-order prefix
  CHECK_THROWS_AS((void)trim(h, {2}), std::invalid_argument);
  CHECK_THROWS_AS((void)trim(h, {1, 1}), std::invalid_argument);
}

TEST_CASE("trim drops every read before the boundary commit") {
  // T3's read precedes T2's commit (the last obsolete one) and is removed
  // even though T3 itself stays.
  History h = mk({make_write(1, 0, 5, 0), make_commit(1, 0),
                  make_read(3, 0, 5, 2),
                  make_write(2, 1, 6, 1), make_commit(2, 1),
                  make_write(3, 2, 7, 2), make_commit(3, 2)});
  History t = trim(h, {1, 2});
  for (const Event& e : t.events())
    CHECK(e.kind != Kind::Read);
  CHECK(t.contains_txn(3));
  CHECK(t.status_of(3) == TxnStatus::Committed);
}

TEST_CASE("obs prefix ends when the boundary live set completes") {
  History h = mk({make_read(1, 0, 0, 0), make_read(2, 0, 0, 1),
                  make_commit(1, 0), make_commit(2, 1),
                  make_write(3, 0, 5, 0), make_commit(3, 0)});
  CHECK(obs_prefix(h, {}).empty());
  // liveSet(T1) = {T2}: the prefix runs through T2's commit
  History p = obs_prefix(h, {1});
  CHECK(p.size() == 4);
  // U through the last transaction: whole history
  CHECK(obs_prefix(h, {1, 2, 3}) == History::from_indexed(h.events()));
}

TEST_CASE("trim/obs biconditional on runtime traces") {
  std::mt19937_64 rng(61);
  WorkloadSpec spec;
  spec.threads = 3;
  spec.objects = 3;
  spec.txns_per_thread = 4;
  spec.ops_min = 1;
  spec.ops_max = 3;
  for (int i = 0; i < 60; ++i) {
    spec.seed = 1000 + i;
    History h = run_scripted(random_schedule(spec), spec.options()).trace;
    auto u = obsolete_set(h);
    CAPTURE(serialize_history(h));
    bool whole = is_clo(h);
    bool parts = is_clo(obs_prefix(h, u)) && is_clo(trim(h, u));
    CHECK(whole == parts);
  }
}

TEST_CASE("gc mode matches plain mode on identical schedules") {
  WorkloadSpec spec;
  spec.threads = 4;
  spec.objects = 3;
  spec.txns_per_thread = 8;
  for (uint64_t seed : {5ull, 6ull, 7ull}) {
    spec.seed = seed;
    auto sched = random_schedule(spec);
    auto plain = run_scripted(sched, RuntimeOptions{Mode::Sgt, false});
    auto gc = run_scripted(sched, RuntimeOptions{Mode::SgtGc, false});
    REQUIRE(plain.results.size() == gc.results.size());
    for (size_t i = 0; i < plain.results.size(); ++i) {
      CAPTURE(seed);
      CAPTURE(i);
      CHECK(plain.results[i].executed == gc.results[i].executed);
      CHECK(plain.results[i].ok == gc.results[i].ok);
      CHECK(plain.results[i].value == gc.results[i].value);
    }
    CHECK(plain.stats.commits == gc.stats.commits);
    CHECK(plain.stats.forced_aborts == gc.stats.forced_aborts);
    CHECK(gc.stats.ghist_high_water <= plain.stats.ghist_high_water);
    CHECK(is_clo(gc.trace));
  }
}

TEST_CASE("gc keeps the committed history bounded") {
  WorkloadSpec spec;
  spec.mode = Mode::SgtGc;
  spec.threads = 4;
  spec.objects = 4;
  spec.txns_per_thread = 120;
  spec.ops_min = 1;
  spec.ops_max = 3;
  spec.seed = 2024;
  auto res = run_workload(spec);
  CHECK(res.summary.commits > 300);
  // bound scales with objects + concurrency, not with total transactions
  CHECK(res.summary.ghist_high_water <=
        ghist_bound_k * (int64_t{spec.objects} + spec.threads));
  CHECK(is_clo(res.trace));
}
