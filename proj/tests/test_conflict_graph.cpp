#include <doctest.h>

#include <random>

#include "support/builders.hpp"
#include "support/oracles.hpp"
#include "support/random_history.hpp"
#include "tmlab/conflict_graph.hpp"
#include "tmlab/jsonl.hpp"

using namespace tmlab;
using tmlab::testing::fig1;
using tmlab::testing::fig3;
using tmlab::testing::mk;

TEST_CASE("graph construction on the canonical interleavings") {
  ConflictGraph g1 = build_graph(fig1());
  CHECK(g1.vertices == std::vector<TxnId>{1, 3, 2});
  CHECK(g1.has_edge(1, 3));  // r1(x) before c3
  CHECK(g1.has_edge(3, 2));  // c3 before r2(x), plus real-time
  CHECK(!g1.has_edge(2, 1));
  CHECK(g1.edges.size() == 2);
  auto labels32 = g1.edges.at({3, 2});
  CHECK(std::count(labels32.begin(), labels32.end(), EdgeLabel::RT) == 1);
  CHECK(std::count(labels32.begin(), labels32.end(), EdgeLabel::WR) == 1);

  ConflictGraph g3 = build_graph(fig3());
  CHECK(g3.has_edge(1, 3));
  CHECK(g3.has_edge(3, 2));
  CHECK(g3.has_edge(2, 1));  // r2(y) before c1 once T1 commits
  CHECK(!is_acyclic(g3));
  CHECK(is_acyclic(g1));
}

TEST_CASE("cycle witness walks actual edges") {
  ConflictGraph g = build_graph(fig3());
  auto cyc = find_cycle(g);
  REQUIRE(cyc);
  REQUIRE(cyc->size() >= 2);
  for (size_t i = 0; i < cyc->size(); ++i)
    CHECK(g.has_edge((*cyc)[i], (*cyc)[(i + 1) % cyc->size()]));
}

TEST_CASE("topological order and serialization") {
  ConflictGraph g = build_graph(fig1());
  auto order = topological_order(g);
  CHECK(order == std::vector<TxnId>{1, 3, 2});

  History s = topological_serialization(g, fig1());
  CHECK(!validate_well_formed(s));
  CHECK(s.size() == 8);  // completion added T2's abort
  CHECK(is_legal(s));
  // t-sequential: each transaction contiguous
  CHECK(s.at(0).txn == 1);
  CHECK(s.at(1).txn == 1);
  CHECK(s.at(2).txn == 1);
  CHECK(s.at(3).txn == 3);

  // smallest-id tie break on an edgeless graph
  ConflictGraph free;
  free.vertices = {4, 2, 9};
  CHECK(topological_order(free) == std::vector<TxnId>{2, 4, 9});

  CHECK_THROWS_AS((void)topological_order(build_graph(fig3())),
                  std::invalid_argument);
}

TEST_CASE("conflict opacity decision") {
  CHECK(is_conflict_opaque(History()));
  CHECK(is_conflict_opaque(fig1()));
  CHECK(!is_conflict_opaque(fig3()));  // cyclic graph
  // legal but cyclic vs illegal but acyclic both fail
  History illegal = mk({make_write(3, 0, 1), make_commit(3), make_read(2, 0, 0)});
  CHECK(is_acyclic(build_graph(illegal)));
  CHECK(!is_conflict_opaque(illegal));
}

TEST_CASE("graph decision agrees with the brute-force enumeration") {
  std::mt19937_64 rng(23);
  tmlab::testing::GenOptions opt;
  for (int i = 0; i < 500; ++i) {
    opt.legal_read_bias = i % 2 ? 1.0 : 0.7;
    History h = tmlab::testing::random_history(rng, opt);
    CAPTURE(serialize_history(h));
    CHECK(is_conflict_opaque(h) == tmlab::testing::oracle_conflict_opaque(h));
  }
}

TEST_CASE("acyclic graphs admit a legal topological serialization") {
  std::mt19937_64 rng(29);
  for (int i = 0; i < 300; ++i) {
    History h = tmlab::testing::random_history(rng);
    ConflictGraph g = build_graph(h);
    if (!is_acyclic(g) || !is_legal(h)) continue;
    History s = topological_serialization(g, h);
    CAPTURE(serialize_history(h));
    CHECK(!validate_well_formed(s));
    CHECK(is_legal(s));
  }
}

TEST_CASE("graphs of a history and its completion coincide when complete") {
  std::mt19937_64 rng(31);
  tmlab::testing::GenOptions opt;
  opt.incomplete_prob = 0.0;
  for (int i = 0; i < 200; ++i) {
    History h = tmlab::testing::random_history(rng, opt);
    ConflictGraph a = build_graph(h);
    ConflictGraph b = build_graph(completion(h));
    CHECK(a.vertices == b.vertices);
    CHECK(a.edges.size() == b.edges.size());
    for (auto& [e, _] : a.edges) CHECK(b.has_edge(e.first, e.second));
  }
}

TEST_CASE("DOT dump names vertices and labels edges") {
  std::string dot = to_dot(build_graph(fig1()));
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("T1 -> T3") != std::string::npos);
  CHECK(dot.find("RT") != std::string::npos);
}
