#pragma once

#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "tmlab/history.hpp"

namespace tmlab {

enum class EdgeLabel { RT, WW, WR, RW };

inline const char* edge_label_name(EdgeLabel l) {
  switch (l) {
    case EdgeLabel::RT: return "RT";
    case EdgeLabel::WW: return "WW";
    case EdgeLabel::WR: return "WR";
    case EdgeLabel::RW: return "RW";
  }
  return "?";
}

// Vertices are the transactions of a history; edges the union of the
// real-time and conflict orders. Edge multiplicities are collapsed; labels
// are kept for diagnostics only.
struct ConflictGraph {
  std::vector<TxnId> vertices;
  std::map<std::pair<TxnId, TxnId>, std::vector<EdgeLabel>> edges;

  bool has_edge(TxnId a, TxnId b) const { return edges.count({a, b}) != 0; }
};

inline ConflictGraph build_graph(const History& h) {
  ConflictGraph g;
  g.vertices = h.txns();
  for (auto& [k, m] : real_time_order(h)) g.edges[{k, m}].push_back(EdgeLabel::RT);

  // conflict-order clauses, labeled individually
  std::unordered_map<TxnId, std::set<ObjectId>> wset;
  std::unordered_map<TxnId, size_t> commit_pos;
  for (TxnId t : g.vertices) {
    wset[t] = h.write_set(t);
    for (size_t i = 0; i < h.size(); ++i)
      if (h.at(i).txn == t && h.at(i).is_commit()) commit_pos[t] = i;
  }
  for (auto& [k, pk] : commit_pos)
    for (auto& [m, pm] : commit_pos) {
      if (k == m || pk >= pm) continue;
      for (ObjectId x : wset[k])
        if (wset[m].count(x)) {
          g.edges[{k, m}].push_back(EdgeLabel::WW);
          break;
        }
    }
  for (size_t i = 0; i < h.size(); ++i) {
    const Event& e = h.at(i);
    if (!e.is_successful_read()) continue;
    for (auto& [k, pk] : commit_pos) {
      if (k == e.txn || !wset[k].count(*e.object)) continue;
      if (pk < i)
        g.edges[{k, e.txn}].push_back(EdgeLabel::WR);
      else
        g.edges[{e.txn, k}].push_back(EdgeLabel::RW);
    }
  }
  return g;
}

// Iterative DFS; on a cycle, returns the witness vertex list in order.
inline std::optional<std::vector<TxnId>> find_cycle(const ConflictGraph& g) {
  std::map<TxnId, std::vector<TxnId>> adj;
  for (auto& [e, _] : g.edges) adj[e.first].push_back(e.second);
  enum { White, Grey, Black };
  std::map<TxnId, int> color;
  std::map<TxnId, TxnId> parent;
  for (TxnId v : g.vertices) color[v] = White;

  for (TxnId root : g.vertices) {
    if (color[root] != White) continue;
    std::vector<std::pair<TxnId, size_t>> stack{{root, 0}};
    color[root] = Grey;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      auto& out = adj[v];
      if (next < out.size()) {
        TxnId w = out[next++];
        if (color[w] == Grey) {
          // unwind the grey path from v back to w
          std::vector<TxnId> cycle{w};
          for (size_t i = stack.size(); i-- > 0;) {
            cycle.push_back(stack[i].first);
            if (stack[i].first == w) break;
          }
          std::reverse(cycle.begin(), cycle.end());
          cycle.pop_back();  // drop duplicated w at the end
          return cycle;
        }
        if (color[w] == White) {
          color[w] = Grey;
          stack.emplace_back(w, 0);
        }
      } else {
        color[v] = Black;
        stack.pop_back();
      }
    }
  }
  return std::nullopt;
}

inline bool is_acyclic(const ConflictGraph& g) { return !find_cycle(g); }

// Topological order of g, smallest TxnId first among ready vertices.
inline std::vector<TxnId> topological_order(const ConflictGraph& g) {
  if (!is_acyclic(g))
    throw std::invalid_argument("topological_order: graph is cyclic");
  std::map<TxnId, int> indeg;
  std::map<TxnId, std::vector<TxnId>> adj;
  for (TxnId v : g.vertices) indeg[v] = 0;
  for (auto& [e, _] : g.edges) {
    adj[e.first].push_back(e.second);
    ++indeg[e.second];
  }
  std::set<TxnId> ready;
  for (auto& [v, d] : indeg)
    if (d == 0) ready.insert(v);
  std::vector<TxnId> out;
  while (!ready.empty()) {
    TxnId v = *ready.begin();
    ready.erase(ready.begin());
    out.push_back(v);
    for (TxnId w : adj[v])
      if (--indeg[w] == 0) ready.insert(w);
  }
  return out;
}

// The t-sequential history induced on completion(h) by the given transaction
// order: each transaction's events contiguous, in their original order.
inline History sequential_from_order(const History& h,
                                     const std::vector<TxnId>& order) {
  History hc = completion(h);
  std::vector<Event> out;
  out.reserve(hc.size());
  for (TxnId t : order)
    for (const Event& e : hc.events())
      if (e.txn == t) out.push_back(e);
  return History::from_events(std::move(out));
}

// A t-sequential history equivalent to completion(h) whose transaction order
// topologically sorts the conflict graph; ties broken by smallest TxnId.
inline History topological_serialization(const ConflictGraph& g,
                                         const History& h) {
  return sequential_from_order(h, topological_order(g));
}

// Graph decision procedure for conflict opacity.
inline bool is_conflict_opaque(const History& h) {
  return is_legal(h) && is_acyclic(build_graph(h));
}

inline std::string to_dot(const ConflictGraph& g) {
  std::ostringstream os;
  os << "digraph cg {\n";
  for (TxnId v : g.vertices) os << "  T" << v << ";\n";
  for (auto& [e, labels] : g.edges) {
    os << "  T" << e.first << " -> T" << e.second << " [label=\"";
    for (size_t i = 0; i < labels.size(); ++i)
      os << (i ? "," : "") << edge_label_name(labels[i]);
    os << "\"];\n";
  }
  os << "}\n";
  return os.str();
}

}  // namespace tmlab
