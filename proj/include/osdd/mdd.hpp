#pragma once

// Ground multi-valued decision diagrams and grounding of OSDDs.

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "osdd/algebra.hpp"

namespace osdd {

struct MddNode;
using Mdd = std::shared_ptr<const MddNode>;

/// A leaf (when `edges` is empty and `si` unset) or a node whose edges are
/// labeled by distinct values of the node's type.
struct MddNode {
  bool is_leaf = true;
  bool value = false;
  SwitchInstance si;
  DomainRef domain;
  std::vector<std::pair<GroundTerm, Mdd>> edges;
};

inline Mdd mdd_leaf(bool v) {
  static const Mdd zero = std::make_shared<const MddNode>(MddNode{true, false, {}, nullptr, {}});
  static const Mdd one = std::make_shared<const MddNode>(MddNode{true, true, {}, nullptr, {}});
  return v ? one : zero;
}

inline Mdd mdd_node(SwitchInstance si, DomainRef dom, std::vector<std::pair<GroundTerm, Mdd>> edges) {
  return std::make_shared<const MddNode>(MddNode{false, false, std::move(si), std::move(dom), std::move(edges)});
}

/// Structural (tree) equality.
inline bool mdd_equal(const Mdd& a, const Mdd& b) {
  if (a == b) return true;
  if (a->is_leaf || b->is_leaf) return a->is_leaf == b->is_leaf && a->value == b->value;
  if (!(a->si == b->si) || a->edges.size() != b->edges.size()) return false;
  for (std::size_t i = 0; i < a->edges.size(); ++i)
    if (!(a->edges[i].first == b->edges[i].first) || !mdd_equal(a->edges[i].second, b->edges[i].second))
      return false;
  return true;
}

inline std::string mdd_string(const Mdd& m) {
  if (m->is_leaf) return m->value ? "1" : "0";
  std::string s = "(" + m->si.str() + ")[";
  for (std::size_t i = 0; i < m->edges.size(); ++i) {
    s += i ? " ; " : " ";
    s += m->edges[i].first.str() + " : " + mdd_string(m->edges[i].second);
  }
  return s + " ]";
}

/// Grounds every node: one edge per value of the output variable, routed
/// to the child whose label the accumulated substitution satisfies.
inline Mdd ground(const Osdd& d) {
  std::unordered_map<std::uint64_t, std::set<Var>> lvars;
  std::function<const std::set<Var>&(const Osdd&)> label_vars_of = [&](const Osdd& n) -> const std::set<Var>& {
    auto it = lvars.find(n.id());
    if (it != lvars.end()) return it->second;
    std::set<Var> vs;
    for (std::size_t i = 0; i < n.edge_count(); ++i) {
      for (const auto& v : n.label(i).vars()) vs.insert(v);
      const auto& cv = label_vars_of(n.child(i));
      vs.insert(cv.begin(), cv.end());
    }
    return lvars.emplace(n.id(), std::move(vs)).first->second;
  };
  std::map<std::string, Mdd> memo;
  std::function<Mdd(const Osdd&, const Assignment&)> rec = [&](const Osdd& n, const Assignment& sigma) -> Mdd {
    if (n.is_leaf()) return mdd_leaf(n.value());
    Assignment relevant;
    const auto& lv = label_vars_of(n);
    for (const auto& [v, g] : sigma)
      if (lv.count(v)) relevant.emplace(v, g);
    std::string key = detail::memo_key({n.id()}, "");
    for (const auto& [v, g] : relevant) {
      detail::encode_term(key, v);
      detail::encode_term(key, g);
    }
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::vector<std::pair<GroundTerm, Mdd>> edges;
    for (const auto& alpha : n.out().domain()->values()) {
      Assignment s2 = relevant;
      s2[n.out()] = alpha;
      std::optional<std::size_t> chosen;
      for (std::size_t i = 0; i < n.edge_count(); ++i) {
        auto t = n.label(i).evaluate(s2);
        if (!t) throw Error("cannot ground label " + n.label(i).str() + ": unbound variable");
        if (!*t) continue;
        if (chosen) throw Error("edges " + std::to_string(*chosen) + " and " + std::to_string(i) + " of (" +
                                n.si().str() + ") both accept " + alpha.str());
        chosen = i;
      }
      if (!chosen) throw Error("no edge of (" + n.si().str() + ") accepts " + alpha.str());
      edges.emplace_back(alpha, rec(n.child(*chosen), s2));
    }
    Mdd r = mdd_node(n.si(), n.out().domain(), std::move(edges));
    memo.emplace(key, r);
    return r;
  };
  return rec(d, {});
}

/// Conjunction/disjunction of ground diagrams: the smaller root lifts, equal
/// roots combine children with equal edge values.
inline Mdd mdd_apply(const Mdd& a, const Mdd& b, BoolOp op) {
  if (op == BoolOp::conj) {
    if ((a->is_leaf && !a->value) || (b->is_leaf && !b->value)) return mdd_leaf(false);
    if (a->is_leaf) return b;
    if (b->is_leaf) return a;
  } else {
    if ((a->is_leaf && a->value) || (b->is_leaf && b->value)) return mdd_leaf(true);
    if (a->is_leaf) return b;
    if (b->is_leaf) return a;
  }
  std::vector<std::pair<GroundTerm, Mdd>> edges;
  if (a->si < b->si) {
    for (const auto& [v, c] : a->edges) edges.emplace_back(v, mdd_apply(c, b, op));
    return mdd_node(a->si, a->domain, std::move(edges));
  }
  if (b->si < a->si) {
    for (const auto& [v, c] : b->edges) edges.emplace_back(v, mdd_apply(a, c, op));
    return mdd_node(b->si, b->domain, std::move(edges));
  }
  for (std::size_t i = 0; i < a->edges.size(); ++i)
    edges.emplace_back(a->edges[i].first, mdd_apply(a->edges[i].second, b->edges[i].second, op));
  return mdd_node(a->si, a->domain, std::move(edges));
}

/// Removes nodes whose children are all structurally equal. Two reduced
/// diagrams over the same instance order are equal iff they denote the
/// same Boolean function.
inline Mdd mdd_reduce(const Mdd& m) {
  if (m->is_leaf) return m;
  std::vector<std::pair<GroundTerm, Mdd>> edges;
  for (const auto& [v, c] : m->edges) edges.emplace_back(v, mdd_reduce(c));
  bool same = true;
  for (std::size_t i = 1; i < edges.size() && same; ++i) same = mdd_equal(edges[i].second, edges[0].second);
  if (same && !edges.empty()) return edges[0].second;
  return mdd_node(m->si, m->domain, std::move(edges));
}

/// Evaluates a ground diagram on a world (switch instance -> value).
inline bool mdd_eval(const Mdd& m, const std::map<SwitchInstance, GroundTerm>& world) {
  const MddNode* n = m.get();
  while (!n->is_leaf) {
    const auto& v = world.at(n->si);
    const MddNode* next = nullptr;
    for (const auto& [val, c] : n->edges)
      if (val == v) next = c.get();
    if (!next) throw Error("value " + v.str() + " missing at (" + n->si.str() + ")");
    n = next;
  }
  return n->value;
}

}  // namespace osdd
