#pragma once

// Exact probability over OSDDs: the general recursion, the measurability
// report and the measurable fast path.

#include <chrono>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "osdd/mdd.hpp"
#include "osdd/program.hpp"

namespace osdd {

/// Declaration (domain and distribution) of the switch behind an instance.
using DeclFn = std::function<const SwitchDecl&(const SwitchInstance&)>;

inline DeclFn decls_of(const Program& p) {
  return [&p](const SwitchInstance& si) -> const SwitchDecl& { return p.switch_for(si.sw); };
}

namespace detail {

template <class T>
T prob_of(const SwitchDecl& d, const GroundTerm& v) {
  if constexpr (std::is_same_v<T, Rational>) return d.prob(v);
  else return static_cast<T>(d.prob_double(v));
}

/// Per-node facts used by the recursion: free variables, label constants
/// and whether every switch below is uniform.
struct SubtreeInfo {
  std::vector<Var> free;
  std::set<GroundTerm> constants;
  bool uniform = true;
};

class SubtreeIndex {
 public:
  explicit SubtreeIndex(const DeclFn& decl) : decl_(decl) {}

  const SubtreeInfo& operator()(const Osdd& n) {
    auto it = info_.find(n.id());
    if (it != info_.end()) return it->second;
    SubtreeInfo s;
    if (!n.is_leaf()) {
      std::set<Var> fv;
      s.uniform = decl_(n.si()).dist.is_uniform();
      for (std::size_t i = 0; i < n.edge_count(); ++i) {
        for (const auto& a : n.label(i).atoms()) {
          fv.insert(a.lhs());
          if (is_var(a.rhs())) fv.insert(as_var(a.rhs()));
          else s.constants.insert(as_ground(a.rhs()));
        }
        const SubtreeInfo& c = (*this)(n.child(i));
        fv.insert(c.free.begin(), c.free.end());
        s.constants.insert(c.constants.begin(), c.constants.end());
        s.uniform = s.uniform && c.uniform;
      }
      fv.erase(n.out());
      s.free.assign(fv.begin(), fv.end());
    }
    return info_.emplace(n.id(), std::move(s)).first->second;
  }

 private:
  DeclFn decl_;
  std::unordered_map<std::uint64_t, SubtreeInfo> info_;
};

}  // namespace detail

/// Probability that the diagram evaluates to 1, by the recursion
/// pi(psi, sigma) = sum_i sum_{y in [gamma_i sigma]_Y} P(Y = y) Pi(psi_i, sigma[y/Y]),
/// memoized on the node and the assignment to its free variables. Below a
/// node whose switches are all uniform, values not mentioned by a label
/// or the assignment are interchangeable and summed as one class.
template <class T = double>
T exact_prob(const Osdd& d, const DeclFn& decl) {
  detail::SubtreeIndex index(decl);
  std::unordered_map<std::string, T> memo;
  std::function<T(const Osdd&, const Assignment&)> rec = [&](const Osdd& n, const Assignment& sigma) -> T {
    if (n.is_leaf()) return n.value() ? T(1) : T(0);
    const detail::SubtreeInfo& info = index(n);
    std::string key = detail::memo_key({n.id()}, "");
    std::map<GroundTerm, std::size_t> renamed;
    for (const auto& [v, g] : sigma) {
      detail::encode_term(key, v);
      if (info.uniform && !info.constants.count(g)) {
        auto [it, _] = renamed.emplace(g, renamed.size());
        key.push_back('#');
        std::uint64_t idx = it->second;
        key.append(reinterpret_cast<const char*>(&idx), sizeof idx);
      } else {
        detail::encode_term(key, g);
      }
    }
    if (auto it = memo.find(key); it != memo.end()) return it->second;

    const SwitchDecl& sd = decl(n.si());
    std::vector<std::pair<GroundTerm, std::size_t>> candidates;  // value, multiplicity
    if (info.uniform) {
      std::set<GroundTerm> special = info.constants;
      for (const auto& [v, g] : sigma) special.insert(g);
      std::optional<GroundTerm> rep;
      std::size_t anonymous = 0;
      for (const auto& y : n.out().domain()->values()) {
        if (special.count(y)) candidates.emplace_back(y, 1);
        else if (anonymous++ == 0) rep = y;
      }
      if (rep) candidates.emplace_back(*rep, anonymous);
    } else {
      for (const auto& y : n.out().domain()->values()) candidates.emplace_back(y, 1);
    }

    T total(0);
    for (const auto& [y, mult] : candidates) {
      Assignment s2 = sigma;
      s2[n.out()] = y;
      for (std::size_t i = 0; i < n.edge_count(); ++i) {
        auto t = n.label(i).evaluate(s2);
        if (!t) throw Error("label " + n.label(i).str() + " mentions a variable not bound above it");
        if (!*t) continue;
        const Osdd child = n.child(i);
        if (!child.is_zero()) {
          Assignment sub;
          for (const auto& v : index(child).free) {
            auto it = s2.find(v);
            if (it == s2.end()) throw Error("variable " + v.name() + " is free in the diagram");
            sub.emplace(v, it->second);
          }
          total += T(static_cast<long>(mult)) * detail::prob_of<T>(sd, y) * rec(child, sub);
        }
        break;
      }
    }
    memo.emplace(key, total);
    return total;
  };
  return rec(d, {});
}

namespace detail {

/// Where a term sits relative to a closed graph.
struct Place {
  std::optional<GroundTerm> value;
  std::optional<std::size_t> cls;
  std::optional<Var> free;  // a variable the graph does not mention
};

inline Place place(const ConstraintGraph& g, const Term& t) {
  Place p;
  if (auto i = g.node_index(t)) {
    p.cls = g.class_of_node(*i);
    p.value = g.class_constant(*p.cls);
  } else if (is_var(t)) {
    p.free = as_var(t);
  } else {
    p.value = as_ground(t);
  }
  return p;
}

inline std::optional<Relation> place_relation(const ConstraintGraph& g,
                                              const std::vector<std::vector<GroundTerm>>& excluded,
                                              const Place& a, const Place& b) {
  if (a.value && b.value) return *a.value == *b.value ? Relation::eq : Relation::neq;
  if (a.cls && b.cls) {
    if (*a.cls == *b.cls) return Relation::eq;
    if (g.classes_neq(*a.cls, *b.cls) || apart(g, *a.cls, *b.cls, excluded)) return Relation::neq;
    return std::nullopt;
  }
  if (a.free && b.free && *a.free == *b.free) return Relation::eq;
  auto excludes = [&](const Place& u, const Place& k) {
    if (!u.cls || u.value || !k.value) return false;
    const auto& e = excluded[*u.cls];
    return std::find(e.begin(), e.end(), *k.value) != e.end();
  };
  if (excludes(a, b) || excludes(b, a)) return Relation::neq;
  return std::nullopt;
}

struct EdgeCheck {
  bool satisfiable = true;
  std::optional<std::size_t> measure;  // nullopt: not saturated at the output variable
  friend bool operator==(const EdgeCheck&, const EdgeCheck&) = default;
};

/// Satisfiability and measure of `y` under path /\ label, read off the
/// closed path graph without closing the conjunction. Handles labels whose
/// atoms each relate `y` to a term the path already places; nullopt for
/// anything else, and for unsaturated or pinned-by-elimination cases.
inline std::optional<EdgeCheck> quick_edge(const ConstraintGraph& base,
                                           const std::vector<std::vector<GroundTerm>>& excluded,
                                           const ConstraintFormula& label, const Var& y) {
  if (!base.satisfiable() || base.node_index(y)) return std::nullopt;
  std::vector<Place> eqs;
  std::vector<Place> neqs;
  for (const auto& a : label.atoms()) {
    const bool rhs_is_y = is_var(a.rhs()) && as_var(a.rhs()) == y;
    if ((a.lhs() == y) == rhs_is_y) return std::nullopt;
    Place p = place(base, a.lhs() == y ? a.rhs() : Term(a.lhs()));
    if (p.free) return std::nullopt;
    (a.is_eq() ? eqs : neqs).push_back(std::move(p));
  }
  if (!eqs.empty()) {
    for (const auto& group : {std::cref(eqs), std::cref(neqs)}) {
      const bool want_eq = &group.get() == &eqs;
      for (const auto& t : group.get()) {
        auto r = place_relation(base, excluded, eqs.front(), t);
        if (!r) return std::nullopt;
        if ((*r == Relation::eq) != want_eq) return EdgeCheck{false, 0};
      }
    }
    return EdgeCheck{true, 1};
  }

  const std::size_t n = y.domain()->size();
  std::vector<GroundTerm> values;
  std::vector<std::size_t> classes;
  for (const auto& s : neqs) {
    if (s.value) {
      if (std::find(values.begin(), values.end(), *s.value) == values.end()) values.push_back(*s.value);
    } else if (std::find(classes.begin(), classes.end(), *s.cls) == classes.end()) {
      classes.push_back(*s.cls);
    }
  }
  if (values.size() + 1 >= n) return std::nullopt;
  std::vector<std::size_t> live;
  for (std::size_t c : classes) {
    std::size_t covered = values.size();
    for (const auto& v : excluded[c])
      covered += std::find(values.begin(), values.end(), v) == values.end();
    if (covered < n) live.push_back(c);
  }
  for (std::size_t i = 0; i < live.size(); ++i) {
    const auto& e = excluded[live[i]];
    for (const auto& v : values)
      if (std::find(e.begin(), e.end(), v) == e.end()) return std::nullopt;
    for (std::size_t j = i + 1; j < live.size(); ++j)
      if (!base.classes_neq(live[i], live[j]) && !apart(base, live[i], live[j], excluded)) return std::nullopt;
  }
  const std::size_t m = n - values.size() - std::min(live.size(), n - values.size());
  if (m == 0) return EdgeCheck{false, 0};
  return EdgeCheck{true, m};
}

inline EdgeCheck full_edge(const ConstraintFormula& context, const Var& y) {
  ConstraintGraph g = close(context);
  if (!satisfiable(g)) return {false, 0};
  return {true, measure_at(g, y)};
}

inline EdgeCheck check_edge(const ConstraintGraph& base, const std::vector<std::vector<GroundTerm>>& excluded,
                            const ConstraintFormula& path, const ConstraintFormula& label, const Var& y) {
  if (auto q = quick_edge(base, excluded, label, y)) return *q;
  return full_edge(path & label, y);
}

}  // namespace detail

struct EdgeMeasure {
  std::string path;  // node path from the root, e.g. "/0/1"
  std::size_t edge;
  SwitchInstance si;
  ConstraintFormula label;
  ConstraintFormula context;  // path constraints /\ label
  bool saturated;             // saturated at the node's output variable
  std::optional<std::size_t> measure;
};

struct MeasurabilityReport {
  bool measurable = true;
  std::vector<EdgeMeasure> edges;  // depth-first, edges in diagram order
  std::string offending_path;      // first unsaturated edge, if any
};

/// Checks every edge under every path: path /\ label must be saturated at
/// the node's output variable, whose measure is recorded. Unsatisfiable
/// contexts are skipped.
inline MeasurabilityReport measurability(const Osdd& d) {
  MeasurabilityReport r;
  std::function<void(const Osdd&, const ConstraintFormula&, const std::string&)> rec =
      [&](const Osdd& n, const ConstraintFormula& p, const std::string& path) {
        if (n.is_leaf()) return;
        const ConstraintGraph base = close(p);
        const auto excluded = detail::excluded_constants(base);
        for (std::size_t i = 0; i < n.edge_count(); ++i) {
          const detail::EdgeCheck c = detail::check_edge(base, excluded, p, n.label(i), n.out());
          if (!c.satisfiable) continue;
          ConstraintFormula ctx = p & n.label(i);
          EdgeMeasure e{path, i, n.si(), n.label(i), ctx, c.measure.has_value(), c.measure};
          if (!e.saturated && r.measurable) {
            r.measurable = false;
            r.offending_path = path + "/" + std::to_string(i);
          }
          r.edges.push_back(e);
          rec(n.child(i), ctx, path + "/" + std::to_string(i));
        }
      };
  rec(d, {}, "");
  return r;
}

/// Measurable, all-uniform fast path: pi = sum_i m_i P(Y = y_i) Pi(psi_i),
/// with m_i the measure of the edge under its path.
template <class T = double>
T exact_prob_measurable(const Osdd& d, const DeclFn& decl) {
  std::unordered_map<std::string, T> memo;
  std::function<T(const Osdd&, const ConstraintFormula&)> rec = [&](const Osdd& n,
                                                                    const ConstraintFormula& p) -> T {
    if (n.is_leaf()) return n.value() ? T(1) : T(0);
    const ConstraintGraph base = close(p);
    const std::string key = detail::memo_key({n.id()}, canonical_key(base));
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    const SwitchDecl& sd = decl(n.si());
    if (!sd.dist.is_uniform())
      throw Error("switch " + n.si().str() + " is not uniform; use exact_prob instead");
    const auto excluded = detail::excluded_constants(base);
    const auto size = static_cast<long>(n.out().domain()->size());
    T total(0);
    for (std::size_t i = 0; i < n.edge_count(); ++i) {
      const detail::EdgeCheck c = detail::check_edge(base, excluded, p, n.label(i), n.out());
      if (!c.satisfiable) continue;
      if (!c.measure) throw Error("edge " + n.label(i).str() + " at " + n.si().str() +
                                  " is not measurable; use exact_prob instead");
      if (*c.measure == 0 || n.child(i).is_zero()) continue;
      T w;
      if constexpr (std::is_same_v<T, Rational>) w = Rational(static_cast<long>(*c.measure), size);
      else w = static_cast<T>(*c.measure) / static_cast<T>(size);
      total += w * rec(n.child(i), p & n.label(i));
    }
    memo.emplace(key, total);
    return total;
  };
  return rec(d, {});
}

/// Probability of a ground diagram.
template <class T = double>
T mdd_prob(const Mdd& m, const DeclFn& decl) {
  std::unordered_map<const MddNode*, T> memo;
  std::function<T(const Mdd&)> rec = [&](const Mdd& n) -> T {
    if (n->is_leaf) return n->value ? T(1) : T(0);
    if (auto it = memo.find(n.get()); it != memo.end()) return it->second;
    const SwitchDecl& sd = decl(n->si);
    T total(0);
    for (const auto& [v, c] : n->edges) total += detail::prob_of<T>(sd, v) * rec(c);
    memo.emplace(n.get(), total);
    return total;
  };
  return rec(m);
}

/// Complexity parameters: largest type, internal node count, largest
/// free-variable set of an internal node.
struct Complexity {
  std::size_t max_domain = 0;
  std::size_t nodes = 0;
  std::size_t max_free_vars = 0;
};

inline Complexity complexity(const Osdd& d, const DeclFn& decl) {
  Complexity c;
  detail::SubtreeIndex index(decl);
  for_each_node(d, [&](const Osdd& n) {
    if (n.is_leaf()) return;
    ++c.nodes;
    c.max_domain = std::max(c.max_domain, n.out().domain()->size());
    c.max_free_vars = std::max(c.max_free_vars, index(n).free.size());
  });
  return c;
}

}  // namespace osdd
