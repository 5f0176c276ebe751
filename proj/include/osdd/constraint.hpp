#pragma once

// Conjunctive equality/disequality constraints over finite-domain variables.

#include <algorithm>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "osdd/term.hpp"

namespace osdd {

/// Raised when the satisfiability search exceeds its node budget.
class SolverLimitError : public Error {
 public:
  using Error::Error;
};

enum class Relation : std::uint8_t { eq = 0, neq = 1 };

inline Relation flip(Relation r) { return r == Relation::eq ? Relation::neq : Relation::eq; }
inline const char* relation_symbol(Relation r) { return r == Relation::eq ? "=" : "!="; }

inline bool same_type(const DomainRef& a, const DomainRef& b) {
  if (a == b) return true;
  if (!a || !b) return false;
  return a->name() == b->name() && a->values() == b->values();
}

/// `X = T` or `X != T`. Stored so that the variable on the left is the
/// larger operand under the global order.
class AtomicConstraint {
 public:
  AtomicConstraint(Var x, Term t, Relation rel) : lhs_(std::move(x)), rhs_(std::move(t)), rel_(rel) {
    if (is_var(rhs_)) {
      if (!same_type(lhs_.domain(), as_var(rhs_).domain()))
        throw Error("constraint between variables of different types: " + lhs_.name() + ", " +
                    as_var(rhs_).name());
      if (lhs_ < as_var(rhs_)) std::swap(lhs_, std::get<1>(rhs_));
    } else if (lhs_.domain() && !lhs_.domain()->contains(as_ground(rhs_))) {
      throw Error("value '" + as_ground(rhs_).str() + "' is not in the type of " + lhs_.name());
    }
  }

  static AtomicConstraint eq(Var x, Term t) { return {std::move(x), std::move(t), Relation::eq}; }
  static AtomicConstraint neq(Var x, Term t) { return {std::move(x), std::move(t), Relation::neq}; }

  const Var& lhs() const { return lhs_; }
  const Term& rhs() const { return rhs_; }
  Relation relation() const { return rel_; }
  bool is_eq() const { return rel_ == Relation::eq; }

  AtomicConstraint negated() const {
    AtomicConstraint c = *this;
    c.rel_ = flip(rel_);
    return c;
  }

  bool mentions(const Var& v) const {
    return lhs_ == v || (is_var(rhs_) && as_var(rhs_) == v);
  }

  std::string str() const {
    return lhs_.name() + " " + relation_symbol(rel_) + " " + term_str(rhs_);
  }

  friend bool operator==(const AtomicConstraint&, const AtomicConstraint&) = default;
  // Same order as the (source, destination, label) triples of the graph.
  friend std::strong_ordering operator<=>(const AtomicConstraint& a, const AtomicConstraint& b) {
    if (auto c = a.rhs_ <=> b.rhs_; c != 0) return c;
    if (auto c = a.lhs_ <=> b.lhs_; c != 0) return c;
    return a.rel_ <=> b.rel_;
  }

 private:
  Var lhs_;
  Term rhs_;
  Relation rel_;
};

/// Ground values for some variables. Also expressible as a formula of
/// ground equalities; see as_formula().
using Assignment = std::map<Var, GroundTerm>;

/// A conjunction of atomic constraints, kept sorted and duplicate-free.
class ConstraintFormula {
 public:
  ConstraintFormula() = default;
  ConstraintFormula(std::initializer_list<AtomicConstraint> atoms) : atoms_(atoms) { normalize(); }
  explicit ConstraintFormula(std::vector<AtomicConstraint> atoms) : atoms_(std::move(atoms)) {
    normalize();
  }

  const std::vector<AtomicConstraint>& atoms() const { return atoms_; }
  bool empty() const { return atoms_.empty(); }
  std::size_t size() const { return atoms_.size(); }

  std::vector<Var> vars() const {
    std::vector<Var> out;
    for (const auto& a : atoms_) {
      out.push_back(a.lhs());
      if (is_var(a.rhs())) out.push_back(as_var(a.rhs()));
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool mentions(const Var& v) const {
    return std::any_of(atoms_.begin(), atoms_.end(), [&](const auto& a) { return a.mentions(v); });
  }

  bool contains(const AtomicConstraint& a) const {
    return std::binary_search(atoms_.begin(), atoms_.end(), a);
  }

  ConstraintFormula operator&(const ConstraintFormula& other) const {
    std::vector<AtomicConstraint> all;
    all.reserve(atoms_.size() + other.atoms_.size());
    std::set_union(atoms_.begin(), atoms_.end(), other.atoms_.begin(), other.atoms_.end(),
                   std::back_inserter(all));
    ConstraintFormula f;
    f.atoms_ = std::move(all);
    return f;
  }

  ConstraintFormula with(const AtomicConstraint& a) const {
    ConstraintFormula f = *this;
    auto it = std::lower_bound(f.atoms_.begin(), f.atoms_.end(), a);
    if (it == f.atoms_.end() || !(*it == a)) f.atoms_.insert(it, a);
    return f;
  }

  /// Replaces every occurrence of `from` by `to`.
  ConstraintFormula renamed(const Var& from, const Var& to) const {
    std::vector<AtomicConstraint> out;
    out.reserve(atoms_.size());
    for (const auto& a : atoms_) {
      Var l = a.lhs() == from ? to : a.lhs();
      Term r = a.rhs();
      if (is_var(r) && as_var(r) == from) r = to;
      out.emplace_back(l, r, a.relation());
    }
    return ConstraintFormula(std::move(out));
  }

  /// Partially evaluates under `sigma`. Returns nullopt when some atom
  /// becomes ground and false.
  std::optional<ConstraintFormula> substitute(const Assignment& sigma) const {
    std::vector<AtomicConstraint> out;
    for (const auto& a : atoms_) {
      auto lv = sigma.find(a.lhs());
      std::optional<GroundTerm> rv;
      if (is_var(a.rhs())) {
        auto it = sigma.find(as_var(a.rhs()));
        if (it != sigma.end()) rv = it->second;
      } else {
        rv = as_ground(a.rhs());
      }
      if (lv != sigma.end() && rv) {
        if ((lv->second == *rv) != a.is_eq()) return std::nullopt;
      } else if (lv != sigma.end()) {
        out.emplace_back(as_var(a.rhs()), lv->second, a.relation());
      } else if (rv) {
        out.emplace_back(a.lhs(), *rv, a.relation());
      } else {
        out.push_back(a);
      }
    }
    return ConstraintFormula(std::move(out));
  }

  /// Truth value under `sigma` when every variable is assigned.
  std::optional<bool> evaluate(const Assignment& sigma) const {
    for (const auto& a : atoms_) {
      auto lv = sigma.find(a.lhs());
      if (lv == sigma.end()) return std::nullopt;
      const GroundTerm* rv = nullptr;
      if (is_var(a.rhs())) {
        auto it = sigma.find(as_var(a.rhs()));
        if (it == sigma.end()) return std::nullopt;
        rv = &it->second;
      } else {
        rv = &as_ground(a.rhs());
      }
      if ((lv->second == *rv) != a.is_eq()) return false;
    }
    return true;
  }

  std::string str() const {
    if (atoms_.empty()) return "true";
    std::string s;
    for (std::size_t i = 0; i < atoms_.size(); ++i) {
      if (i) s += ", ";
      s += atoms_[i].str();
    }
    return s;
  }

  friend bool operator==(const ConstraintFormula&, const ConstraintFormula&) = default;

 private:
  void normalize() {
    std::sort(atoms_.begin(), atoms_.end());
    atoms_.erase(std::unique(atoms_.begin(), atoms_.end()), atoms_.end());
  }

  std::vector<AtomicConstraint> atoms_;
};

inline ConstraintFormula as_formula(const Assignment& sigma) {
  std::vector<AtomicConstraint> atoms;
  for (const auto& [v, g] : sigma) atoms.push_back(AtomicConstraint::eq(v, g));
  return ConstraintFormula(std::move(atoms));
}

struct GraphEdge {
  Term source;
  Term target;
  Relation relation;
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

/// The entailment-closed constraint graph of a formula. Equality classes
/// come from union-find over `=` atoms; disequalities hold between classes.
/// A class whose residual domain has exactly one value is merged with it.
class ConstraintGraph {
 public:
  bool satisfiable() const { return !unsat_; }
  const std::vector<Term>& nodes() const { return nodes_; }
  std::size_t class_count() const { return class_const_.size(); }

  std::optional<std::size_t> node_index(const Term& t) const {
    auto it = std::lower_bound(nodes_.begin(), nodes_.end(), t);
    if (it == nodes_.end() || !(*it == t)) return std::nullopt;
    return static_cast<std::size_t>(it - nodes_.begin());
  }

  std::size_t class_of_node(std::size_t n) const { return cls_[n]; }
  const std::optional<GroundTerm>& class_constant(std::size_t c) const { return class_const_[c]; }
  const DomainRef& class_domain(std::size_t c) const { return class_domain_[c]; }
  std::size_t class_size(std::size_t c) const { return class_size_[c]; }

  bool classes_neq(std::size_t a, std::size_t b) const {
    if (a == b) return false;
    if (class_const_[a] && class_const_[b]) return true;
    return neq_.count({std::min(a, b), std::max(a, b)}) != 0;
  }

  /// Entailed relation between two nodes, or nullopt when neither `=` nor
  /// `!=` is entailed.
  std::optional<Relation> node_relation(std::size_t i, std::size_t j) const {
    if (cls_[i] == cls_[j]) return Relation::eq;
    if (classes_neq(cls_[i], cls_[j])) return Relation::neq;
    return std::nullopt;
  }

  std::optional<Relation> relation(const Term& a, const Term& b) const {
    if (a == b) return Relation::eq;
    auto ia = node_index(a);
    auto ib = node_index(b);
    if (ia && ib) return node_relation(*ia, *ib);
    if (!is_var(a) && !is_var(b)) return Relation::neq;
    // A term outside the graph can still be separated from a class that is
    // pinned to a different constant.
    auto pinned = [&](const Term& t, const std::optional<std::size_t>& idx) -> std::optional<GroundTerm> {
      if (!is_var(t)) return as_ground(t);
      if (idx) return class_const_[cls_[*idx]];
      return std::nullopt;
    };
    auto ca = pinned(a, ia);
    auto cb = pinned(b, ib);
    if (ca && cb) return *ca == *cb ? Relation::eq : Relation::neq;
    return std::nullopt;
  }

  bool entails(const AtomicConstraint& a) const {
    if (unsat_) return true;
    auto r = relation(a.lhs(), a.rhs());
    return r && *r == a.relation();
  }

  /// All edges (source < target), sorted lexicographically; `=` before `!=`.
  /// Only pairs that form a well-typed atom appear: variables of different
  /// types meet only through a shared constant, and a constant outside a
  /// variable's type is trivially different from it.
  std::vector<GraphEdge> edges() const {
    std::vector<GraphEdge> out;
    auto typed = [](const Term& a, const Term& b) {
      if (is_var(a) && is_var(b)) return same_type(as_var(a).domain(), as_var(b).domain());
      if (is_var(a)) return as_var(a).domain()->contains(as_ground(b));
      if (is_var(b)) return as_var(b).domain()->contains(as_ground(a));
      return false;
    };
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      for (std::size_t j = i + 1; j < nodes_.size(); ++j) {
        if (!typed(nodes_[i], nodes_[j])) continue;
        if (auto r = node_relation(i, j)) out.push_back({nodes_[i], nodes_[j], *r});
      }
    }
    return out;
  }

  /// The closed graph as an explicit formula.
  ConstraintFormula to_formula() const {
    std::vector<AtomicConstraint> atoms;
    for (const auto& e : edges()) atoms.emplace_back(as_var(e.target), e.source, e.relation);
    return ConstraintFormula(std::move(atoms));
  }

 private:
  friend ConstraintGraph close(const ConstraintFormula& f);

  bool unsat_ = false;
  std::vector<Term> nodes_;
  std::vector<std::size_t> cls_;
  std::vector<std::optional<GroundTerm>> class_const_;
  std::vector<DomainRef> class_domain_;
  std::vector<std::size_t> class_size_;
  std::set<std::pair<std::size_t, std::size_t>> neq_;
};

namespace detail {

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

}  // namespace detail

inline ConstraintGraph close(const ConstraintFormula& f) {
  ConstraintGraph g;
  std::vector<std::pair<Term, Term>> forced;  // node-consistency equalities

  for (;;) {
    g = ConstraintGraph{};
    for (const auto& a : f.atoms()) {
      g.nodes_.push_back(a.lhs());
      g.nodes_.push_back(a.rhs());
    }
    for (const auto& [x, v] : forced) {
      g.nodes_.push_back(x);
      g.nodes_.push_back(v);
    }
    std::sort(g.nodes_.begin(), g.nodes_.end());
    g.nodes_.erase(std::unique(g.nodes_.begin(), g.nodes_.end()), g.nodes_.end());

    const std::size_t n = g.nodes_.size();
    detail::UnionFind uf(n);
    auto idx = [&](const Term& t) { return *g.node_index(t); };
    for (const auto& a : f.atoms())
      if (a.is_eq()) uf.unite(idx(a.lhs()), idx(a.rhs()));
    for (const auto& [x, v] : forced) uf.unite(idx(x), idx(v));

    std::map<std::size_t, std::size_t> root_to_class;
    g.cls_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto [it, inserted] = root_to_class.emplace(uf.find(i), root_to_class.size());
      g.cls_[i] = it->second;
    }
    const std::size_t k = root_to_class.size();
    g.class_const_.assign(k, std::nullopt);
    g.class_domain_.assign(k, nullptr);
    g.class_size_.assign(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const std::size_t c = g.cls_[i];
      ++g.class_size_[c];
      if (is_var(g.nodes_[i])) {
        if (!g.class_domain_[c]) g.class_domain_[c] = as_var(g.nodes_[i]).domain();
      } else if (g.class_const_[c]) {
        g.unsat_ = true;  // two distinct constants in one class
        return g;
      } else {
        g.class_const_[c] = as_ground(g.nodes_[i]);
      }
    }
    for (const auto& a : f.atoms()) {
      if (a.is_eq()) continue;
      std::size_t ca = g.cls_[idx(a.lhs())];
      std::size_t cb = g.cls_[idx(a.rhs())];
      if (ca == cb) {
        g.unsat_ = true;
        return g;
      }
      g.neq_.insert({std::min(ca, cb), std::max(ca, cb)});
    }

    // Node consistency on classes not yet pinned to a constant.
    bool changed = false;
    for (std::size_t c = 0; c < k; ++c) {
      if (g.class_const_[c] || !g.class_domain_[c]) continue;
      const auto& dom = *g.class_domain_[c];
      std::set<GroundTerm> excluded;
      for (std::size_t d = 0; d < k; ++d)
        if (d != c && g.class_const_[d] && g.classes_neq(c, d) && dom.contains(*g.class_const_[d]))
          excluded.insert(*g.class_const_[d]);
      if (excluded.size() >= dom.size()) {
        g.unsat_ = true;
        return g;
      }
      if (excluded.size() + 1 == dom.size()) {
        for (const auto& v : dom.values()) {
          if (!excluded.count(v)) {
            std::size_t rep = 0;
            while (g.cls_[rep] != c || !is_var(g.nodes_[rep])) ++rep;
            forced.emplace_back(g.nodes_[rep], v);
            changed = true;
            break;
          }
        }
      }
    }
    if (!changed) return g;
  }
}

namespace detail {

/// Backtracking list-colouring over the unpinned classes.
inline bool colour_search(const ConstraintGraph& g, std::vector<std::size_t>& order,
                          std::vector<std::vector<GroundTerm>>& options,
                          std::vector<std::optional<GroundTerm>>& chosen, std::size_t pos,
                          std::size_t& budget) {
  if (pos == order.size()) return true;
  const std::size_t c = order[pos];
  for (const auto& v : options[c]) {
    if (budget == 0) throw SolverLimitError("satisfiability search exceeded its node budget");
    --budget;
    bool ok = true;
    for (std::size_t d = 0; d < chosen.size() && ok; ++d)
      if (chosen[d] && *chosen[d] == v && g.classes_neq(c, d)) ok = false;
    if (!ok) continue;
    chosen[c] = v;
    if (colour_search(g, order, options, chosen, pos + 1, budget)) return true;
    chosen[c].reset();
  }
  return false;
}

}  // namespace detail

inline constexpr std::size_t kSearchBudget = 1'000'000;

/// Decides satisfiability exactly: closure, then a greedy degree test, then
/// bounded backtracking.
inline bool satisfiable(const ConstraintGraph& g) {
  if (!g.satisfiable()) return false;
  const std::size_t k = g.class_count();
  std::vector<std::size_t> free;
  std::vector<std::vector<GroundTerm>> options(k);
  std::vector<std::optional<GroundTerm>> chosen(k);
  bool greedy_ok = true;
  for (std::size_t c = 0; c < k; ++c) {
    chosen[c] = g.class_constant(c);
    if (g.class_constant(c) || !g.class_domain(c)) continue;
    free.push_back(c);
  }
  for (std::size_t c : free) {
    std::set<GroundTerm> excluded;
    std::size_t free_degree = 0;
    for (std::size_t d = 0; d < k; ++d) {
      if (!g.classes_neq(c, d)) continue;
      if (g.class_constant(d)) excluded.insert(*g.class_constant(d));
      else ++free_degree;
    }
    for (const auto& v : g.class_domain(c)->values())
      if (!excluded.count(v)) options[c].push_back(v);
    if (options[c].size() <= free_degree) greedy_ok = false;
  }
  if (greedy_ok) return true;
  std::sort(free.begin(), free.end(),
            [&](std::size_t a, std::size_t b) { return options[a].size() < options[b].size(); });
  std::size_t budget = kSearchBudget;
  return detail::colour_search(g, free, options, chosen, 0, budget);
}

inline bool satisfiable(const ConstraintFormula& f) { return satisfiable(close(f)); }

inline bool compatible(const ConstraintFormula& f, const ConstraintFormula& g) {
  return satisfiable(f & g);
}

/// Pairwise exclusive formulas covering the complement of `f`:
/// [{!b1}, {b1, !b2}, ...]; unsatisfiable members are dropped.
inline std::vector<ConstraintFormula> negate(const ConstraintFormula& f) {
  std::vector<ConstraintFormula> out;
  std::vector<AtomicConstraint> prefix;
  for (const auto& a : f.atoms()) {
    std::vector<AtomicConstraint> member = prefix;
    member.push_back(a.negated());
    ConstraintFormula m(std::move(member));
    if (satisfiable(m)) out.push_back(std::move(m));
    prefix.push_back(a);
  }
  return out;
}

namespace detail {

inline void encode_term(std::string& out, const Term& t) {
  if (is_var(t)) {
    out.push_back('\x02');
    std::uint32_t v = as_var(t).index();
    for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<char>((v >> s) & 0xff));
  } else if (as_ground(t).is_int()) {
    out.push_back('\x00');
    auto u = static_cast<std::uint64_t>(as_ground(t).as_int()) ^ (std::uint64_t{1} << 63);
    for (int s = 56; s >= 0; s -= 8) out.push_back(static_cast<char>((u >> s) & 0xff));
  } else {
    out.push_back('\x01');
    out += as_ground(t).as_atom();
    out.push_back('\x00');
  }
}

}  // namespace detail

/// Canonical byte encoding of the closed graph: sorted (source, target,
/// label) triples. Compare keys bytewise (as unsigned) for the canonical order.
inline std::string canonical_key(const ConstraintGraph& g) {
  if (!g.satisfiable()) return std::string(1, '\xff');
  std::string key;
  for (const auto& e : g.edges()) {
    detail::encode_term(key, e.source);
    detail::encode_term(key, e.target);
    key.push_back(e.relation == Relation::eq ? '\x00' : '\x01');
  }
  return key;
}

inline std::string canonical_key(const ConstraintFormula& f) { return canonical_key(close(f)); }

inline bool key_less(const std::string& a, const std::string& b) {
  return std::lexicographical_compare(
      a.begin(), a.end(), b.begin(), b.end(),
      [](char x, char y) { return static_cast<unsigned char>(x) < static_cast<unsigned char>(y); });
}

/// Values of `x` for which f /\ partial /\ x = v is satisfiable.
inline std::vector<GroundTerm> solutions(const ConstraintFormula& f, const Var& x,
                                         const ConstraintFormula& partial = {}) {
  std::vector<GroundTerm> out;
  const ConstraintFormula base = f & partial;
  for (const auto& v : x.domain()->values())
    if (satisfiable(base.with(AtomicConstraint::eq(x, v)))) out.push_back(v);
  return out;
}

namespace detail {

/// Constants each unpinned class is `!=` to.
inline std::vector<std::vector<GroundTerm>> excluded_constants(const ConstraintGraph& g) {
  std::vector<std::size_t> pinned;
  for (std::size_t d = 0; d < g.class_count(); ++d)
    if (g.class_constant(d)) pinned.push_back(d);
  std::vector<std::vector<GroundTerm>> out(g.class_count());
  for (std::size_t c = 0; c < g.class_count(); ++c) {
    if (g.class_constant(c)) continue;
    for (std::size_t d : pinned)
      if (g.classes_neq(c, d)) out[c].push_back(*g.class_constant(d));
  }
  return out;
}

/// Two unpinned classes whose residual domains do not meet: between them
/// their excluded constants cover the type.
inline bool apart(const ConstraintGraph& g, std::size_t c, std::size_t d,
                  const std::vector<std::vector<GroundTerm>>& excluded) {
  if (g.class_constant(c) || g.class_constant(d)) return false;
  std::size_t covered = excluded[c].size();
  for (const auto& v : excluded[d])
    covered += std::find(excluded[c].begin(), excluded[c].end(), v) == excluded[c].end();
  return covered >= g.class_domain(c)->size();
}

/// `!=` neighbour classes of `c`, leaving out variable classes whose
/// residual domain misses c's: that disequality excludes nothing.
inline std::vector<std::size_t> live_neighbours(const ConstraintGraph& g, std::size_t c,
                                                const std::vector<std::vector<GroundTerm>>& res) {
  std::vector<std::size_t> out;
  for (std::size_t d = 0; d < g.class_count(); ++d)
    if (g.classes_neq(c, d) && !apart(g, c, d, res)) out.push_back(d);
  return out;
}

}  // namespace detail

namespace detail {

inline bool saturated_class(const ConstraintGraph& g, std::size_t c,
                            const std::vector<std::vector<GroundTerm>>& excluded) {
  if (g.class_constant(c) || g.class_size(c) > 1) return true;
  const auto z = live_neighbours(g, c, excluded);
  for (std::size_t i = 0; i < z.size(); ++i)
    for (std::size_t j = i + 1; j < z.size(); ++j) {
      if (g.class_constant(z[i]) && g.class_constant(z[j])) continue;
      if (!g.classes_neq(z[i], z[j]) && !apart(g, z[i], z[j], excluded)) return false;
    }
  return true;
}

inline std::size_t structural_measure(const ConstraintGraph& g, std::size_t c, std::size_t domain_size,
                                      const std::vector<std::vector<GroundTerm>>& excluded) {
  if (g.class_size(c) > 1) return 1;
  const std::size_t neighbours = live_neighbours(g, c, excluded).size();
  return neighbours >= domain_size ? 0 : domain_size - neighbours;
}

}  // namespace detail

/// Saturation on the closed graph: for each variable without an `=`
/// partner, its `!=` neighbours are pairwise related (constant pairs
/// exempt). Variable classes with disjoint residual domains count as
/// related.
inline bool is_saturated(const ConstraintGraph& g) {
  const auto excluded = detail::excluded_constants(g);
  for (std::size_t c = 0; c < g.class_count(); ++c)
    if (!detail::saturated_class(g, c, excluded)) return false;
  return true;
}

inline bool is_saturated(const ConstraintFormula& f) { return is_saturated(close(f)); }

/// The saturation condition for `x` alone.
inline bool is_saturated_at(const ConstraintGraph& g, const Var& x) {
  auto xi = g.node_index(x);
  if (!xi) return true;
  return detail::saturated_class(g, g.class_of_node(*xi), detail::excluded_constants(g));
}

/// Structural measure of `x`: 1 when `x` is `=`-connected to anything,
/// otherwise the domain size minus the number of `!=` neighbour classes
/// that can share a value with it. nullopt when the formula is not
/// saturated.
inline std::optional<std::size_t> measure(const ConstraintGraph& g, const Var& x) {
  if (!is_saturated(g)) return std::nullopt;
  auto xi = g.node_index(x);
  if (!xi) return x.domain()->size();
  return detail::structural_measure(g, g.class_of_node(*xi), x.domain()->size(), detail::excluded_constants(g));
}

/// Measure of `x` requiring saturation at `x` only; nullopt otherwise.
inline std::optional<std::size_t> measure_at(const ConstraintGraph& g, const Var& x) {
  auto xi = g.node_index(x);
  if (!xi) return x.domain()->size();
  const auto excluded = detail::excluded_constants(g);
  const std::size_t c = g.class_of_node(*xi);
  if (!detail::saturated_class(g, c, excluded)) return std::nullopt;
  return detail::structural_measure(g, c, x.domain()->size(), excluded);
}

inline std::optional<std::size_t> measure(const ConstraintFormula& f, const Var& x) {
  return measure(close(f), x);
}

}  // namespace osdd
