#pragma once

// Diagram algebra: conjunction/disjunction, constraint application,
// improper-to-proper rewriting, canonical form and validation.

#include <algorithm>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "osdd/diagram.hpp"

namespace osdd {

enum class BoolOp { conj, disj };

namespace detail {

inline std::string memo_key(std::initializer_list<std::uint64_t> ids, const std::string& tail) {
  std::string k;
  for (auto id : ids) k.append(reinterpret_cast<const char*>(&id), sizeof id);
  k += tail;
  return k;
}

inline std::string path_key(const ConstraintFormula& p) { return canonical_key(p); }

inline std::string vars_key(const std::vector<Var>& vs) {
  std::string k;
  for (const auto& v : vs) encode_term(k, v);
  return k;
}

inline bool contains_var(const std::vector<Var>& vs, const Var& v) {
  return std::find(vs.begin(), vs.end(), v) != vs.end();
}

inline Osdd make_node(const Osdd& like, std::vector<std::pair<ConstraintFormula, Osdd>> edges) {
  if (edges.empty()) return Osdd::zero();
  if (std::all_of(edges.begin(), edges.end(), [](const auto& e) { return e.second.is_zero(); }))
    return Osdd::zero();
  return Osdd::node(like.si(), like.out(), std::move(edges));
}

/// Variables mentioned by labels in a subtree, plus the node's output.
class MentionIndex {
 public:
  const std::set<Var>& operator()(const Osdd& n) {
    if (auto it = cache_.find(n.id()); it != cache_.end()) return it->second;
    std::set<Var> vs;
    if (!n.is_leaf()) {
      vs.insert(n.out());
      for (std::size_t i = 0; i < n.edge_count(); ++i) {
        for (const auto& v : n.label(i).vars()) vs.insert(v);
        const auto& c = (*this)(n.child(i));
        vs.insert(c.begin(), c.end());
      }
    }
    return cache_.emplace(n.id(), std::move(vs)).first->second;
  }

 private:
  std::unordered_map<std::uint64_t, std::set<Var>> cache_;
};

/// The atoms of `p` whose variables connect to `vs` through
/// variable-variable atoms. The rest shares no variable with them, so
/// dropping it changes neither satisfiability nor entailment over `vs`.
/// On return `vs` holds the connected variables.
inline ConstraintFormula project(const ConstraintFormula& p, std::set<Var>& vs) {
  if (p.empty()) return p;
  std::vector<bool> taken(p.atoms().size(), false);
  for (bool grew = true; grew;) {
    grew = false;
    for (std::size_t i = 0; i < p.atoms().size(); ++i) {
      if (taken[i]) continue;
      const auto& a = p.atoms()[i];
      const bool r = is_var(a.rhs());
      if (!vs.count(a.lhs()) && !(r && vs.count(as_var(a.rhs())))) continue;
      taken[i] = true;
      grew = vs.insert(a.lhs()).second || grew;
      if (r) grew = vs.insert(as_var(a.rhs())).second || grew;
    }
  }
  std::vector<AtomicConstraint> kept;
  for (std::size_t i = 0; i < taken.size(); ++i)
    if (taken[i]) kept.push_back(p.atoms()[i]);
  if (kept.size() == p.atoms().size()) return p;
  return ConstraintFormula(std::move(kept));
}

inline std::vector<Var> restrict_to(const std::vector<Var>& scope, const std::set<Var>& vs) {
  std::vector<Var> out;
  for (const auto& v : scope)
    if (vs.count(v)) out.push_back(v);
  return out;
}


}  // namespace detail

/// Simultaneous variable renaming throughout a diagram.
inline Osdd rename_vars(const Osdd& d, const std::map<Var, Var>& sub) {
  if (sub.empty()) return d;
  std::unordered_map<std::uint64_t, Osdd> memo;
  auto rename_formula = [&](const ConstraintFormula& f) {
    std::vector<AtomicConstraint> atoms;
    for (const auto& a : f.atoms()) {
      auto l = sub.find(a.lhs());
      Var lhs = l == sub.end() ? a.lhs() : l->second;
      Term rhs = a.rhs();
      if (is_var(rhs)) {
        auto r = sub.find(as_var(rhs));
        if (r != sub.end()) rhs = r->second;
      }
      atoms.emplace_back(lhs, rhs, a.relation());
    }
    return ConstraintFormula(std::move(atoms));
  };
  std::function<Osdd(const Osdd&)> rec = [&](const Osdd& n) -> Osdd {
    if (n.is_leaf()) return n;
    if (auto it = memo.find(n.id()); it != memo.end()) return it->second;
    std::vector<std::pair<ConstraintFormula, Osdd>> edges;
    for (std::size_t i = 0; i < n.edge_count(); ++i)
      edges.emplace_back(rename_formula(n.label(i)), rec(n.child(i)));
    auto o = sub.find(n.out());
    Osdd r = Osdd::node(n.si(), o == sub.end() ? n.out() : o->second, std::move(edges));
    memo.emplace(n.id(), r);
    return r;
  };
  return rec(d);
}

/// Canonical label relative to a path: the atoms that path /\ label entails
/// beyond the path, then greedily minus those the path and the remaining
/// atoms still entail.
inline ConstraintFormula reduce_label(const ConstraintFormula& label, const ConstraintFormula& path) {
  const ConstraintGraph pg = close(path);
  const ConstraintGraph g = close(path & label);
  if (!g.satisfiable()) return label;
  std::vector<AtomicConstraint> rest;
  for (const auto& e : g.edges()) {
    AtomicConstraint a(as_var(e.target), e.source, e.relation);
    if (!pg.entails(a)) rest.push_back(a);
  }
  // Drop order: disequalities before equalities (pinned values then read as
  // equalities), variable-variable before variable-constant (so subtrees
  // mention fewer ancestors and share more).
  auto rank = [](const AtomicConstraint& a) { return 2 * (a.relation() == Relation::eq) + !is_var(a.rhs()); };
  std::sort(rest.begin(), rest.end(), [&](const AtomicConstraint& a, const AtomicConstraint& b) {
    if (rank(a) != rank(b)) return rank(a) < rank(b);
    return a < b;
  });
  for (std::size_t i = 0; i < rest.size();) {
    std::vector<AtomicConstraint> others = rest;
    others.erase(others.begin() + static_cast<std::ptrdiff_t>(i));
    if (close(path & ConstraintFormula(others)).entails(rest[i])) rest = std::move(others);
    else ++i;
  }
  return ConstraintFormula(std::move(rest));
}

/// Canonical form: output variables of each switch instance renamed to one
/// representative, labels reduced relative to their path, unsatisfiable
/// edges pruned, edges sorted by label key, nodes whose children are all 0
/// replaced by 0. Idempotent.
inline Osdd canonicalize(const Osdd& d) {
  std::map<SwitchInstance, std::set<Var>> outs;
  for_each_node(d, [&](const Osdd& n) {
    if (!n.is_leaf()) outs[n.si()].insert(n.out());
  });
  const auto free = free_vars(d);
  std::map<Var, Var> sub;
  for (const auto& [si, vs] : outs) {
    if (vs.size() < 2) continue;
    if (std::any_of(vs.begin(), vs.end(), [&](const Var& v) { return free.count(v) != 0; })) continue;
    for (const auto& v : vs)
      if (!(v == *vs.begin())) sub.emplace(v, *vs.begin());
  }
  const Osdd renamed = rename_vars(d, sub);

  std::unordered_map<std::string, Osdd> memo;
  detail::MentionIndex mentions;
  std::function<Osdd(const Osdd&, const ConstraintFormula&)> rec = [&](const Osdd& n,
                                                                      const ConstraintFormula& above) -> Osdd {
    if (n.is_leaf()) return n;
    std::set<Var> rel = mentions(n);
    const ConstraintFormula p = detail::project(above, rel);
    const std::string key = detail::memo_key({n.id()}, detail::path_key(p));
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::vector<std::tuple<std::string, ConstraintFormula, Osdd>> edges;
    for (std::size_t i = 0; i < n.edge_count(); ++i) {
      ConstraintFormula q = p & n.label(i);
      if (!satisfiable(q)) continue;
      ConstraintFormula reduced = reduce_label(n.label(i), p);
      std::string k = canonical_key(reduced);
      edges.emplace_back(std::move(k), std::move(reduced), rec(n.child(i), q));
    }
    std::stable_sort(edges.begin(), edges.end(),
                     [](const auto& a, const auto& b) { return key_less(std::get<0>(a), std::get<0>(b)); });
    std::vector<std::pair<ConstraintFormula, Osdd>> out;
    for (auto& [k, l, c] : edges) out.emplace_back(std::move(l), std::move(c));
    Osdd r = detail::make_node(n, std::move(out));
    memo.emplace(key, r);
    return r;
  };
  return rec(renamed, {});
}

namespace detail {

/// Searches the subtree below an edge for an atom over `scope` that some
/// deeper label implies but the edge's path formula leaves open.
inline std::optional<AtomicConstraint> find_implicit(const Osdd& start, const ConstraintFormula& base,
                                                     const std::vector<Var>& scope) {
  const ConstraintGraph base_graph = close(base);
  auto in_scope = [&](const Term& t) { return !is_var(t) || contains_var(scope, as_var(t)); };
  std::unordered_set<std::string> visited;
  std::optional<AtomicConstraint> found;
  MentionIndex mentions;
  std::function<void(const Osdd&, const ConstraintFormula&)> rec = [&](const Osdd& n,
                                                                      const ConstraintFormula& above) {
    if (found || n.is_leaf()) return;
    std::set<Var> rel = mentions(n);
    const ConstraintFormula q = project(above, rel);
    if (!visited.insert(memo_key({n.id()}, path_key(q))).second) return;
    for (std::size_t i = 0; i < n.edge_count() && !found; ++i) {
      ConstraintFormula q2 = q & n.label(i);
      ConstraintGraph g = close(q2);
      if (!g.satisfiable()) continue;
      for (const auto& e : g.edges()) {
        if (!in_scope(e.source) || !in_scope(e.target)) continue;
        AtomicConstraint a(as_var(e.target), e.source, e.relation);
        if (!base_graph.entails(a) && !base_graph.entails(a.negated())) {
          found = a;
          return;
        }
      }
      rec(n.child(i), q2);
    }
  };
  rec(start, base);
  return found;
}

}  // namespace detail

namespace detail {

inline Osdd to_proper_raw(const Osdd& d) {
  std::unordered_map<std::string, Osdd> memo;
  MentionIndex mentions;
  std::function<Osdd(const Osdd&, const ConstraintFormula&, const std::vector<Var>&)> rec =
      [&](const Osdd& n, const ConstraintFormula& path, const std::vector<Var>& above) -> Osdd {
    if (n.is_leaf()) return n;
    std::vector<Var> scope = above;
    scope.push_back(n.out());
    std::set<Var> rel = mentions(n);
    const ConstraintFormula p = project(path, rel);
    const std::string key = memo_key({n.id()}, path_key(p) + '\x1f' + vars_key(restrict_to(scope, rel)));
    if (auto it = memo.find(key); it != memo.end()) return it->second;

    std::vector<std::pair<ConstraintFormula, Osdd>> work;
    for (std::size_t i = 0; i < n.edge_count(); ++i) work.emplace_back(n.label(i), n.child(i));
    std::vector<std::pair<ConstraintFormula, Osdd>> done;
    while (!work.empty()) {
      auto [label, child] = work.back();
      work.pop_back();
      ConstraintFormula q = p & label;
      if (!satisfiable(q)) continue;
      if (auto beta = detail::find_implicit(child, q, scope)) {
        work.emplace_back(label.with(beta->negated()), child);
        work.emplace_back(label.with(*beta), child);
        continue;
      }
      done.emplace_back(label, rec(child, q, scope));
    }
    Osdd r = detail::make_node(n, std::move(done));
    memo.emplace(key, r);
    return r;
  };
  return rec(d, {}, {});
}

}  // namespace detail

/// Rewrites a diagram so that every atom implied by a label over the
/// output variables of its path appears explicitly on the path, inserting
/// each at the shallowest node that binds all its variables. The result is
/// canonical.
inline Osdd to_proper(const Osdd& d) { return canonicalize(detail::to_proper_raw(d)); }

namespace detail {

inline Osdd oplus_raw(const Osdd& a, const Osdd& b, BoolOp op) {
  std::unordered_map<std::string, Osdd> memo;
  MentionIndex mentions;
  std::function<Osdd(const Osdd&, const Osdd&, const ConstraintFormula&)> rec =
      [&](const Osdd& x, const Osdd& y, const ConstraintFormula& path) -> Osdd {
    if (op == BoolOp::conj) {
      if (x.is_zero() || y.is_zero()) return Osdd::zero();
      if (x.is_one()) return y;
      if (y.is_one()) return x;
    } else {
      if (x.is_one() || y.is_one()) return Osdd::one();
      if (x.is_zero()) return y;
      if (y.is_zero()) return x;
    }
    std::set<Var> rel = mentions(x);
    rel.insert(mentions(y).begin(), mentions(y).end());
    const ConstraintFormula p = project(path, rel);
    const std::string key = memo_key({x.id(), y.id()}, path_key(p));
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::vector<std::pair<ConstraintFormula, Osdd>> edges;
    Osdd r;
    if (x.si() < y.si() || y.si() < x.si()) {
      const Osdd& top = x.si() < y.si() ? x : y;
      const Osdd& other = x.si() < y.si() ? y : x;
      for (std::size_t i = 0; i < top.edge_count(); ++i) {
        ConstraintFormula q = p & top.label(i);
        if (!satisfiable(q)) continue;
        edges.emplace_back(top.label(i), rec(top.child(i), other, q));
      }
      r = make_node(top, std::move(edges));
    } else {
      Osdd y2 = y.out() == x.out() ? y : rename_vars(y, {{y.out(), x.out()}});
      for (std::size_t i = 0; i < x.edge_count(); ++i) {
        for (std::size_t j = 0; j < y2.edge_count(); ++j) {
          ConstraintFormula label = x.label(i) & y2.label(j);
          ConstraintFormula q = p & label;
          if (!satisfiable(q)) continue;
          edges.emplace_back(std::move(label), rec(x.child(i), y2.child(j), q));
        }
      }
      r = make_node(x, std::move(edges));
    }
    memo.emplace(key, r);
    return r;
  };
  return rec(a, b, {});
}

}  // namespace detail

/// Conjunction or disjunction of two proper diagrams; the result is proper
/// and canonical.
inline Osdd oplus(const Osdd& a, const Osdd& b, BoolOp op) {
  return to_proper(detail::oplus_raw(a, b, op));
}

inline Osdd conj(const Osdd& a, const Osdd& b) { return oplus(a, b, BoolOp::conj); }
inline Osdd disj(const Osdd& a, const Osdd& b) { return oplus(a, b, BoolOp::disj); }

/// Adds `beta` at the shallowest node on each path whose output variables
/// cover its variables: labels there become `label /\ beta` and a
/// `!beta : 0` edge is added. Throws when a path reaches a 1-leaf without
/// binding all of beta's variables.
inline Osdd apply_constraint(const Osdd& d, const AtomicConstraint& beta) {
  const auto bvars = ConstraintFormula{beta}.vars();
  std::unordered_map<std::string, Osdd> memo;
  detail::MentionIndex mentions;
  std::function<Osdd(const Osdd&, const ConstraintFormula&, const std::vector<Var>&)> rec =
      [&](const Osdd& n, const ConstraintFormula& path, const std::vector<Var>& above) -> Osdd {
    if (n.is_zero()) return n;
    if (n.is_one())
      throw Error("constraint " + beta.str() + " mentions a variable the diagram does not bind");
    std::vector<Var> scope = above;
    scope.push_back(n.out());
    std::set<Var> rel = mentions(n);
    rel.insert(bvars.begin(), bvars.end());
    const ConstraintFormula p = detail::project(path, rel);
    const std::string key =
        detail::memo_key({n.id()}, detail::path_key(p) + '\x1f' + detail::vars_key(detail::restrict_to(scope, rel)));
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::vector<std::pair<ConstraintFormula, Osdd>> edges;
    const bool here = std::all_of(bvars.begin(), bvars.end(),
                                  [&](const Var& v) { return detail::contains_var(scope, v); });
    for (std::size_t i = 0; i < n.edge_count(); ++i) {
      ConstraintFormula label = here ? n.label(i).with(beta) : n.label(i);
      ConstraintFormula q = p & label;
      if (!satisfiable(q)) continue;
      edges.emplace_back(label, here ? n.child(i) : rec(n.child(i), q, scope));
    }
    if (here) {
      ConstraintFormula neg{beta.negated()};
      if (satisfiable(p & neg)) edges.emplace_back(neg, Osdd::zero());
    }
    Osdd r = detail::make_node(n, std::move(edges));
    memo.emplace(key, r);
    return r;
  };
  return to_proper(rec(d, {}, {}));
}

inline Osdd apply_constraints(Osdd d, const ConstraintFormula& f) {
  for (const auto& a : f.atoms()) d = apply_constraint(d, a);
  return d;
}

/// A path of nodes with unconstrained edges ending in `tail`; nodes are
/// sorted by switch instance.
inline Osdd chain(std::vector<std::pair<SwitchInstance, Var>> nodes, Osdd tail = Osdd::one()) {
  std::sort(nodes.begin(), nodes.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  for (auto it = nodes.rbegin(); it != nodes.rend(); ++it) tail = Osdd::node(it->first, it->second, {{{}, tail}});
  return tail;
}

// ---------------------------------------------------------------------------
// Validation

enum class Condition { ordering, mutual_exclusion, completeness, urgency, explicit_constraints };

inline const char* condition_name(Condition c) {
  switch (c) {
    case Condition::ordering: return "ordering";
    case Condition::mutual_exclusion: return "mutual-exclusion";
    case Condition::completeness: return "completeness";
    case Condition::urgency: return "urgency";
    case Condition::explicit_constraints: return "explicit-constraints";
  }
  return "?";
}

struct Violation {
  Condition condition;
  std::string path;  // edge indices from the root, e.g. "/0/1"; "/" is the root
  std::string detail;
};

namespace detail {

inline bool complement_nonempty(const ConstraintFormula& p, const std::vector<ConstraintFormula>& labels,
                                std::size_t i) {
  if (i == labels.size()) return satisfiable(p);
  if (labels[i].empty()) return false;
  for (const auto& m : negate(labels[i])) {
    ConstraintFormula q = p & m;
    if (satisfiable(q) && complement_nonempty(q, labels, i + 1)) return true;
  }
  return false;
}

}  // namespace detail

/// Checks the five well-formedness conditions; empty result iff proper.
/// At most one report per (condition, node).
inline std::vector<Violation> validate(const Osdd& d) {
  std::vector<Violation> out;
  std::unordered_set<std::string> visited;
  std::function<void(const Osdd&, const ConstraintFormula&, const std::vector<Var>&, const std::string&)> rec =
      [&](const Osdd& n, const ConstraintFormula& p, const std::vector<Var>& above, const std::string& path) {
        if (n.is_leaf()) return;
        std::vector<Var> scope = above;
        scope.push_back(n.out());
        if (!visited.insert(detail::memo_key({n.id()}, detail::path_key(p) + '\x1f' + detail::vars_key(scope)))
                 .second)
          return;
        const std::string here = path.empty() ? "/" : path;
        auto report = [&](Condition c, std::string detail) {
          for (const auto& v : out)
            if (v.condition == c && v.path == here) return;
          out.push_back({c, here, std::move(detail)});
        };
        if (detail::contains_var(above, n.out())) report(Condition::ordering, "output variable bound twice");
        std::vector<ConstraintFormula> labels;
        std::string prev_key;
        for (std::size_t i = 0; i < n.edge_count(); ++i) {
          const auto& label = n.label(i);
          labels.push_back(label);
          Osdd c = n.child(i);
          if (!c.is_leaf() && !(n.si() < c.si()))
            report(Condition::ordering, "child (" + c.si().str() + ") does not follow (" + n.si().str() + ")");
          std::string k = canonical_key(label);
          if (i > 0 && key_less(k, prev_key)) report(Condition::ordering, "edges not in canonical order");
          prev_key = k;
          for (std::size_t j = 0; j < i; ++j)
            if (satisfiable(p & labels[j] & label))
              report(Condition::mutual_exclusion, "edges " + std::to_string(j) + " and " + std::to_string(i));
          if (!label.empty()) {
            bool within = true, mentions_out = false;
            for (const auto& v : label.vars()) {
              within = within && detail::contains_var(scope, v);
              mentions_out = mentions_out || v == n.out();
            }
            if (!within || !mentions_out)
              report(Condition::urgency, "edge " + std::to_string(i) + " label " + label.str());
          }
          const ConstraintFormula q = p & label;
          const ConstraintGraph g = close(q);
          if (!satisfiable(g)) {
            report(Condition::explicit_constraints, "edge " + std::to_string(i) + " is unsatisfiable on its path");
            continue;
          }
          const ConstraintGraph pg = close(p);
          for (const auto& e : g.edges()) {
            auto in_prefix = [&](const Term& t) {
              return !is_var(t) || (detail::contains_var(above, as_var(t)));
            };
            if (!in_prefix(e.source) || !in_prefix(e.target)) continue;
            AtomicConstraint a(as_var(e.target), e.source, e.relation);
            if (!pg.entails(a)) {
              report(Condition::explicit_constraints, "edge " + std::to_string(i) + " implies " + a.str());
              break;
            }
          }
          rec(c, q, scope, path + "/" + std::to_string(i));
        }
        if (detail::complement_nonempty(p, labels, 0))
          report(Condition::completeness, "some value of " + n.out().name() + " has no edge");
      };
  rec(d, {}, {}, "");
  return out;
}

}  // namespace osdd
