#pragma once

// Reference answers that do not touch the diagram code: probabilities by
// enumerating possible worlds through the concrete evaluator, the birthday
// closed form, and a generator of small random programs.

#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "osdd/engine.hpp"
#include "osdd/inference.hpp"

namespace osdd {

using World = std::map<SwitchInstance, GroundTerm>;

struct OracleOptions {
  std::uint64_t max_worlds = 10'000'000;
  MachineOptions machine{};
};

namespace detail {

struct NeedInstance {
  SwitchInstance si;
};

/// Sums P(world) over the partial worlds in which `query` holds. Worlds are
/// grown lazily: a run that reaches an unassigned instance is restarted once
/// per value of that instance.
inline Rational lazy_world_sum(const Program& p, const Ast& query, const OracleOptions& opt) {
  ConcreteEvaluator ev(p, opt.machine);
  std::uint64_t leaves = 0;
  World w;
  const WorldFn lookup = [&w](const SwitchInstance& si, const SwitchDecl&) -> GroundTerm {
    auto it = w.find(si);
    if (it == w.end()) throw NeedInstance{si};
    return it->second;
  };
  std::function<Rational()> rec = [&]() -> Rational {
    std::optional<SwitchInstance> need;
    bool holds = false;
    try {
      holds = ev.holds(query, lookup);
    } catch (const NeedInstance& n) {
      need = n.si;
    }
    if (!need) {
      if (++leaves > opt.max_worlds) throw Error("brute force exceeded " + std::to_string(opt.max_worlds) + " worlds");
      return holds ? Rational(1) : Rational(0);
    }
    const SwitchDecl& d = p.switch_for(need->sw);
    Rational total(0);
    for (const auto& v : d.domain->values()) {
      const Rational pv = d.prob(v);
      if (pv == 0) continue;
      w[*need] = v;
      total += pv * rec();
    }
    w.erase(*need);
    return total;
  };
  return rec();
}

}  // namespace detail

/// P(query), or P(query | evidence) when evidence is given. Throws when the
/// evidence has probability 0.
inline Rational brute_force_prob(const Program& p, const Ast& query, const std::optional<Ast>& evidence = {},
                                 const OracleOptions& opt = {}) {
  if (!evidence) return detail::lazy_world_sum(p, query, opt);
  const Rational pe = detail::lazy_world_sum(p, *evidence, opt);
  if (pe == 0) throw Error("evidence " + evidence->str() + " has probability 0");
  return detail::lazy_world_sum(p, Ast::compound(",", {*evidence, query}), opt) / pe;
}

inline Rational brute_force_prob(const Program& p, const std::string& query,
                                 const std::optional<std::string>& evidence = {}, const OracleOptions& opt = {}) {
  std::optional<Ast> e;
  if (evidence) e = parse_query(*evidence);
  return brute_force_prob(p, parse_query(query), e, opt);
}

/// Every total assignment of the given instances with its probability.
inline std::vector<std::pair<World, Rational>> enumerate_worlds(const std::vector<SwitchInstance>& instances,
                                                                const DeclFn& decl) {
  std::vector<std::pair<World, Rational>> out{{World{}, Rational(1)}};
  for (const auto& si : instances) {
    const SwitchDecl& d = decl(si);
    std::vector<std::pair<World, Rational>> next;
    for (const auto& [w, pw] : out) {
      for (const auto& v : d.domain->values()) {
        World w2 = w;
        w2.emplace(si, v);
        next.emplace_back(std::move(w2), pw * d.prob(v));
      }
    }
    out = std::move(next);
  }
  return out;
}

/// Probability that some two of n people share a birthday among `days`.
inline Rational closed_form_birthday(std::int64_t n, std::int64_t days = 365) {
  Rational distinct(1);
  for (std::int64_t i = 0; i < n; ++i) distinct *= Rational(days - i, days);
  return 1 - distinct;
}

struct GenLimits {
  int max_instances = 5;
  int max_domain = 4;
  int max_depth = 3;
  int max_clauses = 3;
  int max_goals = 3;
};

/// A small random program with a 0-ary query predicate `q`. Comparisons only
/// relate outcomes of the same switch (or an outcome and a constant), each
/// over variables already bound in the clause.
inline std::string gen_random_program(std::uint64_t seed, const GenLimits& lim = {}) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  auto chance = [&](int percent) { return pick(1, 100) <= percent; };

  const int nsw = pick(1, 2);
  std::vector<int> dom(static_cast<std::size_t>(nsw));
  std::string out;
  for (int s = 0; s < nsw; ++s) {
    dom[static_cast<std::size_t>(s)] = pick(2, lim.max_domain);
    out += "values(s" + std::to_string(s) + ", [";
    for (int v = 0; v < dom[static_cast<std::size_t>(s)]; ++v) out += (v ? ", v" : "v") + std::to_string(v);
    out += "]).\n";
    if (chance(40)) {
      out += "set_sw(s" + std::to_string(s) + ", uniform).\n";
      continue;
    }
    std::vector<int> w;
    int total = 0;
    for (int v = 0; v < dom[static_cast<std::size_t>(s)]; ++v) total += w.emplace_back(pick(1, 4));
    out += "set_sw(s" + std::to_string(s) + ", [";
    for (std::size_t v = 0; v < w.size(); ++v)
      out += (v ? ", " : "") + std::to_string(w[v]) + "/" + std::to_string(total);
    out += "]).\n";
  }

  std::vector<std::pair<int, int>> pool;  // (switch, instance)
  const int ninst = pick(1, lim.max_instances);
  while (static_cast<int>(pool.size()) < ninst) {
    std::pair<int, int> c{pick(0, nsw - 1), pick(1, lim.max_instances)};
    if (std::find(pool.begin(), pool.end(), c) == pool.end()) pool.push_back(c);
  }

  // Predicate p<d> at depth d takes one outcome of switch param[d], or none.
  const int depth = pick(1, lim.max_depth);
  std::vector<int> param(static_cast<std::size_t>(depth) + 1, -1);
  for (int d = 1; d <= depth; ++d)
    if (chance(60)) param[static_cast<std::size_t>(d)] = pick(0, nsw - 1);

  struct Bound {
    std::string name;
    int sw;
  };
  for (int d = 0; d <= depth; ++d) {
    const std::string pred = d == 0 ? "q" : "p" + std::to_string(d);
    const int par = param[static_cast<std::size_t>(d)];
    const int nclauses = pick(1, lim.max_clauses);
    for (int c = 0; c < nclauses; ++c) {
      std::vector<Bound> bound;
      std::string head = pred;
      if (par >= 0) {
        head += "(A)";
        bound.push_back({"A", par});
      }
      int fresh = 0;
      std::vector<std::string> goals;
      auto constant = [&](int sw) { return "v" + std::to_string(pick(0, dom[static_cast<std::size_t>(sw)] - 1)); };
      auto comparison = [&]() -> std::optional<std::string> {
        if (bound.empty()) return std::nullopt;
        const Bound& x = bound[static_cast<std::size_t>(pick(0, static_cast<int>(bound.size()) - 1))];
        const std::string op = chance(50) ? " = " : " \\= ";
        std::vector<const Bound*> same;
        for (const auto& b : bound)
          if (b.sw == x.sw && b.name != x.name) same.push_back(&b);
        if (!same.empty() && chance(50))
          return x.name + op + same[static_cast<std::size_t>(pick(0, static_cast<int>(same.size()) - 1))]->name;
        return x.name + op + constant(x.sw);
      };
      const int ngoals = pick(1, lim.max_goals);
      for (int g = 0; g < ngoals; ++g) {
        const int kind = pick(0, 9);
        if (kind <= 2 || bound.empty()) {
          const auto& [sw, k] = pool[static_cast<std::size_t>(pick(0, static_cast<int>(pool.size()) - 1))];
          std::vector<const Bound*> same;
          for (const auto& b : bound)
            if (b.sw == sw) same.push_back(&b);
          if (!same.empty() && chance(20)) {
            goals.push_back("msw(s" + std::to_string(sw) + ", " + std::to_string(k) + ", " +
                            same[static_cast<std::size_t>(pick(0, static_cast<int>(same.size()) - 1))]->name + ")");
          } else if (chance(15)) {
            goals.push_back("msw(s" + std::to_string(sw) + ", " + std::to_string(k) + ", " + constant(sw) + ")");
          } else {
            std::string v = "X" + std::to_string(fresh++);
            goals.push_back("msw(s" + std::to_string(sw) + ", " + std::to_string(k) + ", " + v + ")");
            bound.push_back({v, sw});
          }
        } else if (kind <= 5) {
          goals.push_back(*comparison());
        } else if (kind <= 8 && d < depth) {
          const int callee_par = param[static_cast<std::size_t>(d) + 1];
          const std::string callee = "p" + std::to_string(d + 1);
          if (callee_par < 0) {
            goals.push_back(callee);
          } else {
            std::vector<const Bound*> fit;
            for (const auto& b : bound)
              if (b.sw == callee_par) fit.push_back(&b);
            if (fit.empty()) continue;
            goals.push_back(callee + "(" + fit[static_cast<std::size_t>(pick(0, static_cast<int>(fit.size()) - 1))]->name +
                            ")");
          }
        } else {
          const std::string cond = *comparison();
          const std::string then = *comparison();
          const std::string otherwise = chance(50) ? "true" : *comparison();
          goals.push_back(chance(25) ? "\\+ " + cond : "( " + cond + " -> " + then + " ; " + otherwise + " )");
        }
      }
      if (!bound.empty() && chance(60)) goals.push_back(*comparison());
      if (goals.empty()) goals.push_back("true");
      out += head + " :- ";
      for (std::size_t g = 0; g < goals.size(); ++g) out += (g ? ", " : "") + goals[g];
      out += ".\n";
    }
  }
  return out;
}

}  // namespace osdd
