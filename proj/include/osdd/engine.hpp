#pragma once

// Query evaluation: the symbolic evaluator that builds an OSDD for a ground
// query, and the concrete evaluator that runs a program in one world.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "osdd/algebra.hpp"
#include "osdd/machine.hpp"

namespace osdd {

inline Ast parse_query(const std::string& text) {
  std::string src = text;
  while (!src.empty() && std::isspace(static_cast<unsigned char>(src.back()))) src.pop_back();
  if (src.empty()) throw Error("empty query");
  if (src.back() != '.') src += ".";
  ProgramAst q = parse_program_text(":- " + src);
  if (q.directives.size() != 1 || !q.clauses.empty()) throw Error("query must be a single goal");
  return q.directives.front();
}

inline bool ast_ground(const Ast& t) {
  if (t.kind == Ast::Kind::var) return false;
  for (const auto& a : t.args)
    if (!ast_ground(a)) return false;
  return true;
}

struct EngineOptions {
  bool tabling = true;
  std::uint32_t max_depth = 200000;
  double timeout_s = 0;  // 0: none
};

struct EvalStats {
  std::size_t derivations = 0;
  std::size_t tables = 0;
  std::size_t table_hits = 0;
  std::uint64_t steps = 0;
};

/// Builds OSDDs. Switch instances map to one variable each for the lifetime
/// of the engine, so repeated queries produce identical diagrams.
class Engine : public Machine {
 public:
  explicit Engine(const Program& program, EngineOptions options = {})
      : Machine(program, {options.max_depth, std::nullopt}), eopts_(options) {}

  Osdd evaluate(const std::string& query) { return evaluate(parse_query(query)); }

  Osdd evaluate(const Ast& query) {
    if (!query.is_callable()) throw Error("query is not callable: " + query.str());
    if (!ast_ground(query)) throw Error("query must be ground: " + query.str());
    if (eopts_.timeout_s > 0)
      options().deadline = std::chrono::steady_clock::now() +
                           std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                               std::chrono::duration<double>(eopts_.timeout_s));
    reset();
    tables_.clear();
    log_.clear();
    stats_ = {};
    O_ = Osdd::one();
    std::unordered_map<std::string, Ref> vars;
    Ref g = build(query, vars);
    Osdd result = Osdd::zero();
    run(goal(g), [&] {
      result = disj(result, O_);
      ++stats_.derivations;
      return true;
    });
    stats_.tables = tables_.size();
    stats_.steps = steps();
    reset();
    tables_.clear();
    return result;
  }

  const EvalStats& stats() const { return stats_; }

  /// The variable standing for `si`, created on first use.
  Var var_for(const SwitchInstance& si) {
    auto it = registry_.find(si);
    if (it != registry_.end()) return it->second;
    const SwitchDecl& decl = program().switch_for(si.sw);
    Var v = Var::fresh("X" + std::to_string(registry_.size() + 1), decl.domain);
    registry_.emplace(si, v);
    by_index_.emplace(v.index(), si);
    return v;
  }
  const std::map<SwitchInstance, Var>& registry() const { return registry_; }

  /// Uses `other`'s variables for the instances it has seen, so diagrams
  /// from the two engines intern to the same nodes.
  void share_variables(const Engine& other) {
    for (const auto& [si, v] : other.registry_) {
      registry_.insert_or_assign(si, v);
      by_index_.insert_or_assign(v.index(), si);
    }
  }
  const SwitchInstance& instance_of(const Var& v) const {
    auto it = by_index_.find(v.index());
    if (it == by_index_.end()) throw Error("variable " + v.name() + " is not a switch output");
    return it->second;
  }

  /// Switch declarations for every instance a diagram mentions.
  std::map<SwitchInstance, const SwitchDecl*> declarations(const Osdd& d) const {
    std::map<SwitchInstance, const SwitchDecl*> out;
    for_each_node(d, [&](const Osdd& n) {
      if (!n.is_leaf()) out.emplace(n.si(), &program().switch_for(n.si().sw));
    });
    return out;
  }

 protected:
  bool on_msw(Ref sw, Ref inst, Ref out) override {
    auto s = constant_of(sw);
    auto k = constant_of(inst);
    if (!s) throw Error("msw switch must be ground, got " + show(sw));
    if (!k) throw Error("msw instance must be ground, got " + show(inst));
    const SwitchInstance si{*s, *k};
    const Var v = var_for(si);
    ConstraintFormula gamma;
    const Cell& c = cell(out);
    if (c.tag == Tag::ref) {
      if (!unify(out, make_rvar(slot_of(v)))) return false;
    } else if (c.tag == Tag::rvar) {
      const Var& w = rvars_[static_cast<std::size_t>(c.val)];
      if (!(w == v)) {
        if (!same_type(w.domain(), v.domain())) return false;
        gamma = ConstraintFormula{AtomicConstraint::eq(v, w)};
      }
    } else {
      auto g = constant_of(out);
      if (!g || !v.domain()->contains(*g)) return false;
      gamma = ConstraintFormula{AtomicConstraint::eq(v, *g)};
    }
    // The builtin's node [gamma : 1, each member of negate(gamma) : 0]
    // needs gamma's other variables above this instance; otherwise the
    // constraint is applied where its variables are bound.
    bool above = true;
    for (const auto& x : gamma.vars())
      if (!(x == v) && !(instance_of(x) < si)) above = false;
    if (above) {
      std::vector<std::pair<ConstraintFormula, Osdd>> edges{{gamma, Osdd::one()}};
      if (!gamma.atoms().empty())
        for (auto& m : negate(gamma)) edges.emplace_back(std::move(m), Osdd::zero());
      O_ = conj(O_, Osdd::node(si, v, std::move(edges)));
    } else {
      O_ = apply_constraints(conj(O_, Osdd::node(si, v, {{{}, Osdd::one()}})), gamma);
    }
    for (const auto& a : gamma.atoms()) log_.push_back(a);
    return !O_.is_zero();
  }

  bool relate(Ref rv, Ref other, Relation rel) override {
    const Var& v = rvars_[static_cast<std::size_t>(cell(rv).val)];
    const Cell& c = cell(other);
    std::optional<AtomicConstraint> atom;
    if (c.tag == Tag::rvar) {
      const Var& w = rvars_[static_cast<std::size_t>(c.val)];
      if (!same_type(v.domain(), w.domain())) return rel == Relation::neq;
      atom = AtomicConstraint(v, w, rel);
    } else if (c.tag == Tag::str) {
      return rel == Relation::neq;
    } else {
      auto g = constant_of(other);
      if (!g || !v.domain()->contains(*g)) return rel == Relation::neq;
      atom = AtomicConstraint(v, *g, rel);
    }
    return emit(*atom);
  }

  std::string rvar_name(std::size_t slot) const override { return rvars_.at(slot).name(); }

  std::shared_ptr<const void> ext_save() override {
    return std::make_shared<const Ext>(Ext{O_, log_.size()});
  }
  void ext_restore(const std::shared_ptr<const void>& p) override {
    const auto& e = *static_cast<const Ext*>(p.get());
    O_ = e.O;
    log_.erase(log_.begin() + static_cast<std::ptrdiff_t>(e.log_size), log_.end());
  }

  std::size_t log_mark() const override { return log_.size(); }

  std::vector<std::function<bool()>> negation_branches(std::size_t mark) override {
    std::vector<std::function<bool()>> out;
    if (log_.size() <= mark) return out;
    ConstraintFormula gamma(std::vector<AtomicConstraint>(log_.begin() + static_cast<std::ptrdiff_t>(mark), log_.end()));
    for (auto& m : negate(gamma)) {
      out.push_back([this, m] {
        for (const auto& a : m.atoms())
          if (!emit(a)) return false;
        return true;
      });
    }
    return out;
  }

  bool call_user(Ref g, const vm::GoalNode& node, Goals& cur) override {
    if (!eopts_.tabling || !pending_.empty() || is_prelude(g)) return resolve(g, node, cur);
    std::string key = freeze(g).key();
    const std::uint64_t oid = O_.id();
    key.append(reinterpret_cast<const char*>(&oid), sizeof oid);
    auto it = tables_.find(key);
    if (it != tables_.end() && !it->second->complete) return resolve(g, node, cur);
    std::shared_ptr<Table> table;
    if (it == tables_.end()) {
      table = std::make_shared<Table>();
      tables_.emplace(key, table);
      const Snapshot before = snapshot();
      run(vm::push(g, node.depth, nullptr, true), [&] {
        std::vector<Ref> parts{g};
        for (auto [a, b] : pending_) {
          parts.push_back(a);
          parts.push_back(b);
        }
        vm::Frozen f = freeze(make_compound(a_answer_, parts));
        std::string akey = f.key();
        auto [pos, fresh] = table->index.emplace(akey, table->answers.size());
        if (fresh) table->answers.push_back({std::move(f), O_});
        else table->answers[pos->second].O = disj(table->answers[pos->second].O, O_);
        return true;
      });
      restore(before);
      table->complete = true;
    } else {
      table = it->second;
      ++stats_.table_hits;
    }
    if (table->answers.empty()) return false;
    Goals rest = node.next;
    std::size_t i = 0;
    push_choice([this, table, g, rest, i](Goals& out) mutable {
      const Answer& ans = table->answers[i++];
      const Next done = i >= table->answers.size() ? Next::exhausted : Next::retry;
      Ref t = thaw(ans.frozen);
      if (!unify(arg(t, 0), g)) return done;
      pending_.clear();
      for (std::uint32_t j = 1; j + 1 < arity_of(t); j += 2) pending_.emplace_back(arg(t, j), arg(t, j + 1));
      O_ = ans.O;
      out = rest;
      return i >= table->answers.size() ? Next::last : Next::produced;
    });
    return false;
  }

 private:
  struct Ext {
    Osdd O;
    std::size_t log_size;
  };
  struct Answer {
    vm::Frozen frozen;
    Osdd O;
  };
  struct Table {
    bool complete = false;
    std::vector<Answer> answers;
    std::unordered_map<std::string, std::size_t> index;
  };

  std::size_t slot_of(const Var& v) {
    auto it = slots_.find(v.index());
    if (it != slots_.end()) return it->second;
    rvars_.push_back(v);
    slots_.emplace(v.index(), rvars_.size() - 1);
    return rvars_.size() - 1;
  }

  bool emit(const AtomicConstraint& a) {
    O_ = apply_constraint(O_, a);
    log_.push_back(a);
    return !O_.is_zero();
  }

  EngineOptions eopts_;
  Osdd O_ = Osdd::one();
  std::vector<AtomicConstraint> log_;
  std::map<SwitchInstance, Var> registry_;
  std::unordered_map<std::uint32_t, SwitchInstance> by_index_;
  std::vector<Var> rvars_;
  std::unordered_map<std::uint32_t, std::size_t> slots_;
  std::unordered_map<std::string, std::shared_ptr<Table>> tables_;
  EvalStats stats_;
};

/// Supplies the outcome of a switch instance in the current world.
using WorldFn = std::function<GroundTerm(const SwitchInstance&, const SwitchDecl&)>;

/// Runs a program with every `msw` outcome fixed by a world. Does not use
/// diagrams.
class ConcreteEvaluator : public Machine {
 public:
  explicit ConcreteEvaluator(const Program& program, MachineOptions options = {}) : Machine(program, options) {}

  /// True iff the query has a derivation in the world given by `world`.
  bool holds(const Ast& query, const WorldFn& world) {
    reset();
    world_ = &world;
    std::unordered_map<std::string, Ref> vars;
    Ref g = build(query, vars);
    const bool found = !run(goal(g), [] { return false; });
    reset();
    world_ = nullptr;
    return found;
  }

 protected:
  bool on_msw(Ref sw, Ref inst, Ref out) override {
    auto s = constant_of(sw);
    auto k = constant_of(inst);
    if (!s) throw Error("msw switch must be ground, got " + show(sw));
    if (!k) throw Error("msw instance must be ground, got " + show(inst));
    const SwitchInstance si{*s, *k};
    const SwitchDecl& decl = program().switch_for(si.sw);
    return unify(out, make_constant((*world_)(si, decl)));
  }

 private:
  const WorldFn* world_ = nullptr;
};

}  // namespace osdd
