#pragma once

// Resolution machine for the Prolog subset: a term heap with a trail,
// goal lists, choice points and the builtins. Random choices are delegated
// to subclasses through `on_msw` and `relate`.

#include <chrono>
#include <cstring>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "osdd/program.hpp"

namespace osdd {

class LimitError : public Error {
 public:
  using Error::Error;
};

namespace vm {

using Ref = std::uint32_t;

enum class Tag : std::uint8_t { ref, atom, integer, str, rvar };

struct Cell {
  Tag tag;
  std::uint32_t arity;  // str only
  std::int64_t val;     // ref target, atom id, integer, functor atom id, or rvar slot
};

/// A term copied off the heap in preorder. Variables are numbered by first
/// occurrence, so two variant terms freeze to equal cell sequences.
struct Frozen {
  std::vector<Cell> cells;
  std::uint32_t nvars = 0;

  std::string key() const {
    std::string k;
    k.reserve(cells.size() * 13);
    for (const auto& c : cells) {
      k.push_back(static_cast<char>(c.tag));
      k.append(reinterpret_cast<const char*>(&c.arity), sizeof c.arity);
      k.append(reinterpret_cast<const char*>(&c.val), sizeof c.val);
    }
    return k;
  }
};

class Atoms {
 public:
  std::int64_t intern(const std::string& s) {
    auto it = ids_.find(s);
    if (it != ids_.end()) return it->second;
    names_.push_back(s);
    ids_.emplace(s, static_cast<std::int64_t>(names_.size() - 1));
    return static_cast<std::int64_t>(names_.size() - 1);
  }
  const std::string& name(std::int64_t id) const { return names_.at(static_cast<std::size_t>(id)); }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::int64_t> ids_;
};

struct GoalNode;
using Goals = std::shared_ptr<const GoalNode>;

struct GoalNode {
  Ref term;
  std::uint32_t depth;
  bool untabled;  // resolve against clauses even if the predicate is tabled
  Goals next;
};

inline Goals push(Ref term, std::uint32_t depth, Goals next, bool untabled = false) {
  return std::make_shared<const GoalNode>(GoalNode{term, depth, untabled, std::move(next)});
}

}  // namespace vm

struct MachineOptions {
  std::uint32_t max_depth = 200000;
  std::optional<std::chrono::steady_clock::time_point> deadline;
};

class Machine {
 public:
  using Ref = vm::Ref;
  using Tag = vm::Tag;
  using Cell = vm::Cell;
  using Goals = vm::Goals;

  explicit Machine(const Program& program, MachineOptions options = {})
      : program_(program), options_(options) {
    a_nil_ = atoms_.intern("[]");
    a_dot_ = atoms_.intern(".");
    a_comma_ = atoms_.intern(",");
    a_semi_ = atoms_.intern(";");
    a_arrow_ = atoms_.intern("->");
    a_not_ = atoms_.intern("\\+");
    a_eq_ = atoms_.intern("=");
    a_neq_ = atoms_.intern("\\=");
    a_clause_ = atoms_.intern(":-");
    a_true_ = atoms_.intern("true");
    a_answer_ = atoms_.intern("$answer");
    a_fail_ = atoms_.intern("fail");
    for (const auto& c : program.clauses()) add_clause(c, false);
    add_prelude();
  }
  virtual ~Machine() = default;
  Machine(const Machine&) = delete;
  Machine& operator=(const Machine&) = delete;

  const Program& program() const { return program_; }
  MachineOptions& options() { return options_; }
  std::uint64_t steps() const { return steps_; }

  // ---------------------------------------------------------------- heap

  Ref deref(Ref r) const {
    for (;;) {
      const Cell& c = heap_[r];
      if (c.tag != Tag::ref || static_cast<Ref>(c.val) == r) return r;
      r = static_cast<Ref>(c.val);
    }
  }
  const Cell& cell(Ref r) const { return heap_[r]; }
  bool is_unbound(Ref r) const {
    const Cell& c = heap_[r];
    return c.tag == Tag::ref && static_cast<Ref>(c.val) == r;
  }

  Ref new_var() { return push_cell({Tag::ref, 0, static_cast<std::int64_t>(heap_.size())}); }
  Ref make_atom(std::int64_t id) { return push_cell({Tag::atom, 0, id}); }
  Ref make_atom(const std::string& name) { return make_atom(atoms_.intern(name)); }
  Ref make_int(std::int64_t v) { return push_cell({Tag::integer, 0, v}); }
  Ref make_rvar(std::size_t slot) { return push_cell({Tag::rvar, 0, static_cast<std::int64_t>(slot)}); }
  Ref make_compound(std::int64_t functor, const std::vector<Ref>& args) {
    if (args.empty()) return make_atom(functor);
    Ref s = push_cell({Tag::str, static_cast<std::uint32_t>(args.size()), functor});
    for (Ref a : args) push_cell(arg_cell(a));
    return s;
  }
  Ref make_compound(const std::string& functor, const std::vector<Ref>& args) {
    return make_compound(atoms_.intern(functor), args);
  }
  Ref arg(Ref str, std::uint32_t i) const { return deref(str + 1 + i); }

  std::int64_t functor_of(Ref r) const { return heap_[r].val; }
  std::uint32_t arity_of(Ref r) const { return heap_[r].tag == Tag::str ? heap_[r].arity : 0; }
  const std::string& atom_name(std::int64_t id) const { return atoms_.name(id); }

  /// Builds a heap term from parsed syntax; `vars` maps variable names.
  Ref build(const Ast& t, std::unordered_map<std::string, Ref>& vars) {
    switch (t.kind) {
      case Ast::Kind::var: {
        if (t.name == "_") return new_var();
        auto it = vars.find(t.name);
        if (it != vars.end()) return it->second;
        Ref v = new_var();
        vars.emplace(t.name, v);
        return v;
      }
      case Ast::Kind::integer: return make_int(t.ival);
      case Ast::Kind::decimal:
      case Ast::Kind::atom: return make_atom(t.name);
      case Ast::Kind::compound: break;
    }
    std::vector<Ref> args;
    for (const auto& a : t.args) args.push_back(build(a, vars));
    return make_compound(t.name, args);
  }

  vm::Frozen freeze(Ref r) const {
    vm::Frozen f;
    std::unordered_map<Ref, std::uint32_t> vars;
    freeze_into(r, f, vars);
    return f;
  }

  Ref thaw(const vm::Frozen& f) {
    std::vector<Ref> vars(f.nvars, 0);
    std::vector<bool> made(f.nvars, false);
    std::size_t pos = 0;
    return thaw_at(f, pos, vars, made);
  }

  bool is_ground(Ref r) const {
    r = deref(r);
    const Cell& c = heap_[r];
    if (c.tag == Tag::ref) return false;
    if (c.tag != Tag::str) return true;
    for (std::uint32_t i = 0; i < c.arity; ++i)
      if (!is_ground(r + 1 + i)) return false;
    return true;
  }

  std::string show(Ref r) const {
    r = deref(r);
    const Cell& c = heap_[r];
    switch (c.tag) {
      case Tag::ref: return "_G" + std::to_string(r);
      case Tag::atom: return atoms_.name(c.val);
      case Tag::integer: return std::to_string(c.val);
      case Tag::rvar: return rvar_name(static_cast<std::size_t>(c.val));
      case Tag::str: break;
    }
    std::string s = atoms_.name(c.val) + "(";
    for (std::uint32_t i = 0; i < c.arity; ++i) s += (i ? "," : "") + show(r + 1 + i);
    return s + ")";
  }

  /// Converts an atomic heap term to a constant.
  std::optional<GroundTerm> constant_of(Ref r) const {
    r = deref(r);
    const Cell& c = heap_[r];
    if (c.tag == Tag::integer) return GroundTerm(c.val);
    if (c.tag == Tag::atom) return GroundTerm::atom(atoms_.name(c.val));
    if (c.tag == Tag::str && is_ground(r)) return GroundTerm::atom(show(r));
    return std::nullopt;
  }
  Ref make_constant(const GroundTerm& g) { return g.is_int() ? make_int(g.as_int()) : make_atom(g.as_atom()); }

  // ----------------------------------------------------------- unification

  bool unify(Ref a, Ref b) {
    std::vector<std::pair<Ref, Ref>> todo{{a, b}};
    while (!todo.empty()) {
      auto [x, y] = todo.back();
      todo.pop_back();
      x = deref(x);
      y = deref(y);
      if (x == y) continue;
      const Cell cx = heap_[x];
      const Cell cy = heap_[y];
      if (cx.tag == Tag::ref) {
        bind(x, y);
        continue;
      }
      if (cy.tag == Tag::ref) {
        bind(y, x);
        continue;
      }
      if (cx.tag == Tag::rvar || cy.tag == Tag::rvar) {
        if (cx.tag == Tag::rvar && cy.tag == Tag::rvar && cx.val == cy.val) continue;
        if (!(cx.tag == Tag::rvar ? relate(x, y, Relation::eq) : relate(y, x, Relation::eq))) return false;
        continue;
      }
      if (cx.tag != cy.tag || cx.val != cy.val || cx.arity != cy.arity) return false;
      if (cx.tag == Tag::str)
        for (std::uint32_t i = 0; i < cx.arity; ++i) todo.emplace_back(x + 1 + i, y + 1 + i);
    }
    return true;
  }

  /// Structural identity (`==`).
  bool identical(Ref a, Ref b) const {
    a = deref(a);
    b = deref(b);
    if (a == b) return true;
    const Cell& ca = heap_[a];
    const Cell& cb = heap_[b];
    if (ca.tag != cb.tag || ca.val != cb.val || ca.arity != cb.arity || ca.tag == Tag::ref) return false;
    if (ca.tag != Tag::str) return true;
    for (std::uint32_t i = 0; i < ca.arity; ++i)
      if (!identical(a + 1 + i, b + 1 + i)) return false;
    return true;
  }

  // ------------------------------------------------------------- solving

  /// Runs `goals` depth-first, calling `on_solution` at every success.
  /// Returns false when `on_solution` asked to stop; bindings of that
  /// solution are then kept.
  bool run(Goals goals, const std::function<bool()>& on_solution) {
    const std::size_t base = cps_.size();
    Goals cur = std::move(goals);
    for (;;) {
      bool ok;
      if (!cur) {
        if (!on_solution()) {
          cps_.resize(base);
          return false;
        }
        ok = false;
      } else {
        ok = step(cur);
      }
      if (ok) continue;
      if (!backtrack(base, cur)) return true;
    }
  }

  Goals goal(Ref term, std::uint32_t depth = 0, Goals next = nullptr) { return vm::push(term, depth, std::move(next)); }

 protected:
  enum class Next { produced, last, retry, exhausted };

  struct ChoicePoint {
    std::size_t trail_mark;
    std::size_t heap_mark;
    std::vector<std::pair<Ref, Ref>> pending;
    std::shared_ptr<const void> ext;
    std::function<Next(Goals&)> next;
  };

  struct Snapshot {
    std::size_t trail_mark;
    std::size_t heap_mark;
    std::vector<std::pair<Ref, Ref>> pending;
    std::shared_ptr<const void> ext;
  };

  Snapshot snapshot() { return {trail_.size(), heap_.size(), pending_, ext_save()}; }
  void restore(const Snapshot& s) { restore_to(s.trail_mark, s.heap_mark, s.pending, s.ext); }

  void push_choice(std::function<Next(Goals&)> next) {
    cps_.push_back(std::make_unique<ChoicePoint>(
        ChoicePoint{trail_.size(), heap_.size(), pending_, ext_save(), std::move(next)}));
  }

  // Hooks for random choices.

  /// `msw(S, K, Y)` with dereferenced arguments; false fails the goal.
  virtual bool on_msw(Ref sw, Ref inst, Ref out) = 0;
  /// Relates a random variable to another term; false fails.
  virtual bool relate(Ref rvar, Ref other, Relation rel) {
    (void)rvar;
    (void)other;
    (void)rel;
    throw Error("random variables are not supported in this mode");
  }
  virtual std::string rvar_name(std::size_t slot) const { return "_R" + std::to_string(slot); }
  virtual std::shared_ptr<const void> ext_save() { return nullptr; }
  virtual void ext_restore(const std::shared_ptr<const void>&) {}
  /// Position in the log of constraint atoms emitted so far.
  virtual std::size_t log_mark() const { return 0; }
  /// For a condition that emitted atoms since `mark`, one action per
  /// disjoint branch of their negation; each applies its branch and
  /// reports whether the derivation survives. Empty if nothing was emitted.
  virtual std::vector<std::function<bool()>> negation_branches(std::size_t mark) {
    (void)mark;
    return {};
  }

  /// Calls a user predicate. Subclasses may table it.
  virtual bool call_user(Ref g, const vm::GoalNode& node, Goals& cur) { return resolve(g, node, cur); }

  bool resolve(Ref g, const vm::GoalNode& node, Goals& /*cur*/) {
    const auto* clauses = clauses_for(g);
    if (!clauses) {
      const std::string ind = atoms_.name(heap_[g].val) + "/" + std::to_string(arity_of(g));
      throw Error("unknown procedure " + ind);
    }
    if (node.depth >= options_.max_depth) throw LimitError("recursion depth limit exceeded");
    Goals rest = node.next;
    const std::uint32_t depth = node.depth + 1;
    std::size_t i = 0;
    push_choice([this, g, clauses, rest, depth, i](Goals& out) mutable {
      if (i >= clauses->size()) return Next::exhausted;
      const vm::Frozen& c = (*clauses)[i++];
      Ref t = thaw(c);
      const bool is_rule = heap_[t].tag == Tag::str && heap_[t].val == a_clause_ && heap_[t].arity == 2;
      Ref head = is_rule ? t + 1 : t;
      if (!unify(head, g)) return i >= clauses->size() ? Next::exhausted : Next::retry;
      out = is_rule ? vm::push(t + 2, depth, rest) : rest;
      return i >= clauses->size() ? Next::last : Next::produced;
    });
    return false;
  }

  std::vector<std::pair<Ref, Ref>> pending_;
  vm::Atoms atoms_;
  std::int64_t a_nil_, a_dot_, a_comma_, a_semi_, a_arrow_, a_not_, a_eq_, a_neq_, a_clause_, a_true_, a_answer_,
      a_fail_;

  void reset() {
    heap_.clear();
    trail_.clear();
    cps_.clear();
    pending_.clear();
  }

  bool is_prelude(Ref g) const {
    auto it = prelude_.find(pred_key(g));
    return it != prelude_.end();
  }

 private:
  static std::uint64_t pred_key(std::int64_t f, std::uint32_t arity) {
    return (static_cast<std::uint64_t>(f) << 8) | arity;
  }
  std::uint64_t pred_key(Ref g) const { return pred_key(heap_[g].val, arity_of(g)); }

  const std::vector<vm::Frozen>* clauses_for(Ref g) const {
    auto it = clauses_.find(pred_key(g));
    return it == clauses_.end() ? nullptr : &it->second;
  }

  Ref push_cell(Cell c) {
    if (heap_.size() >= std::numeric_limits<Ref>::max() - 1) throw LimitError("term heap exhausted");
    heap_.push_back(c);
    return static_cast<Ref>(heap_.size() - 1);
  }

  Cell arg_cell(Ref a) const {
    const Cell& c = heap_[a];
    if (c.tag == Tag::atom || c.tag == Tag::integer || c.tag == Tag::rvar) return c;
    return {Tag::ref, 0, static_cast<std::int64_t>(a)};
  }

  void bind(Ref var, Ref to) {
    heap_[var].val = to;
    trail_.push_back(var);
  }

  void restore_to(std::size_t trail_mark, std::size_t heap_mark, const std::vector<std::pair<Ref, Ref>>& pending,
                  const std::shared_ptr<const void>& ext) {
    while (trail_.size() > trail_mark) {
      Ref v = trail_.back();
      trail_.pop_back();
      if (v < heap_mark) heap_[v].val = v;
    }
    heap_.resize(heap_mark);
    pending_ = pending;
    ext_restore(ext);
  }

  bool backtrack(std::size_t base, Goals& cur) {
    while (cps_.size() > base) {
      ChoicePoint* cp = cps_.back().get();
      restore_to(cp->trail_mark, cp->heap_mark, cp->pending, cp->ext);
      Next r = cp->next(cur);
      switch (r) {
        case Next::produced: return true;
        case Next::last: cps_.pop_back(); return true;
        case Next::retry: continue;
        case Next::exhausted: cps_.pop_back(); continue;
      }
    }
    return false;
  }

  void freeze_into(Ref r, vm::Frozen& f, std::unordered_map<Ref, std::uint32_t>& vars) const {
    r = deref(r);
    const Cell& c = heap_[r];
    if (c.tag == Tag::ref) {
      auto [it, fresh] = vars.emplace(r, f.nvars);
      if (fresh) ++f.nvars;
      f.cells.push_back({Tag::ref, 0, it->second});
      return;
    }
    f.cells.push_back(c);
    if (c.tag == Tag::str)
      for (std::uint32_t i = 0; i < c.arity; ++i) freeze_into(r + 1 + i, f, vars);
  }

  Ref thaw_at(const vm::Frozen& f, std::size_t& pos, std::vector<Ref>& vars, std::vector<bool>& made) {
    const Cell c = f.cells[pos++];
    switch (c.tag) {
      case Tag::ref: {
        auto i = static_cast<std::size_t>(c.val);
        if (!made[i]) {
          vars[i] = new_var();
          made[i] = true;
        }
        return vars[i];
      }
      case Tag::str: {
        std::vector<Ref> args(c.arity);
        for (std::uint32_t i = 0; i < c.arity; ++i) args[i] = thaw_at(f, pos, vars, made);
        return make_compound(c.val, args);
      }
      default: return push_cell(c);
    }
  }

  void add_clause(const ClauseAst& c, bool prelude) {
    std::unordered_map<std::string, Ref> vars;
    Ref h = build(c.head, vars);
    Ref t = c.body.is("true", 0) ? h : make_compound(a_clause_, {h, build(c.body, vars)});
    const auto key = pred_key(h);
    clauses_[key].push_back(freeze(t));
    if (prelude) prelude_.insert({key, true});
    heap_.clear();
  }

  void add_prelude() {
    static const char* text = R"(
      append([], L, L).
      append([H|T], L, [H|R]) :- append(T, L, R).
      member(X, [X|_]).
      member(X, [_|T]) :- member(X, T).
      length([], 0).
      length([_|T], N) :- length(T, M), N is M + 1.
      reverse(L, R) :- reverse_(L, [], R).
      reverse_([], A, A).
      reverse_([H|T], A, R) :- reverse_(T, [H|A], R).
    )";
    for (const auto& c : parse_program_text(text).clauses) {
      std::unordered_map<std::string, Ref> vars;
      Ref h = build(c.head, vars);
      const auto key = pred_key(h);
      heap_.clear();
      if (clauses_.count(key) && !prelude_.count(key)) continue;
      add_clause(c, true);
    }
  }

  // ------------------------------------------------------------ stepping

  bool step(Goals& cur) {
    if ((++steps_ & 0x3ff) == 0 && options_.deadline && std::chrono::steady_clock::now() > *options_.deadline)
      throw LimitError("time limit exceeded");
    if (!pending_.empty()) {
      // Disequalities whose sides became bound are re-posted as goals.
      std::vector<std::pair<Ref, Ref>> keep;
      for (auto [a, b] : pending_) {
        Ref x = deref(a), y = deref(b);
        if (x == y) return false;
        if (is_unbound(x) || is_unbound(y)) keep.emplace_back(x, y);
        else cur = vm::push(make_compound(a_neq_, {x, y}), cur->depth, cur);
      }
      pending_ = std::move(keep);
    }
    const vm::GoalNode node = *cur;
    cur = node.next;
    Ref g = deref(node.term);
    const Cell c = heap_[g];
    if (c.tag == Tag::ref) throw Error("goal is an unbound variable");
    if (c.tag == Tag::integer || c.tag == Tag::rvar) throw Error("goal is not callable: " + show(g));
    const std::uint32_t n = arity_of(g);
    const std::string& name = atoms_.name(c.val);
    auto a = [&](std::uint32_t i) { return arg(g, i); };

    if (n == 2 && c.val == a_comma_) {
      cur = vm::push(a(0), node.depth, vm::push(a(1), node.depth, cur));
      return true;
    }
    if (n == 0 && c.val == a_true_) return true;
    if (n == 0 && (c.val == a_fail_ || name == "false")) return false;
    if (n == 2 && c.val == a_semi_) {
      Ref l = a(0);
      if (heap_[l].tag == Tag::str && heap_[l].val == a_arrow_ && heap_[l].arity == 2)
        return if_then_else(arg(l, 0), arg(l, 1), a(1), node.depth, cur);
      Goals rest = cur;
      Ref r = a(1);
      const std::uint32_t d = node.depth;
      push_choice([rest, r, d](Goals& out) {
        out = vm::push(r, d, rest);
        return Next::last;
      });
      cur = vm::push(l, node.depth, cur);
      return true;
    }
    if (n == 2 && c.val == a_arrow_) return if_then_else(a(0), a(1), make_atom(a_fail_), node.depth, cur);
    if (n == 1 && c.val == a_not_) return if_then_else(a(0), make_atom(a_fail_), make_atom(a_true_), node.depth, cur);
    if (n == 2 && c.val == a_eq_) return unify(a(0), a(1));
    if (n == 2 && c.val == a_neq_) return not_equal(a(0), a(1), node.depth, cur);
    if (n == 3 && name == "msw") return on_msw(a(0), a(1), a(2));
    if (n == 2 && name == "==") return identical(a(0), a(1));
    if (n == 2 && name == "\\==") return !identical(a(0), a(1));
    if (n == 2 && name == "is") return unify(a(0), make_int(eval(a(1))));
    if (n == 2 && (name == "<" || name == ">" || name == "=<" || name == ">=" || name == "=:=" || name == "=\\=")) {
      const std::int64_t x = eval(a(0)), y = eval(a(1));
      if (name == "<") return x < y;
      if (name == ">") return x > y;
      if (name == "=<") return x <= y;
      if (name == ">=") return x >= y;
      if (name == "=:=") return x == y;
      return x != y;
    }
    if (n == 3 && (name == "for" || name == "between")) {
      const bool is_for = name == "for";
      Ref target = is_for ? a(0) : a(2);
      const std::int64_t lo = eval(is_for ? a(1) : a(0));
      const std::int64_t hi = eval(is_for ? a(2) : a(1));
      if (lo > hi) return false;
      if (heap_[target].tag == Tag::integer) return heap_[target].val >= lo && heap_[target].val <= hi;
      Goals rest = cur;
      std::int64_t i = lo;
      push_choice([this, target, rest, i, hi](Goals& out) mutable {
        const std::int64_t v = i++;
        out = rest;
        if (!unify(target, make_int(v))) return i > hi ? Next::exhausted : Next::retry;
        return i > hi ? Next::last : Next::produced;
      });
      return false;
    }
    if (n == 1) {
      const Cell& x = heap_[a(0)];
      if (name == "var") return x.tag == Tag::ref;
      if (name == "nonvar") return x.tag != Tag::ref;
      if (name == "atom") return x.tag == Tag::atom;
      if (name == "integer" || name == "number") return x.tag == Tag::integer;
      if (name == "atomic") return x.tag == Tag::atom || x.tag == Tag::integer;
      if (name == "ground") return is_ground(a(0));
      if (name == "is_list") {
        Ref t = a(0);
        while (heap_[t].tag == Tag::str && heap_[t].val == a_dot_ && heap_[t].arity == 2) t = arg(t, 1);
        return heap_[t].tag == Tag::atom && heap_[t].val == a_nil_;
      }
    }
    if (n >= 1 && name == "call") {
      Ref target = a(0);
      std::vector<Ref> extra;
      for (std::uint32_t i = 1; i < n; ++i) extra.push_back(a(i));
      cur = vm::push(add_args(target, extra), node.depth, cur);
      return true;
    }
    if ((n == 2 || n == 3) && name == "phrase") {
      Ref rest_list = n == 3 ? a(2) : make_atom(a_nil_);
      cur = vm::push(add_args(a(0), {a(1), rest_list}), node.depth, cur);
      return true;
    }
    if (n == 0 && name == "!") throw Error("cut is not supported");
    if (node.untabled) return resolve(g, node, cur);
    return call_user(g, node, cur);
  }

  Ref add_args(Ref target, const std::vector<Ref>& extra) {
    target = deref(target);
    const Cell& c = heap_[target];
    if (c.tag != Tag::atom && c.tag != Tag::str) throw Error("not callable: " + show(target));
    std::vector<Ref> args;
    for (std::uint32_t i = 0; i < arity_of(target); ++i) args.push_back(arg(target, i));
    args.insert(args.end(), extra.begin(), extra.end());
    return make_compound(c.val, args);
  }

  std::int64_t eval(Ref r) {
    r = deref(r);
    const Cell c = heap_[r];
    switch (c.tag) {
      case Tag::integer: return c.val;
      case Tag::ref: throw Error("arguments are not sufficiently instantiated");
      case Tag::rvar: throw Error("arithmetic on random variable " + show(r));
      case Tag::atom: throw Error("not an integer expression: " + show(r));
      case Tag::str: break;
    }
    const std::string& f = atoms_.name(c.val);
    if (c.arity == 1) {
      const std::int64_t x = eval(r + 1);
      if (f == "-") return -x;
      if (f == "+") return x;
      if (f == "abs") return x < 0 ? -x : x;
    } else if (c.arity == 2) {
      const std::int64_t x = eval(r + 1), y = eval(r + 2);
      if (f == "+") return x + y;
      if (f == "-") return x - y;
      if (f == "*") return x * y;
      if (f == "min") return std::min(x, y);
      if (f == "max") return std::max(x, y);
      if (f == "//" || f == "/" || f == "mod" || f == "rem") {
        if (y == 0) throw Error("division by zero");
        if (f == "/" && x % y != 0) throw Error("non-integer division " + show(r));
        if (f == "mod") return ((x % y) + y) % y;
        if (f == "rem") return x % y;
        return x / y;
      }
      if (f == "^" || f == "**") {
        if (y < 0) throw Error("negative exponent");
        std::int64_t p = 1;
        for (std::int64_t i = 0; i < y; ++i) p *= x;
        return p;
      }
    }
    throw Error("unknown arithmetic function " + f + "/" + std::to_string(c.arity));
  }

  bool not_equal(Ref x, Ref y, std::uint32_t depth, Goals& cur) {
    x = deref(x);
    y = deref(y);
    if (x == y) return false;
    const Cell cx = heap_[x];
    const Cell cy = heap_[y];
    if (cx.tag == Tag::ref || cy.tag == Tag::ref) {
      pending_.emplace_back(x, y);
      return true;
    }
    if (cx.tag == Tag::rvar) return cy.tag == Tag::rvar && cx.val == cy.val ? false : relate(x, y, Relation::neq);
    if (cy.tag == Tag::rvar) return relate(y, x, Relation::neq);
    if (cx.tag != cy.tag || cx.val != cy.val || cx.arity != cy.arity) return true;
    if (cx.tag != Tag::str) return false;
    // f(a1..an) \= f(b1..bn): the first differing argument, as disjoint
    // alternatives.
    Goals rest = cur;
    std::uint32_t k = 0;
    const std::uint32_t n = cx.arity;
    push_choice([this, x, y, rest, depth, k, n](Goals& out) mutable {
      const std::uint32_t i = k++;
      Goals g = vm::push(make_compound(a_neq_, {arg(x, i), arg(y, i)}), depth, rest);
      for (std::uint32_t j = i; j-- > 0;) g = vm::push(make_compound(a_eq_, {arg(x, j), arg(y, j)}), depth, g);
      out = g;
      return k >= n ? Next::last : Next::produced;
    });
    return false;
  }

  bool if_then_else(Ref cond, Ref then_, Ref else_, std::uint32_t depth, Goals& cur) {
    const Snapshot before = snapshot();
    const std::size_t mark = log_mark();
    int count = 0;
    std::vector<std::function<bool()>> branches;
    run(vm::push(cond, depth, nullptr), [&] {
      if (count++ == 0) branches = negation_branches(mark);
      return !branches.empty() && count < 2;
    });
    Goals rest = cur;
    if (count == 1 && branches.empty()) {
      // Deterministic condition: keep the bindings of its first solution.
      cur = vm::push(then_, depth, rest);
      return true;
    }
    restore(before);
    if (count == 0) {
      cur = vm::push(else_, depth, rest);
      return true;
    }
    if (!branches.empty() && count > 1)
      throw Error("condition with several solutions depends on random variables");
    auto commit = [this, cond, then_, depth, rest](Goals& out) {
      if (run(vm::push(cond, depth, nullptr), [] { return false; })) return false;
      out = vm::push(then_, depth, rest);
      return true;
    };
    std::size_t k = 0;
    push_choice([commit, branches, else_, depth, rest, k](Goals& out) mutable {
      const std::size_t i = k++;
      const bool last = k > branches.size();
      if (i == 0) {
        if (!commit(out)) return last ? Next::exhausted : Next::retry;
      } else {
        if (!branches[i - 1]()) return last ? Next::exhausted : Next::retry;
        out = vm::push(else_, depth, rest);
      }
      return last ? Next::last : Next::produced;
    });
    return false;
  }

  const Program& program_;
  MachineOptions options_;
  std::vector<Cell> heap_;
  std::vector<Ref> trail_;
  std::vector<std::unique_ptr<ChoicePoint>> cps_;
  std::unordered_map<std::uint64_t, std::vector<vm::Frozen>> clauses_;
  std::unordered_map<std::uint64_t, bool> prelude_;
  std::uint64_t steps_ = 0;
};

}  // namespace osdd
