#pragma once

// Programs: clauses plus switch declarations, and the OSDD-threading
// transformation.

#include <boost/multiprecision/cpp_int.hpp>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "osdd/prolog.hpp"

namespace osdd {

using Rational = boost::multiprecision::cpp_rational;

/// Parses a decimal literal such as `0.25`, `-1.5e-3` or `3` exactly.
inline Rational parse_decimal(const std::string& text) {
  std::string s = text;
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s = s.substr(1);
  }
  long exp10 = 0;
  if (auto e = s.find_first_of("eE"); e != std::string::npos) {
    exp10 = std::stol(s.substr(e + 1));
    s = s.substr(0, e);
  }
  std::string digits;
  for (char c : s) {
    if (c == '.') continue;
    if (!std::isdigit(static_cast<unsigned char>(c))) throw Error("malformed number '" + text + "'");
    digits += c;
  }
  if (auto dot = s.find('.'); dot != std::string::npos) exp10 -= static_cast<long>(s.size() - dot - 1);
  if (digits.empty()) throw Error("malformed number '" + text + "'");
  digits.erase(0, std::min(digits.find_first_not_of('0'), digits.size() - 1));
  boost::multiprecision::cpp_int num(digits), den(1);
  for (; exp10 > 0; --exp10) num *= 10;
  for (; exp10 < 0; ++exp10) den *= 10;
  Rational r(num, den);
  return neg ? Rational(-r) : r;
}

/// Outcome distribution of a switch, aligned with its domain's values.
struct Distribution {
  enum class Kind { uniform, categorical };
  Kind kind = Kind::uniform;
  std::vector<Rational> probs;

  static Distribution uniform(std::size_t n) {
    return {Kind::uniform, std::vector<Rational>(n, Rational(1, static_cast<long>(n)))};
  }

  bool is_uniform() const {
    refresh();
    return cached_uniform_;
  }
  const Rational& prob(std::size_t i) const { return probs.at(i); }
  double prob_double(std::size_t i) const {
    refresh();
    return cached_.at(i);
  }

  void refresh() const {
    if (cached_.size() == probs.size() && !probs.empty()) return;
    cached_.clear();
    for (const auto& p : probs) cached_.push_back(static_cast<double>(p));
    cached_uniform_ = std::all_of(probs.begin(), probs.end(), [&](const Rational& p) { return p == probs.front(); });
  }
  // Derived from probs; rebuilt when its size changes.
  mutable std::vector<double> cached_{};
  mutable bool cached_uniform_ = true;
};

/// `values/2` and `set_sw/2` merged for one switch. A pattern such as
/// `b(_)` declares the switch named `b`.
struct SwitchDecl {
  std::string name;
  DomainRef domain;
  Distribution dist;
  SourcePos pos;

  Rational prob(const GroundTerm& v) const {
    auto i = domain->index_of(v);
    return i ? dist.prob(*i) : Rational(0);
  }
  double prob_double(const GroundTerm& v) const {
    auto i = domain->index_of(v);
    return i ? dist.prob_double(*i) : 0.0;
  }
};

/// Converts an atomic term to a ground constant; compound terms become
/// atoms holding their printed form.
inline GroundTerm ground_of(const Ast& t) {
  switch (t.kind) {
    case Ast::Kind::integer: return GroundTerm(t.ival);
    case Ast::Kind::atom: return GroundTerm::atom(t.name);
    case Ast::Kind::var: throw Error("expected a ground term, got variable " + t.name);
    default: return GroundTerm::atom(t.str());
  }
}

inline std::vector<Ast> list_items(const Ast& list) {
  std::vector<Ast> out;
  const Ast* t = &list;
  while (t->is(".", 2)) {
    out.push_back(t->args[0]);
    t = &t->args[1];
  }
  if (!t->is("[]", 0)) throw SyntaxError("expected a proper list, got " + list.str(), list.pos);
  return out;
}

inline bool is_control(const Ast& g) {
  return g.is(",", 2) || g.is(";", 2) || g.is("->", 2) || g.is("\\+", 1);
}

/// Builtins evaluated directly rather than by resolution. `msw/3` and the
/// constraint goals are handled by the evaluator and are not listed here.
inline bool is_builtin(const std::string& name, std::size_t arity) {
  static const std::set<std::pair<std::string, std::size_t>> table = {
      {"true", 0},    {"fail", 0},   {"false", 0},   {"is", 2},      {"<", 2},      {">", 2},
      {"=<", 2},      {">=", 2},     {"=:=", 2},     {"=\\=", 2},    {"==", 2},     {"\\==", 2},
      {"for", 3},     {"between", 3}, {"var", 1},    {"nonvar", 1},  {"atom", 1},   {"integer", 1},
      {"atomic", 1},  {"number", 1}, {"is_list", 1}, {"!", 0},      {"call", 1},   {"ground", 1},
  };
  return table.count({name, arity}) != 0;
}

inline bool is_constraint_goal(const Ast& g) { return g.is("=", 2) || g.is("\\=", 2); }
inline bool is_msw_goal(const Ast& g) { return g.is("msw", 3); }

class Program {
 public:
  static Program parse(const std::string& text) {
    Program p;
    ProgramAst ast = parse_program_text(text);
    std::map<std::string, Ast> values;
    std::map<std::string, std::pair<Ast, SourcePos>> dists;
    std::vector<std::string> order;
    auto note = [&](const std::string& name) {
      if (std::find(order.begin(), order.end(), name) == order.end()) order.push_back(name);
    };
    auto declare = [&](const Ast& d, SourcePos pos) -> bool {
      if (d.is("values", 2)) {
        std::string name = switch_name(d.args[0]);
        if (values.count(name)) throw SyntaxError("values/2 declared twice for switch " + name, pos);
        values.emplace(name, d.args[1]);
        note(name);
        return true;
      }
      if (d.is("set_sw", 2)) {
        std::string name = switch_name(d.args[0]);
        if (dists.count(name)) throw SyntaxError("set_sw/2 declared twice for switch " + name, pos);
        dists.emplace(name, std::make_pair(d.args[1], pos));
        note(name);
        return true;
      }
      return false;
    };
    for (const auto& d : ast.directives) {
      if (declare(d, d.pos)) continue;
      if (d.is("table", 1) || d.is("dynamic", 1) || d.is("discontiguous", 1)) continue;
      throw SyntaxError("unknown directive " + d.str(), d.pos);
    }
    for (auto& c : ast.clauses) {
      if (c.body.is("true", 0) && declare(c.head, c.pos)) continue;
      p.clauses_.push_back(std::move(c));
    }
    for (const auto& name : order) {
      SourcePos pos;
      if (auto it = dists.find(name); it != dists.end()) pos = it->second.second;
      auto vit = values.find(name);
      auto dit = dists.find(name);
      p.switches_.push_back(make_switch(name, vit == values.end() ? nullptr : &vit->second,
                                        dit == dists.end() ? nullptr : &dit->second.first, pos));
    }
    for (std::size_t i = 0; i < p.clauses_.size(); ++i) {
      const auto& c = p.clauses_[i];
      p.check_msw(c.body);
      std::string ind = c.head.indicator();
      if (!p.index_.count(ind)) p.order_.push_back(ind);
      p.index_[ind].push_back(i);
    }
    return p;
  }

  static Program load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
  }

  const std::vector<ClauseAst>& clauses() const { return clauses_; }
  const std::vector<SwitchDecl>& switches() const { return switches_; }

  /// Predicate indicators (`name/arity`) in order of first definition.
  const std::vector<std::string>& predicates() const { return order_; }
  bool defines(const std::string& indicator) const { return index_.count(indicator) != 0; }
  std::vector<const ClauseAst*> clauses_of(const std::string& indicator) const {
    std::vector<const ClauseAst*> out;
    if (auto it = index_.find(indicator); it != index_.end())
      for (auto i : it->second) out.push_back(&clauses_[i]);
    return out;
  }

  const SwitchDecl* find_switch(const std::string& name) const {
    for (const auto& s : switches_)
      if (s.name == name) return &s;
    return nullptr;
  }
  const SwitchDecl& switch_for(const GroundTerm& sw) const {
    std::string name = sw.str();
    if (auto p = name.find('('); p != std::string::npos) name = name.substr(0, p);
    if (const auto* s = find_switch(name)) return *s;
    throw Error("switch " + sw.str() + " is not declared");
  }

  /// The program with every user predicate `p/n` turned into `p/(n+2)`
  /// threading a diagram through its body, plus the tabling directives.
  ProgramAst transform() const {
    ProgramAst out;
    for (const auto& ind : order_) {
      const ClauseAst& first = *clauses_of(ind).front();
      std::vector<Ast> args;
      for (std::size_t i = 0; i < first.head.arity(); ++i) args.push_back(Ast::var("_"));
      args.push_back(Ast::var("_"));
      args.push_back(Ast::compound("lattice", {Ast::compound("/", {Ast::atom("or"), Ast::integer(3)})}));
      out.directives.push_back(Ast::compound("table", {Ast::compound(first.head.name, std::move(args))}));
    }
    for (const auto& c : clauses_) {
      std::set<std::string> names;
      collect_vars(c.head, names);
      collect_vars(c.body, names);
      std::string prefix = "O";
      for (bool clash = true; clash;) {
        clash = false;
        for (const auto& n : names)
          if (n.rfind(prefix, 0) == 0 && n.size() > prefix.size() &&
              std::isdigit(static_cast<unsigned char>(n[prefix.size()])))
            clash = true;
        if (clash) prefix += "_";
      }
      int counter = 1;
      auto fresh = [&] { return Ast::var(prefix + std::to_string(counter++)); };
      Ast o_in = fresh();
      if (c.body.is("true", 0)) {
        out.clauses.push_back({with_threads(c.head, o_in, o_in), Ast::atom("true"), c.pos});
        continue;
      }
      Ast o_out = o_in;
      Ast body = thread(c.body, o_in, o_out, fresh);
      out.clauses.push_back({with_threads(c.head, o_in, o_out), body, c.pos});
    }
    return out;
  }

 private:
  static std::string switch_name(const Ast& t) {
    if (t.kind == Ast::Kind::atom) return t.name;
    if (t.kind == Ast::Kind::compound) return t.name;
    if (t.kind == Ast::Kind::integer) return std::to_string(t.ival);
    throw SyntaxError("switch name must be an atom or compound term", t.pos);
  }

  static SwitchDecl make_switch(const std::string& name, const Ast* values, const Ast* dist, SourcePos pos) {
    SwitchDecl s;
    s.name = name;
    s.pos = pos;
    if (values) {
      std::vector<GroundTerm> vs;
      for (const auto& v : list_items(*values)) {
        if (v.kind != Ast::Kind::atom && v.kind != Ast::Kind::integer)
          throw SyntaxError("switch values must be atoms or integers", v.pos);
        vs.push_back(ground_of(v));
      }
      s.domain = make_domain(name, std::move(vs));
    }
    if (!dist || dist->is("uniform", 0) || dist->is("default", 0)) {
      if (!s.domain) throw SyntaxError("switch " + name + " has no values", pos);
      s.dist = Distribution::uniform(s.domain->size());
      return s;
    }
    if (dist->is("uniform", 2)) {
      const Ast& lo = dist->args[0];
      const Ast& hi = dist->args[1];
      if (lo.kind != Ast::Kind::integer || hi.kind != Ast::Kind::integer || lo.ival > hi.ival)
        throw SyntaxError("uniform/2 needs integer bounds Lo =< Hi", dist->pos);
      auto range = make_int_domain(name, lo.ival, hi.ival);
      if (s.domain && s.domain->values() != range->values())
        throw SyntaxError("uniform range of switch " + name + " disagrees with its values", dist->pos);
      s.domain = range;
      s.dist = Distribution::uniform(range->size());
      return s;
    }
    if (!s.domain) throw SyntaxError("switch " + name + " has no values", pos);
    std::vector<Rational> ps;
    for (const auto& p : list_items(*dist)) {
      if (p.kind == Ast::Kind::integer) ps.emplace_back(p.ival);
      else if (p.kind == Ast::Kind::decimal) ps.push_back(parse_decimal(p.name));
      else if (p.is("/", 2) && p.args[0].kind == Ast::Kind::integer && p.args[1].kind == Ast::Kind::integer &&
               p.args[1].ival != 0)
        ps.emplace_back(Rational(p.args[0].ival, p.args[1].ival));
      else throw SyntaxError("probability expected, got " + p.str(), p.pos);
      if (ps.back() < 0) throw SyntaxError("negative probability in switch " + name, p.pos);
    }
    if (ps.size() != s.domain->size())
      throw SyntaxError("switch " + name + " has " + std::to_string(s.domain->size()) + " values but " +
                            std::to_string(ps.size()) + " probabilities",
                        dist->pos);
    Rational sum = 0;
    for (const auto& p : ps) sum += p;
    if (std::abs(static_cast<double>(sum) - 1.0) > 1e-9)
      throw SyntaxError("probabilities of switch " + name + " do not sum to 1", dist->pos);
    s.dist = {Distribution::Kind::categorical, std::move(ps)};
    if (s.dist.is_uniform()) s.dist.kind = Distribution::Kind::uniform;
    return s;
  }

  void check_msw(const Ast& g) const {
    if (is_control(g)) {
      for (const auto& a : g.args) check_msw(a);
      return;
    }
    if (is_msw_goal(g) && g.args[0].kind != Ast::Kind::var) {
      std::string name = switch_name(g.args[0]);
      if (!find_switch(name)) throw SyntaxError("switch " + name + " is not declared", g.pos);
    }
  }

  static void collect_vars(const Ast& t, std::set<std::string>& out) {
    if (t.kind == Ast::Kind::var) out.insert(t.name);
    for (const auto& a : t.args) collect_vars(a, out);
  }

  static Ast with_threads(const Ast& goal, const Ast& in, const Ast& out) {
    Ast g = goal;
    if (g.kind == Ast::Kind::atom) {
      g.kind = Ast::Kind::compound;
      g.args.clear();
    }
    g.args.push_back(in);
    g.args.push_back(out);
    return g;
  }

  template <class Fresh>
  Ast thread(const Ast& g, const Ast& in, Ast& out, Fresh& fresh) const {
    if (g.is(",", 2)) {
      std::vector<const Ast*> goals;
      flatten(g, goals);
      Ast cur = in;
      std::optional<Ast> acc;
      for (const Ast* sub : goals) {
        Ast next = cur;
        Ast t = thread(*sub, cur, next, fresh);
        acc = acc ? Ast::compound(",", {std::move(*acc), std::move(t)}, g.pos) : std::move(t);
        cur = next;
      }
      out = cur;
      return *acc;
    }
    if (g.is(";", 2) || g.is("->", 2)) {
      Ast o = fresh();
      if (g.is(";", 2) && g.args[0].is("->", 2)) {
        const Ast& ite = g.args[0];
        Ast mid = in, then_out = in, else_out = in;
        Ast c = thread(ite.args[0], in, mid, fresh);
        Ast t = thread(ite.args[1], mid, then_out, fresh);
        Ast e = thread(g.args[1], in, else_out, fresh);
        out = o;
        return Ast::compound(";", {Ast::compound("->", {c, join(t, then_out, o)}), join(e, else_out, o)}, g.pos);
      }
      Ast lo = in, ro = in;
      Ast l = thread(g.args[0], in, lo, fresh);
      Ast r = thread(g.args[1], g.is(";", 2) ? in : lo, ro, fresh);
      if (g.is("->", 2)) {
        out = ro;
        return Ast::compound("->", {l, r}, g.pos);
      }
      out = o;
      return Ast::compound(";", {join(l, lo, o), join(r, ro, o)}, g.pos);
    }
    if (g.is("\\+", 1)) {
      Ast inner_out = in;
      return Ast::compound("\\+", {thread(g.args[0], in, inner_out, fresh)}, g.pos);
    }
    if (is_msw_goal(g)) {
      out = fresh();
      return with_threads(g, in, out);
    }
    if (is_constraint_goal(g)) {
      out = fresh();
      return Ast::compound("constraint", {g, in, out}, g.pos);
    }
    if (g.kind == Ast::Kind::var || !g.is_callable() || is_builtin(g.name, g.arity())) return g;
    out = fresh();
    return with_threads(g, in, out);
  }

  static Ast join(const Ast& goal, const Ast& from, const Ast& to) {
    return Ast::compound(",", {goal, Ast::compound("=", {from, to})});
  }

  static void flatten(const Ast& g, std::vector<const Ast*>& out) {
    if (g.is(",", 2)) {
      flatten(g.args[0], out);
      flatten(g.args[1], out);
    } else {
      out.push_back(&g);
    }
  }

  std::vector<ClauseAst> clauses_;
  std::vector<SwitchDecl> switches_;
  std::map<std::string, std::vector<std::size_t>> index_;
  std::vector<std::string> order_;
};

/// Prints a clause with a flat, comma-separated body.
inline std::string clause_str(const ClauseAst& c) {
  if (c.body.is("true", 0)) return c.head.str() + ".";
  std::vector<const Ast*> goals;
  std::function<void(const Ast&)> flat = [&](const Ast& g) {
    if (g.is(",", 2)) {
      flat(g.args[0]);
      flat(g.args[1]);
    } else {
      goals.push_back(&g);
    }
  };
  flat(c.body);
  std::string s = c.head.str() + " :- ";
  for (std::size_t i = 0; i < goals.size(); ++i) s += (i ? ", " : "") + goals[i]->str();
  return s + ".";
}

}  // namespace osdd
