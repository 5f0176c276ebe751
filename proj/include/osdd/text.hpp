#pragma once

// Text and DOT renderings of diagrams.
//
// Text format, one item per line, `%` starts a comment:
//
//   switch b 1..365 uniform
//   switch flip [a, b] [1/2, 1/2]
//   vars X1 X2
//   n1 = (b,2) X2 [ X2 = X1 : 1 ; X2 != X1 : 0 ]
//   n2 = (b,1) X1 [ true : n1 ]
//   root n2
//
// Nodes are listed children first. A label is `true` or a comma-separated
// list of `V = T` / `V != T`; every variable is the output of some node and
// takes the type of that node's switch. The optional `vars` line fixes the
// variable order (which decides how atoms are oriented); without it the
// order of first appearance is used.

#include <cctype>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "osdd/algebra.hpp"
#include "osdd/inference.hpp"
#include "osdd/program.hpp"

namespace osdd {

struct OsddFile {
  std::vector<SwitchDecl> switches;
  Osdd root;

  DeclFn decls() const {
    return [this](const SwitchInstance& si) -> const SwitchDecl& {
      const std::string name = si.sw.str();
      for (const auto& s : switches)
        if (s.name == name) return s;
      throw Error("switch " + name + " is not declared in the diagram file");
    };
  }
};

namespace detail {

inline bool plain_atom(const std::string& s) {
  if (s.empty() || !std::islower(static_cast<unsigned char>(s[0]))) return false;
  for (char c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
  return true;
}

inline std::string quote_term(const GroundTerm& g) {
  if (g.is_int() || plain_atom(g.as_atom())) return g.str();
  std::string out = "'";
  for (char c : g.as_atom()) {
    if (c == '\'' || c == '\\') out += '\\';
    out += c;
  }
  return out + "'";
}

inline std::string text_formula(const ConstraintFormula& f, const std::map<Var, std::string>& names) {
  if (f.empty()) return "true";
  auto name = [&](const Var& v) {
    auto it = names.find(v);
    return it == names.end() ? v.name() : it->second;
  };
  std::string s;
  for (const auto& a : f.atoms()) {
    if (!s.empty()) s += ", ";
    s += name(a.lhs()) + (a.relation() == Relation::eq ? " = " : " != ");
    s += is_var(a.rhs()) ? name(as_var(a.rhs())) : quote_term(as_ground(a.rhs()));
  }
  return s;
}

inline std::string text_domain(const TypeDomain& d) {
  const auto& vs = d.values();
  bool range = vs.size() > 2;
  for (std::size_t i = 0; range && i < vs.size(); ++i)
    range = vs[i].is_int() && vs[i].as_int() == vs[0].as_int() + static_cast<std::int64_t>(i);
  if (range) return vs.front().str() + ".." + vs.back().str();
  std::string s = "[";
  for (std::size_t i = 0; i < vs.size(); ++i) s += (i ? ", " : "") + quote_term(vs[i]);
  return s + "]";
}

/// Names variables by their order of first appearance unless all names are
/// already distinct.
inline std::map<Var, std::string> variable_names(const Osdd& d) {
  std::map<Var, std::string> names;
  std::map<std::string, int> seen;
  for_each_node(d, [&](const Osdd& n) {
    if (n.is_leaf()) return;
    names.emplace(n.out(), n.out().name());
  });
  for (const auto& [v, name] : names) ++seen[name];
  bool clash = false;
  for (const auto& [name, k] : seen) clash = clash || k > 1;
  if (!clash) return names;
  int next = 1;
  for (auto& [v, name] : names) name = "X" + std::to_string(next++);
  return names;
}

class TextReader {
 public:
  explicit TextReader(const std::string& text) : s_(text) {}

  OsddFile read() {
    OsddFile f;
    struct NodeLine {
      std::string id;
      SwitchInstance si;
      std::string out;
      std::vector<std::pair<std::vector<std::tuple<std::string, bool, std::string, bool>>, std::string>> edges;
      int line;
    };
    std::vector<NodeLine> nodes;
    std::vector<std::string> order;
    std::string root;
    while (skip_blank()) {
      const int line = line_;
      std::string head = word();
      if (head == "switch") {
        SwitchDecl d;
        d.name = ground().str();
        std::vector<GroundTerm> values = domain_values();
        d.domain = make_domain(d.name, values);
        std::string dist = peek() == '[' ? "" : word();
        if (dist == "uniform") {
          d.dist = Distribution::uniform(values.size());
        } else if (dist.empty()) {
          expect('[');
          d.dist.kind = Distribution::Kind::categorical;
          while (true) {
            d.dist.probs.push_back(rational());
            if (peek() == ']') break;
            expect(',');
          }
          expect(']');
          if (d.dist.probs.size() != values.size()) fail("distribution length differs from the domain size");
        } else {
          fail("expected 'uniform' or a probability list");
        }
        f.switches.push_back(std::move(d));
      } else if (head == "vars") {
        while (std::isalpha(static_cast<unsigned char>(peek())) || peek() == '_') order.push_back(word());
      } else if (head == "root") {
        root = word();
      } else {
        NodeLine n;
        n.id = head;
        n.line = line;
        expect('=');
        expect('(');
        std::string sw = ground().str();
        expect(',');
        GroundTerm inst = ground();
        expect(')');
        n.si = {GroundTerm::atom(sw), inst};
        n.out = word();
        expect('[');
        while (true) {
          std::vector<std::tuple<std::string, bool, std::string, bool>> atoms;
          skip_space();
          if (starts("true")) {
            word();
          } else {
            while (true) {
              std::string lhs = word();
              skip_space();
              bool eq;
              if (starts("!=")) {
                pos_ += 2;
                eq = false;
              } else {
                expect('=');
                eq = true;
              }
              skip_space();
              const bool var = std::isupper(static_cast<unsigned char>(peek())) || peek() == '_';
              std::string rhs = var ? word() : term_text();
              atoms.emplace_back(lhs, eq, rhs, var);
              if (peek() != ',') break;
              expect(',');
            }
          }
          expect(':');
          n.edges.emplace_back(std::move(atoms), word());
          if (peek() == ']') break;
          expect(';');
        }
        expect(']');
        nodes.push_back(std::move(n));
      }
      end_line();
    }
    if (root.empty()) fail("missing root line");

    auto decl_of = [&](const std::string& sw) -> const SwitchDecl& {
      for (const auto& d : f.switches)
        if (d.name == sw) return d;
      throw SyntaxError("switch " + sw + " is not declared", {line_, 1});
    };
    std::map<std::string, const SwitchDecl*> type_of;
    for (const auto& n : nodes) {
      const SwitchDecl& d = decl_of(n.si.sw.str());
      auto [it, fresh] = type_of.emplace(n.out, &d);
      if (!fresh && !same_type(it->second->domain, d.domain))
        throw SyntaxError("variable " + n.out + " is the output of different switches", {n.line, 1});
      if (std::find(order.begin(), order.end(), n.out) == order.end()) order.push_back(n.out);
    }
    std::map<std::string, Var> vars;
    for (const auto& name : order) {
      auto it = type_of.find(name);
      if (it == type_of.end()) throw SyntaxError("variable " + name + " is not the output of any node", {line_, 1});
      vars.emplace(name, Var::fresh(name, it->second->domain));
    }
    std::unordered_map<std::string, Osdd> built{{"0", Osdd::zero()}, {"1", Osdd::one()}};
    for (const auto& n : nodes) {
      std::vector<std::pair<ConstraintFormula, Osdd>> edges;
      for (const auto& [atoms, child] : n.edges) {
        std::vector<AtomicConstraint> cs;
        for (const auto& [lhs, eq, rhs, var] : atoms) {
          auto l = vars.find(lhs);
          if (l == vars.end()) throw SyntaxError("unknown variable " + lhs, {n.line, 1});
          const Relation rel = eq ? Relation::eq : Relation::neq;
          if (var) {
            auto r = vars.find(rhs);
            if (r == vars.end()) throw SyntaxError("unknown variable " + rhs, {n.line, 1});
            cs.emplace_back(l->second, r->second, rel);
          } else {
            cs.emplace_back(l->second, parse_ground(rhs), rel);
          }
        }
        auto c = built.find(child);
        if (c == built.end()) throw SyntaxError("node " + child + " is used before its definition", {n.line, 1});
        edges.emplace_back(ConstraintFormula(std::move(cs)), c->second);
      }
      if (!built.emplace(n.id, Osdd::node(n.si, vars.at(n.out), std::move(edges))).second)
        throw SyntaxError("node " + n.id + " is defined twice", {n.line, 1});
    }
    auto r = built.find(root);
    if (r == built.end()) throw SyntaxError("root " + root + " is not defined", {line_, 1});
    f.root = r->second;
    return f;
  }

 private:
  [[noreturn]] void fail(const std::string& msg) const {
    throw SyntaxError(msg, {line_, static_cast<int>(pos_ - line_start_) + 1});
  }

  char peek() {
    skip_space();
    return pos_ < s_.size() ? s_[pos_] : '\0';
  }

  bool starts(const char* t) const { return s_.compare(pos_, std::char_traits<char>::length(t), t) == 0; }

  void skip_space() {
    while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
  }

  /// Skips blank and comment lines; false at end of input.
  bool skip_blank() {
    while (true) {
      skip_space();
      if (pos_ >= s_.size()) return false;
      if (s_[pos_] == '%') {
        while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
      }
      if (pos_ < s_.size() && s_[pos_] == '\n') {
        ++pos_;
        ++line_;
        line_start_ = pos_;
        continue;
      }
      return pos_ < s_.size();
    }
  }

  void end_line() {
    skip_space();
    if (pos_ < s_.size() && s_[pos_] == '%')
      while (pos_ < s_.size() && s_[pos_] != '\n') ++pos_;
    if (pos_ < s_.size() && s_[pos_] != '\n') fail("unexpected text at end of line");
  }

  void expect(char c) {
    if (peek() != c) fail(std::string("expected '") + c + "'");
    ++pos_;
  }

  std::string word() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isalnum(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '_')) ++pos_;
    if (start == pos_) fail("expected a name");
    return s_.substr(start, pos_ - start);
  }

  /// A constant as written: a name, a signed integer or a quoted atom.
  std::string term_text() {
    skip_space();
    if (peek() == '\'') {
      std::string out = "'";
      ++pos_;
      while (pos_ < s_.size() && s_[pos_] != '\'') {
        if (s_[pos_] == '\\' && pos_ + 1 < s_.size()) out += s_[pos_++];
        out += s_[pos_++];
      }
      if (pos_ >= s_.size()) fail("unterminated quoted atom");
      ++pos_;
      return out + "'";
    }
    if (peek() == '-') {
      ++pos_;
      return "-" + word();
    }
    return word();
  }

  static GroundTerm parse_ground(const std::string& t) {
    if (!t.empty() && t[0] == '\'') {
      std::string out;
      for (std::size_t i = 1; i + 1 < t.size(); ++i) {
        if (t[i] == '\\') ++i;
        out += t[i];
      }
      return GroundTerm::atom(out);
    }
    const bool num = !t.empty() && (std::isdigit(static_cast<unsigned char>(t[0])) || t[0] == '-');
    if (num) return GroundTerm(static_cast<std::int64_t>(std::stoll(t)));
    return GroundTerm::atom(t);
  }

  GroundTerm ground() { return parse_ground(term_text()); }

  std::vector<GroundTerm> domain_values() {
    std::vector<GroundTerm> out;
    if (peek() == '[') {
      expect('[');
      while (true) {
        out.push_back(ground());
        if (peek() == ']') break;
        expect(',');
      }
      expect(']');
      return out;
    }
    GroundTerm lo = ground();
    skip_space();
    if (!starts("..")) fail("expected '..' or a value list");
    pos_ += 2;
    GroundTerm hi = ground();
    if (!lo.is_int() || !hi.is_int() || hi.as_int() < lo.as_int()) fail("bad integer range");
    for (std::int64_t v = lo.as_int(); v <= hi.as_int(); ++v) out.emplace_back(v);
    return out;
  }

  Rational rational() {
    skip_space();
    const std::size_t start = pos_;
    while (pos_ < s_.size() && (std::isdigit(static_cast<unsigned char>(s_[pos_])) || s_[pos_] == '/')) ++pos_;
    if (start == pos_) fail("expected a probability");
    try {
      return Rational(s_.substr(start, pos_ - start));
    } catch (const std::exception&) {
      fail("bad probability " + s_.substr(start, pos_ - start));
    }
  }

  const std::string& s_;
  std::size_t pos_ = 0;
  int line_ = 1;
  std::size_t line_start_ = 0;
};

}  // namespace detail

/// Writes the declarations of `switches` that the diagram uses, then the
/// nodes children first, then the root.
inline void write_osdd(std::ostream& os, const Osdd& d, const DeclFn& decl) {
  std::map<std::string, const SwitchDecl*> used;
  for_each_node(d, [&](const Osdd& n) {
    if (!n.is_leaf()) used.emplace(n.si().sw.str(), &decl(n.si()));
  });
  for (const auto& [name, s] : used) {
    os << "switch " << detail::quote_term(GroundTerm::atom(name)) << ' ' << detail::text_domain(*s->domain) << ' ';
    if (s->dist.kind == Distribution::Kind::uniform) {
      os << "uniform";
    } else {
      os << '[';
      for (std::size_t i = 0; i < s->dist.probs.size(); ++i) os << (i ? ", " : "") << s->dist.probs[i];
      os << ']';
    }
    os << '\n';
  }
  const auto names = detail::variable_names(d);
  if (!names.empty()) {
    os << "vars";
    for (const auto& [v, name] : names) os << ' ' << name;
    os << '\n';
  }
  std::unordered_map<std::uint64_t, std::string> ids;
  std::function<std::string(const Osdd&)> emit = [&](const Osdd& n) -> std::string {
    if (n.is_leaf()) return n.value() ? "1" : "0";
    if (auto it = ids.find(n.id()); it != ids.end()) return it->second;
    std::vector<std::string> children;
    for (std::size_t i = 0; i < n.edge_count(); ++i) children.push_back(emit(n.child(i)));
    const std::string id = "n" + std::to_string(ids.size() + 1);
    os << id << " = (" << detail::quote_term(n.si().sw) << ',' << detail::quote_term(n.si().instance) << ") "
       << names.at(n.out()) << " [";
    for (std::size_t i = 0; i < n.edge_count(); ++i) {
      std::string label = detail::text_formula(n.label(i), names);
      os << (i ? " ; " : " ") << label << " : " << children[i];
    }
    os << " ]\n";
    ids.emplace(n.id(), id);
    return id;
  };
  const std::string root = emit(d);
  os << "root " << root << '\n';
}

inline std::string osdd_text(const Osdd& d, const DeclFn& decl) {
  std::ostringstream os;
  write_osdd(os, d, decl);
  return os.str();
}

inline OsddFile read_osdd(const std::string& text) { return detail::TextReader(text).read(); }

/// Graphviz rendering: one box per node, dashed edges into 0.
inline void write_dot(std::ostream& os, const Osdd& d) {
  const auto names = detail::variable_names(d);
  os << "digraph osdd {\n  node [shape=box];\n";
  std::unordered_map<std::uint64_t, std::string> ids;
  bool zero = false, one = false;
  std::function<std::string(const Osdd&)> emit = [&](const Osdd& n) -> std::string {
    if (n.is_leaf()) {
      (n.value() ? one : zero) = true;
      return n.value() ? "one" : "zero";
    }
    if (auto it = ids.find(n.id()); it != ids.end()) return it->second;
    const std::string id = "n" + std::to_string(ids.size() + 1);
    ids.emplace(n.id(), id);
    os << "  " << id << " [label=\"(" << n.si().str() << ") " << names.at(n.out()) << "\"];\n";
    for (std::size_t i = 0; i < n.edge_count(); ++i) {
      const std::string c = emit(n.child(i));
      os << "  " << id << " -> " << c << " [label=\"" << detail::text_formula(n.label(i), names)
         << "\"" << (n.child(i).is_zero() ? ", style=dashed" : "") << "];\n";
    }
    return id;
  };
  emit(d);
  if (zero) os << "  zero [label=\"0\", shape=circle];\n";
  if (one) os << "  one [label=\"1\", shape=circle];\n";
  os << "}\n";
}

}  // namespace osdd
