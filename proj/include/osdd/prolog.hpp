#pragma once

// Reader for the Prolog subset: tokenizer, operator-precedence parser and
// DCG expansion.

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "osdd/term.hpp"

namespace osdd {

struct SourcePos {
  int line = 1;
  int column = 1;
  std::string str() const { return std::to_string(line) + ":" + std::to_string(column); }
};

class SyntaxError : public Error {
 public:
  SyntaxError(const std::string& msg, SourcePos pos) : Error(pos.str() + ": " + msg), pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

/// Parsed term. Numbers with a fractional part keep their source text so
/// probabilities can be read exactly.
struct Ast {
  enum class Kind { var, integer, decimal, atom, compound };
  Kind kind = Kind::atom;
  std::string name;  // variable name, atom, functor, or decimal text
  std::int64_t ival = 0;
  std::vector<Ast> args;
  SourcePos pos;

  static Ast atom(std::string n, SourcePos p = {}) { return {Kind::atom, std::move(n), 0, {}, p}; }
  static Ast integer(std::int64_t v, SourcePos p = {}) { return {Kind::integer, {}, v, {}, p}; }
  static Ast var(std::string n, SourcePos p = {}) { return {Kind::var, std::move(n), 0, {}, p}; }
  static Ast compound(std::string f, std::vector<Ast> a, SourcePos p = {}) {
    return {Kind::compound, std::move(f), 0, std::move(a), p};
  }
  static Ast list(std::vector<Ast> items, Ast tail = atom("[]")) {
    for (auto it = items.rbegin(); it != items.rend(); ++it) tail = compound(".", {std::move(*it), std::move(tail)});
    return tail;
  }

  bool is(const char* f, std::size_t n) const {
    return (n == 0 ? kind == Kind::atom : kind == Kind::compound && args.size() == n) && name == f;
  }
  bool is_callable() const { return kind == Kind::atom || kind == Kind::compound; }
  std::size_t arity() const { return kind == Kind::compound ? args.size() : 0; }
  std::string indicator() const { return name + "/" + std::to_string(arity()); }

  std::string str() const;
};

namespace detail {

inline bool needs_quotes(const std::string& a) {
  if (a.empty()) return true;
  if (a == "[]" || a == "!" || a == ";" || a == "{}" || a == ",") return a == ",";
  if (std::islower(static_cast<unsigned char>(a[0]))) {
    for (char c : a)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return true;
    return false;
  }
  const std::string sym = "+-*/\\^<>=~:.?@#&$";
  for (char c : a)
    if (sym.find(c) == std::string::npos) return true;
  return false;
}

inline std::string quote_atom(const std::string& a) {
  if (!needs_quotes(a)) return a;
  std::string s = "'";
  for (char c : a) {
    if (c == '\'' || c == '\\') s += '\\';
    s += c;
  }
  return s + "'";
}

}  // namespace detail

inline std::string Ast::str() const {
  switch (kind) {
    case Kind::var: return name;
    case Kind::integer: return std::to_string(ival);
    case Kind::decimal: return name;
    case Kind::atom: return detail::quote_atom(name);
    case Kind::compound: break;
  }
  if (name == "." && args.size() == 2) {
    std::string s = "[" + args[0].str();
    const Ast* t = &args[1];
    while (t->is(".", 2)) {
      s += "," + t->args[0].str();
      t = &t->args[1];
    }
    if (!t->is("[]", 0)) s += "|" + t->str();
    return s + "]";
  }
  static const std::vector<std::string> infix = {",", ";", "->", ":-", "-->", "=", "\\=", "is", "<", ">", "=<",
                                                 ">=", "=:=", "=\\=", "+", "-", "*", "/", "//", "mod", ":", "==",
                                                 "\\=="};
  if (args.size() == 2 && std::find(infix.begin(), infix.end(), name) != infix.end()) {
    const bool word = std::isalpha(static_cast<unsigned char>(name[0]));
    const std::string op = name == "," ? ", " : (word ? " " + name + " " : name);
    return "(" + args[0].str() + op + args[1].str() + ")";
  }
  std::string s = detail::quote_atom(name) + "(";
  for (std::size_t i = 0; i < args.size(); ++i) s += (i ? "," : "") + args[i].str();
  return s + ")";
}

struct ClauseAst {
  Ast head;
  Ast body;  // `true` for facts
  SourcePos pos;
};

struct ProgramAst {
  std::vector<ClauseAst> clauses;
  std::vector<Ast> directives;  // bodies of `:- G.`
};

namespace detail {

struct Token {
  enum class Kind { atom, var, integer, decimal, punct, end };
  Kind kind = Kind::end;
  std::string text;
  std::int64_t ival = 0;
  SourcePos pos;
  bool layout_before = false;  // whitespace precedes the token
  bool quoted = false;
};

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  Token next() {
    bool layout = skip_layout();
    Token t;
    t.pos = pos_;
    t.layout_before = layout;
    if (i_ >= src_.size()) {
      t.kind = Token::Kind::end;
      return t;
    }
    char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c))) return number(t);
    if (c == '_' || std::isupper(static_cast<unsigned char>(c))) {
      t.kind = Token::Kind::var;
      t.text = ident();
      return t;
    }
    if (std::islower(static_cast<unsigned char>(c))) {
      t.kind = Token::Kind::atom;
      t.text = ident();
      return t;
    }
    if (c == '\'') {
      t.kind = Token::Kind::atom;
      t.quoted = true;
      t.text = quoted();
      return t;
    }
    if (c == '"') throw SyntaxError("double-quoted strings are not supported", pos_);
    if (std::string("()[]{},|").find(c) != std::string::npos) {
      advance();
      t.kind = Token::Kind::punct;
      t.text = std::string(1, c);
      return t;
    }
    if (c == '!' || c == ';') {
      advance();
      t.kind = Token::Kind::atom;
      t.text = std::string(1, c);
      return t;
    }
    const std::string sym = "+-*/\\^<>=~:.?@#&$";
    if (sym.find(c) != std::string::npos) {
      std::string s;
      while (i_ < src_.size() && sym.find(src_[i_]) != std::string::npos) {
        s += src_[i_];
        advance();
      }
      // A lone '.' followed by layout or end of input ends the clause.
      if (s == ".") {
        t.kind = Token::Kind::punct;
        t.text = "end";
        return t;
      }
      if (s.size() > 1 && s.back() == '.' && (i_ >= src_.size() || std::isspace(static_cast<unsigned char>(src_[i_])) ||
                                              src_[i_] == '%')) {
        // e.g. "X = Y." is lexed as "=" followed by "." only when separated;
        // here the symbol run swallowed the end token: give it back.
        s.pop_back();
        --i_;
        --pos_.column;
      }
      t.kind = Token::Kind::atom;
      t.text = s;
      return t;
    }
    throw SyntaxError(std::string("unexpected character '") + c + "'", pos_);
  }

 private:
  void advance() {
    if (src_[i_] == '\n') {
      ++pos_.line;
      pos_.column = 1;
    } else {
      ++pos_.column;
    }
    ++i_;
  }

  bool skip_layout() {
    bool any = false;
    for (;;) {
      if (i_ >= src_.size()) return any;
      char c = src_[i_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        advance();
        any = true;
      } else if (c == '%') {
        while (i_ < src_.size() && src_[i_] != '\n') advance();
        any = true;
      } else if (c == '/' && i_ + 1 < src_.size() && src_[i_ + 1] == '*') {
        SourcePos start = pos_;
        advance();
        advance();
        while (i_ + 1 < src_.size() && !(src_[i_] == '*' && src_[i_ + 1] == '/')) advance();
        if (i_ + 1 >= src_.size()) throw SyntaxError("unterminated block comment", start);
        advance();
        advance();
        any = true;
      } else {
        return any;
      }
    }
  }

  std::string ident() {
    std::string s;
    while (i_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[i_])) || src_[i_] == '_')) {
      s += src_[i_];
      advance();
    }
    return s;
  }

  std::string quoted() {
    SourcePos start = pos_;
    advance();
    std::string s;
    for (;;) {
      if (i_ >= src_.size()) throw SyntaxError("unterminated quoted atom", start);
      char c = src_[i_];
      advance();
      if (c == '\'') {
        if (i_ < src_.size() && src_[i_] == '\'') {
          s += '\'';
          advance();
          continue;
        }
        return s;
      }
      if (c == '\\' && i_ < src_.size()) {
        char e = src_[i_];
        advance();
        s += e == 'n' ? '\n' : e == 't' ? '\t' : e;
        continue;
      }
      s += c;
    }
  }

  Token number(Token t) {
    std::string digits;
    while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
      digits += src_[i_];
      advance();
    }
    bool frac = i_ + 1 < src_.size() && src_[i_] == '.' && std::isdigit(static_cast<unsigned char>(src_[i_ + 1]));
    if (frac) {
      digits += '.';
      advance();
      while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
        digits += src_[i_];
        advance();
      }
    }
    if (i_ < src_.size() && (src_[i_] == 'e' || src_[i_] == 'E') && frac) {
      std::size_t save = i_;
      SourcePos save_pos = pos_;
      std::string exp = "e";
      advance();
      if (i_ < src_.size() && (src_[i_] == '+' || src_[i_] == '-')) {
        exp += src_[i_];
        advance();
      }
      if (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
        while (i_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[i_]))) {
          exp += src_[i_];
          advance();
        }
        digits += exp;
      } else {
        i_ = save;
        pos_ = save_pos;
      }
    }
    if (frac) {
      t.kind = Token::Kind::decimal;
      t.text = digits;
    } else {
      t.kind = Token::Kind::integer;
      try {
        t.ival = std::stoll(digits);
      } catch (const std::out_of_range&) {
        throw SyntaxError("integer out of range", t.pos);
      }
    }
    return t;
  }

  const std::string& src_;
  std::size_t i_ = 0;
  SourcePos pos_;
};

struct OpDef {
  int prec;
  enum Type { xfx, xfy, yfx, fy, fx } type;
};

inline const std::map<std::string, OpDef>& infix_ops() {
  static const std::map<std::string, OpDef> ops = {
      {":-", {1200, OpDef::xfx}}, {"-->", {1200, OpDef::xfx}}, {";", {1100, OpDef::xfy}},
      {"|", {1100, OpDef::xfy}},  {"->", {1050, OpDef::xfy}},  {",", {1000, OpDef::xfy}},
      {"=", {700, OpDef::xfx}},   {"\\=", {700, OpDef::xfx}},  {"==", {700, OpDef::xfx}},
      {"\\==", {700, OpDef::xfx}}, {"is", {700, OpDef::xfx}},  {"<", {700, OpDef::xfx}},
      {">", {700, OpDef::xfx}},   {"=<", {700, OpDef::xfx}},   {">=", {700, OpDef::xfx}},
      {"=:=", {700, OpDef::xfx}}, {"=\\=", {700, OpDef::xfx}}, {"@<", {700, OpDef::xfx}},
      {"@>", {700, OpDef::xfx}},  {"=..", {700, OpDef::xfx}},  {"+", {500, OpDef::yfx}},
      {"-", {500, OpDef::yfx}},   {"*", {400, OpDef::yfx}},    {"/", {400, OpDef::yfx}},
      {"//", {400, OpDef::yfx}},  {"mod", {400, OpDef::yfx}},  {":", {200, OpDef::xfy}},
      {"^", {200, OpDef::xfy}},   {"**", {200, OpDef::xfx}},
  };
  return ops;
}

inline const std::map<std::string, OpDef>& prefix_ops() {
  static const std::map<std::string, OpDef> ops = {
      {":-", {1200, OpDef::fx}}, {"\\+", {900, OpDef::fy}}, {"-", {200, OpDef::fy}}, {"+", {200, OpDef::fy}},
      {"table", {1150, OpDef::fx}},
  };
  return ops;
}

class Parser {
 public:
  explicit Parser(const std::string& src) : lex_(src) { tok_ = lex_.next(); }

  bool at_end() const { return tok_.kind == Token::Kind::end; }

  /// Reads one clause term terminated by '.'; variable names are scoped
  /// to the clause.
  Ast clause() {
    Ast t = parse(1200);
    if (!(tok_.kind == Token::Kind::punct && tok_.text == "end"))
      throw SyntaxError("operator expected, got '" + tok_.text + "'", tok_.pos);
    tok_ = lex_.next();
    return t;
  }

 private:
  void advance() { tok_ = lex_.next(); }

  bool is_punct(const char* p) const { return tok_.kind == Token::Kind::punct && tok_.text == p; }

  void expect(const char* p) {
    if (!is_punct(p)) throw SyntaxError(std::string("expected '") + p + "'", tok_.pos);
    advance();
  }

  bool term_start() const {
    switch (tok_.kind) {
      case Token::Kind::end: return false;
      case Token::Kind::punct: return tok_.text == "(" || tok_.text == "[" || tok_.text == "{";
      default: return true;
    }
  }

  Ast parse(int max_prec) {
    auto [left, left_prec] = primary(max_prec);
    return infix(std::move(left), left_prec, max_prec);
  }

  Ast infix(Ast left, int left_prec, int max_prec) {
    for (;;) {
      std::string name;
      if (tok_.kind == Token::Kind::atom && !tok_.quoted) name = tok_.text;
      else if (tok_.kind == Token::Kind::punct && (tok_.text == "," || tok_.text == "|")) name = tok_.text;
      else return left;
      auto it = infix_ops().find(name);
      if (it == infix_ops().end()) return left;
      const OpDef op = it->second;
      if (op.prec > max_prec) return left;
      int left_max = op.type == OpDef::yfx ? op.prec : op.prec - 1;
      int right_max = op.type == OpDef::xfy ? op.prec : op.prec - 1;
      if (left_prec > left_max) return left;
      SourcePos pos = tok_.pos;
      advance();
      Ast right = parse(right_max);
      if (name == "|") name = ";";
      left = Ast::compound(name, {std::move(left), std::move(right)}, pos);
      left_prec = op.prec;
    }
  }

  std::pair<Ast, int> primary(int max_prec) {
    Token t = tok_;
    switch (t.kind) {
      case Token::Kind::end: throw SyntaxError("unexpected end of input", t.pos);
      case Token::Kind::integer: advance(); return {Ast::integer(t.ival, t.pos), 0};
      case Token::Kind::decimal: advance(); return {Ast{Ast::Kind::decimal, t.text, 0, {}, t.pos}, 0};
      case Token::Kind::var: advance(); return {Ast::var(t.text, t.pos), 0};
      case Token::Kind::punct: return {punct_term(), 0};
      case Token::Kind::atom: break;
    }
    advance();
    if (is_punct("(") && !tok_.layout_before) {
      advance();
      std::vector<Ast> args;
      args.push_back(parse(999));
      while (is_punct(",")) {
        advance();
        args.push_back(parse(999));
      }
      expect(")");
      return {Ast::compound(t.text, std::move(args), t.pos), 0};
    }
    if (t.text == "-" && !t.quoted && (tok_.kind == Token::Kind::integer || tok_.kind == Token::Kind::decimal) &&
        !tok_.layout_before) {
      Token n = tok_;
      advance();
      if (n.kind == Token::Kind::integer) return {Ast::integer(-n.ival, t.pos), 0};
      return {Ast{Ast::Kind::decimal, "-" + n.text, 0, {}, t.pos}, 0};
    }
    if (!t.quoted) {
      auto it = prefix_ops().find(t.text);
      if (it != prefix_ops().end() && term_start() && !is_infix_here()) {
        const OpDef op = it->second;
        int prec = op.prec;
        if (prec > max_prec) prec = 999;
        int arg_max = op.type == OpDef::fy ? prec : prec - 1;
        Ast arg = parse(arg_max);
        return {Ast::compound(t.text, {std::move(arg)}, t.pos), prec};
      }
      auto inf = infix_ops().find(t.text);
      int prec = (it != prefix_ops().end()) ? it->second.prec : (inf != infix_ops().end() ? inf->second.prec : 0);
      return {Ast::atom(t.text, t.pos), prec > max_prec ? 0 : prec};
    }
    return {Ast::atom(t.text, t.pos), 0};
  }

  bool is_infix_here() const {
    if (tok_.kind == Token::Kind::atom && !tok_.quoted) {
      auto it = infix_ops().find(tok_.text);
      return it != infix_ops().end() && !prefix_ops().count(tok_.text) && tok_.text != "-" && tok_.text != "+";
    }
    return tok_.kind == Token::Kind::punct && (tok_.text == "," || tok_.text == "|");
  }

  Ast punct_term() {
    SourcePos pos = tok_.pos;
    if (is_punct("(")) {
      advance();
      Ast t = parse(1200);
      expect(")");
      return t;
    }
    if (is_punct("[")) {
      advance();
      if (is_punct("]")) {
        advance();
        return Ast::atom("[]", pos);
      }
      std::vector<Ast> items;
      items.push_back(parse(999));
      while (is_punct(",")) {
        advance();
        items.push_back(parse(999));
      }
      Ast tail = Ast::atom("[]", pos);
      if (is_punct("|")) {
        advance();
        tail = parse(999);
      }
      expect("]");
      return Ast::list(std::move(items), std::move(tail));
    }
    if (is_punct("{")) {
      advance();
      if (is_punct("}")) {
        advance();
        return Ast::atom("{}", pos);
      }
      Ast t = parse(1200);
      expect("}");
      return Ast::compound("{}", {std::move(t)}, pos);
    }
    throw SyntaxError("unexpected '" + tok_.text + "'", pos);
  }

  Lexer lex_;
  Token tok_;
};

/// Standard difference-list translation of a grammar body.
class DcgTranslator {
 public:
  Ast rule(const Ast& head, const Ast& body, SourcePos pos) {
    Ast s0 = fresh(pos), s = fresh(pos);
    Ast h = head;
    if (h.is(",", 2)) throw SyntaxError("pushback in grammar rules is not supported", pos);
    return Ast::compound(":-", {nonterminal(h, s0, s), body_of(body, s0, s)}, pos);
  }

  Ast body_of(const Ast& b, const Ast& s0, const Ast& s) {
    if (b.kind == Ast::Kind::var) return Ast::compound("phrase", {b, s0, s}, b.pos);
    if (b.is(",", 2)) {
      Ast mid = fresh(b.pos);
      return Ast::compound(",", {body_of(b.args[0], s0, mid), body_of(b.args[1], mid, s)}, b.pos);
    }
    if (b.is(";", 2))
      return Ast::compound(";", {body_of(b.args[0], s0, s), body_of(b.args[1], s0, s)}, b.pos);
    if (b.is("->", 2)) {
      Ast mid = fresh(b.pos);
      return Ast::compound("->", {body_of(b.args[0], s0, mid), body_of(b.args[1], mid, s)}, b.pos);
    }
    if (b.is("\\+", 1)) {
      Ast ignored = fresh(b.pos);
      return Ast::compound(",", {Ast::compound("\\+", {body_of(b.args[0], s0, ignored)}), eq(s0, s)}, b.pos);
    }
    if (b.is("!", 0)) return Ast::compound(",", {b, eq(s0, s)}, b.pos);
    if (b.is("[]", 0)) return eq(s0, s);
    if (b.is("{}", 1)) return Ast::compound(",", {b.args[0], eq(s0, s)}, b.pos);
    if (b.is(".", 2)) {
      std::vector<Ast> items;
      const Ast* t = &b;
      while (t->is(".", 2)) {
        items.push_back(t->args[0]);
        t = &t->args[1];
      }
      if (!t->is("[]", 0)) throw SyntaxError("terminal list must be proper", b.pos);
      return eq(s0, Ast::list(std::move(items), s));
    }
    if (b.is_callable()) return nonterminal(b, s0, s);
    throw SyntaxError("invalid grammar body " + b.str(), b.pos);
  }

 private:
  Ast fresh(SourcePos pos) { return Ast::var("_S" + std::to_string(counter_++), pos); }
  static Ast eq(const Ast& a, const Ast& b) { return Ast::compound("=", {a, b}, a.pos); }
  static Ast nonterminal(const Ast& t, const Ast& s0, const Ast& s) {
    Ast r = t;
    if (r.kind == Ast::Kind::atom) {
      r.kind = Ast::Kind::compound;
      r.args.clear();
    }
    r.args.push_back(s0);
    r.args.push_back(s);
    return r;
  }

  int counter_ = 0;
};

}  // namespace detail

/// Parses program text into clauses and directives. Grammar rules are
/// expanded into ordinary clauses; `module:Goal` qualifiers are dropped.
inline ProgramAst parse_program_text(const std::string& text) {
  ProgramAst prog;
  detail::Parser parser(text);
  detail::DcgTranslator dcg;
  std::function<Ast(const Ast&)> strip = [&](const Ast& t) -> Ast {
    if (t.is(":", 2) && t.args[0].kind == Ast::Kind::atom) return strip(t.args[1]);
    if (t.kind != Ast::Kind::compound) return t;
    Ast r = t;
    for (auto& a : r.args) a = strip(a);
    return r;
  };
  while (!parser.at_end()) {
    Ast t = strip(parser.clause());
    if (t.is(":-", 1)) {
      prog.directives.push_back(t.args[0]);
      continue;
    }
    if (t.is("-->", 2)) t = dcg.rule(t.args[0], t.args[1], t.pos);
    if (t.is(":-", 2)) {
      if (!t.args[0].is_callable()) throw SyntaxError("clause head must be callable", t.pos);
      prog.clauses.push_back({t.args[0], t.args[1], t.pos});
    } else {
      if (!t.is_callable()) throw SyntaxError("clause must be callable: " + t.str(), t.pos);
      prog.clauses.push_back({t, Ast::atom("true"), t.pos});
    }
  }
  return prog;
}

}  // namespace osdd
