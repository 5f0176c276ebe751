#include <gtest/gtest.h>

#include <algorithm>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "osdd/engine.hpp"
#include "osdd/inference.hpp"
#include "osdd/oracle.hpp"
#include "osdd/text.hpp"

using namespace osdd;

namespace {

std::string program_path(const char* name) { return std::string(OSDD_SOURCE_DIR) + "/programs/" + name; }

const Program& birthday() {
  static const Program p = Program::load(program_path("birthday.pl"));
  return p;
}

const Program& palindrome() {
  static const Program p = Program::load(program_path("palindrome.pl"));
  return p;
}

std::vector<std::string> transformed(const std::string& text) {
  std::vector<std::string> out;
  for (const auto& c : Program::parse(text).transform().clauses) out.push_back(clause_str(c));
  return out;
}

}  // namespace

TEST(Parse, BirthdayHasTwoPredicatesAndAUniformSwitch) {
  const Program& p = birthday();
  EXPECT_EQ(p.predicates(), (std::vector<std::string>{"same_birthday/1", "person/2"}));
  ASSERT_EQ(p.switches().size(), 1u);
  const SwitchDecl& b = p.switches().front();
  EXPECT_EQ(b.name, "b");
  EXPECT_EQ(b.domain->size(), 365u);
  EXPECT_TRUE(b.dist.is_uniform());
  EXPECT_EQ(b.prob(GroundTerm(17)), Rational(1, 365));
}

TEST(Parse, PalindromeExpandsGrammarRules) {
  const Program& p = palindrome();
  EXPECT_TRUE(p.defines("palindrome/1"));
  ASSERT_TRUE(p.defines("palindrome/2"));
  EXPECT_EQ(p.clauses_of("palindrome/2").size(), 3u);
  EXPECT_EQ(p.switch_for(GroundTerm::atom("flip")).prob(GroundTerm::atom("a")), Rational(1, 2));
}

TEST(Parse, EmptyInputIsAnEmptyProgram) {
  Program p = Program::parse("");
  EXPECT_TRUE(p.clauses().empty());
  EXPECT_TRUE(p.switches().empty());
  Program c = Program::parse("% only a comment\n/* and a block */\n");
  EXPECT_TRUE(c.clauses().empty());
}

TEST(Parse, SyntaxErrorsCarryLineAndColumn) {
  try {
    Program::parse("p :- q.\nr :- s(.\n");
    FAIL() << "expected a syntax error";
  } catch (const SyntaxError& e) {
    EXPECT_EQ(e.pos().line, 2);
    EXPECT_GT(e.pos().column, 1);
  }
}

TEST(Parse, RejectsBadDeclarations) {
  EXPECT_THROW(Program::parse(":- frobnicate(x).\n"), Error);
  EXPECT_THROW(Program::parse("p :- msw(coin, 1, X).\n"), Error);
  EXPECT_THROW(Program::parse("values(c, [h, t]).\nset_sw(c, [0.5, 0.6]).\n"), Error);
  EXPECT_THROW(Program::parse("values(c, [h, t]).\nset_sw(c, [0.5]).\n"), Error);
}

TEST(Parse, DistributionsAcceptDecimalsFractionsAndRanges) {
  Program p = Program::parse(
      "values(c, [h, t]).\nset_sw(c, [0.25, 3/4]).\n"
      ":- set_sw(d(_), uniform(1, 6)).\n");
  const SwitchDecl& c = p.switch_for(GroundTerm::atom("c"));
  EXPECT_EQ(c.prob(GroundTerm::atom("t")), Rational(3, 4));
  EXPECT_FALSE(c.dist.is_uniform());
  const SwitchDecl& d = p.switch_for(GroundTerm::atom("d"));
  EXPECT_EQ(d.domain->size(), 6u);
  EXPECT_EQ(d.prob(GroundTerm(6)), Rational(1, 6));
}

TEST(Parse, DecimalsWithLeadingZerosAreExact) {
  EXPECT_EQ(parse_decimal("0.25"), Rational(1, 4));
  EXPECT_EQ(parse_decimal("0.05"), Rational(1, 20));
  EXPECT_EQ(parse_decimal("007"), Rational(7));
  EXPECT_EQ(parse_decimal("-1.5e-1"), Rational(-3, 20));
  EXPECT_EQ(parse_decimal("0"), Rational(0));
}

TEST(Transform, FactsPassTheDiagramThrough) {
  EXPECT_EQ(transformed("person(3,1).\n"), (std::vector<std::string>{"person(3,1,O1,O1)."}));
}

TEST(Transform, BodiesAreThreadedLeftToRight) {
  const auto t = transformed("p :- q, r.\nq.\nr.\n");
  EXPECT_EQ(t.front(), "p(O1,O3) :- q(O1,O2), r(O2,O3).");
}

TEST(Transform, SingleGoalBodyThreadsOnePair) {
  const auto t = transformed("r :- q.\nq.\n");
  EXPECT_EQ(t.front(), "r(O1,O2) :- q(O1,O2).");
}

TEST(Transform, MswAndConstraintsBecomeBuiltinsAndArithmeticIsUnchanged) {
  const auto t = transformed("values(s, [a, b]).\nq :- msw(s, 1, X), X = a, Y is 1 + 2, Y > 2.\n");
  EXPECT_EQ(t.front(), "q(O1,O3) :- msw(s,1,X,O1,O2), constraint((X=a),O2,O3), (Y is (1+2)), (Y>2).");
}

TEST(Transform, EveryUserPredicateIsTabledWithOrCombination) {
  ProgramAst t = palindrome().transform();
  ASSERT_EQ(t.directives.size(), palindrome().predicates().size());
  for (const auto& d : t.directives) {
    ASSERT_TRUE(d.is("table", 1));
    const Ast& pattern = d.args[0];
    EXPECT_EQ(pattern.args.back().str(), "lattice((or/3))");
  }
}

TEST(Transform, UserLiteralsGainTwoArguments) {
  const Program& p = palindrome();
  std::set<std::string> original(p.predicates().begin(), p.predicates().end());
  std::function<void(const Ast&)> check = [&](const Ast& g) {
    if (g.is(",", 2) || g.is(";", 2) || g.is("->", 2)) {
      check(g.args[0]);
      check(g.args[1]);
      return;
    }
    if (g.kind != Ast::Kind::compound && g.kind != Ast::Kind::atom) return;
    const bool user_now = original.count(g.name + "/" + std::to_string(g.arity()));
    const bool user_before = g.arity() >= 2 && original.count(g.name + "/" + std::to_string(g.arity() - 2));
    if (g.name == "msw" || g.name == "constraint" || g.is("is", 2)) return;
    EXPECT_TRUE(user_before || !user_now) << g.str();
  };
  for (const auto& c : p.transform().clauses) {
    EXPECT_TRUE(original.count(c.head.name + "/" + std::to_string(c.head.arity() - 2))) << c.head.str();
    check(c.body);
  }
}

TEST(Evaluate, BirthdayThreeHasTheFigureShape) {
  Engine e(birthday());
  Osdd d = e.evaluate("same_birthday(3)");
  EXPECT_TRUE(validate(d).empty());
  EXPECT_EQ(internal_node_count(d), 3u);
  EXPECT_EQ(exact_prob<Rational>(d, decls_of(birthday())), Rational(1093, 133225));
  ASSERT_FALSE(d.is_leaf());
  EXPECT_EQ(d.si().instance, GroundTerm(1));
  EXPECT_EQ(d.edge_count(), 1u);
  EXPECT_TRUE(d.label(0).empty());
}

TEST(Evaluate, PalindromeEvidenceSixHasSixNodesAndThreeConstrainedLevels) {
  Engine e(palindrome());
  Osdd d = e.evaluate("evidence(6)");
  EXPECT_TRUE(validate(d).empty());
  EXPECT_EQ(internal_node_count(d), 6u);
  std::size_t constrained = 0;
  for_each_node(d, [&](const Osdd& n) {
    if (n.is_leaf()) return;
    bool zero = false;
    for (std::size_t i = 0; i < n.edge_count(); ++i) zero = zero || n.child(i).is_zero();
    constrained += zero;
  });
  EXPECT_EQ(constrained, 3u);
  EXPECT_EQ(exact_prob<Rational>(d, decls_of(palindrome())), Rational(1, 8));
}

TEST(Evaluate, FalseBodyGivesTheZeroLeaf) {
  Program p = Program::parse("values(c, [h, t]).\nq :- msw(c, 1, X), X = h, X = t.\nr :- fail.\n");
  Engine e(p);
  EXPECT_TRUE(e.evaluate("q").is_zero());
  EXPECT_TRUE(e.evaluate("r").is_zero());
}

TEST(Evaluate, DeterministicTrueQueryGivesTheOneLeaf) {
  Program p = Program::parse("q :- X is 2 + 3, X > 4.\n");
  Engine e(p);
  EXPECT_TRUE(e.evaluate("q").is_one());
}

TEST(Evaluate, RepeatedQueriesInternToTheSameDiagram) {
  Engine e(palindrome());
  Osdd a = e.evaluate("query(6,2)");
  Osdd b = e.evaluate("query(6,2)");
  EXPECT_EQ(a, b);
}

TEST(Evaluate, ClauseOrderDoesNotChangeTheDiagram) {
  const char* clauses[] = {
      "values(c, [h, t, e]).",
      "q :- msw(c, 1, X), msw(c, 2, Y), X = Y.",
      "q :- msw(c, 1, h).",
      "q :- msw(c, 2, X), X \\= e, msw(c, 3, X).",
  };
  std::vector<int> order{1, 2, 3};
  Program base = Program::parse(std::string(clauses[0]) + "\n" + clauses[1] + "\n" + clauses[2] + "\n" + clauses[3]);
  Engine reference(base);
  Osdd expected = reference.evaluate("q");
  while (std::next_permutation(order.begin(), order.end())) {
    std::string text = std::string(clauses[0]) + "\n";
    for (int i : order) text += std::string(clauses[i]) + "\n";
    Program p = Program::parse(text);
    Engine e(p);
    e.share_variables(reference);
    EXPECT_EQ(e.evaluate("q"), expected) << text;
  }
}

TEST(Evaluate, ErrorsForBadQueries) {
  Engine e(palindrome());
  EXPECT_THROW(e.evaluate("evidence(N)"), Error);
  EXPECT_THROW(e.evaluate("undefined_predicate(1)"), Error);
  Program p = Program::parse("values(c, [h, t]).\nq :- msw(c, K, X).\n");
  Engine e2(p);
  EXPECT_THROW(e2.evaluate("q"), Error);
  Program deep = Program::parse("loop(N) :- M is N + 1, loop(M).\n");
  Engine e3(deep, EngineOptions{false, 1000, 0});
  EXPECT_THROW(e3.evaluate("loop(0)"), LimitError);
}

TEST(Evaluate, MatchesTheWorldEnumerationOracle) {
  const std::vector<std::pair<const Program*, std::string>> cases = {
      {&palindrome(), "evidence(2)"}, {&palindrome(), "evidence(5)"}, {&palindrome(), "query(6,2)"},
      {&palindrome(), "query(5,0)"},  {&birthday(), "same_birthday(1)"}, {&birthday(), "same_birthday(2)"},
  };
  for (const auto& [p, q] : cases) {
    Engine e(*p);
    Osdd d = e.evaluate(q);
    EXPECT_EQ(exact_prob<Rational>(d, decls_of(*p)), brute_force_prob(*p, q)) << q;
  }
}

TEST(Evaluate, RandomProgramsMatchTheOracle) {
  for (std::uint64_t seed = 1000; seed < 1060; ++seed) {
    Program p = Program::parse(gen_random_program(seed));
    Engine e(p);
    Osdd d = e.evaluate("q");
    EXPECT_TRUE(validate(d).empty()) << "seed " << seed;
    EXPECT_EQ(exact_prob<Rational>(d, decls_of(p)), brute_force_prob(p, "q")) << "seed " << seed;
  }
}

TEST(Evaluate, TablingDoesNotChangeTheResult) {
  for (const char* q : {"evidence(8)", "query(8,4)"}) {
    Engine tabled(palindrome());
    Engine plain(palindrome(), EngineOptions{false, 200000, 0});
    plain.share_variables(tabled);
    Osdd a = tabled.evaluate(q);
    Osdd b = plain.evaluate(q);
    plain.share_variables(tabled);
    EXPECT_EQ(exact_prob<Rational>(a, decls_of(palindrome())), exact_prob<Rational>(b, decls_of(palindrome()))) << q;
  }
}

TEST(Text, RoundTripKeepsTextAndProbability) {
  for (const char* q : {"evidence(6)", "query(6,3)"}) {
    Engine e(palindrome());
    Osdd d = e.evaluate(q);
    const std::string t = osdd_text(d, decls_of(palindrome()));
    OsddFile f = read_osdd(t);
    EXPECT_EQ(osdd_text(f.root, f.decls()), t);
    EXPECT_EQ(exact_prob<Rational>(f.root, f.decls()), exact_prob<Rational>(d, decls_of(palindrome())));
  }
  OsddFile zero = read_osdd("root 0\n");
  EXPECT_TRUE(zero.root.is_zero());
}

TEST(Text, ReadsHandWrittenDiagrams) {
  OsddFile f = read_osdd(
      "% a pair of coins that agree\n"
      "switch c [h, t] [1/3, 2/3]\n"
      "n1 = (c,2) Y [ Y = X : 1 ; Y != X : 0 ]\n"
      "n2 = (c,1) X [ true : n1 ]\n"
      "root n2\n");
  EXPECT_TRUE(validate(f.root).empty());
  EXPECT_EQ(exact_prob<Rational>(f.root, f.decls()), Rational(1, 9) + Rational(4, 9));
}

TEST(Text, ReportsMalformedInput) {
  EXPECT_THROW(read_osdd("switch c [h, t] uniform\n"), SyntaxError);
  EXPECT_THROW(read_osdd("n1 = (c,1) X [ true : 1 ]\nroot n1\n"), SyntaxError);
  EXPECT_THROW(read_osdd("switch c [h, t] uniform\nn1 = (c,1) X [ Z = h : 1 ]\nroot n1\n"), SyntaxError);
  EXPECT_THROW(read_osdd("switch c [h, t] [1/2]\nroot 1\n"), SyntaxError);
}

TEST(Text, DotOutputListsNodesAndDashesZeroEdges) {
  Engine e(palindrome());
  Osdd d = e.evaluate("evidence(4)");
  std::ostringstream os;
  write_dot(os, d);
  const std::string dot = os.str();
  EXPECT_EQ(dot.rfind("digraph osdd {", 0), 0u);
  std::size_t dashed = 0;
  for (std::size_t at = dot.find("style=dashed"); at != std::string::npos; at = dot.find("style=dashed", at + 1))
    ++dashed;
  EXPECT_EQ(dashed, 2u);
  EXPECT_NE(dot.find("zero [label=\"0\""), std::string::npos);
  EXPECT_NE(dot.find("one [label=\"1\""), std::string::npos);
  std::ostringstream leaf;
  write_dot(leaf, Osdd::one());
  EXPECT_EQ(leaf.str(), "digraph osdd {\n  node [shape=box];\n  one [label=\"1\", shape=circle];\n}\n");
}
