#include <gtest/gtest.h>

#include <random>

#include "gen.hpp"
#include "osdd/mdd.hpp"

using namespace osdd;

namespace {

using AC = AtomicConstraint;
using Edges = std::vector<std::pair<ConstraintFormula, Osdd>>;

SwitchInstance si(const char* s, std::int64_t k) { return {GroundTerm::atom(s), k}; }
GroundTerm A(const char* s) { return GroundTerm::atom(s); }

Osdd sorted_node(SwitchInstance s, Var out, Edges edges) {
  std::sort(edges.begin(), edges.end(),
            [](const auto& a, const auto& b) { return key_less(canonical_key(a.first), canonical_key(b.first)); });
  return Osdd::node(std::move(s), std::move(out), std::move(edges));
}

struct Birthday {
  DomainRef days = make_int_domain("day", 1, 365);
  Var x1 = Var::fresh("X1", days), x2 = Var::fresh("X2", days), x3 = Var::fresh("X3", days);

  Osdd figure() const {
    Osdd n3 = sorted_node(si("b", 3), x3,
                          {{{AC::eq(x3, x1)}, Osdd::one()},
                           {{AC::neq(x3, x1), AC::eq(x3, x2)}, Osdd::one()},
                           {{AC::neq(x3, x1), AC::neq(x3, x2)}, Osdd::zero()}});
    Osdd n2 = sorted_node(si("b", 2), x2, {{{AC::eq(x2, x1)}, Osdd::one()}, {{AC::neq(x2, x1)}, n3}});
    return Osdd::node(si("b", 1), x1, {{{}, n2}});
  }
};

Osdd pair_equal(const char* sw, std::int64_t i, std::int64_t j, const DomainRef& dom) {
  auto xi = Var::fresh("X" + std::to_string(i), dom), xj = Var::fresh("X" + std::to_string(j), dom);
  return apply_constraint(chain({{si(sw, i), xi}, {si(sw, j), xj}}), AC::eq(xj, xi));
}

// The improper example: Z's labels imply X = Y or X != Y, which the path
// above Z does not state.
struct Improper {
  DomainRef dom = make_domain("t", {A("a"), A("b"), A("c")});
  Var x = Var::fresh("X", dom), y = Var::fresh("Y", dom), z = Var::fresh("Z", dom), w = Var::fresh("W", dom);
  Osdd psi1 = Osdd::node(si("s", 4), w, {{{AC::eq(w, A("a"))}, Osdd::one()}, {{AC::neq(w, A("a"))}, Osdd::zero()}});
  Osdd psi2 = Osdd::node(si("s", 4), w, {{{AC::eq(w, A("b"))}, Osdd::one()}, {{AC::neq(w, A("b"))}, Osdd::zero()}});
  Osdd psi3 = Osdd::one();

  Osdd before() const {
    Osdd nz = sorted_node(si("s", 3), z,
                          {{{AC::eq(z, x), AC::eq(z, y)}, psi1},
                           {{AC::eq(z, x), AC::neq(z, y)}, psi2},
                           {{AC::neq(z, x), AC::eq(z, y)}, psi3},
                           {{AC::neq(z, x), AC::neq(z, y)}, Osdd::zero()}});
    return Osdd::node(si("s", 1), x, {{{}, Osdd::node(si("s", 2), y, {{{}, nz}})}});
  }

  Osdd after() const {
    Osdd z1 = Osdd::node(si("s", 3), z,
                         {{{AC::eq(z, x), AC::eq(z, y)}, psi1}, {{AC::neq(z, x), AC::neq(z, y)}, Osdd::zero()}});
    Osdd z2 = Osdd::node(si("s", 3), z,
                         {{{AC::eq(z, x), AC::neq(z, y)}, psi2},
                          {{AC::neq(z, x), AC::eq(z, y)}, psi3},
                          {{AC::neq(z, x), AC::neq(z, y)}, Osdd::zero()}});
    Osdd ny = Osdd::node(si("s", 2), y, {{{AC::eq(y, x)}, z1}, {{AC::neq(y, x)}, z2}});
    return Osdd::node(si("s", 1), x, {{{}, ny}});
  }
};

// Renames every output variable to one shared variable per switch instance,
// so diagrams built from different variables compare by identity.
Osdd normalize_vars(const Osdd& d) {
  static std::map<std::pair<SwitchInstance, const TypeDomain*>, Var> canon;
  std::map<SwitchInstance, Var> found;
  for_each_node(d, [&](const Osdd& n) {
    if (!n.is_leaf()) found.emplace(n.si(), n.out());
  });
  std::map<Var, Var> sub;
  for (const auto& [s, v] : found) {
    auto key = std::make_pair(s, v.domain().get());
    auto it = canon.find(key);
    if (it == canon.end()) it = canon.emplace(key, Var::fresh("C" + s.str(), v.domain())).first;
  }
  for_each_node(d, [&](const Osdd& n) {
    if (!n.is_leaf()) sub.emplace(n.out(), canon.at({n.si(), n.out().domain().get()}));
  });
  return canonicalize(rename_vars(d, sub));
}

}  // namespace

TEST(Validate, LeafIsProper) { EXPECT_TRUE(validate(Osdd::one()).empty()); }

TEST(Validate, BirthdayFigureIsProper) {
  Birthday b;
  auto v = validate(b.figure());
  EXPECT_TRUE(v.empty()) << (v.empty() ? "" : v[0].detail);
}

TEST(Validate, ImproperExampleHasOneExplicitConstraintViolationAtZ) {
  Improper ex;
  auto v = validate(ex.before());
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].condition, Condition::explicit_constraints);
  EXPECT_EQ(v[0].path, "/0/0");
}

TEST(Validate, ReportsMutualExclusionAndCompleteness) {
  auto dom = make_domain("t", {A("a"), A("b")});
  auto x = Var::fresh("X", dom);
  auto overlap = Osdd::node(si("s", 1), x, {{{}, Osdd::one()}, {{AC::eq(x, A("a"))}, Osdd::zero()}});
  auto v = validate(overlap);
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(std::any_of(v.begin(), v.end(), [](const auto& r) { return r.condition == Condition::mutual_exclusion; }));
  auto gap = Osdd::node(si("s", 1), x, {{{AC::eq(x, A("a"))}, Osdd::one()}});
  v = validate(gap);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].condition, Condition::completeness);
}

TEST(Validate, ReportsUrgencyAndOrdering) {
  auto dom = make_domain("t", {A("a"), A("b")});
  auto x = Var::fresh("X", dom), y = Var::fresh("Y", dom);
  auto late = Osdd::node(si("s", 2), y, {{{}, Osdd::one()}});
  auto root = Osdd::node(si("s", 1), x, {{{AC::eq(x, A("a"))}, late}, {{AC::neq(x, A("a"))}, Osdd::zero()}});
  auto bad_order = Osdd::node(si("s", 2), y, {{{}, Osdd::node(si("s", 1), x, {{{}, Osdd::one()}})}});
  auto v = validate(bad_order);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].condition, Condition::ordering);
  auto early = Osdd::node(si("s", 1), x, {{{AC::eq(y, A("a"))}, late}, {{AC::neq(y, A("a"))}, Osdd::zero()}});
  v = validate(early);
  ASSERT_FALSE(v.empty());
  EXPECT_EQ(v[0].condition, Condition::urgency);
  EXPECT_TRUE(validate(root).empty());
}

TEST(ToProper, ImproperExampleBecomesProperAndGroundsLikeTheRewrite) {
  Improper ex;
  Osdd fixed = to_proper(ex.before());
  EXPECT_TRUE(validate(fixed).empty());
  EXPECT_TRUE(validate(canonicalize(ex.after())).empty());
  auto g = mdd_reduce(ground(fixed));
  EXPECT_TRUE(mdd_equal(g, mdd_reduce(ground(ex.after()))));
  EXPECT_TRUE(mdd_equal(g, mdd_reduce(ground(ex.before()))));
  // The split happens at Y.
  Osdd y = fixed.child(0);
  ASSERT_FALSE(y.is_leaf());
  EXPECT_EQ(y.si(), si("s", 2));
  EXPECT_EQ(y.edge_count(), 2u);
}

TEST(ToProper, ProperInputIsAFixpoint) {
  Birthday b;
  Osdd c = canonicalize(b.figure());
  EXPECT_EQ(to_proper(c), c);
}

TEST(Oplus, DisjunctionOfPairDiagrams) {
  Birthday b;
  Osdd a12 = pair_equal("b", 1, 2, b.days);
  Osdd a13 = pair_equal("b", 1, 3, b.days);
  Osdd both = disj(a12, a13);
  EXPECT_TRUE(validate(both).empty());
  // Expected: (b,1)[true : (b,2)[X2=X1 : 1 ; X2!=X1 : (b,3)[X3=X1 : 1 ; X3!=X1 : 0]]]
  Var x1 = both.out();
  Var x2 = both.child(0).out();
  Var x3 = Var::fresh("X3", b.days);
  Osdd n3 = Osdd::node(si("b", 3), x3, {{{AC::eq(x3, x1)}, Osdd::one()}, {{AC::neq(x3, x1)}, Osdd::zero()}});
  Osdd n2 = Osdd::node(si("b", 2), x2, {{{AC::eq(x2, x1)}, Osdd::one()}, {{AC::neq(x2, x1)}, n3}});
  Osdd expect = Osdd::node(si("b", 1), x1, {{{}, n2}});
  EXPECT_EQ(normalize_vars(both), normalize_vars(expect)) << to_string(both);

  Osdd all = disj(both, pair_equal("b", 2, 3, b.days));
  EXPECT_TRUE(validate(all).empty());
  EXPECT_EQ(normalize_vars(all), normalize_vars(b.figure())) << to_string(all);
}

TEST(Oplus, LeafIdentities) {
  Birthday b;
  Osdd d = pair_equal("b", 1, 2, b.days);
  EXPECT_EQ(conj(Osdd::one(), d), d);
  EXPECT_EQ(conj(Osdd::zero(), d), Osdd::zero());
  EXPECT_EQ(disj(Osdd::zero(), d), d);
  EXPECT_EQ(disj(Osdd::one(), d), Osdd::one());
}

TEST(Oplus, ConjunctionCanBecomeImproperAndIsRepaired) {
  gen::Universe u(3, 3);
  // X1 = X3 and X2 = X3 together imply X1 = X2 above (s,3).
  Osdd c = conj(u.literal(0, 2, Relation::eq), u.literal(1, 2, Relation::eq));
  EXPECT_TRUE(validate(c).empty());
  EXPECT_TRUE(validate(detail::oplus_raw(u.literal(0, 2, Relation::eq), u.literal(1, 2, Relation::eq),
                                         BoolOp::conj))
                  .size() > 0);
}

TEST(Oplus, CommutativeUpToCanonicalFormAndAssociativeUpToGrounding) {
  gen::Universe u(3, 3);
  std::mt19937_64 rng(7);
  for (int t = 0; t < 40; ++t) {
    Osdd a = u.random(rng, 2), b = u.random(rng, 2), c = u.random(rng, 1);
    for (auto op : {BoolOp::conj, BoolOp::disj}) {
      EXPECT_EQ(normalize_vars(oplus(a, b, op)), normalize_vars(oplus(b, a, op)));
      // Sibling edges into equal children are not merged, so grouping can
      // change how a node partitions its values; the function is unchanged.
      Osdd left = oplus(oplus(a, b, op), c, op), right = oplus(a, oplus(b, c, op), op);
      EXPECT_TRUE(mdd_equal(mdd_reduce(ground(left)), mdd_reduce(ground(right))));
    }
  }
}

TEST(Oplus, GroundingCompatibilityOnRandomPairs) {
  std::mt19937_64 rng(11);
  for (std::size_t dsize = 1; dsize <= 3; ++dsize) {
    gen::Universe u(dsize, 3);
    for (int t = 0; t < 60; ++t) {
      Osdd a = u.random(rng, 1 + int(rng() % 3)), b = u.random(rng, 1 + int(rng() % 3));
      for (auto op : {BoolOp::conj, BoolOp::disj})
        ASSERT_TRUE(gen::compatible_grounding(u, a, b, op)) << to_string(a) << "  " << to_string(b);
    }
  }
}

TEST(ApplyConstraint, LeafUnchanged) {
  auto dom = make_domain("t", {A("a"), A("b")});
  auto x = Var::fresh("X", dom);
  EXPECT_EQ(apply_constraint(Osdd::zero(), AC::eq(x, A("a"))), Osdd::zero());
}

TEST(ApplyConstraint, SingleNode) {
  auto dom = make_domain("t", {A("a"), A("b"), A("c")});
  auto x = Var::fresh("X", dom);
  Osdd d = apply_constraint(chain({{si("s", 1), x}}), AC::eq(x, A("a")));
  Osdd expect = Osdd::node(si("s", 1), x, {{{AC::eq(x, A("a"))}, Osdd::one()}, {{AC::neq(x, A("a"))}, Osdd::zero()}});
  EXPECT_EQ(d, expect);
}

TEST(ApplyConstraint, EqualFlipsGroundLikeTheGroundingExample) {
  auto dom = make_domain("coin", {A("a"), A("b")});
  auto x1 = Var::fresh("X1", dom), x2 = Var::fresh("X2", dom);
  Osdd d = apply_constraint(chain({{si("flip", 1), x1}, {si("flip", 2), x2}}), AC::eq(x2, x1));
  EXPECT_TRUE(validate(d).empty());
  auto leafs = [&](bool a, bool b) {
    return mdd_node(si("flip", 2), dom, {{A("a"), mdd_leaf(a)}, {A("b"), mdd_leaf(b)}});
  };
  Mdd expect = mdd_node(si("flip", 1), dom, {{A("a"), leafs(true, false)}, {A("b"), leafs(false, true)}});
  EXPECT_TRUE(mdd_equal(ground(d), expect)) << mdd_string(ground(d));
}

TEST(ApplyConstraint, UnboundVariableOnATruePathThrows) {
  auto dom = make_domain("t", {A("a"), A("b")});
  auto x = Var::fresh("X", dom), y = Var::fresh("Y", dom);
  EXPECT_THROW(apply_constraint(chain({{si("s", 1), x}}), AC::eq(y, A("a"))), Error);
}

TEST(Ground, LeafAndBirthdayWorlds) {
  EXPECT_TRUE(mdd_equal(ground(Osdd::one()), mdd_leaf(true)));
  auto days = make_int_domain("day", 1, 3);
  Osdd d = disj(disj(pair_equal("b", 1, 2, days), pair_equal("b", 1, 3, days)), pair_equal("b", 2, 3, days));
  Mdd m = ground(d);
  int hits = 0;
  for (int a = 1; a <= 3; ++a)
    for (int b = 1; b <= 3; ++b)
      for (int c = 1; c <= 3; ++c) {
        std::map<SwitchInstance, GroundTerm> w{{si("b", 1), a}, {si("b", 2), b}, {si("b", 3), c}};
        bool want = a == b || a == c || b == c;
        EXPECT_EQ(mdd_eval(m, w), want);
        hits += want;
      }
  EXPECT_EQ(hits, 21);
}

TEST(Ground, EveryNodeEnumeratesItsDomainOnce) {
  gen::Universe u(3, 3);
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    Mdd m = ground(u.random(rng, 3));
    std::function<void(const Mdd&)> check = [&](const Mdd& n) {
      if (n->is_leaf) return;
      ASSERT_EQ(n->edges.size(), n->domain->size());
      for (std::size_t i = 0; i < n->edges.size(); ++i) {
        EXPECT_EQ(n->edges[i].first, n->domain->values()[i]);
        check(n->edges[i].second);
      }
    };
    check(m);
  }
}

TEST(Canonicalize, MergesSubtreesDifferingOnlyInOutputVariable) {
  auto dom = make_domain("t", {A("a"), A("b")});
  auto x = Var::fresh("X", dom), u = Var::fresh("U", dom), v = Var::fresh("V", dom);
  Osdd cu = Osdd::node(si("s", 2), u, {{{AC::eq(u, A("a"))}, Osdd::one()}, {{AC::neq(u, A("a"))}, Osdd::zero()}});
  Osdd cv = Osdd::node(si("s", 2), v, {{{AC::eq(v, A("a"))}, Osdd::one()}, {{AC::neq(v, A("a"))}, Osdd::zero()}});
  Osdd d = Osdd::node(si("s", 1), x, {{{AC::eq(x, A("a"))}, cu}, {{AC::neq(x, A("a"))}, cv}});
  Osdd c = canonicalize(d);
  ASSERT_EQ(c.edge_count(), 2u);
  EXPECT_EQ(c.child(0), c.child(1));
  EXPECT_EQ(canonicalize(c), c);
  EXPECT_LT(node_count(c), 1 + 2 + 2 + 1);
}

TEST(Canonicalize, ReducesLabelsAgainstThePath) {
  Birthday b;
  Osdd c = canonicalize(b.figure());
  Osdd n3 = c.child(0).child(1);
  ASSERT_EQ(n3.edge_count(), 3u);
  std::set<std::string> labels;
  for (std::size_t i = 0; i < 3; ++i) labels.insert(n3.label(i).str());
  EXPECT_EQ(labels, (std::set<std::string>{"X3 = X1", "X3 = X2", "X3 != X1, X3 != X2"}));
}

TEST(Vars, FreeAndBound) {
  Birthday b;
  EXPECT_TRUE(free_vars(b.figure()).empty());
  auto dom = make_domain("t", {A("a"), A("b")});
  auto x = Var::fresh("X", dom), z = Var::fresh("Z", dom);
  Osdd d = Osdd::node(si("s", 1), x, {{{AC::eq(x, z)}, Osdd::one()}, {{AC::neq(x, z)}, Osdd::zero()}});
  EXPECT_EQ(free_vars(d), std::set<Var>{z});
  Osdd left = pair_equal("b", 1, 2, b.days);
  EXPECT_EQ(bound_vars(left).size(), 2u);
}
