#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "osdd/engine.hpp"
#include "osdd/inference.hpp"
#include "osdd/oracle.hpp"
#include "osdd/sampling.hpp"

using namespace osdd;

namespace {

std::string program_path(const char* name) { return std::string(OSDD_SOURCE_DIR) + "/programs/" + name; }

const Program& palindrome() {
  static const Program p = Program::load(program_path("palindrome.pl"));
  return p;
}

const Program& birthday() {
  static const Program p = Program::load(program_path("birthday.pl"));
  return p;
}

SamplingOptions options(SamplingMode mode, std::uint64_t samples, std::uint64_t seed = 7, std::uint64_t stride = 0) {
  SamplingOptions o;
  o.mode = mode;
  o.samples = samples;
  o.seed = seed;
  o.stride = stride;
  return o;
}

EstimatorState estimate(const Program& p, const std::string& q, std::optional<std::string> e, SamplingOptions o) {
  std::optional<Ast> ev;
  if (e) ev = parse_query(*e);
  return Estimator(p, parse_query(q), ev, o).run();
}

}  // namespace

TEST(LwWeights, PalindromeEvidenceWeighsEveryForcedFlip) {
  Engine e(palindrome());
  LwSampler s(e.evaluate("evidence(6)"), decls_of(palindrome()));
  Rng rng = chain_rng(3);
  for (int i = 0; i < 200; ++i) {
    WeightedSample w = s.sample(rng);
    ASSERT_EQ(w.status, SampleStatus::consistent);
    EXPECT_DOUBLE_EQ(w.weight, 0.125);
    EXPECT_EQ(w.assignment.size(), 6u);
    EXPECT_DOUBLE_EQ(s.replay_weight(w.assignment), w.weight);
  }
}

TEST(LwWeights, DiagramWithoutZeroLeavesHasUnitWeights) {
  Program p = Program::parse("values(c, [h, t, e]).\nset_sw(c, [1/2, 1/4, 1/4]).\nq :- msw(c, 1, X), msw(c, 2, Y).\n");
  Engine e(p);
  LwSampler s(e.evaluate("q"), decls_of(p));
  Rng rng = chain_rng(1);
  for (int i = 0; i < 100; ++i) {
    WeightedSample w = s.sample(rng);
    EXPECT_EQ(w.status, SampleStatus::consistent);
    EXPECT_EQ(w.weight, 1.0);
  }
}

TEST(LwWeights, ZeroDiagramRejectsEverySample) {
  LwSampler s(Osdd::zero(), decls_of(palindrome()));
  Rng rng = chain_rng(0);
  WeightedSample w = s.sample(rng);
  EXPECT_EQ(w.status, SampleStatus::rejected);
  EXPECT_TRUE(w.assignment.empty());
}

TEST(LwWeights, ReplayMatchesSampledWeightOnRandomPrograms) {
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    Program p = Program::parse(gen_random_program(seed));
    Engine e(p);
    LwSampler s(e.evaluate("q"), decls_of(p));
    Rng rng = chain_rng(seed);
    for (int i = 0; i < 20; ++i) {
      WeightedSample w = s.sample(rng);
      if (w.status == SampleStatus::consistent) {
        EXPECT_DOUBLE_EQ(s.replay_weight(w.assignment), w.weight);
      }
    }
  }
}

TEST(Unbiased, LwEstimatesOfRandomProgramsAreWithinFourStandardErrors) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    Program p = Program::parse(gen_random_program(seed));
    const double exact = static_cast<double>(brute_force_prob(p, "q"));
    EstimatorState st = estimate(p, "q", std::nullopt, options(SamplingMode::lw, 4000, seed));
    ASSERT_TRUE(st.estimate());
    const double se = *st.std_error();
    if (se == 0) EXPECT_NEAR(*st.estimate(), exact, 1e-12) << "seed " << seed;
    else EXPECT_LE(std::abs(*st.estimate() - exact), 4 * se + 1e-12) << "seed " << seed;
  }
}

TEST(Unbiased, ConditionalPalindromeQuery) {
  EstimatorState lw = estimate(palindrome(), "query(6,2)", "evidence(6)", options(SamplingMode::lw, 20000));
  EXPECT_LE(std::abs(*lw.estimate() - 0.375), 4 * *lw.std_error());
  EXPECT_EQ(lw.n_rejected, 0u);
  EstimatorState ind = estimate(palindrome(), "query(6,2)", "evidence(6)", options(SamplingMode::independent, 20000));
  EXPECT_LE(std::abs(*ind.estimate() - 0.375), 4 * *ind.std_error());
}

TEST(Unbiased, BirthdayWithLikelihoodWeighting) {
  const double exact = static_cast<double>(closed_form_birthday(8));
  EstimatorState st = estimate(birthday(), "same_birthday(8)", std::nullopt, options(SamplingMode::lw, 20000));
  EXPECT_LE(std::abs(*st.estimate() - exact), 4 * *st.std_error());
}

TEST(Independent, PalindromeEvidenceIsAcceptedAtItsProbability) {
  const std::uint64_t n = 8000;
  EstimatorState st = estimate(palindrome(), "evidence(6)", std::nullopt, options(SamplingMode::independent, n));
  const double rate = static_cast<double>(st.n_consistent) / static_cast<double>(n);
  const double se = std::sqrt(0.125 * 0.875 / static_cast<double>(n));
  EXPECT_LE(std::abs(rate - 0.125), 4 * se);
  EXPECT_DOUBLE_EQ(*st.estimate(), rate);
}

TEST(Estimator, SameSeedSameState) {
  auto a = estimate(palindrome(), "query(6,2)", "evidence(6)", options(SamplingMode::lw, 500, 42));
  auto b = estimate(palindrome(), "query(6,2)", "evidence(6)", options(SamplingMode::lw, 500, 42));
  EXPECT_EQ(a, b);
  auto c = estimate(palindrome(), "query(6,2)", "evidence(6)", options(SamplingMode::lw, 500, 43));
  EXPECT_NE(a.numerator, c.numerator);
}

TEST(Estimator, ChainsAreIndependentStreams) {
  Rng a = chain_rng(5, 0);
  Rng b = chain_rng(5, 1);
  Rng c = chain_rng(5, 0);
  EXPECT_NE(a(), b());
  Rng a2 = chain_rng(5, 0);
  EXPECT_EQ(a2(), c());
}

TEST(Estimator, MergeMatchesOneLongRun) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0, 1);
  EstimatorState whole, left, right;
  for (int i = 0; i < 1000; ++i) {
    const double b = u(rng);
    const double a = u(rng) < 0.3 ? b : 0.0;
    whole.add(a, b, true, false);
    (i < 370 ? left : right).add(a, b, true, false);
  }
  left.merge(right);
  EXPECT_EQ(left.n_total, whole.n_total);
  EXPECT_NEAR(*left.estimate(), *whole.estimate(), 1e-12);
  EXPECT_NEAR(*left.variance(), *whole.variance(), 1e-12);
  EstimatorState empty;
  empty.merge(whole);
  EXPECT_EQ(empty, whole);
  whole.merge(EstimatorState{});
  EXPECT_EQ(empty, whole);
}

TEST(Estimator, VarianceMatchesTheDirectFormula) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 2);
  std::vector<std::pair<double, double>> ab;
  EstimatorState st;
  for (int i = 0; i < 300; ++i) {
    const double b = u(rng);
    const double a = u(rng) < 1 ? b : 0.0;
    ab.emplace_back(a, b);
    st.add(a, b, true, false);
  }
  double sa = 0, sb = 0;
  for (auto [a, b] : ab) sa += a, sb += b;
  const double r = sa / sb;
  double s = 0;
  for (auto [a, b] : ab) s += (a - r * b) * (a - r * b);
  EXPECT_NEAR(*st.variance(), s / (sb * sb), 1e-12);
}

TEST(Estimator, QueryEqualToEvidenceGivesOne) {
  for (auto mode : {SamplingMode::lw, SamplingMode::independent}) {
    EstimatorState st = estimate(palindrome(), "evidence(6)", "evidence(6)", options(mode, 2000));
    EXPECT_EQ(*st.estimate(), 1.0) << mode_name(mode);
    EXPECT_EQ(*st.variance(), 0.0) << mode_name(mode);
  }
}

TEST(Estimator, ImpossibleEvidenceLeavesTheEstimateUndefined) {
  Program p = Program::parse("values(c, [h, t]).\ne :- msw(c, 1, h), msw(c, 1, t).\nq :- msw(c, 2, h).\n");
  for (auto mode : {SamplingMode::lw, SamplingMode::independent}) {
    std::vector<ConvergenceRow> rows;
    Estimator est(p, parse_query("q"), parse_query("e"), options(mode, 50, 1, 10));
    EstimatorState st = est.run([&](const ConvergenceRow& r) { rows.push_back(r); });
    EXPECT_FALSE(st.estimate());
    ASSERT_EQ(rows.size(), 5u);
    std::ostringstream os;
    write_csv_row(os, rows.back(), mode, 1);
    EXPECT_EQ(os.str(), std::string("50,0,undefined,undefined,") + mode_name(mode) + ",1\n");
  }
}

TEST(Estimator, BudgetOfOneEmitsOneRow) {
  std::vector<ConvergenceRow> rows;
  Estimator est(palindrome(), parse_query("evidence(4)"), std::nullopt, options(SamplingMode::lw, 1, 0, 100));
  est.run([&](const ConvergenceRow& r) { rows.push_back(r); });
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].samples, 1u);
  EXPECT_THROW(Estimator(palindrome(), parse_query("evidence(4)"), std::nullopt, options(SamplingMode::lw, 0)), Error);
}

TEST(Estimator, StrideControlsRows) {
  std::vector<std::uint64_t> at;
  Estimator est(palindrome(), parse_query("evidence(4)"), std::nullopt, options(SamplingMode::independent, 25, 0, 10));
  est.run([&](const ConvergenceRow& r) { at.push_back(r.samples); });
  EXPECT_EQ(at, (std::vector<std::uint64_t>{10, 20, 25}));
}

TEST(Csv, HeaderAndRowFormat) {
  std::ostringstream os;
  write_csv_header(os);
  write_csv_row(os, {100, 12, 0.125, 0.0}, SamplingMode::lw, 9);
  EXPECT_EQ(os.str(), "samples,consistent,estimate,variance,mode,seed\n100,12,0.125,0,lw,9\n");
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(parse_mode("independent"), SamplingMode::independent);
  EXPECT_THROW(parse_mode("gibbs"), Error);
}
