#include <cmath>
#include <memory>
#include <vector>

#include <gtest/gtest.h>

#include "hbre/composition.hpp"
#include "hbre/environment.hpp"
#include "hbre/errors.hpp"
#include "hbre/regularity.hpp"

using namespace hbre;

namespace {

std::shared_ptr<const EnvironmentModel> example_model(std::uint64_t seed = 42) {
  return std::make_shared<const EnvironmentModel>(build_model({SibuyaUniformSpec{0.2, 0.7}, seed}));
}

Environment identity_env() {
  return constant_environment(OffspringLaw::finite_pmf({0.0, 1.0}, AssumptionPolicy::Relaxed));
}

Environment square_env() { return constant_environment(OffspringLaw::finite_pmf({0.0, 0.0, 1.0})); }

}  // namespace

TEST(QLogProducts, ExampleIsSumOfLogAlpha) {
  const auto env = sample_environment(example_model(), 0);
  const auto q = q_log_products(env, 1.0, 60);
  double acc = 0.0;
  for (std::size_t n = 1; n <= 60; ++n) {
    acc += std::log(env.law_at(n - 1).alpha());
    EXPECT_NEAR(q.partial_sums[n - 1], acc, 1e-12 * std::fabs(acc));
  }
}

TEST(QLogProducts, SquareMatchesDirectFormula) {
  const double s = 1.5;
  const auto q = q_log_products(square_env(), s, 30);
  double acc = 0.0;
  for (std::size_t i = 0; i < 30; ++i) {
    // argument e^{-h_{i+1}} with h_n = s / 2^n, and Q(x) = 2x / (1 + x)
    const double x = std::exp(-s / std::ldexp(1.0, static_cast<int>(i) + 1));
    acc += std::log(2 * x / (1 + x));
    EXPECT_NEAR(q.partial_sums[i], acc, 1e-12);
    if (i > 0) {
      EXPECT_LE(q.partial_sums[i], q.partial_sums[i - 1]);
    }
  }
}

TEST(QLogProducts, EmptyForZeroSteps) {
  const auto q = q_log_products(square_env(), 1.0, 0);
  EXPECT_TRUE(q.partial_sums.empty());
  EXPECT_TRUE(q.log_h_args.empty());
}

TEST(QLogProducts, NonincreasingOnCorpus) {
  const auto model = example_model(3);
  for (std::uint64_t r = 0; r < 10; ++r) {
    for (double s : {0.01, 1.0, 30.0}) {
      const auto q = q_log_products(sample_environment(model, r), s, 300);
      for (std::size_t i = 1; i < q.partial_sums.size(); ++i) EXPECT_LE(q.partial_sums[i], q.partial_sums[i - 1]);
    }
  }
}

TEST(ClassifyPoint, Examples) {
  const auto env = sample_environment(example_model(), 0);
  EXPECT_EQ(classify_point(env, 1.0).verdict, Verdict::Regular);
  EXPECT_EQ(classify_point(identity_env(), 1.0).verdict, Verdict::Irregular);
  ClassifyConfig one;
  one.n_max = 1;
  EXPECT_EQ(classify_point(env, 1.0, one).verdict, Verdict::Inconclusive);
  EXPECT_THROW(classify_point(env, 0.0), ValidationError);
}

TEST(ClassifyPoint, IdentityRatiosAreConstant) {
  const auto v = classify_point(identity_env(), 2.0);
  for (const auto& tr : v.ratio_trends) {
    for (double lr : tr.log_ratios) EXPECT_NEAR(lr, std::log(tr.t / 2.0), 1e-12);
  }
}

TEST(ClassifyPoint, SquareIsIrregular) {
  EXPECT_EQ(classify_point(square_env(), 1.0).verdict, Verdict::Irregular);
}

TEST(ClassifyPoint, ReportJson) {
  const auto j = classify_point(sample_environment(example_model(), 0), 1.0).to_json();
  EXPECT_EQ(j["verdict"], "regular");
  EXPECT_EQ(j["log_q_products"].size(), 200u);
  EXPECT_EQ(j["ratio_trends"].size(), 3u);
  EXPECT_EQ(j["thresholds"]["regular_threshold"], -40.0);
}

TEST(ClassifyProcess, ExampleGrid) {
  const std::vector<double> grid = {0.25, 0.5, 1, 2, 4};
  const auto v = classify_process(sample_environment(example_model(), 0), grid);
  EXPECT_EQ(v.verdict, Verdict::Regular);
  EXPECT_EQ(v.points.size(), 5u);
  EXPECT_THROW(classify_process(sample_environment(example_model(), 0), {}), ValidationError);
}

TEST(ClassifyProcess, CombinationPolicy) {
  using V = Verdict;
  EXPECT_EQ(combine_verdicts({V::Regular, V::Inconclusive, V::Regular}), V::Inconclusive);
  EXPECT_EQ(combine_verdicts({V::Regular, V::Irregular}), V::Irregular);
  EXPECT_EQ(combine_verdicts({V::Inconclusive, V::Irregular}), V::Irregular);
  EXPECT_EQ(combine_verdicts({V::Regular, V::Regular}), V::Regular);
}

TEST(ClassifyProcess, ExampleGroundTruth) {
  const auto model = example_model();
  const std::vector<double> grid = {0.25, 0.5, 1, 2, 4};
  int regular = 0;
  for (std::uint64_t r = 0; r < 100; ++r) {
    for (const auto& p : classify_process(sample_environment(model, r), grid).points) regular += p.verdict == Verdict::Regular;
  }
  EXPECT_EQ(regular, 500);
}

TEST(ClassifyPoint, VerdictStableUnderLargerHorizon) {
  std::vector<Environment> corpus = {identity_env(), square_env()};
  for (std::uint64_t r = 0; r < 5; ++r) corpus.push_back(sample_environment(example_model(), r));
  for (const auto& env : corpus) {
    for (double s : {0.5, 2.0}) {
      Verdict last = Verdict::Inconclusive;
      for (std::size_t n : {10u, 20u, 60u, 120u, 200u, 400u}) {
        ClassifyConfig cfg;
        cfg.n_max = n;
        const Verdict v = classify_point(env, s, cfg).verdict;
        if (last != Verdict::Inconclusive) {
          EXPECT_EQ(v, last) << "n_max=" << n;
        }
        if (v != Verdict::Inconclusive) last = v;
      }
    }
  }
}

TEST(ClassifyPoint, ShiftConsistency) {
  const auto model = example_model(9);
  for (std::uint64_t r = 0; r < 10; ++r) {
    const auto env = sample_environment(model, r);
    for (double s : {0.5, 2.0}) {
      ASSERT_EQ(classify_point(env, s).verdict, Verdict::Regular);
      for (std::size_t k : {1u, 2u}) {
        const double hk = compose_h_n(env, k, TailScalar::from_value(s)).value();
        EXPECT_EQ(classify_point(env.shift(k), hk).verdict, Verdict::Regular) << r << " " << s << " " << k;
      }
    }
  }
}

TEST(SufficientCriterion, Examples) {
  const auto model = build_model({SibuyaUniformSpec{0.2, 0.7}, 42});
  const auto c = check_sufficient_criterion(model, 200);
  EXPECT_TRUE(c.holds);
  EXPECT_LE(c.c_estimate, 0.7);
  EXPECT_EQ(c.bounded_fraction, 1.0);

  FiniteMixtureSpec id{{LawSpec::pmf({0.0, 1.0})}, {1.0}};
  EXPECT_FALSE(check_sufficient_criterion(build_model({id, 1, AssumptionPolicy::Relaxed}), 50).holds);

  FiniteMixtureSpec half{{LawSpec::sibuya(0.5), LawSpec::pmf({0.0, 0.0, 1.0})}, {0.5, 0.5}};
  const auto h = check_sufficient_criterion(build_model({half, 1}), 2000);
  EXPECT_TRUE(h.holds);
  EXPECT_EQ(h.c_estimate, 0.5);
  EXPECT_LE(std::fabs(h.bounded_fraction - 0.5), 3 * std::sqrt(0.25 / 2000));
  EXPECT_THROW(check_sufficient_criterion(model, 0), ValidationError);
}

TEST(SufficientCriterion, SquareSupremumApproachesOne) {
  // Q(x) = 2x/(1+x) climbs to 1 as x -> 1
  const double sup = q_sup(OffspringLaw::finite_pmf({0.0, 0.0, 1.0}));
  EXPECT_GT(sup, 1.0 - 1e-6);
  EXPECT_LE(sup, 1.0);
}

TEST(FindRegularPoint, Examples) {
  const auto env = sample_environment(example_model(), 0);
  const auto found = find_regular_point(env, 1.0);
  EXPECT_TRUE(found.found);
  EXPECT_EQ(found.point, 1.0);
  EXPECT_NEAR(found.lo, env.law_at(0).h_transform(TailScalar::from_value(1.0)).value(), 1e-15);
  EXPECT_LT(found.lo, found.hi);

  const auto miss = find_regular_point(square_env(), 1.0);
  EXPECT_FALSE(miss.found);
  EXPECT_FALSE(miss.failure.empty());
  EXPECT_EQ(miss.probes.size(), 17u);
  EXPECT_NEAR(miss.lo, 0.5, 1e-15);
}
