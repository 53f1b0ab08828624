#include <algorithm>
#include <cmath>
#include <memory>
#include <vector>

#include <boost/math/special_functions/gamma.hpp>
#include <gtest/gtest.h>

#include "hbre/composition.hpp"
#include "hbre/environment.hpp"
#include "hbre/errors.hpp"
#include "hbre/ks.hpp"
#include "hbre/limitlab.hpp"
#include "hbre/population.hpp"
#include "hbre/sampling.hpp"

using namespace hbre;

namespace {

OffspringLaw square() { return OffspringLaw::finite_pmf({0.0, 0.0, 1.0}); }

std::shared_ptr<const EnvironmentModel> example_model(std::uint64_t seed = 42) {
  return std::make_shared<const EnvironmentModel>(build_model({SibuyaUniformSpec{0.2, 0.7}, seed}));
}

double sib_f(double a, double s) { return 1.0 - std::pow(1.0 - s, a); }

bool within_3se(double hits, double n, double p) { return std::fabs(hits / n - p) <= 3 * std::sqrt(p * (1 - p) / n); }

}  // namespace

TEST(SampleOffspring, SibuyaFirstTwoProbabilities) {
  // p_2 from a numeric second derivative of the pgf at 0
  const double h = 1e-4;
  const double p2_oracle = (sib_f(0.5, 2 * h) - 2 * sib_f(0.5, h)) / (2 * h * h);
  EXPECT_NEAR(p2_oracle, 0.125, 1e-4);

  const auto law = OffspringLaw::sibuya(0.5);
  const OffspringSampler sampler(law, 64);
  auto rng = RandomStream::keyed({1, 2, 3});
  const int n = 1000000;
  int ones = 0, twos = 0;
  for (int i = 0; i < n; ++i) {
    const auto d = sampler.draw(rng);
    ASSERT_GE(d.value, 1u);
    ones += d.value == 1;
    twos += d.value == 2;
  }
  EXPECT_TRUE(within_3se(ones, n, 0.5)) << ones;
  EXPECT_TRUE(within_3se(twos, n, 0.125)) << twos;
}

TEST(SampleOffspring, PmfAgreesWithRecurrenceAndTail) {
  const double a = 0.3;
  const auto law = OffspringLaw::sibuya(a);
  double p = a, surv = 1.0;
  for (std::uint64_t k = 1; k <= 20000; ++k) {
    EXPECT_NEAR(law.probability(k) / p, 1.0, 1e-10) << k;
    surv -= p;
    p *= (static_cast<double>(k) - a) / (static_cast<double>(k) + 1.0);
  }
  // P(X > n) against the gamma-ratio formula
  for (double n : {10.0, 100.0, 5000.0, 1e6, 1e12}) {
    const double want = boost::math::tgamma_delta_ratio(n + 1 - a, a) / boost::math::tgamma(1 - a);
    EXPECT_NEAR(law.survival(static_cast<std::uint64_t>(n)) / want, 1.0, 1e-12) << n;
  }
  EXPECT_NEAR(law.survival(20000) / surv, 1.0, 1e-9);
}

TEST(SampleOffspring, TailFrequencyBeyondTable) {
  const auto law = OffspringLaw::sibuya(0.5);
  const OffspringSampler sampler(law, 64);
  auto rng = RandomStream::keyed({9});
  const int n = 200000;
  int big = 0;
  for (int i = 0; i < n; ++i) big += sampler.draw(rng).value > 1000;
  EXPECT_TRUE(within_3se(big, n, law.survival(1000)));
}

TEST(SampleOffspring, DeterministicLaw) {
  auto rng = RandomStream::keyed({4});
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sample_offspring(square(), rng), 2);
}

TEST(SampleOffspring, PmfFrequencies) {
  const auto law = OffspringLaw::finite_pmf({0.0, 0.2, 0.3, 0.5});
  auto rng = RandomStream::keyed({5});
  const int n = 200000;
  int c[4] = {0, 0, 0, 0};
  for (int i = 0; i < n; ++i) ++c[sample_offspring(law, rng).convert_to<int>()];
  EXPECT_EQ(c[0], 0);
  EXPECT_TRUE(within_3se(c[1], n, 0.2));
  EXPECT_TRUE(within_3se(c[2], n, 0.3));
}

TEST(SampleOffspring, BatchSumMatchesSingleDraws) {
  for (double a : {0.3, 0.7}) {
    const auto law = OffspringLaw::sibuya(a);
    const OffspringSampler sampler(law, OffspringSampler::kDefaultTable);
    std::vector<double> batch, single;
    for (int r = 0; r < 2000; ++r) {
      auto rng1 = RandomStream::keyed({11, static_cast<std::uint64_t>(r)});
      auto rng2 = RandomStream::keyed({12, static_cast<std::uint64_t>(r)});
      batch.push_back(log_of(sampler.sum(1000, rng1).total()));
      DrawSum s;
      for (int i = 0; i < 1000; ++i) s.add(sampler.draw(rng2));
      single.push_back(log_of(s.total()));
    }
    EXPECT_LE(ks_two_sample(batch, single).D, 0.05) << a;
  }
}

TEST(StepExact, Examples) {
  auto rng = RandomStream::keyed({1});
  auto r = step_exact(BigCount(1), square(), rng, 1000000);
  ASSERT_TRUE(std::holds_alternative<BigCount>(r));
  EXPECT_EQ(std::get<BigCount>(r), 2);

  auto fresh = RandomStream::keyed({2});
  const auto over = step_exact(BigCount(1000001), OffspringLaw::sibuya(0.5), fresh, 1000000);
  EXPECT_TRUE(std::holds_alternative<OverBudget>(over));
  EXPECT_EQ(fresh.draws(), 0u);
}

TEST(StepExact, PmfBatchMean) {
  const auto law = OffspringLaw::finite_pmf({0.0, 0.2, 0.3, 0.5});
  auto rng = RandomStream::keyed({3});
  const auto z = std::get<BigCount>(step_exact(BigCount(1000000), law, rng, 1000000)).convert_to<double>();
  // sd of one draw is sqrt(0.61)
  EXPECT_LE(std::fabs(z - 2.3e6), 3 * std::sqrt(0.61e6));
}

TEST(StepAsymptotic, UnsupportedForFiniteMean) {
  auto rng = RandomStream::keyed({1});
  EXPECT_THROW(step_asymptotic(20.0, square(), rng), UnsupportedLaw);
  EXPECT_THROW(sample_log_positive_stable(1.0, rng), UnsupportedLaw);
}

TEST(StepAsymptotic, StableLaplaceTransform) {
  const int n = 1000000;
  auto rng = RandomStream::keyed({77});
  std::vector<double> s(n);
  for (auto& x : s) x = std::exp(sample_log_positive_stable(0.5, rng));
  for (double lambda : {0.5, 1.0, 2.0}) {
    double sum = 0, sum2 = 0;
    for (double x : s) {
      const double v = std::exp(-lambda * x);
      sum += v;
      sum2 += v * v;
    }
    const double mean = sum / n;
    const double se = std::sqrt((sum2 / n - mean * mean) / (n - 1));
    EXPECT_LE(std::fabs(mean - std::exp(-std::sqrt(lambda))), 3 * se) << lambda;
  }
}

TEST(StepAsymptotic, ChainedLeadingTermScales) {
  const auto a0 = OffspringLaw::sibuya(0.4), a1 = OffspringLaw::sibuya(0.6);
  for (int r = 0; r < 50; ++r) {
    auto run = [&](double L) {
      auto g0 = RandomStream::keyed({5, static_cast<std::uint64_t>(r), 0});
      auto g1 = RandomStream::keyed({5, static_cast<std::uint64_t>(r), 1});
      return step_asymptotic(step_asymptotic(L, a0, g0), a1, g1);
    };
    EXPECT_NEAR(run(200.0) - run(100.0), 100.0 / (0.4 * 0.6), 1e-9);
  }
}

TEST(ModeConsistency, ExactAndAsymptoticAgreeAtBudget) {
  const std::uint64_t N = 1000000;
  for (double a : {0.3, 0.5, 0.7}) {
    const auto law = OffspringLaw::sibuya(a);
    std::vector<double> exact, asym;
    for (std::uint64_t r = 0; r < 2000; ++r) {
      auto g1 = RandomStream::keyed({21, r});
      auto g2 = RandomStream::keyed({22, r});
      exact.push_back(log_of(std::get<BigCount>(step_exact(BigCount(N), law, g1, N))));
      asym.push_back(step_asymptotic(std::log(static_cast<double>(N)), law, g2));
    }
    EXPECT_LE(ks_two_sample(exact, asym).D, 0.05) << a;
  }
}

TEST(SimulateTrajectory, ZeroGenerations) {
  const auto traj = simulate_trajectory(constant_environment(square()), 0, {1, 0});
  ASSERT_EQ(traj.states.size(), 1u);
  EXPECT_EQ(std::get<ExactState>(traj.states[0]).count, 1);
}

TEST(SimulateTrajectory, Doubling) {
  const auto traj = simulate_trajectory(constant_environment(square()), 20, {1, 0});
  for (std::size_t n = 0; n <= 20; ++n) EXPECT_EQ(std::get<ExactState>(traj.states[n]).count, BigCount(1) << n);
}

TEST(SimulateTrajectory, ModeSwitchAndTruncation) {
  const auto env = sample_environment(example_model(), 0);
  const auto traj = simulate_trajectory(env, 12, {42, 1}, {1000, true});
  ASSERT_TRUE(traj.mode_switch_index.has_value());
  for (std::size_t n = 0; n <= 12; ++n) {
    EXPECT_EQ(traj.mode_at(n) == StepMode::LogApprox, n >= *traj.mode_switch_index);
    EXPECT_GE(traj.log_count_at(n), 0.0);
  }
  const auto cut = simulate_trajectory(env, 12, {42, 1}, {1000, false});
  EXPECT_TRUE(cut.truncated);
  EXPECT_LT(cut.generations(), 12u);
  EXPECT_THROW(simulate_trajectory(env, 3, {42, 1}, {0, true}), ValidationError);
}

TEST(SimulateTrajectory, Deterministic) {
  const auto env = sample_environment(example_model(), 3);
  const auto a = simulate_trajectory(env, 15, {42, 8});
  const auto b = simulate_trajectory(env, 15, {42, 8});
  ASSERT_EQ(a.generations(), b.generations());
  for (std::size_t n = 0; n <= a.generations(); ++n) {
    EXPECT_EQ(a.mode_at(n), b.mode_at(n));
    EXPECT_EQ(a.log_count_at(n), b.log_count_at(n));
  }
}

TEST(SimulateTrajectory, DoubleLogGrowthTracksInverseAlphaSum) {
  const auto model = example_model();
  for (std::uint64_t r = 0; r < 10; ++r) {
    const auto env = sample_environment(model, r);
    const auto traj = simulate_trajectory(env, 12, {42, r});
    // least-squares slope of log log Z_n against sum_{i<n} log(1/alpha_i), n = 5..12
    std::vector<double> x, y;
    double acc = 0.0;
    for (std::size_t n = 1; n <= 12; ++n) {
      acc -= std::log(env.law_at(n - 1).alpha());
      if (n >= 5) {
        x.push_back(acc);
        y.push_back(std::log(traj.log_count_at(n)));
      }
    }
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      mx += x[i] / x.size();
      my += y[i] / y.size();
    }
    double sxy = 0, sxx = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += (x[i] - mx) * (y[i] - my);
      sxx += (x[i] - mx) * (x[i] - mx);
    }
    EXPECT_NEAR(sxy / sxx, 1.0, 0.25) << "replicate " << r;
  }
}

TEST(SimulateTrajectory, NoExtinction) {
  const auto model = example_model(5);
  for (std::uint64_t r = 0; r < 200; ++r) {
    const auto traj = simulate_trajectory(sample_environment(model, r), 8, {5, r});
    for (const auto& st : traj.states) {
      if (auto* e = std::get_if<ExactState>(&st)) {
        EXPECT_GE(e->count, 1);
      }
    }
  }
}

TEST(ComputeY, Examples) {
  const auto env = sample_environment(example_model(), 1);
  const auto traj = simulate_trajectory(env, 10, {42, 0});
  EXPECT_NEAR(compute_Y(traj, 0), std::exp(-1.0), 1e-15);
  double log_prod = 0.0;
  for (std::size_t n = 1; n <= 10; ++n) {
    log_prod += std::log(env.law_at(n - 1).alpha());
    const double lz = traj.log_count_at(n);
    // log(1 - Y_n) = (prod alpha_i) log(1 - e^{-1/Z_n})
    const double want = std::exp(log_prod) * std::log(-std::expm1(-std::exp(-lz)));
    const double got = std::log1p(-compute_Y(traj, n));
    EXPECT_NEAR(got, want, 1e-12 * std::max(1.0, std::fabs(want)));
  }
  EXPECT_THROW(compute_Y(traj, 11), ValidationError);
}

TEST(ComputeY, DoublingIsConstant) {
  // (e^{-1/2^n})^{2^n} = e^{-1}
  const auto traj = simulate_trajectory(constant_environment(square()), 20, {1, 0});
  for (std::size_t n = 0; n <= 20; ++n) {
    const double y = compute_Y(traj, n);
    EXPECT_GT(y, 0.0);
    EXPECT_LT(y, 1.0);
    EXPECT_NEAR(y, std::exp(-1.0), 1e-12);
  }
}

TEST(ComputeY, InteriorOnHugePopulations) {
  const auto env = sample_environment(example_model(), 2);
  const auto traj = simulate_trajectory(env, 40, {42, 3});
  for (std::size_t n = 0; n <= 40; ++n) {
    const double y = compute_Y(traj, n);
    EXPECT_GT(y, 0.0);
    EXPECT_LT(y, 1.0);
  }
}

TEST(Martingale, Examples) {
  const auto env = sample_environment(example_model(), 0);
  const auto traj = simulate_trajectory(env, 20, {42, 0});
  for (double s : {0.1, 1.0, 3.0}) EXPECT_NEAR(compute_martingale_logX(traj, s, 0).log_X_n, -s, 1e-15);
  for (std::size_t n = 0; n <= 20; ++n) EXPECT_LE(compute_martingale_logX(traj, 1.0, n).log_X_n, 0.0);
  EXPECT_THROW(compute_martingale_logX(traj, 0.0, 1), ValidationError);
  EXPECT_EQ(compute_martingale_logX(-1e300, TailScalar::from_value(1.0), 1.0, 1).log_X_n, -0.0);
  EXPECT_EQ(std::exp(compute_martingale_logX(800.0, TailScalar::from_value(1.0), 1.0, 1).log_X_n), 0.0);
}

TEST(Martingale, IncrementHasZeroMean) {
  const auto env = constant_environment(OffspringLaw::sibuya(0.7));
  const double s = 1.0;
  const auto h = h_path(env, 2, TailScalar::from_value(s));
  const int R = 100000;
  double sum = 0, sum2 = 0;
  for (int r = 0; r < R; ++r) {
    const auto traj = simulate_trajectory(env, 2, {3, static_cast<std::uint64_t>(r)}, {std::uint64_t{1} << 50, false});
    ASSERT_FALSE(traj.truncated);
    const double x1 = std::exp(compute_martingale_logX(traj.log_count_at(1), h[1], s, 1).log_X_n);
    const double x2 = std::exp(compute_martingale_logX(traj.log_count_at(2), h[2], s, 2).log_X_n);
    sum += x2 - x1;
    sum2 += (x2 - x1) * (x2 - x1);
  }
  const double mean = sum / R;
  const double se = std::sqrt((sum2 / R - mean * mean) / (R - 1));
  EXPECT_LE(std::fabs(mean), 3 * se);
}

TEST(Martingale, MeanIsExpMinusS) {
  const auto env = sample_environment(example_model(), 0);
  const int R = 20000;
  for (double s : {0.5, 1.0}) {
    double sum = 0, sum2 = 0;
    const auto h = h_path(env, 3, TailScalar::from_value(s));
    for (int r = 0; r < R; ++r) {
      const auto traj = simulate_trajectory(env, 3, fixed_env_key(env, r));
      const double x = std::exp(compute_martingale_logX(traj.log_count_at(3), h[3], s, 3).log_X_n);
      sum += x;
      sum2 += x * x;
    }
    const double mean = sum / R;
    const double se = std::sqrt((sum2 / R - mean * mean) / (R - 1));
    EXPECT_LE(std::fabs(mean - std::exp(-s)), 3 * se) << s;
  }
}

TEST(Stabilization, StopsOnTolerance) {
  const auto env = sample_environment(example_model(), 4);
  const auto path = simulate_until_stable(env, {42, 4}, {}, {1e-4, 40});
  ASSERT_TRUE(path.stabilized);
  const std::size_t n = path.final_n();
  EXPECT_LT(std::fabs(path.y[n] - path.y[n - 1]), 1e-4);
  for (std::size_t i = 1; i < n; ++i) EXPECT_GE(std::fabs(path.y[i] - path.y[i - 1]), 1e-4);
}
