#include <gtest/gtest.h>

#include <cmath>
#include <omp.h>

#include "arkl/divergences.hpp"
#include "arkl/hard_instances.hpp"
#include "arkl/reference.hpp"
#include "oracles.hpp"

using namespace arkl;

namespace {

SeqPolicy point_masses(const std::vector<Token>& traj, int d) {
  std::vector<StepPolicy> steps;
  for (Token t : traj) {
    std::vector<double> row(static_cast<std::size_t>(d), 0.0);
    row[static_cast<std::size_t>(t)] = 1.0;
    steps.push_back(StepPolicy::context_free(row));
  }
  return SeqPolicy(std::move(steps));
}

}  // namespace

TEST(RowDivergences, Basics) {
  const std::vector<double> p{0.51, 0.49};
  EXPECT_EQ(kl(p, p), 0.0);
  EXPECT_NEAR(kl(std::vector<double>{0.49, 0.51}, std::vector<double>{0.75, 0.25}),
              0.51 * std::log(0.51 / 0.25) + 0.49 * std::log(0.49 / 0.75), 1e-15);
  EXPECT_THROW(kl(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}), SupportViolation);
}

TEST(ConditionalKl, SymmetricBernoulliBound) {
  const double b = 0.01;
  const auto p = StepPolicy::context_free({0.5 - b, 0.5 + b});
  const auto q = StepPolicy::context_free({0.5 + b, 0.5 - b});
  const double v = conditional_kl(p, q, {});
  EXPECT_LE(v, (2 * b) * (2 * b) / ((0.5 - b) * (0.5 + b)));
  EXPECT_LE(v, 16 * b * b);
  EXPECT_NEAR(v, oracle::bernoulli_kl(0.5 + b, 0.5 - b), 1e-16);
}

TEST(JointKlExact, IdentityIsZero) {
  Rng rng(1);
  const auto p = oracle::random_tabular(4, 3, rng);
  EXPECT_NEAR(joint_kl_exact(p, p).value, 0.0, 1e-12);
  EXPECT_NEAR(joint_kl_chain(p, p).value, 0.0, 1e-12);
}

TEST(JointKlExact, HadamardPairClosedForm) {
  for (double eps : {0.1, 0.5, 1.0}) {
    const auto fam = make_hadamard_family(8, eps);
    const auto p = SeqPolicy::shared(fam.members[0], 1);
    const auto q = SeqPolicy::shared(fam.members[5], 1);
    EXPECT_NEAR(joint_kl_exact(p, q).value, eps * std::tanh(eps), 1e-12);
  }
}

TEST(JointKlExact, IndependentStepsAddUp) {
  Rng rng(2);
  const auto p = oracle::random_product(3, 3, rng);
  const auto q = oracle::random_product(3, 3, rng);
  double expected = 0.0;
  for (int h = 0; h < 3; ++h) {
    const auto a = p.step(h).table();
    const auto b = q.step(h).table();
    for (std::size_t x = 0; x < 3; ++x) expected += a[x] * std::log(a[x] / b[x]);
  }
  EXPECT_NEAR(joint_kl_exact(p, q).value, expected, 1e-12);
  EXPECT_NEAR(product_joint_kl(p, q), expected, 1e-14);
  EXPECT_EQ(joint_kl(p, q).method, Method::ChainRule);
}

TEST(JointKlExact, MatchesBruteForceLaw) {
  Rng rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 2 + trial % 3;
    const int H = 1 + trial % 4;
    const auto p = oracle::random_tabular(H, d, rng);
    const auto q = oracle::random_tabular(H, d, rng);
    const auto lp = oracle::joint_law(p);
    const auto lq = oracle::joint_law(q);
    EXPECT_NEAR(joint_kl_exact(p, q).value, oracle::kl_laws(lp, lq), 1e-12);
    EXPECT_NEAR(squared_hellinger(p, q).value, oracle::hellinger_laws(lp, lq), 1e-12);
    EXPECT_NEAR(total_variation(p, q).value, oracle::tv_laws(lp, lq), 1e-12);
  }
}

TEST(JointKlExact, SupportViolation) {
  const auto p = SeqPolicy::shared(StepPolicy::context_free({0.5, 0.5}), 2);
  const auto q = SeqPolicy::shared(StepPolicy::context_free({1.0, 0.0}), 2);
  EXPECT_THROW(joint_kl_exact(p, q), SupportViolation);
  EXPECT_NO_THROW(joint_kl_exact(q, p));
  EXPECT_NEAR(joint_kl_exact(q, p).value, 2 * std::log(2.0), 1e-14);
}

TEST(JointKlExact, CapExceeded) {
  Rng rng(4);
  const auto p = oracle::random_product(12, 4, rng);
  EXPECT_THROW(joint_kl_exact(p, p, 1000), CapExceeded);
  EXPECT_NO_THROW(joint_kl(p, p, 1000));
}

TEST(JointKlChain, MatchesExactOnRandomPairs) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const int d = 2 + trial % 3;
    const int H = 1 + trial % 6;
    const auto p = oracle::random_tabular(H, d, rng);
    const auto q = oracle::random_tabular(H, d, rng);
    EXPECT_NEAR(joint_kl_chain(p, q).value, joint_kl_exact(p, q).value, 1e-10);
  }
}

TEST(JointKlChain, SingleStepIsConditionalKl) {
  Rng rng(6);
  const auto p = oracle::random_tabular(1, 4, rng);
  const auto q = oracle::random_tabular(1, 4, rng);
  EXPECT_NEAR(joint_kl_chain(p, q).value, conditional_kl(p.step(0), q.step(0), {}), 1e-15);
}

TEST(JointKlChain, UnreachablePrefixesContributeNothing) {
  // p never emits token 1 at step 0, so q's step-1 row after "1" is irrelevant.
  const auto p0 = StepPolicy::context_free({1.0, 0.0});
  const auto p1 = StepPolicy::tabular(2, 1, 1, {0.3, 0.7, 0.5, 0.5});
  const auto q1 = StepPolicy::tabular(2, 1, 1, {0.3, 0.7, 0.9, 0.1});
  const auto q0 = StepPolicy::context_free({0.6, 0.4});
  const SeqPolicy p({p0, p1});
  const SeqPolicy q({q0, q1});
  EXPECT_NEAR(joint_kl_chain(p, q).value, std::log(1.0 / 0.6), 1e-15);
  EXPECT_NEAR(joint_kl_exact(p, q).value, std::log(1.0 / 0.6), 1e-15);
}

TEST(SquaredHellinger, ExtremesAndIdentity) {
  Rng rng(7);
  const auto p = oracle::random_tabular(3, 2, rng);
  EXPECT_NEAR(squared_hellinger(p, p).value, 0.0, 1e-12);
  const auto a = point_masses({0, 1, 0}, 2);
  const auto b = point_masses({1, 1, 0}, 2);
  EXPECT_EQ(squared_hellinger(a, b).value, 2.0);
  EXPECT_EQ(total_variation(a, b).value, 1.0);
  EXPECT_EQ(total_variation(a, a).value, 0.0);
}

TEST(SquaredHellinger, ProductFormulaMatchesEnumeration) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::random_product(1 + trial % 5, 3, rng);
    const auto q = oracle::random_product(1 + trial % 5, 3, rng);
    EXPECT_NEAR(product_squared_hellinger(p, q), squared_hellinger(p, q).value, 1e-12);
  }
}

TEST(MonteCarlo, SelfPairIsZero) {
  Rng g(9);
  const auto p = oracle::random_tabular(3, 3, g);
  Rng rng(10);
  const auto r = joint_kl_monte_carlo(p, p, 1000, rng);
  EXPECT_EQ(r.value, 0.0);
  EXPECT_EQ(r.method, Method::MonteCarlo);
  EXPECT_EQ(r.mc_samples, 1000u);
}

TEST(MonteCarlo, HadamardPairWithinThreeStderr) {
  const auto fam = make_hadamard_family(8, 0.5);
  const auto p = SeqPolicy::shared(fam.members[0], 1);
  const auto q = SeqPolicy::shared(fam.members[1], 1);
  Rng rng(11);
  const auto r = joint_kl_monte_carlo(p, q, 1000000, rng);
  EXPECT_NEAR(0.5 * std::tanh(0.5), 0.2310585786300049, 1e-15);
  EXPECT_LE(std::abs(r.value - 0.5 * std::tanh(0.5)), 3 * *r.mc_stderr);
}

TEST(MonteCarlo, MatchesExactOverRepetitions) {
  Rng g(12);
  const auto p = oracle::random_tabular(3, 3, g);
  const auto q = oracle::random_tabular(3, 3, g);
  const double exact = joint_kl_exact(p, q).value;
  for (int rep = 0; rep < 20; ++rep) {
    Rng rng(100 + static_cast<std::uint64_t>(rep));
    const auto r = joint_kl_monte_carlo(p, q, 20000, rng);
    EXPECT_LE(std::abs(r.value - exact), 4 * *r.mc_stderr) << "rep " << rep;
  }
}

TEST(MonteCarlo, ZeroProbabilityInSample) {
  const auto p = SeqPolicy::shared(StepPolicy::context_free({0.5, 0.5}), 2);
  const auto q = SeqPolicy::shared(StepPolicy::context_free({1.0, 0.0}), 2);
  Rng rng(1);
  EXPECT_THROW(joint_kl_monte_carlo(p, q, 100, rng), ZeroProbability);
}

TEST(DivergenceProperties, RandomPairs) {
  Rng rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const int d = 2 + trial % 3;
    const int H = 1 + trial % 5;
    const auto p = oracle::random_tabular(H, d, rng, trial % 2 == 0 ? 0.05 : 0.001);
    const auto q = oracle::random_tabular(H, d, rng);
    const double k = joint_kl_exact(p, q).value;
    const double hel = squared_hellinger(p, q).value;
    const double tv = total_variation(p, q).value;
    const double step_sum = stepwise_hellinger_sum(p, q);
    EXPECT_GE(k, 0.0);
    EXPECT_GE(hel, 0.0);
    EXPECT_LE(hel, 2.0);
    EXPECT_LE(tv, 1.0);
    EXPECT_LE(tv, std::sqrt(k / 2.0) + 1e-12);
    EXPECT_GE(k + 1e-12, 2.0 * tv * tv);
    EXPECT_LE(hel, 2.0 * tv + 1e-12);
    EXPECT_LE(hel / 7.0, step_sum + 1e-12);
    EXPECT_LE(step_sum, H * hel + 1e-12);
  }
}

TEST(DivergenceProperties, ZeroIffLawsEqual) {
  Rng rng(14);
  const auto p = oracle::random_tabular(3, 2, rng);
  // Same joint law through a different table object.
  std::vector<StepPolicy> copy;
  for (int h = 0; h < 3; ++h) {
    const auto t = p.step(h).table();
    copy.push_back(StepPolicy::tabular(2, h, h, std::vector<double>(t.begin(), t.end())));
  }
  const SeqPolicy same(std::move(copy));
  EXPECT_EQ(joint_kl_exact(p, same).value, 0.0);
  EXPECT_EQ(squared_hellinger(p, same).value, 0.0);
  EXPECT_EQ(total_variation(p, same).value, 0.0);
  const auto other = oracle::random_tabular(3, 2, rng);
  EXPECT_GT(joint_kl_exact(p, other).value, 0.0);
  EXPECT_GT(squared_hellinger(p, other).value, 0.0);
  EXPECT_GT(total_variation(p, other).value, 0.0);
}

TEST(DivergenceReport, CsvRow) {
  EXPECT_EQ(divergence_csv_header(), "value,method,mc_samples,mc_stderr");
  DivergenceReport r{0.25, Method::ExactEnumeration, std::nullopt, std::nullopt};
  EXPECT_EQ(to_csv_row(r), "0.25,exact_enumeration,,");
  DivergenceReport m{0.5, Method::MonteCarlo, 100, 0.125};
  EXPECT_EQ(to_csv_row(m), "0.5,monte_carlo,100,0.125");
}

TEST(Kernel, MatchesSerialReference) {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const auto p = oracle::random_tabular(1 + trial % 7, 3, rng);
    const auto q = oracle::random_tabular(1 + trial % 7, 3, rng);
    EXPECT_NEAR(joint_kl_exact(p, q).value, reference::joint_kl(p, q), 1e-12);
    EXPECT_NEAR(squared_hellinger(p, q).value, reference::squared_hellinger(p, q), 1e-12);
    EXPECT_NEAR(total_variation(p, q).value, reference::total_variation(p, q), 1e-12);
  }
}

TEST(Kernel, IndependentOfThreadCount) {
  Rng rng(16);
  const auto p = oracle::random_tabular(9, 3, rng);
  const auto q = oracle::random_tabular(9, 3, rng);
  const int saved = omp_get_max_threads();
  omp_set_num_threads(1);
  const double one = joint_kl_exact(p, q).value;
  omp_set_num_threads(4);
  const double four = joint_kl_exact(p, q).value;
  omp_set_num_threads(saved);
  EXPECT_EQ(one, four);
}

TEST(MinClassKl, MatchesMemberEnumeration) {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const int H = 1 + trial % 3;
    std::vector<StepPolicy> base;
    for (int j = 0; j < 3; ++j) {
      base.push_back(StepPolicy::tabular(2, 0, H - 1, [&](std::span<const Token>, std::span<double> row) {
        const auto r = oracle::random_row(2, rng);
        std::copy(r.begin(), r.end(), row.begin());
      }));
    }
    const auto truth = oracle::random_tabular(H, 2, rng);
    for (auto cls : {PolicyClass::decomposable(base, H), PolicyClass::fully_shared(base, H)}) {
      double best = INFINITY;
      for (const auto& m : class_members(cls)) best = std::min(best, oracle::kl_laws(oracle::joint_law(truth), oracle::joint_law(m)));
      EXPECT_NEAR(min_class_kl(truth, cls).value, best, 1e-12);
    }
  }
}
