#include <gtest/gtest.h>

#include <cmath>

#include "arkl/divergences.hpp"
#include "arkl/hard_instances.hpp"
#include "arkl/serialize.hpp"
#include "oracles.hpp"

using namespace arkl;

namespace {

double closed_pairwise(double eps) { return eps * std::tanh(eps); }
double closed_mixture(double eps) { return eps * std::tanh(eps) - std::log(std::cosh(eps)); }

// KL between two context-free rows, summed directly.
double row_kl(std::span<const double> p, std::span<const double> q) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += p[i] * std::log(p[i] / q[i]);
  return s;
}

std::vector<std::vector<std::size_t>> all_thetas(int H, int m) {
  std::vector<std::vector<std::size_t>> out;
  std::uint64_t count = 1;
  for (int h = 0; h < H; ++h) count *= static_cast<std::uint64_t>(m);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto dig = oracle::digits(i, m, H);
    out.emplace_back(dig.begin(), dig.end());
  }
  return out;
}

}  // namespace

TEST(Hadamard, SylvesterRowsAreOrthogonal) {
  for (int order : {1, 2, 4, 8, 16, 32}) {
    const auto h = sylvester_hadamard(order);
    for (int i = 0; i < order; ++i) {
      for (int j = 0; j < order; ++j) {
        int dot = 0;
        for (int k = 0; k < order; ++k) dot += h[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)] *
                                                h[static_cast<std::size_t>(j)][static_cast<std::size_t>(k)];
        EXPECT_EQ(dot, i == j ? order : 0);
      }
    }
  }
  EXPECT_THROW(sylvester_hadamard(6), InvalidParam);
}

TEST(Hadamard, ColumnsAreBalancedAndOrthogonal) {
  for (int m : {2, 3, 4, 5, 8, 16}) {
    const auto fam = make_hadamard_family(m, 0.5);
    ASSERT_EQ(fam.columns.size(), static_cast<std::size_t>(m));
    EXPECT_GT(fam.d - 1, m - 1);
    for (std::size_t a = 0; a < fam.columns.size(); ++a) {
      int sum = 0;
      for (int v : fam.columns[a]) sum += v;
      EXPECT_EQ(sum, 0);
      for (std::size_t b = a + 1; b < fam.columns.size(); ++b) {
        int dot = 0;
        for (int s = 0; s < fam.d; ++s) dot += fam.columns[a][static_cast<std::size_t>(s)] * fam.columns[b][static_cast<std::size_t>(s)];
        EXPECT_EQ(dot, 0);
      }
    }
  }
}

TEST(Hadamard, OrderIsDoubledWhenColumnsRunOut) {
  EXPECT_EQ(make_hadamard_family(2, 0.5).d, 4);
  EXPECT_EQ(make_hadamard_family(4, 0.5).d, 8);
  EXPECT_EQ(make_hadamard_family(8, 0.5).d, 16);
  EXPECT_EQ(make_hadamard_family(5, 0.5).d, 8);
  EXPECT_EQ(make_hadamard_family(16, 0.5).d, 32);
}

TEST(Hadamard, ClosedFormsUnderEnumeration) {
  for (int m : {2, 4, 8, 16}) {
    for (double eps : {0.1, 0.5, 1.0}) {
      const auto fam = make_hadamard_family(m, eps);
      const auto uniform = SeqPolicy::shared(fam.uniform(), 1);
      for (int a = 0; a < m; ++a) {
        const auto pa = SeqPolicy::shared(fam.members[static_cast<std::size_t>(a)], 1);
        EXPECT_NEAR(joint_kl_exact(pa, uniform).value, closed_mixture(eps), 1e-12);
        for (int b = 0; b < m; ++b) {
          if (a == b) continue;
          const auto pb = SeqPolicy::shared(fam.members[static_cast<std::size_t>(b)], 1);
          EXPECT_NEAR(joint_kl_exact(pa, pb).value, closed_pairwise(eps), 1e-12);
        }
      }
      EXPECT_NEAR(fam.pairwise_kl(), closed_pairwise(eps), 1e-15);
      EXPECT_NEAR(fam.kl_to_mixture(), closed_mixture(eps), 1e-15);
    }
  }
}

TEST(Hadamard, NumericExamples) {
  const auto fam = make_hadamard_family(8, 0.5);
  const auto p0 = SeqPolicy::shared(fam.members[0], 1);
  const auto p1 = SeqPolicy::shared(fam.members[1], 1);
  EXPECT_NEAR(joint_kl_exact(p0, p1).value, 0.23105857863000487, 1e-12);
  EXPECT_NEAR(joint_kl_exact(p0, SeqPolicy::shared(fam.uniform(), 1)).value, 0.11094407167172742, 1e-12);
  const auto fam3 = make_hadamard_family(8, 0.3);
  EXPECT_NEAR(row_kl(fam3.members[2].table(), fam3.members[6].table()), 0.087393783735477, 1e-12);
}

TEST(Hadamard, ZeroEpsCollapsesToUniform) {
  const auto fam = make_hadamard_family(2, 0.0);
  for (const auto& member : fam.members) {
    for (double x : member.table()) EXPECT_EQ(x, 1.0 / fam.d);
  }
  EXPECT_EQ(fam.pairwise_kl(), 0.0);
}

TEST(Hadamard, InvalidParameters) {
  EXPECT_THROW(make_hadamard_family(1, 0.5), InvalidParam);
  EXPECT_THROW(make_hadamard_family(4, 1.5), InvalidParam);
  EXPECT_THROW(make_hadamard_family(4, -0.1), InvalidParam);
}

TEST(Hadamard, QuadraticBoundsOnGrid) {
  for (int i = 1; i <= 100; ++i) {
    const double eps = i / 100.0;
    EXPECT_GE(closed_pairwise(eps), eps * eps / 2);
    EXPECT_LE(closed_mixture(eps), eps * eps / 2);
    const auto fam = make_hadamard_family(4, eps);
    EXPECT_GE(fam.pairwise_kl(), eps * eps / 2);
    EXPECT_LE(fam.kl_to_mixture(), eps * eps / 2);
  }
}

TEST(Hadamard, MaxLogRatioIsTwoEps) {
  const auto fam = make_hadamard_family(8, 0.4);
  const auto cls = PolicyClass::fully_shared(fam.members, 1);
  EXPECT_NEAR(member_log_ratio_bound(cls), 0.8, 1e-12);
}

TEST(FanoEps, RuleAndClipping) {
  EXPECT_NEAR(fano_eps(1.0, 8, 200), 0.25 * std::sqrt(std::log(8.0) / 200), 1e-15);
  EXPECT_EQ(fano_eps(1.0, 8, 1), 0.25 * std::sqrt(std::log(8.0)));
  EXPECT_EQ(fano_eps(4.0, 8, 1), 1.0);
  EXPECT_EQ(fano_eps(0.5, 1000000, 1), 0.25);
}

TEST(FanoInstance, HammingAdditivityExact) {
  const double eps = 0.6;
  for (int H = 1; H <= 4; ++H) {
    for (int m : {2, 3, 4}) {
      const auto thetas = all_thetas(H, m);
      for (const auto& a : thetas) {
        const auto inst = make_fano_instance(H, m, eps, a);
        for (const auto& b : thetas) {
          const auto other = make_fano_instance(H, m, eps, b);
          const double k = static_cast<double>(hamming_distance(a, b));
          const double got = H <= 2 ? joint_kl_exact(inst.truth, other.truth).value
                                    : joint_kl_chain(inst.truth, other.truth).value;
          EXPECT_NEAR(got, k * closed_pairwise(eps), 1e-12);
          EXPECT_NEAR(inst.kl_to(b), k * closed_pairwise(eps), 1e-15);
          EXPECT_GE(got + 1e-12, k * eps * eps / 2);
        }
      }
    }
  }
}

TEST(FanoInstance, SingleStepIsHadamardFamily) {
  const auto inst = make_fano_instance(1, 8, 0.5, std::vector<std::size_t>{3});
  const auto fam = make_hadamard_family(8, 0.5);
  EXPECT_EQ(inst.truth.step(0), fam.members[3]);
  EXPECT_EQ(inst.cls.base().size(), 8u);
}

TEST(FanoInstance, RandomTruthIsDeterministic) {
  Rng a(5), b(5);
  EXPECT_EQ(make_fano_instance(6, 8, 0.2, a).theta, make_fano_instance(6, 8, 0.2, b).theta);
  EXPECT_THROW(make_fano_instance(2, 4, 0.2, std::vector<std::size_t>{0, 4}), InvalidParam);
  EXPECT_THROW(make_fano_instance(2, 4, 0.2, std::vector<std::size_t>{0}), InvalidParam);
}

TEST(BernoulliInstance, GapMatchesExactKlDifference) {
  for (std::uint64_t n : {1u, 100u, 10000u}) {
    for (int sign : {1, -1}) {
      const auto inst = make_bernoulli_instance(n, 1, sign);
      EXPECT_NEAR(inst.b, 0.1 / std::sqrt(static_cast<double>(n)), 1e-17);
      const auto good = SeqPolicy::shared(inst.base[inst.optimal_index()], 1);
      const auto bad = SeqPolicy::shared(inst.base[1 - inst.optimal_index()], 1);
      const double gap = joint_kl_exact(inst.truth, bad).value - joint_kl_exact(inst.truth, good).value;
      EXPECT_NEAR(gap, 2 * inst.b * std::log(3.0), 1e-12);
      EXPECT_NEAR(inst.per_step_gap(), gap, 1e-12);
      const double pstar = 0.5 + sign * inst.b;
      EXPECT_NEAR(inst.per_step_min_kl(), oracle::bernoulli_kl(pstar, sign > 0 ? 0.75 : 0.25), 1e-15);
    }
  }
  EXPECT_NEAR(make_bernoulli_instance(100, 1, 1).per_step_gap(), 0.02 * std::log(3.0), 1e-15);
  EXPECT_NEAR(0.02 * std::log(3.0), 0.021972245773362196, 1e-15);
}

TEST(BernoulliInstance, GapAccumulatesOverSteps) {
  const auto inst = make_bernoulli_instance(100, 5, 1);
  const auto bad = SeqPolicy::shared(inst.base[1], 5);
  const auto good = SeqPolicy::shared(inst.base[0], 5);
  EXPECT_NEAR(joint_kl_exact(inst.truth, bad).value - joint_kl_exact(inst.truth, good).value,
              5 * inst.per_step_gap(), 1e-12);
}

TEST(BernoulliInstance, TruthOutsideClassAndTvBound) {
  const auto inst = make_bernoulli_instance(100, 1, 1);
  for (const auto& member : inst.base) EXPECT_FALSE(member == inst.truth.step(0));
  const double tv = bernoulli_nfold_tv(inst.b, 100);
  EXPECT_LE(tv, std::sqrt(8.0) / 10);
  EXPECT_LT(std::sqrt(8.0) / 10, 1.0 / 3);
  EXPECT_GT(tv, 0.0);
}

TEST(BernoulliInstance, NfoldTvMatchesEnumeration) {
  for (std::uint64_t n : {1u, 2u, 5u, 10u}) {
    const double b = 0.1;
    const auto p = SeqPolicy::shared(StepPolicy::context_free({0.5 - b, 0.5 + b}), static_cast<int>(n));
    const auto q = SeqPolicy::shared(StepPolicy::context_free({0.5 + b, 0.5 - b}), static_cast<int>(n));
    EXPECT_NEAR(bernoulli_nfold_tv(b, n), oracle::tv_laws(oracle::joint_law(p), oracle::joint_law(q)), 1e-12);
  }
}

TEST(BernoulliInstance, AssumptionConstantIsFinite) {
  const auto inst = make_bernoulli_instance(100, 1, 1);
  const double g = log_ratio_bound(inst.truth, inst.cls);
  EXPECT_TRUE(std::isfinite(g));
  EXPECT_NEAR(g, std::log(0.51 / 0.25), 1e-12);
}

TEST(DependentInstance, EpsRuleAndClosedForms) {
  const auto inst = make_dependent_instance(4, 8, 1.0, 200);
  const double expected = std::min({(4.0 / 4) * std::sqrt(std::log(8.0) / 200), 2.0, 1.0});
  EXPECT_NEAR(inst.eps, expected, 1e-15);
  ASSERT_EQ(inst.cls.member_count(), 8u);
  const auto& members = inst.cls.explicit_members();
  for (std::size_t a = 0; a < members.size(); ++a) {
    for (std::size_t b = 0; b < members.size(); ++b) {
      if (a == b) continue;
      EXPECT_NEAR(joint_kl_exact(members[a], members[b]).value, closed_pairwise(inst.eps), 1e-12);
    }
  }
  EXPECT_NEAR(member_log_ratio_bound(inst.cls), 2 * inst.eps, 1e-12);
  EXPECT_LE(2 * inst.eps, 4.0 * 1.0 + 1e-12);
}

TEST(DependentInstance, OutcomeRatiosEnumerated) {
  const auto inst = make_dependent_instance(2, 8, 2.0, 50);
  double worst = 0.0;
  const auto& members = inst.cls.explicit_members();
  for (const auto& a : members) {
    for (const auto& b : members) {
      const auto ra = a.step(0).table();
      const auto rb = b.step(0).table();
      for (std::size_t s = 0; s < ra.size(); ++s) worst = std::max(worst, std::abs(std::log(ra[s] / rb[s])));
    }
  }
  EXPECT_NEAR(worst, 2 * inst.eps, 1e-12);
}

TEST(DependentInstance, ClippingAndValidation) {
  EXPECT_EQ(make_dependent_instance(8, 8, 1.0, 1).eps, 1.0);
  EXPECT_THROW(make_dependent_instance(2, 3, 1.0, 10), InvalidParam);
}

TEST(MisspecifiedInstance, MinKlMatchesBruteForce) {
  Rng rng(7);
  for (int trial = 0; trial < 15; ++trial) {
    const int H = 1 + trial % 3;
    const auto inst = make_misspecified_instance(H, 2 + trial % 2, 3, 0.3, rng);
    const auto truth_law = oracle::joint_law(inst.truth);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& m : class_members(inst.cls)) best = std::min(best, oracle::kl_laws(truth_law, oracle::joint_law(m)));
    EXPECT_NEAR(inst.optimum.value, best, 1e-12);
    EXPECT_GT(inst.optimum.value, 0.0);
  }
}

TEST(MisspecifiedInstance, ZeroPerturbationIsRealizable) {
  Rng rng(8);
  const auto inst = make_misspecified_instance(3, 3, 4, 0.0, rng);
  EXPECT_NEAR(inst.optimum.value, 0.0, 1e-12);
  EXPECT_THROW(make_misspecified_instance(3, 3, 4, 1.5, rng), InvalidParam);
}

TEST(MisspecifiedInstance, DoublingHorizonDoublesMinKlForProducts) {
  Rng rng(9);
  std::vector<StepPolicy> base;
  for (int j = 0; j < 3; ++j) base.push_back(StepPolicy::context_free(oracle::random_row(3, rng)));
  const auto star = StepPolicy::context_free(oracle::random_row(3, rng));
  const double one = min_class_kl(SeqPolicy::shared(star, 2), PolicyClass::decomposable(base, 2)).value;
  const double two = min_class_kl(SeqPolicy::shared(star, 4), PolicyClass::decomposable(base, 4)).value;
  EXPECT_NEAR(two, 2 * one, 1e-12);
}

TEST(Manifest, RecordsConstructionParametersAndSeed) {
  const auto j = manifest(make_bernoulli_instance(100, 2, -1), 17);
  EXPECT_EQ(j.at("construction"), "bernoulli_misspecified");
  EXPECT_EQ(j.at("seed"), 17);
  EXPECT_EQ(j.at("params").at("sign"), -1);
  EXPECT_EQ(parse_real(j.at("oracle").at("per_step_gap").get<std::string>()), 0.02 * std::log(3.0));
  EXPECT_TRUE(j.contains("class"));
  EXPECT_TRUE(j.contains("truth"));
  const auto h = manifest(make_hadamard_family(4, 0.5));
  EXPECT_TRUE(h.at("seed").is_null());
  EXPECT_EQ(h.at("columns").size(), 4u);
}
