#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "ldplab/assumptions.hpp"
#include "ldplab/model.hpp"
#include "ldplab/spectral.hpp"

using namespace ldplab;

namespace {

HVec vec(std::initializer_list<double> v) {
  HVec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST(SpectralBasis, BoundIsMaxOfOneAndExp) {
  EXPECT_DOUBLE_EQ(SpectralBasis({-1.0, -4.0}).semigroup_bound(), 1.0);
  EXPECT_DOUBLE_EQ(SpectralBasis({-1.0, 0.5}).semigroup_bound(), std::exp(0.5));
  EXPECT_THROW(SpectralBasis(std::vector<double>{}), std::invalid_argument);
}

TEST(SemigroupApply, IdentityAtZero) {
  const SpectralBasis b({-1.0, -4.0, 2.0});
  const HVec v = vec({0.3, -1.2, 5.0});
  EXPECT_EQ(semigroup_apply(b, 0.0, v), v);
}

TEST(SemigroupApply, DiagonalExponential) {
  const SpectralBasis b({-1.0, -4.0});
  const HVec out = semigroup_apply(b, 0.5, vec({1.0, 1.0}));
  EXPECT_NEAR(out[0], 0.606531, 1e-6);
  EXPECT_NEAR(out[1], 0.135335, 1e-6);
}

TEST(SemigroupApply, RejectsNegativeTime) {
  const SpectralBasis b({-1.0});
  EXPECT_THROW(semigroup_apply(b, -0.1, vec({1.0})), std::domain_error);
}

TEST(SemigroupApply, SemigroupLaw) {
  const SpectralBasis b({-1.0, -4.0});
  const HVec v = vec({1.0, 1.0});
  const HVec two = semigroup_apply(b, 0.3, semigroup_apply(b, 0.2, v));
  EXPECT_LT((two - semigroup_apply(b, 0.5, v)).norm(), 1e-14);

  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  const SpectralBasis c({-7.0, -0.5, 0.0, 1.3});
  for (int trial = 0; trial < 200; ++trial) {
    const double t = unif(gen), s = unif(gen);
    const HVec w = HVec::Random(4);
    const HVec lhs = semigroup_apply(c, t, semigroup_apply(c, s, w));
    const HVec rhs = semigroup_apply(c, t + s, w);
    EXPECT_LE((lhs - rhs).norm(), 1e-13 * rhs.norm());
  }
}

TEST(SemigroupApply, ContractionForNonpositiveSpectrum) {
  const SpectralBasis b({0.0, -0.1, -30.0});
  ASSERT_TRUE(b.is_contraction());
  for (double t : {0.0, 0.01, 0.7, 3.0}) {
    const HVec v = HVec::Random(3);
    EXPECT_LE(semigroup_apply(b, t, v).norm(), v.norm());
  }
}

TEST(ProjectU, Examples) {
  const UVec u = vec({2.0, 3.0, 5.0});
  EXPECT_EQ(project_u(3, u), u);
  EXPECT_EQ(project_u(0, u), UVec::Zero(3));
  EXPECT_EQ(project_u(1, u), vec({2.0, 0.0, 0.0}));
  EXPECT_THROW(project_u(4, u), std::out_of_range);
}

TEST(ProjectU, IdempotentAndSelfAdjoint) {
  for (std::size_t n = 0; n <= 4; ++n) {
    const UVec u = UVec::Random(4), v = UVec::Random(4);
    EXPECT_EQ(project_u(n, project_u(n, u)), project_u(n, u));
    EXPECT_NEAR(project_u(n, u).dot(v), u.dot(project_u(n, v)), 1e-15);
  }
}

TEST(NoiseSpace, WeightsValidated) {
  EXPECT_NO_THROW(NoiseSpace({1.0, 0.5, 0.25}));
  EXPECT_THROW(NoiseSpace({1.0, 1.0}), std::invalid_argument);
  EXPECT_THROW(NoiseSpace({1.0, -0.5}), std::invalid_argument);
  EXPECT_THROW(NoiseSpace(std::vector<double>{}), std::invalid_argument);
}

TEST(NoiseSpace, U1NormAndDomination) {
  const NoiseSpace noise({1.5, 0.7, 0.2});
  const UVec u = vec({1.0, -2.0, 3.0});
  EXPECT_NEAR(noise.u1_norm(u), std::sqrt(2.25 + 0.49 * 4.0 + 0.04 * 9.0), 1e-15);
  std::mt19937_64 gen(11);
  std::normal_distribution<double> z;
  for (int i = 0; i < 100; ++i) {
    const UVec w = vec({z(gen), z(gen), z(gen)});
    EXPECT_LE(noise.u1_norm(w), noise.weight(0) * w.norm() * (1.0 + 1e-15));
  }
}

TEST(NoiseSpace, U1ProjectionAfterEmbeddingIsPiN) {
  const NoiseSpace noise = NoiseSpace::harmonic(4);
  const UVec u = UVec::Random(4);
  for (std::size_t n = 0; n <= 4; ++n) {
    EXPECT_LT((noise.project_u1(n, noise.embed(u)) - project_u(n, u)).norm(), 1e-15);
  }
}

TEST(TimeGrid, UniformNodes) {
  const TimeGrid g(8);
  const auto t = g.nodes();
  ASSERT_EQ(t.size(), 9u);
  EXPECT_EQ(t.front(), 0.0);
  EXPECT_EQ(t.back(), 1.0);
  for (std::size_t j = 1; j < t.size(); ++j) EXPECT_NEAR(t[j] - t[j - 1], 0.125, 1e-16);
  EXPECT_THROW(TimeGrid(0), std::invalid_argument);
}

TEST(HsNorm, Examples) {
  EXPECT_NEAR(hs_norm(Operator::Identity(2, 2)), std::numbers::sqrt2, 1e-15);
  EXPECT_EQ(hs_norm(Operator::Zero(3, 2)), 0.0);
  Operator m(2, 2);
  m << 3, 0, 0, 4;
  EXPECT_DOUBLE_EQ(hs_norm(m), 5.0);
}

TEST(CheckA1Tail, ZeroAtFullProjection) {
  Operator c(2, 3);
  c << 1, 2, 3, 4, 5, 6;
  const ModelSpec model(2, 3, ZeroDrift{}, ConstantDiffusion{c});
  EXPECT_EQ(check_a1_tail(model, 1.0, 3), 0.0);
}

TEST(CheckA1Tail, ConstantDiffusionClosedForm) {
  Operator c(2, 3);
  c << 1, 2, 3, 4, 5, 6;
  const ModelSpec model(2, 3, ZeroDrift{}, ConstantDiffusion{c});
  for (std::size_t n = 0; n <= 3; ++n) {
    double expected = 0.0;
    for (Eigen::Index k = static_cast<Eigen::Index>(n); k < 3; ++k) expected += c.col(k).squaredNorm();
    EXPECT_NEAR(check_a1_tail(model, 2.0, n), std::sqrt(expected), 1e-14);
  }
}

TEST(CheckA1Tail, DiagonalLipschitzBound) {
  const std::vector<double> sigma{0.9, 0.6, 0.3, 0.1};
  const ModelSpec model(4, 4, ZeroDrift{}, DiagonalLipschitzDiffusion{sigma, 1.0});
  const double r = 0.8;
  for (std::size_t n = 0; n < 4; ++n) {
    double sum_sq = 0.0;
    for (std::size_t k = n; k < 4; ++k) sum_sq += sigma[k] * sigma[k];
    const double tail = check_a1_tail(model, r, n);
    EXPECT_LE(tail, r * std::sqrt(sum_sq));
    // The axis points +-r e_k are sampled; on them the tail is r sigma_{n+1}.
    EXPECT_GE(tail, r * sigma[n] - 1e-15);
  }
}

TEST(CheckA1Tail, NonincreasingInN) {
  const ModelSpec model(3, 3, ZeroDrift{}, DiagonalLipschitzDiffusion{{1.0, 0.5, 0.25}, 2.0});
  double previous = std::numeric_limits<double>::infinity();
  for (std::size_t n = 0; n <= 3; ++n) {
    const double tail = check_a1_tail(model, 1.5, n, 99);
    EXPECT_LE(tail, previous);
    previous = tail;
  }
  EXPECT_EQ(previous, 0.0);
}

TEST(CheckA2Modulus, TrivialCases) {
  EXPECT_EQ(check_a2_modulus(SpectralBasis({-3.0}), 0.5, 0.0), 0.0);
  EXPECT_EQ(check_a2_modulus(SpectralBasis({0.0}), 0.5, 0.3), 0.0);
}

TEST(CheckA2Modulus, MatchesExhaustiveGrid) {
  // Brute force over all grid pairs with |t - r| <= mesh.
  const double a = 0.5, mesh = 0.25;
  double brute = 0.0;
  const int pts = 401;
  for (int k = 0; k < 40; ++k) {
    const double eps = std::ldexp(1.0, -k);
    for (int i = 0; i < pts; ++i) {
      const double t = a + (1.0 - a) * i / (pts - 1.0);
      for (int j = i; j < pts; ++j) {
        const double r = a + (1.0 - a) * j / (pts - 1.0);
        if (r - t > mesh + 1e-15) break;
        brute = std::max(brute, std::abs(std::exp(-eps * t) - std::exp(-eps * r)));
      }
    }
  }
  EXPECT_NEAR(check_a2_modulus(SpectralBasis({-1.0}), a, mesh), brute, 1e-15);
  EXPECT_NEAR(brute, std::exp(-0.5) * (1.0 - std::exp(-0.25)), 1e-15);
}

TEST(CheckA2Modulus, DominatedByLogBoundAndVanishes) {
  for (const auto& spectrum : {std::vector<double>{-1.0}, std::vector<double>{-1.0, -10.0, -100.0},
                               std::vector<double>{-0.5, -2.0, -8.0, -32.0}}) {
    const SpectralBasis b(spectrum);
    double previous = std::numeric_limits<double>::infinity();
    for (double mesh : {0.1, 0.01, 0.001, 0.0001}) {
      const double value = check_a2_modulus(b, 0.5, mesh);
      EXPECT_LE(value, a2_log_bound(0.5, mesh));
      EXPECT_LE(value, previous);
      previous = value;
    }
    EXPECT_LT(previous, 1e-4);
  }
}
