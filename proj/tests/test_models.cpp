#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "ldplab/model.hpp"
#include "ldplab/skeleton.hpp"

using namespace ldplab;

namespace {

HVec vec(std::initializer_list<double> v) {
  HVec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

ModelSpec affine_diffusion_model() {
  AffineDiffusion f;
  f.offsets = Operator::Zero(3, 2);
  f.offsets(0, 0) = 0.4;
  f.offsets(2, 1) = -0.2;
  Eigen::MatrixXd s0(3, 3), s1(3, 3);
  s0 << 0.3, 0.1, 0.0, -0.2, 0.5, 0.1, 0.0, 0.0, 0.2;
  s1 << 0.0, 0.0, 0.4, 0.1, 0.0, 0.0, 0.3, -0.3, 0.1;
  f.slopes = {s0, s1};
  return ModelSpec(3, 2, ZeroDrift{}, f);
}

}  // namespace

TEST(EvalDrift, ZeroDriftIsZero) {
  const ModelSpec model(2, 1, ZeroDrift{}, ConstantDiffusion{Operator::Ones(2, 1)}, NuProfile::constant(3.0));
  EXPECT_EQ(eval_drift(model, 0.4, vec({5.0, -2.0})), HVec::Zero(2));
}

TEST(EvalDrift, IdentityAffine) {
  const ModelSpec model(2, 1, AffineDrift{HVec::Zero(2), Eigen::MatrixXd::Identity(2, 2)},
                        ConstantDiffusion{Operator::Zero(2, 1)}, NuProfile::constant(1.0));
  const HVec x = vec({0.7, -3.0});
  for (double t : {0.0, 0.3, 1.0}) EXPECT_EQ(eval_drift(model, t, x), x);
}

TEST(EvalDrift, SingularPowerWeight) {
  const ModelSpec power(2, 1, AffineDrift{vec({1.0, 0.0}), Eigen::MatrixXd::Zero(2, 2)},
                        ConstantDiffusion{Operator::Zero(2, 1)}, NuProfile::power(1.0, -0.25));
  const HVec f = eval_drift(power, 0.5, vec({3.0, 4.0}));
  EXPECT_NEAR(f[0], 1.189207, 1e-6);
  EXPECT_EQ(f[1], 0.0);

  // The same weight tabulated at cell midpoints of a 4-cell grid.
  std::vector<double> table;
  for (int j = 0; j < 4; ++j) table.push_back(std::pow((j + 0.5) / 4.0, -0.25));
  const ModelSpec tabulated(2, 1, AffineDrift{vec({1.0, 0.0}), Eigen::MatrixXd::Zero(2, 2)},
                            ConstantDiffusion{Operator::Zero(2, 1)}, NuProfile::table(table));
  EXPECT_NEAR(eval_drift(tabulated, 0.55, vec({0.0, 0.0}))[0], std::pow(0.625, -0.25), 1e-15);
}

TEST(EvalDrift, RejectsTimeOutsideUnitInterval) {
  const ModelSpec model(1, 1, ZeroDrift{}, ConstantDiffusion{Operator::Ones(1, 1)});
  EXPECT_THROW(eval_drift(model, -0.1, vec({0.0})), std::domain_error);
  EXPECT_THROW(eval_drift(model, 1.5, vec({0.0})), std::domain_error);
}

TEST(NuProfile, SquareIntegrabilityEnforced) {
  EXPECT_THROW(NuProfile::power(1.0, -0.5), std::invalid_argument);
  EXPECT_THROW(NuProfile::power(1.0, -0.25)(0.0), std::domain_error);
  EXPECT_NO_THROW(NuProfile::power(1.0, -0.25).on_cell(0.0, 0.01));
}

TEST(EvalDiffusion, Examples) {
  Operator c(2, 2);
  c << 1, 2, 3, 4;
  const ModelSpec constant(2, 2, ZeroDrift{}, ConstantDiffusion{c});
  EXPECT_EQ(eval_diffusion(constant, vec({0.0, 0.0})), c);
  EXPECT_EQ(eval_diffusion(constant, vec({9.0, -9.0})), c);

  const ModelSpec diag(2, 2, ZeroDrift{}, DiagonalLipschitzDiffusion{{1.0, 1.0}, 1.0});
  Operator expected(2, 2);
  expected << 0.5, 0.0, 0.0, -1.0;
  EXPECT_EQ(eval_diffusion(diag, vec({0.5, -2.0})), expected);

  const ModelSpec zero(2, 3, ZeroDrift{}, ConstantDiffusion{Operator::Zero(2, 3)});
  EXPECT_EQ(eval_diffusion(zero, vec({1.0, 1.0})), Operator::Zero(2, 3));
}

TEST(ModelSpec, ValidatesForms) {
  EXPECT_THROW(ModelSpec(2, 1, AffineDrift{vec({2.0, 0.0}), Eigen::MatrixXd::Zero(2, 2)},
                         ConstantDiffusion{Operator::Zero(2, 1)}),
               std::invalid_argument);
  EXPECT_THROW(ModelSpec(2, 1, ZeroDrift{}, ConstantDiffusion{Operator::Zero(1, 1)}), std::invalid_argument);
  EXPECT_THROW(ModelSpec(1, 2, ZeroDrift{}, DiagonalLipschitzDiffusion{{1.0, 0.5}, 1.0}), std::invalid_argument);
  EXPECT_THROW(ModelSpec(1, 1, ZeroDrift{}, ConstantDiffusion{Operator::Constant(1, 1, 2.0)}, NuProfile::constant(0.0), 1.0),
               std::invalid_argument);
}

TEST(ModelSpec, GammaOnlyForBoundedForms) {
  EXPECT_TRUE(ModelSpec(1, 1, ZeroDrift{}, ConstantDiffusion{Operator::Ones(1, 1)}).gamma_bound().has_value());
  EXPECT_TRUE(ModelSpec(1, 1, ZeroDrift{}, DiagonalLipschitzDiffusion{{1.0}, 2.0}).gamma_bound().has_value());
  EXPECT_FALSE(affine_diffusion_model().gamma_bound().has_value());
}

TEST(Lipschitz, CertifiedOnTenThousandPairs) {
  const std::vector<ModelSpec> models = {
      ModelSpec(2, 2, ZeroDrift{}, ConstantDiffusion{Operator::Random(2, 2)}),
      ModelSpec(4, 3, AffineDrift{vec({0.5, 0.0, 0.0, 0.5}), 0.9 * Eigen::MatrixXd::Identity(4, 4)},
                DiagonalLipschitzDiffusion{{1.0, 0.6, 0.3}, 1.5}, NuProfile::constant(2.0)),
      affine_diffusion_model(),
  };
  for (const auto& model : models) {
    const auto cert = certify_lipschitz(model, 10000, 10.0, 2024);
    EXPECT_LE(cert.diffusion_ratio, model.lambda_lip());
    EXPECT_LE(cert.diffusion_growth_ratio, model.lambda_lip());
    EXPECT_LE(cert.drift_ratio, model.nu()(0.5) + 1e-15);
  }
}

TEST(Lipschitz, DriftGrowth) {
  const ModelSpec model(3, 1, AffineDrift{vec({0.6, 0.0, 0.8}), Eigen::MatrixXd::Identity(3, 3)},
                        ConstantDiffusion{Operator::Zero(3, 1)}, NuProfile::power(2.0, 0.5));
  std::mt19937_64 gen(5);
  std::normal_distribution<double> z;
  for (int i = 0; i < 1000; ++i) {
    const HVec x = vec({3 * z(gen), 3 * z(gen), 3 * z(gen)});
    const double t = std::abs(std::sin(i + 0.5));
    EXPECT_LE(eval_drift(model, t, x).norm(), model.nu()(t) * (1.0 + x.norm()) * (1.0 + 1e-14));
  }
}

TEST(DiffusionJacobian, MatchesFiniteDifferences) {
  const ModelSpec diag(3, 2, ZeroDrift{}, DiagonalLipschitzDiffusion{{0.8, -0.5}, 2.0});
  const ModelSpec aff = affine_diffusion_model();
  const auto trunc = truncate_diffusion(aff, 1.0);
  const HVec x = vec({0.7, -1.1, 0.4});
  const UVec psi = vec({0.9, -1.3});
  auto check = [&](const auto& model) {
    Eigen::MatrixXd jac;
    model.diffusion_jacobian(x, psi, jac);
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < 3; ++i) {
      HVec xp = x, xm = x;
      xp[i] += h;
      xm[i] -= h;
      const HVec fd = (eval_diffusion(model, xp) * psi - eval_diffusion(model, xm) * psi) / (2 * h);
      EXPECT_LT((fd - jac.col(i)).norm(), 1e-8);
    }
  };
  check(diag);
  check(aff);
  check(trunc);
}

TEST(TruncateDiffusion, AgreesInsideBall) {
  const ModelSpec model = affine_diffusion_model();
  const auto trunc = truncate_diffusion(model, 2.0);
  const HVec x = vec({0.5, -1.0, 1.2});
  ASSERT_LE(x.norm(), 2.0);
  EXPECT_EQ(eval_diffusion(trunc, x), eval_diffusion(model, x));
}

TEST(TruncateDiffusion, RadialRescale) {
  AffineDiffusion f;
  f.offsets = Operator::Zero(2, 1);
  Eigen::MatrixXd e = Eigen::MatrixXd::Zero(2, 2);
  e(0, 0) = 1.0;
  f.slopes = {e};
  const ModelSpec linear(2, 1, ZeroDrift{}, f);
  const auto trunc = truncate_diffusion(linear, 1.0);
  Operator expected = Operator::Zero(2, 1);
  expected(0, 0) = 1.0;
  EXPECT_EQ(eval_diffusion(trunc, vec({2.0, 0.0})), expected);
}

TEST(TruncateDiffusion, ConstantUnchangedAndRadiusValidated) {
  const ModelSpec model(2, 2, ZeroDrift{}, ConstantDiffusion{Operator::Random(2, 2)});
  for (double radius : {0.1, 1.0, 50.0}) {
    const auto trunc = truncate_diffusion(model, radius);
    for (const HVec& x : {vec({0.0, 0.0}), vec({100.0, -3.0})}) EXPECT_EQ(eval_diffusion(trunc, x), eval_diffusion(model, x));
  }
  EXPECT_THROW(truncate_diffusion(model, 0.0), std::invalid_argument);
  EXPECT_THROW(truncate_diffusion(model, -1.0), std::invalid_argument);
}

TEST(TruncateDiffusion, GloballyBoundedAndLipschitzPreserved) {
  const ModelSpec model = affine_diffusion_model();
  const double radius = 3.0;
  const auto trunc = truncate_diffusion(model, radius);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> z;
  double sup_trunc = 0.0, sup_ball = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const HVec x = 10.0 * vec({z(gen), z(gen), z(gen)});
    sup_trunc = std::max(sup_trunc, eval_diffusion(trunc, x).norm());
    const HVec inside = x.norm() > radius ? HVec(radius / x.norm() * x) : x;
    sup_ball = std::max(sup_ball, eval_diffusion(model, inside).norm());
  }
  EXPECT_LE(sup_trunc, model.lambda_lip() * (1.0 + radius));
  EXPECT_LE(sup_trunc, sup_ball);
  ASSERT_TRUE(trunc.gamma_bound().has_value());
  EXPECT_LE(sup_trunc, *trunc.gamma_bound());
  const auto cert = certify_lipschitz(trunc, 10000, 10.0, 77);
  EXPECT_LE(cert.diffusion_ratio, model.lambda_lip());
}

TEST(TruncationRadius, Examples) {
  EXPECT_NEAR(truncation_radius(1.0, 0.5, 0.1, 1.0), 2.0 * std::exp(1.0) + 0.1, 1e-12);
  EXPECT_NEAR(truncation_radius(1.0, 0.5, 0.1, 1.0), 5.536563, 1e-6);
  EXPECT_DOUBLE_EQ(truncation_radius(0.7, 3.0, 0.2, 0.0), 0.7 + 0.2);
  EXPECT_NEAR(truncation_radius(0.5, 2.0, 1.0, 2.0), 4.5 * std::exp(4.0) + 1.0, 1e-10);
  EXPECT_THROW(truncation_radius(0.0, 1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(truncation_radius(1.0, -1.0, 1.0, 1.0), std::invalid_argument);
  EXPECT_THROW(truncation_radius(1.0, 1.0, 0.0, 1.0), std::invalid_argument);
}

TEST(TruncationRadius, ExceedsAprioriBoundByDelta) {
  const ModelSpec model = affine_diffusion_model();
  const TimeGrid grid(64);
  ControlPath phi(grid, 2);
  phi.values.row(0).setConstant(0.8);
  phi.values.row(1).setConstant(-0.5);
  const HVec x = vec({0.3, 0.2, -0.1});
  const double rho = x.norm();
  const double delta = 0.25;
  const auto [sup_z, bound] = skeleton_apriori_bound(x, phi, model);
  const double radius = truncation_radius(rho, phi.energy(), delta, model.lambda_lip());
  EXPECT_NEAR(radius - bound, delta, 1e-12);
  EXPECT_LT(sup_z, bound);
}
