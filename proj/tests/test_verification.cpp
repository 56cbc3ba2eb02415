#include "hardsum/synthetic.hpp"
#include "hardsum/verification.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace hardsum;

namespace {

VerifySettings nothing_to_do() {
  VerifySettings s;
  s.derivative_points = 0;
  s.zero_chain_samples = 0;
  s.smoothness_pairs = 0;
  s.estimator_trials = 0;
  s.large_gradient_points = 0;
  s.multistart_starts = 0;
  s.resisting_max_k = 0;
  s.cubic_models = 0;
  s.cubic_grid_models = 0;
  return s;
}

VerifySettings light() {
  VerifySettings s;
  s.derivative_points = 20;
  s.zero_chain_samples = 100;
  s.smoothness_pairs = 50;
  s.estimator_trials = 1000;
  s.large_gradient_points = 10;
  s.multistart_starts = 5;
  s.resisting_max_k = 2;
  s.cubic_models = 30;
  s.cubic_grid_models = 1;
  return s;
}

}  // namespace

TEST(CheckStatus, Combine) {
  EXPECT_EQ(combine({CheckStatus::Pass, CheckStatus::Skipped}), CheckStatus::Pass);
  EXPECT_EQ(combine({CheckStatus::Pass, CheckStatus::Fail}), CheckStatus::Fail);
  EXPECT_EQ(combine({CheckStatus::Skipped, CheckStatus::Skipped}), CheckStatus::Skipped);
  EXPECT_EQ(to_string(CheckStatus::Fail), "fail");
}

TEST(ZeroChainPoint, OriginHasPrefixOne) {
  const ZeroChainPoint z = check_zero_chain_point(Vector::Zero(4));
  EXPECT_EQ(z.status, CheckStatus::Pass);
  EXPECT_EQ(z.prefix, 1);
  EXPECT_EQ(z.max_tail_partial, 0.0);
}

TEST(ZeroChainPoint, TailAfterALargeCoordinate) {
  Vector x(4);
  x << 2.0, 0.1, 0.1, 0.1;
  const ZeroChainPoint z = check_zero_chain_point(x);
  EXPECT_EQ(z.status, CheckStatus::Pass);
  EXPECT_EQ(z.prefix, 2);
  EXPECT_EQ(z.value_change, 0.0);
}

TEST(ZeroChainPoint, NothingToCheckWhenAllLarge) {
  Vector x(3);
  x << 1.0, -2.0, 1.5;
  EXPECT_EQ(check_zero_chain_point(x).status, CheckStatus::Skipped);
}

TEST(ZeroChain, SampledPassAndShortChainsRejected) {
  Rng rng(1);
  const ZeroChainReport r = check_zero_chain(4, 300, rng);
  EXPECT_EQ(r.status, CheckStatus::Pass);
  EXPECT_EQ(r.samples, 300u);
  EXPECT_LE(r.max_tail_partial, 1e-12);
  EXPECT_THROW(check_zero_chain(1, 10, rng), std::invalid_argument);
}

TEST(CheckDerivatives, QuadraticIsExactUpToRounding) {
  Rng rng(2);
  const QuadraticFiniteSum f = make_quadratic_finite_sum(3, 4, rng);
  const DerivativeReport r =
      check_derivatives("quadratic", f, 30, 1e-9, rng, [](Rng& g) { return Vector(gaussian_vector(4, g)); });
  EXPECT_EQ(r.status, CheckStatus::Pass) << r.worst_gradient_error << " " << r.worst_hessian_error;
  EXPECT_EQ(r.points, 30u);
}

TEST(CheckDerivatives, ScalarPrimitivesPass) {
  Rng rng(3);
  for (const ScalarPrimitive& p : default_scalar_primitives()) {
    const DerivativeReport r = check_scalar_derivatives(p, 100, 1e-6, rng);
    EXPECT_EQ(r.status, CheckStatus::Pass) << p.name;
  }
}

TEST(CheckDerivatives, CatchesAWrongSign) {
  Rng rng(4);
  ScalarPrimitive bad{"bad-psi", [](double x, int order) { return order == 1 ? -psi(x, 1) : psi(x, order); }, 0.6, 3.0};
  EXPECT_EQ(check_scalar_derivatives(bad, 50, 1e-6, rng).status, CheckStatus::Fail);
}

TEST(CheckDerivatives, ZeroPointsIsSkipped) {
  Rng rng(5);
  const QuadraticFiniteSum f = make_quadratic_finite_sum(2, 2, rng);
  EXPECT_EQ(check_derivatives("q", f, 0, 1e-6, rng, [](Rng& g) { return Vector(gaussian_vector(2, g)); }).status,
            CheckStatus::Skipped);
}

TEST(EstimateSmoothness, ConstantHessiansGiveZero) {
  Rng rng(6);
  const QuadraticFiniteSum f = make_quadratic_finite_sum(4, 3, rng);
  EXPECT_EQ(estimate_smoothness(f, SmoothnessMode::IndividualHessian, 100, rng).constant, 0.0);
  EXPECT_EQ(estimate_smoothness(f, SmoothnessMode::ThirdMoment, 100, rng).constant, 0.0);
}

TEST(EstimateSmoothness, CubicTermReachesItsWeight) {
  // (c/6)|x|^3 has Hessian Lipschitz constant exactly c; radial pairs attain it.
  const double c = 1.5;
  const CubicFiniteSum f({SymMatrix::zero(2)}, {Vector::Zero(2)}, {c}, {Vector::Zero(2)});
  Rng rng(7);
  const double est = estimate_smoothness(f, SmoothnessMode::IndividualHessian, 400, rng).constant;
  EXPECT_LE(est, c * (1.0 + 1e-9));
  EXPECT_GE(est, 0.9 * c);
}

TEST(EstimateSmoothness, ThirdMomentNeverExceedsIndividual) {
  Rng rng(8);
  const CubicFiniteSum f = make_cubic_finite_sum(6, 3, rng);
  Rng a(9), b(9);
  const double third = estimate_smoothness(f, SmoothnessMode::ThirdMoment, 200, a).constant;
  const double indiv = estimate_smoothness(f, SmoothnessMode::IndividualHessian, 200, b).constant;
  EXPECT_LE(third, indiv * (1.0 + 1e-12));
  EXPECT_GT(third, 0.0);
}

TEST(EstimateSmoothness, ScaledThirdMomentInstanceRespectsCaps) {
  const double l2 = 1.0;
  const Index n = 4;
  const double gap = 96.0 * std::pow(4.0, 7.0 / 12.0) * std::sqrt(kDefaultHatEll2 / l2) * 2.0;
  const HardInstanceSpec s =
      randomized_params(InstanceMode::RandomizedThirdMoment, 2, n, gap, l2, 1.0, kDefaultHatEll2);
  Rng rng(10);
  const RandomizedHardInstance f = sample_randomized_instance(s, rng);
  SmoothnessSampling sampling;
  sampling.radius = 2.0 * s.sigma * std::sqrt(static_cast<double>(s.chain_length));
  const double third = estimate_smoothness(f, SmoothnessMode::ThirdMoment, 400, rng, sampling).constant;
  const double indiv = estimate_smoothness(f, SmoothnessMode::IndividualHessian, 400, rng, sampling).constant;
  EXPECT_LE(third, 1.05 * l2);
  EXPECT_LE(indiv, 1.05 * std::cbrt(static_cast<double>(n)) * s.lambda * kDefaultHatEll2);
}

TEST(EstimatorBounds, ExactAtTheSnapshot) {
  Rng rng(11);
  const CubicFiniteSum f = make_cubic_finite_sum(16, 3, rng);
  const Vector x = gaussian_vector(3, rng);
  const EstimatorBoundReport r = verify_estimator_bounds(f, x, x, 4, 4, 2.0, 1000, rng);
  EXPECT_EQ(r.status, CheckStatus::Pass);
  EXPECT_LE(r.grad_mean, 1e-20);
  EXPECT_LE(r.hess_mean, 1e-20);
}

TEST(EstimatorBounds, MeansBelowBoundsOnSyntheticSum) {
  Rng rng(12);
  const CubicFiniteSum f = make_cubic_finite_sum(64, 8, rng);
  const Vector x_hat = gaussian_vector(8, rng);
  const Vector x = x_hat + 0.5 * gaussian_vector(8, rng);
  const double l = estimate_smoothness(f, SmoothnessMode::ThirdMoment, 200, rng).constant;
  const EstimatorBoundReport r = verify_estimator_bounds(f, x_hat, x, 16, 64, l, 1000, rng);
  EXPECT_EQ(r.status, CheckStatus::Pass) << r.grad_mean << " / " << r.grad_bound << ", " << r.hess_mean << " / "
                                         << r.hess_bound;
  EXPECT_GT(r.grad_mean, 0.0);
}

TEST(EstimatorBounds, TooFewTrialsRejected) {
  Rng rng(13);
  const CubicFiniteSum f = make_cubic_finite_sum(4, 2, rng);
  EXPECT_THROW(verify_estimator_bounds(f, Vector::Zero(2), Vector::Ones(2), 2, 2, 1.0, 999, rng),
               std::invalid_argument);
  EXPECT_EQ(verify_estimator_bounds(f, Vector::Zero(2), Vector::Ones(2), 2, 2, 1.0, 0, rng).status,
            CheckStatus::Skipped);
}

TEST(LargeGradient, ConstructedPointsOnRandomizedInstance) {
  for (Index n : {1, 4}) {
    const HardInstanceSpec s = randomized_params(InstanceMode::RandomizedIndividual, 1, n, 192.0 * n * 3,
                                                 kDefaultHatEll1, 1.0, kDefaultHatEll1);
    Rng rng(14);
    const RandomizedHardInstance f = sample_randomized_instance(s, rng);
    const LargeGradientReport r = verify_large_gradient(f, 30, rng);
    EXPECT_EQ(r.status, CheckStatus::Pass) << n << ": " << r.min_norm << " vs " << r.bound;
    EXPECT_NEAR(r.bound, 1.0 / (4.0 * std::sqrt(static_cast<double>(n))), 1e-15);
    EXPECT_EQ(r.points, 31u);
  }
}

TEST(LargeGradient, ResistingCertificateAfterRun) {
  Rng rng(15);
  const ResistingRunReport r = verify_resisting_run(1, 4, 2, FullBaseline::GradientDescent, rng);
  EXPECT_EQ(r.status, CheckStatus::Pass);
  EXPECT_TRUE(r.all_exceed);
  EXPECT_LE(r.max_final_overlap, 1e-10);
  EXPECT_LE(r.max_replay_error, 1e-10);
}

TEST(Suboptimality, ChainGapIsBounded) {
  Rng rng(16);
  const SuboptimalityReport r = verify_suboptimality(ChainMask::all_ones(4), 10, rng);
  EXPECT_EQ(r.status, CheckStatus::Pass);
  EXPECT_DOUBLE_EQ(r.bound, 48.0);
  EXPECT_GE(r.value_at_zero - r.best_found, 0.0);
}

TEST(ResistingRun, SecondOrderCubicBaseline) {
  Rng rng(17);
  const ResistingRunReport r = verify_resisting_run(2, 10, 2, FullBaseline::CubicRegularization, rng);
  EXPECT_EQ(r.status, CheckStatus::Pass);
  EXPECT_GT(r.archived, 0u);
}

TEST(CubicBattery, GridSearchIsAnUpperBound) {
  Vector v(1);
  v << 1.0;
  Matrix u(1, 1);
  u << -1.0;
  const CubicModel m(v, SymMatrix(u), 2.0);
  EXPECT_LE(solve_cubic(m).value, grid_search_cubic(m) + 1e-12);
}

TEST(Battery, NothingToDoSkipsEverySection) {
  const BatteryResult r = run_verification_battery(nothing_to_do(), 1);
  EXPECT_TRUE(r.passed);
  for (const auto& [name, section] : r.report["sections"].items()) {
    EXPECT_EQ(section["status"], "skipped") << name;
  }
}

TEST(Battery, LightRunPassesAndIsDeterministic) {
  const BatteryResult a = run_verification_battery(light(), 7);
  const BatteryResult b = run_verification_battery(light(), 7);
  EXPECT_TRUE(a.passed);
  EXPECT_TRUE(a.failed_sections.empty());
  EXPECT_EQ(a.report.dump(), b.report.dump());
}

TEST(Battery, SabotagedPrimitiveFailsOnlyDerivativeSection) {
  VerifyHooks hooks;
  hooks.primitives = default_scalar_primitives();
  auto real = hooks.primitives[0].eval;
  hooks.primitives[0].eval = [real](double x, int order) { return order == 1 ? -real(x, 1) : real(x, order); };
  const BatteryResult r = run_verification_battery(light(), 7, hooks);
  EXPECT_FALSE(r.passed);
  ASSERT_EQ(r.failed_sections.size(), 1u);
  EXPECT_EQ(r.failed_sections[0], "check_derivatives");
}
