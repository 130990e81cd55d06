#include <gtest/gtest.h>

#include <random>

#include "rwnoise/noise_models.hpp"
#include "rwnoise/quadrature.hpp"

namespace rwnoise {
namespace {

PoissonStats sums(std::int64_t s) { return PoissonStats{s}; }

SampleSet scalar_set(std::vector<double> v) { return SampleSet::scalar(std::move(v)); }

TEST(WeightPoisson, IdenticalSumsGiveOne) { EXPECT_DOUBLE_EQ(weight_poisson(sums(5), sums(5)), 1.0); }

TEST(WeightPoisson, KnownValues) {
  // Frozen from 40-digit gamma-function evaluation.
  EXPECT_NEAR(weight_poisson(sums(0), sums(2)), 0.70710678118654752, 1e-12);
  EXPECT_NEAR(weight_poisson(sums(10), sums(20)), 0.44010447676023052, 1e-12);
}

TEST(WeightPoisson, SymmetricAndBounded) {
  for (int a = 0; a < 60; a += 7)
    for (int b = 0; b < 60; b += 5) {
      const double w = weight_poisson(sums(a), sums(b));
      EXPECT_DOUBLE_EQ(w, weight_poisson(sums(b), sums(a)));
      EXPECT_GT(w, 0.0);
      EXPECT_LE(w, 1.0);
    }
}

TEST(WeightPoisson, LargeSumsDoNotOverflow) {
  const double w = weight_poisson(sums(4'000'000), sums(4'001'000));
  EXPECT_TRUE(std::isfinite(w));
  EXPECT_GT(w, 0.0);
  EXPECT_LT(w, 1.0);
}

TEST(WeightPoisson, CountsRoundToNearestNonnegativeInteger) {
  const auto st = poisson_stats(scalar_set({1.4, 2.6, -3.0, 0.0}));
  EXPECT_EQ(st.sum, 1 + 3);
}

TEST(WeightPoissonApprox, KnownValues) {
  EXPECT_DOUBLE_EQ(weight_poisson_approx(sums(7), sums(7)), 1.0);
  EXPECT_DOUBLE_EQ(weight_poisson_approx(sums(3), sums(3)), 1.0);
  EXPECT_NEAR(weight_poisson_approx(sums(10), sums(20)), 0.42406676298769323, 1e-12);
  EXPECT_NEAR(std::abs(weight_poisson_approx(sums(10), sums(20)) - weight_poisson(sums(10), sums(20))), 0.016,
              1e-3);
}

TEST(WeightGaussianConst, EqualMeansGiveOne) {
  const GaussianConstCovConfig cfg(Eigen::Matrix2d{{2.0, 0.3}, {0.3, 1.0}});
  const Eigen::Vector2d m(0.4, -1.0);
  EXPECT_DOUBLE_EQ(weight_gaussian_const(m, m, cfg, 9), 1.0);
}

TEST(WeightGaussianConst, KnownValues) {
  const double e = 0.60653065971263342;
  EXPECT_NEAR(weight_gaussian_const(Eigen::VectorXd::Constant(1, 0.0), Eigen::VectorXd::Constant(1, 2.0),
                                    GaussianConstCovConfig::scalar(1.0), 1),
              e, 1e-15);
  EXPECT_NEAR(weight_gaussian_const(Eigen::Vector2d(1, 0), Eigen::Vector2d(0, 0),
                                    GaussianConstCovConfig(Eigen::Matrix2d::Identity()), 4),
              e, 1e-15);
}

TEST(WeightGaussianConst, RejectsBadCovarianceAtConstruction) {
  EXPECT_THROW(GaussianConstCovConfig(Eigen::Matrix2d{{1.0, 2.0}, {2.0, 1.0}}), ConfigError);
  EXPECT_THROW(GaussianConstCovConfig(Eigen::Matrix2d{{1.0, 0.5}, {0.0, 1.0}}), ConfigError);
  EXPECT_THROW(GaussianConstCovConfig(Eigen::MatrixXd(2, 3)), ConfigError);
}

TEST(WeightGaussianConst, SampleSetsMustMatchInSize) {
  const auto cfg = GaussianConstCovConfig::scalar(1.0);
  EXPECT_THROW(weight_gaussian_const(scalar_set({1, 2}), scalar_set({1, 2, 3}), cfg), PreconditionError);
}

TEST(WeightGaussianVar, IdenticalSetsGiveOne) {
  const auto x = scalar_set({1, 1, 1, 3, 3, 3, 5, 5, 5});
  EXPECT_DOUBLE_EQ(weight_gaussian_var(x, x), 1.0);
}

TEST(WeightGaussianVar, KnownValue) {
  const auto x = scalar_set({1, 1, 1, 3, 3, 3, 5, 5, 5});
  const auto y = scalar_set({2, 2, 2, 4, 4, 4, 6, 6, 6});
  EXPECT_NEAR(weight_gaussian_var(x, y), 0.76426822157434402, 1e-12);
  EXPECT_NEAR(weight_gaussian_var_pairwise(x, y), 0.76426822157434402, 1e-12);
}

TEST(WeightGaussianVar, BothFormsAgreeOnRandomSets) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal;
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4 + trial % 8;
    std::vector<double> a(n), b(n);
    for (auto& v : a) v = normal(rng) * 3.0;
    for (auto& v : b) v = 1.0 + normal(rng);
    const double w1 = weight_gaussian_var(scalar_set(a), scalar_set(b));
    const double w2 = weight_gaussian_var_pairwise(scalar_set(a), scalar_set(b));
    EXPECT_NEAR(w1, w2, 1e-10 * std::max(w1, 1e-300));
  }
}

TEST(WeightGaussianVar, ConstantEqualSetsUseTheFloor) {
  const auto x = scalar_set({2, 2, 2, 2});
  EXPECT_DOUBLE_EQ(weight_gaussian_var(x, x, {1e-6}), 1.0);
  EXPECT_DOUBLE_EQ(weight_gaussian_var(x, x), 1.0);
  // Different constants: both variances sit at the floor, the pooled one also holds the
  // mean gap, and four samples give the exponent 1/2.
  EXPECT_NEAR(weight_gaussian_var(x, scalar_set({3, 3, 3, 3}), {1e-6}), std::sqrt(1e-6 / (1e-6 + 0.25)), 1e-15);
}

TEST(WeightGaussianVar, RejectsSmallOrUnequalSets) {
  EXPECT_THROW(weight_gaussian_var(scalar_set({1, 2, 3}), scalar_set({1, 2, 3})), PreconditionError);
  EXPECT_THROW(weight_gaussian_var(scalar_set({1, 2, 3, 4}), scalar_set({1, 2, 3, 4, 5})), PreconditionError);
}

TEST(WeightGrady, KnownValues) {
  const std::vector<double> zero{0.0}, one{1.0}, tenth{0.1};
  EXPECT_DOUBLE_EQ(weight_grady(one, one, GradyConfig{5.0}), 1.0);
  EXPECT_NEAR(weight_grady(zero, one, GradyConfig{1.0}), 0.36787944117144233, 1e-15);
  EXPECT_NEAR(weight_grady(zero, tenth, GradyConfig{90.0}), 0.40656965974059911, 1e-12);
  EXPECT_THROW(GradyConfig{0.0}, ConfigError);
  EXPECT_THROW(GradyConfig{-1.0}, ConfigError);
}

TEST(EstimateParams, Examples) {
  EXPECT_DOUBLE_EQ(std::get<PoissonEstimate>(estimate_params(ModelKind::poisson, scalar_set({2, 2, 2}))).lambda, 2.0);
  const auto mv = std::get<MeanVarianceEstimate>(estimate_params(ModelKind::gaussian_var, scalar_set({0, 2})));
  EXPECT_DOUBLE_EQ(mv.mean, 1.0);
  EXPECT_DOUBLE_EQ(mv.variance, 1.0);
  SampleSet two;
  two.dim = 2;
  two.values = {0, 0, 2, 2};
  const auto m = std::get<MeanEstimate>(estimate_params(ModelKind::gaussian_const, two));
  EXPECT_DOUBLE_EQ(m.mean[0], 1.0);
  EXPECT_DOUBLE_EQ(m.mean[1], 1.0);
  EXPECT_THROW(estimate_params(ModelKind::poisson, SampleSet{}), PreconditionError);
}

TEST(GlobalCovariance, ConstantImageFallsBack) {
  const Image img(16, 16, 1, 3.0);
  const auto est = estimate_global_covariance(img);
  EXPECT_TRUE(est.degenerate);
  EXPECT_DOUBLE_EQ(est.covariance(0, 0), 1e-8);
}

TEST(GlobalCovariance, PureNoise) {
  Image img(256, 256);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 2.0);
  for (auto& v : img.storage()) v = normal(rng);
  const auto est = estimate_global_covariance(img);
  EXPECT_FALSE(est.degenerate);
  EXPECT_GE(est.covariance(0, 0), 3.6);
  EXPECT_LE(est.covariance(0, 0), 4.4);
}

TEST(GlobalCovariance, CorrelatedChannels) {
  Image img(200, 200, 2);
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    const double a = normal(rng), b = normal(rng);
    img.storage()[2 * i] = a;
    img.storage()[2 * i + 1] = 0.6 * a + 0.8 * b;  // unit variance, correlation 0.6
  }
  const auto c = estimate_global_covariance(img).covariance;
  EXPECT_NEAR(c(0, 0), 1.0, 0.1);
  EXPECT_NEAR(c(1, 1), 1.0, 0.1);
  EXPECT_NEAR(c(0, 1), 0.6, 0.1);
}

TEST(GlobalCovariance, OverrideIsReturnedUnchanged) {
  const Image img(8, 8);
  const Eigen::MatrixXd c = Eigen::MatrixXd::Constant(1, 1, 0.25);
  EXPECT_EQ(estimate_global_covariance(img, c).covariance, c);
}

// Quadrature oracle ---------------------------------------------------------------------

TEST(WeightNumeric, IdenticalSetsGiveOne) {
  const auto x = scalar_set({3, 5, 4});
  EXPECT_NEAR(weight_numeric(poisson_pdf_model(x, x), x, x), 1.0, 1e-6);
}

TEST(WeightNumeric, MatchesClosedForms) {
  const auto x = scalar_set({0}), y = scalar_set({2});
  EXPECT_NEAR(weight_numeric(poisson_pdf_model(x, y), x, y), 0.70710678118654752, 1e-6);
  const auto cfg = GaussianConstCovConfig::scalar(1.0);
  const auto g0 = scalar_set({0}), g2 = scalar_set({2});
  EXPECT_NEAR(weight_numeric(gaussian_const_pdf_model(cfg, g0, g2), g0, g2), 0.60653065971263342, 1e-6);
  const auto a = scalar_set({1, 1, 1, 3, 3, 3, 5, 5, 5});
  const auto b = scalar_set({2, 2, 2, 4, 4, 4, 6, 6, 6});
  EXPECT_NEAR(weight_numeric(gaussian_var_pdf_model(a, b), a, b), 0.76426822157434402, 1e-5);
}

TEST(WeightNumeric, TwoDimensionalGaussian) {
  const GaussianConstCovConfig cfg(Eigen::Matrix2d::Identity());
  SampleSet x, y;
  x.dim = y.dim = 2;
  x.values = {0.5, 0, 0.5, 0, 0.5, 0, 0.5, 0};
  y.values = {-0.5, 0, -0.5, 0, -0.5, 0, -0.5, 0};
  EXPECT_NEAR(weight_numeric(gaussian_const_pdf_model(cfg, x, y), x, y), 0.60653065971263342, 1e-6);
}

TEST(WeightNumeric, DomainWithoutMassIsAnError) {
  GenericPdfModel m;
  m.log_pdf = [](std::span<const double>, std::span<const double>) { return -std::numeric_limits<double>::infinity(); };
  m.domain = {{0.0, 1.0, AxisMap::linear}};
  const auto x = scalar_set({1});
  EXPECT_THROW(weight_numeric(m, x, x), QuadratureDomainError);
}

}  // namespace
}  // namespace rwnoise
