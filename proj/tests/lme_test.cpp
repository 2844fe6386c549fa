#include <gtest/gtest.h>

#include "oracles.hpp"
#include "test_util.hpp"

using namespace mebn;

namespace {

LmeProblem one_way_problem(const std::vector<std::vector<double>>& groups) {
  LmeProblem p;
  p.group_count = static_cast<int>(groups.size());
  std::vector<double> y;
  for (std::size_t j = 0; j < groups.size(); ++j)
    for (double v : groups[j]) {
      y.push_back(v);
      p.groups.push_back(static_cast<int>(j));
    }
  p.response = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
  p.design = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(y.size()), 1);
  return p;
}

std::vector<std::vector<double>> one_way_data(std::uint64_t seed, int groups = 4, int per_group = 6) {
  Rng rng(seed);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(groups));
  for (auto& g : out) {
    const double u = 1.5 * standard_normal(rng);
    for (int i = 0; i < per_group; ++i) g.push_back(3.0 + u + standard_normal(rng));
  }
  return out;
}

double ols_deviance(const LmeProblem& p) {
  const Eigen::VectorXd beta = oracle::normal_equations(p.design, p.response);
  const double rss = (p.response - p.design * beta).squaredNorm();
  const double n = static_cast<double>(p.n());
  return n * std::log(2.0 * std::numbers::pi * rss / n) + n;
}

}  // namespace

TEST(Lme, NoiselessLineRecoversCoefficients) {
  LmeProblem p;
  p.group_count = 3;
  p.design.resize(12, 2);
  p.response.resize(12);
  for (int i = 0; i < 12; ++i) {
    p.groups.push_back(i % 3);
    p.design(i, 0) = 1.0;
    p.design(i, 1) = i * 0.5 - 2.0;
    p.response(i) = 2.0 + 3.0 * p.design(i, 1);
  }
  auto fit = fit_lme(p);
  EXPECT_NEAR(fit.beta(0), 2.0, 1e-6);
  EXPECT_NEAR(fit.beta(1), 3.0, 1e-6);
  EXPECT_LE(fit.sigma2, 1e-10);
  for (const auto& b : fit.blups) EXPECT_LT(b.norm(), 1e-5);
}

TEST(Lme, OneWayMatchesClosedFormGridSearch) {
  for (std::uint64_t seed : {1, 2, 3, 4, 5}) {
    const auto data = one_way_data(seed);
    auto fit = fit_lme(one_way_problem(data));
    double var = 0.0;
    for (const auto& g : data)
      for (double v : g) var += v * v;
    const double best = oracle::one_way_grid_max(data, var / 24.0);
    EXPECT_NEAR(fit.loglik, best, 1e-4) << "seed " << seed;
  }
}

TEST(Lme, MatchesDenseBruteForceWithOneParent) {
  Rng rng(99);
  for (int rep = 0; rep < 3; ++rep) {
    auto p = oracle::random_lme_problem(rng, 3, 8, 1);
    auto fit = fit_lme(p);
    EXPECT_NEAR(fit.loglik, oracle::brute_force_lme_loglik(p), 1e-3) << "rep " << rep;
  }
}

TEST(Lme, ZeroThetaGivesOlsDeviance) {
  Rng rng(5);
  auto p = oracle::random_lme_problem(rng, 4, 10, 2);
  auto pd = profiled_deviance(p, Eigen::VectorXd::Zero(theta_size(3)));
  EXPECT_NEAR(pd.deviance, ols_deviance(p), 1e-8);
  EXPECT_TRUE(pd.beta.isApprox(oracle::normal_equations(p.design, p.response), 1e-8));
}

TEST(Lme, SingleGroupBetaIsGls) {
  Rng rng(6);
  auto p = oracle::random_lme_problem(rng, 1, 15, 2);
  for (int rep = 0; rep < 5; ++rep) {
    Eigen::VectorXd theta(theta_size(3));
    for (Eigen::Index k = 0; k < theta.size(); ++k) theta(k) = standard_normal(rng);
    const auto L = lambda_from_theta(theta, 3);
    auto pd = profiled_deviance(p, theta);
    auto dense = oracle::dense_profile(p, L * L.transpose());
    EXPECT_LT((pd.beta - dense.beta).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_NEAR(pd.deviance, -2.0 * dense.loglik, 1e-6);
  }
}

TEST(Lme, IdentityThetaMatchesDenseDeviance) {
  auto p = one_way_problem(one_way_data(11));
  auto pd = profiled_deviance(p, Eigen::VectorXd::Ones(1));
  EXPECT_NEAR(pd.deviance, -2.0 * oracle::dense_profile(p, Eigen::MatrixXd::Identity(1, 1)).loglik, 1e-6);
}

TEST(Lme, GroupPredictExamples) {
  LmeFit fit;
  fit.beta = Eigen::Vector2d(1.0, 2.0);
  fit.blups = {Eigen::Vector2d::Zero(), Eigen::Vector2d(0.5, -1.0)};
  EXPECT_DOUBLE_EQ(lme_group_predict(fit, 1, Eigen::VectorXd::Constant(1, 3.0)), 4.5);
  EXPECT_DOUBLE_EQ(lme_group_predict(fit, 0, Eigen::VectorXd::Constant(1, 3.0)), 7.0);
  EXPECT_DOUBLE_EQ(lme_group_predict(fit, 1, Eigen::VectorXd::Zero(1)), 1.5);
  EXPECT_THROW(lme_group_predict(fit, 2, Eigen::VectorXd::Zero(1)), std::out_of_range);
}

TEST(Lme, ParameterCount) {
  EXPECT_EQ(lme_parameter_count(0), 3);
  EXPECT_EQ(lme_parameter_count(2), 10);
}

TEST(Lme, RejectsTooFewRowsAndCollinearDesign) {
  LmeProblem p;
  p.group_count = 1;
  p.design = Eigen::MatrixXd::Ones(2, 2);
  p.response = Eigen::VectorXd::Ones(2);
  p.groups = {0, 0};
  EXPECT_THROW(fit_lme(p), NumericError);
  p.design = Eigen::MatrixXd::Ones(6, 2);
  p.response = Eigen::VectorXd::LinSpaced(6, 0, 1);
  p.groups.assign(6, 0);
  EXPECT_THROW(fit_lme(p), NumericError);
}

TEST(Lme, RandomInterceptShrinksBetweenPooledAndGroupMeans) {
  for (std::uint64_t seed = 20; seed < 30; ++seed) {
    auto data = one_way_data(seed, 5, 4);
    auto fit = fit_lme(one_way_problem(data));
    double pooled = 0.0;
    for (const auto& g : data)
      for (double v : g) pooled += v;
    pooled /= 20.0;
    for (std::size_t j = 0; j < data.size(); ++j) {
      double own = 0.0;
      for (double v : data[j]) own += v;
      own /= 4.0;
      const double fitted = fit.beta(0) + fit.blups[j](0);
      EXPECT_GE(fitted, std::min(pooled, own) - 1e-9);
      EXPECT_LE(fitted, std::max(pooled, own) + 1e-9);
    }
  }
}

TEST(Lme, BoundaryFitApproachesPooledOls) {
  Rng rng(77);
  int boundary = 0;
  for (int rep = 0; rep < 20; ++rep) {
    auto p = oracle::random_lme_problem(rng, 4, 10, 1, 0.0, 1.0);
    auto fit = fit_lme(p);
    if (!fit.boundary || fit.Sigma.norm() > 1e-10) continue;
    ++boundary;
    const Eigen::VectorXd ols = oracle::normal_equations(p.design, p.response);
    for (Eigen::Index k = 0; k < ols.size(); ++k)
      EXPECT_LE(std::abs(fit.beta(k) - ols(k)), 1e-4 * std::max(1.0, std::abs(ols(k))));
  }
  EXPECT_GT(boundary, 0);
}

TEST(Lme, LoglikEqualsDenseDensityAtEstimates) {
  Rng rng(8);
  for (int rep = 0; rep < 6; ++rep) {
    auto p = oracle::random_lme_problem(rng, 2 + rep, 12, rep % 3);
    auto fit = fit_lme(p);
    EXPECT_NEAR(fit.loglik, oracle::dense_loglik(p, fit.beta, fit.Sigma, fit.sigma2), 1e-6);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(fit.Sigma);
    EXPECT_GE(es.eigenvalues().minCoeff(), -1e-10);
    EXPECT_GT(fit.sigma2, 0.0);
  }
}

TEST(Lme, BlupMeanIsNearZero) {
  Rng rng(9);
  for (int rep = 0; rep < 6; ++rep) {
    auto p = oracle::random_lme_problem(rng, 5, 10, 2);
    auto fit = fit_lme(p);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(fit.beta.size());
    for (const auto& b : fit.blups) mean += b;
    mean /= static_cast<double>(fit.blups.size());
    EXPECT_LE(mean.norm(), 1e-3 * (1.0 + fit.beta.norm()));
  }
}

TEST(Lme, EmptyGroupGetsZeroBlup) {
  Rng rng(10);
  auto p = oracle::random_lme_problem(rng, 3, 10, 1);
  p.group_count = 4;
  auto fit = fit_lme(p);
  ASSERT_EQ(fit.blups.size(), 4u);
  EXPECT_EQ(fit.blups[3].norm(), 0.0);
}

TEST(Lme, MarginalVarianceDecomposition) {
  Rng rng(12);
  auto p = oracle::random_lme_problem(rng, 6, 15, 1, 1.0, 0.5);
  auto fit = fit_lme(p);
  const Eigen::Vector2d x(1.0, 0.7);
  const double expected = x.dot(fit.Sigma * x) + fit.sigma2;
  Eigen::LLT<Eigen::MatrixXd> llt(fit.Sigma + 1e-14 * Eigen::MatrixXd::Identity(2, 2));
  const int M = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < M; ++i) {
    Eigen::Vector2d z(standard_normal(rng), standard_normal(rng));
    const Eigen::VectorXd b = llt.matrixL() * z;
    const double y = x.dot(fit.beta + b) + std::sqrt(fit.sigma2) * standard_normal(rng);
    s += y;
    s2 += y * y;
  }
  const double mean = s / M;
  const double var = s2 / M - mean * mean;
  EXPECT_NEAR(var, expected, 3.0 * expected * std::sqrt(2.0 / (M - 1)));
}

TEST(Lme, FitIsDeterministic) {
  Rng rng(13);
  auto p = oracle::random_lme_problem(rng, 4, 8, 2);
  auto a = fit_lme(p), b = fit_lme(p);
  EXPECT_EQ(a.loglik, b.loglik);
  EXPECT_EQ(a.beta, b.beta);
  EXPECT_EQ(a.Sigma, b.Sigma);
}

TEST(Lme, NelderMeadFindsQuadraticMinimum) {
  auto f = [](const Eigen::VectorXd& x) { return (x(0) - 1.0) * (x(0) - 1.0) + 4.0 * (x(1) + 2.0) * (x(1) + 2.0); };
  auto r = nelder_mead(f, Eigen::Vector2d::Zero(), 0.5, 2000, 1e-14);
  EXPECT_NEAR(r.x(0), 1.0, 1e-5);
  EXPECT_NEAR(r.x(1), -2.0, 1e-5);
  EXPECT_TRUE(r.converged);
}
