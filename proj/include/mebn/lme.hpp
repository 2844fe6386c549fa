#pragma once

// Linear mixed-effects regression with one grouping factor, a random
// intercept and a random slope for every fixed-effect column, fitted by
// maximum likelihood through the profiled deviance.
//
//   y_j = X_j (beta + b_j) + e_j,   b_j ~ N(0, Sigma),   e_j ~ N(0, sigma2 I)
//
// Sigma is parameterized as sigma2 * L L' with L lower triangular; theta
// holds the entries of L column by column.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <vector>

#include "mebn/errors.hpp"
#include "mebn/optim.hpp"

namespace mebn {

struct LmeProblem {
  Eigen::VectorXd response;
  Eigen::MatrixXd design;  // n x q, intercept column first
  std::vector<int> groups;  // 0-based group index per observation
  int group_count = 1;

  Eigen::Index n() const { return response.size(); }
  Eigen::Index q() const { return design.cols(); }
};

struct LmeConfig {
  int max_evaluations = 0;  // 0 selects 200 * q^2
  double rel_tol = 1e-8;
  double sigma2_floor = 1e-12;
};

struct LmeFit {
  Eigen::VectorXd beta;
  std::vector<Eigen::VectorXd> blups;  // one length-q vector per group
  double sigma2 = 1.0;
  Eigen::MatrixXd Sigma;  // random-effect covariance, q x q
  double loglik = -std::numeric_limits<double>::infinity();
  bool converged = false;
  bool boundary = false;
  int evaluations = 0;
};

struct ProfiledDeviance {
  double deviance = std::numeric_limits<double>::infinity();
  Eigen::VectorXd beta;
  double sigma2 = 0.0;
  std::vector<Eigen::VectorXd> blups;
};

inline Eigen::Index theta_size(Eigen::Index q) { return q * (q + 1) / 2; }

inline Eigen::MatrixXd lambda_from_theta(const Eigen::VectorXd& theta, Eigen::Index q) {
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(q, q);
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < q; ++c)
    for (Eigen::Index r = c; r < q; ++r) lambda(r, c) = theta(k++);
  return lambda;
}

inline Eigen::VectorXd theta_from_lambda(const Eigen::MatrixXd& lambda) {
  const auto q = lambda.rows();
  Eigen::VectorXd theta(theta_size(q));
  Eigen::Index k = 0;
  for (Eigen::Index c = 0; c < q; ++c)
    for (Eigen::Index r = c; r < q; ++r) theta(k++) = lambda(r, c);
  return theta;
}

namespace detail {

// Per-group cross products, reused across deviance evaluations.
class LmeWorkspace {
 public:
  LmeWorkspace(const LmeProblem& p, double sigma2_floor) : n_(p.n()), q_(p.q()), floor_(sigma2_floor) {
    if (p.groups.size() != static_cast<std::size_t>(p.n()))
      throw std::invalid_argument("lme: group vector length does not match response");
    if (p.design.rows() != p.n()) throw std::invalid_argument("lme: design rows do not match response");
    std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(p.group_count));
    for (Eigen::Index r = 0; r < p.n(); ++r) {
      int g = p.groups[static_cast<std::size_t>(r)];
      if (g < 0 || g >= p.group_count) throw std::invalid_argument("lme: group index out of range");
      rows[static_cast<std::size_t>(g)].push_back(r);
    }
    for (const auto& idx : rows) {
      Group g;
      g.X.resize(static_cast<Eigen::Index>(idx.size()), q_);
      g.y.resize(static_cast<Eigen::Index>(idx.size()));
      for (std::size_t i = 0; i < idx.size(); ++i) {
        g.X.row(static_cast<Eigen::Index>(i)) = p.design.row(idx[i]);
        g.y(static_cast<Eigen::Index>(i)) = p.response(idx[i]);
      }
      g.XtX = g.X.transpose() * g.X;
      g.Xty = g.X.transpose() * g.y;
      groups_.push_back(std::move(g));
    }
    XtX_ = p.design.transpose() * p.design;
    Xty_ = p.design.transpose() * p.response;
  }

  ProfiledDeviance evaluate(const Eigen::VectorXd& theta, bool want_blups) const {
    ProfiledDeviance out;
    const Eigen::MatrixXd lambda = lambda_from_theta(theta, q_);
    const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(q_, q_);
    Eigen::MatrixXd schur = XtX_;
    Eigen::VectorXd rhs = Xty_;
    double logdet = 0.0;
    std::vector<Eigen::LLT<Eigen::MatrixXd>> factors;
    std::vector<Eigen::MatrixXd> cross;  // Lambda' X_j' X_j
    factors.reserve(groups_.size());
    cross.reserve(groups_.size());
    for (const auto& g : groups_) {
      Eigen::MatrixXd C = lambda.transpose() * g.XtX;
      Eigen::MatrixXd A = C * lambda + I;
      Eigen::LLT<Eigen::MatrixXd> llt(A);
      if (llt.info() != Eigen::Success) return out;
      logdet += 2.0 * llt.matrixLLT().diagonal().array().log().sum();
      Eigen::VectorXd c = lambda.transpose() * g.Xty;
      schur.noalias() -= C.transpose() * llt.solve(C);
      rhs.noalias() -= C.transpose() * llt.solve(c);
      factors.push_back(std::move(llt));
      cross.push_back(std::move(C));
    }
    Eigen::LLT<Eigen::MatrixXd> sl(schur);
    if (sl.info() != Eigen::Success) return out;
    out.beta = sl.solve(rhs);
    if (!out.beta.allFinite()) return out;

    double penalized_rss = 0.0;
    if (want_blups) out.blups.reserve(groups_.size());
    for (std::size_t j = 0; j < groups_.size(); ++j) {
      const auto& g = groups_[j];
      Eigen::VectorXd u = factors[j].solve(lambda.transpose() * g.Xty - cross[j] * out.beta);
      Eigen::VectorXd b = lambda * u;
      penalized_rss += (g.y - g.X * (out.beta + b)).squaredNorm() + u.squaredNorm();
      if (want_blups) out.blups.push_back(std::move(b));
    }
    const double n = static_cast<double>(n_);
    out.sigma2 = std::max(penalized_rss / n, floor_);
    out.deviance = logdet + n * std::log(2.0 * std::numbers::pi * out.sigma2) + penalized_rss / out.sigma2;
    return out;
  }

 private:
  struct Group {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
    Eigen::MatrixXd XtX;
    Eigen::VectorXd Xty;
  };
  Eigen::Index n_, q_;
  double floor_;
  std::vector<Group> groups_;
  Eigen::MatrixXd XtX_;
  Eigen::VectorXd Xty_;
};

}  // namespace detail

// -2 * profiled ML log-likelihood at theta, with beta, sigma2 and the BLUPs
// profiled out by penalized least squares (solved group by group). Returns
// +inf when the penalized system is numerically singular.
inline ProfiledDeviance profiled_deviance(const LmeProblem& problem, const Eigen::VectorXd& theta,
                                          double sigma2_floor = 1e-12) {
  if (theta.size() != theta_size(problem.q()))
    throw std::invalid_argument("profiled_deviance: theta has wrong length");
  return detail::LmeWorkspace(problem, sigma2_floor).evaluate(theta, true);
}

inline LmeFit fit_lme(const LmeProblem& problem, const LmeConfig& config = {}) {
  const auto n = problem.n(), q = problem.q();
  if (q < 1) throw std::invalid_argument("fit_lme: empty design");
  if (n <= q)
    throw NumericError("fit_lme: need more observations (" + std::to_string(n) + ") than fixed effects (" +
                       std::to_string(q) + ")");

  // Work on standardized non-intercept columns: X T with T invertible. The
  // random-effect covariance is unstructured, so the likelihood is invariant
  // and the estimates map back through T.
  Eigen::MatrixXd T = Eigen::MatrixXd::Identity(q, q);
  for (Eigen::Index c = 1; c < q; ++c) {
    const auto col = problem.design.col(c);
    const double mean = col.mean();
    const double sd = std::sqrt((col.array() - mean).square().mean());
    if (!(sd > 0.0)) throw NumericError("fit_lme: collinear parents (constant column)");
    T(c, c) = 1.0 / sd;
    T(0, c) = -mean / sd;
  }
  LmeProblem scaled = problem;
  scaled.design = problem.design * T;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled.design);
  qr.setThreshold(1e-10);
  if (qr.rank() < q) throw NumericError("fit_lme: collinear parents");

  const detail::LmeWorkspace ws(scaled, config.sigma2_floor);
  auto dev = [&](const Eigen::VectorXd& th) { return ws.evaluate(th, false).deviance; };

  const int budget = config.max_evaluations > 0 ? config.max_evaluations : static_cast<int>(200 * q * q);
  Eigen::VectorXd theta = theta_from_lambda(Eigen::MatrixXd::Identity(q, q));
  int used = 0;
  bool converged = false;
  double best = dev(theta);
  ++used;
  // Restart from the optimum until a fresh simplex no longer improves it.
  for (int round = 0; round < 4 && used < budget; ++round) {
    auto r = nelder_mead(dev, theta, round == 0 ? 0.5 : 0.1, budget - used, config.rel_tol);
    used += r.evaluations;
    const bool improved = r.value < best - config.rel_tol * (1.0 + std::abs(best));
    if (r.value <= best) {
      theta = r.x;
      best = r.value;
    }
    converged = r.converged;
    if (!improved && round > 0) break;
  }

  // Snap near-singular directions onto the boundary when that does not hurt.
  Eigen::MatrixXd lambda = lambda_from_theta(theta, q);
  for (Eigen::Index c = q - 1; c >= 0; --c) {
    if (std::abs(lambda(c, c)) > 1e-3) continue;
    Eigen::MatrixXd trial = lambda;
    trial.col(c).setZero();
    const double d = dev(theta_from_lambda(trial));
    ++used;
    if (d <= best + 1e-10 * (1.0 + std::abs(best))) {
      lambda = trial;
      best = std::min(best, d);
    }
  }
  for (Eigen::Index c = 0; c < q; ++c)
    if (lambda(c, c) < 0.0) lambda.col(c) *= -1.0;
  theta = theta_from_lambda(lambda);

  const auto pd = ws.evaluate(theta, true);
  if (!std::isfinite(pd.deviance)) throw NumericError("fit_lme: deviance is not finite at the optimum");

  LmeFit fit;
  fit.beta = T * pd.beta;
  fit.blups.reserve(pd.blups.size());
  for (const auto& b : pd.blups) fit.blups.push_back(T * b);
  fit.sigma2 = pd.sigma2;
  Eigen::MatrixXd rel = T * lambda;
  fit.Sigma = pd.sigma2 * rel * rel.transpose();
  fit.Sigma = 0.5 * (fit.Sigma + fit.Sigma.transpose()).eval();
  fit.loglik = -0.5 * pd.deviance;
  fit.converged = converged;
  fit.evaluations = used;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(lambda * lambda.transpose(), Eigen::EigenvaluesOnly);
  fit.boundary = es.eigenvalues().minCoeff() <= 1e-8 * std::max(1.0, es.eigenvalues().maxCoeff());
  return fit;
}

// Group-specific linear predictor (beta_0 + b_j0) + x' (beta_rest + b_j,rest).
inline double lme_group_predict(const LmeFit& fit, std::size_t group, const Eigen::VectorXd& parents) {
  if (group >= fit.blups.size()) throw std::out_of_range("lme_group_predict: group index out of range");
  if (parents.size() + 1 != fit.beta.size())
    throw std::invalid_argument("lme_group_predict: parent vector has wrong length");
  Eigen::VectorXd coef = fit.beta + fit.blups[group];
  return coef(0) + parents.dot(coef.tail(parents.size()));
}

// Number of free parameters of an LME local distribution with k parents.
inline int lme_parameter_count(int k) { return (k * k + 5 * k + 6) / 2; }

}  // namespace mebn
