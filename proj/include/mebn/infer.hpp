#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <optional>
#include <random>
#include <vector>

#include "mebn/dataset.hpp"
#include "mebn/errors.hpp"
#include "mebn/model.hpp"
#include "mebn/random.hpp"

namespace mebn {

// Observed subset of the variables (by index) and optionally the group.
struct Evidence {
  std::vector<std::pair<std::size_t, double>> observed;
  std::optional<std::size_t> group;

  bool observes(std::size_t i) const {
    for (const auto& [k, v] : observed)
      if (k == i) return true;
    return false;
  }
};

inline double logsumexp(const Eigen::VectorXd& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

inline Eigen::VectorXd normalize_log(const Eigen::VectorXd& logw) {
  Eigen::VectorXd p = (logw.array() - logsumexp(logw)).exp();
  return p / p.sum();
}

inline double mvn_logpdf(const Eigen::VectorXd& x, const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov) {
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("mvn_logpdf: covariance is not positive definite");
  Eigen::VectorXd z = llt.matrixL().solve(x - mu);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet + z.squaredNorm());
}

// posterior_j proportional to prior_j * N(x; mu_j, Sigma_j).
inline Eigen::VectorXd classify_group(const GroupJoint& joint, const Eigen::VectorXd& x) {
  Eigen::VectorXd logw(static_cast<Eigen::Index>(joint.groups()));
  for (std::size_t j = 0; j < joint.groups(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    logw(jj) = joint.prior(jj) > 0.0 ? std::log(joint.prior(jj)) + mvn_logpdf(x, joint.mean[j], joint.cov[j])
                                     : -std::numeric_limits<double>::infinity();
  }
  return normalize_log(logw);
}

inline Eigen::VectorXd classify_group(const BnModel& model, const Eigen::VectorXd& x) {
  return classify_group(compile_joint(model), x);
}

// First index of the maximum (lowest group index wins ties).
inline std::size_t argmax(const Eigen::VectorXd& p) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < p.size(); ++j)
    if (p(j) > p(best)) best = j;
  return static_cast<std::size_t>(best);
}

namespace detail {

struct Conditioned {
  double mean = 0.0;
  double log_marginal = 0.0;  // log density of the observed block
};

// Gaussian conditioning of one target on the observed block.
inline Conditioned condition(const Eigen::VectorXd& mu, const Eigen::MatrixXd& cov, const Evidence& ev,
                             std::size_t target) {
  const auto m = static_cast<Eigen::Index>(ev.observed.size());
  if (m == 0) return {mu(static_cast<Eigen::Index>(target)), 0.0};
  Eigen::VectorXd xo(m), muo(m), cto(m);
  Eigen::MatrixXd Soo(m, m);
  for (Eigen::Index a = 0; a < m; ++a) {
    const auto ia = static_cast<Eigen::Index>(ev.observed[static_cast<std::size_t>(a)].first);
    xo(a) = ev.observed[static_cast<std::size_t>(a)].second;
    muo(a) = mu(ia);
    cto(a) = cov(static_cast<Eigen::Index>(target), ia);
    for (Eigen::Index b = 0; b < m; ++b)
      Soo(a, b) = cov(ia, static_cast<Eigen::Index>(ev.observed[static_cast<std::size_t>(b)].first));
  }
  Eigen::LLT<Eigen::MatrixXd> llt(Soo);
  if (llt.info() != Eigen::Success) throw NumericError("exact_conditional_mean: observed covariance is singular");
  Eigen::VectorXd resid = xo - muo;
  Eigen::VectorXd alpha = llt.solve(resid);
  Conditioned out;
  out.mean = mu(static_cast<Eigen::Index>(target)) + cto.dot(alpha);
  const double logdet = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
  out.log_marginal =
      -0.5 * (static_cast<double>(m) * std::log(2.0 * std::numbers::pi) + logdet + resid.dot(alpha));
  return out;
}

}  // namespace detail

// E[X_target | evidence]: conditional within the known group, or a mixture of
// group conditionals weighted by the group posterior given the evidence.
inline double exact_conditional_mean(const GroupJoint& joint, const Evidence& ev, std::size_t target) {
  if (ev.observes(target)) throw std::invalid_argument("exact_conditional_mean: target is observed");
  if (ev.group) return detail::condition(joint.mean[*ev.group], joint.cov[*ev.group], ev, target).mean;
  const auto g = static_cast<Eigen::Index>(joint.groups());
  Eigen::VectorXd logw(g), means(g);
  for (Eigen::Index j = 0; j < g; ++j) {
    auto c = detail::condition(joint.mean[static_cast<std::size_t>(j)], joint.cov[static_cast<std::size_t>(j)], ev, target);
    means(j) = c.mean;
    logw(j) = joint.prior(j) > 0.0 ? std::log(joint.prior(j)) + c.log_marginal
                                   : -std::numeric_limits<double>::infinity();
  }
  return normalize_log(logw).dot(means);
}

inline double exact_conditional_mean(const BnModel& model, const Evidence& ev, std::size_t target) {
  return exact_conditional_mean(compile_joint(model), ev, target);
}

struct LwResult {
  Eigen::VectorXd mean;       // one estimate per target
  Eigen::VectorXd std_error;  // delta-method standard error per target
  double ess = 0.0;           // (sum w)^2 / sum w^2
};

// Likelihood weighting: unobserved variables (and the group, if unknown) are
// sampled ancestrally; each particle is weighted by the densities of the
// observed variables given their sampled or observed parents.
inline LwResult likelihood_weighting(const BnModel& model, const Evidence& ev, const std::vector<std::size_t>& targets,
                                     std::size_t samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("likelihood_weighting: need at least one sample");
  Rng rng(seed);
  const auto order = model.variable_order();
  const auto nv = static_cast<Eigen::Index>(model.size());
  std::vector<char> is_obs(model.size(), 0);
  Eigen::VectorXd obs_val = Eigen::VectorXd::Zero(nv);
  for (const auto& [i, v] : ev.observed) {
    is_obs[i] = 1;
    obs_val(static_cast<Eigen::Index>(i)) = v;
  }
  std::vector<double> prior(model.group_prior.data(), model.group_prior.data() + model.group_prior.size());
  std::discrete_distribution<int> pick(prior.begin(), prior.end());

  const auto t = static_cast<Eigen::Index>(targets.size());
  const auto M = static_cast<Eigen::Index>(samples);
  Eigen::VectorXd logw(M);
  Eigen::MatrixXd values(M, t);
  Eigen::VectorXd x(nv);
  for (Eigen::Index s = 0; s < M; ++s) {
    const auto g = ev.group ? *ev.group : static_cast<std::size_t>(pick(rng));
    double lw = 0.0;
    for (auto i : order) {
      const auto& local = model.locals[i];
      const auto lg = local.for_group(g);
      const double mean = lg.mean(detail::gather(x, local.parents));
      const auto ii = static_cast<Eigen::Index>(i);
      if (is_obs[i]) {
        x(ii) = obs_val(ii);
        lw += detail::normal_logpdf(x(ii), mean, lg.variance);
      } else {
        x(ii) = mean + std::sqrt(lg.variance) * standard_normal(rng);
      }
    }
    logw(s) = lw;
    for (Eigen::Index k = 0; k < t; ++k) values(s, k) = x(static_cast<Eigen::Index>(targets[static_cast<std::size_t>(k)]));
  }
  const double top = logw.maxCoeff();
  if (!std::isfinite(top))
    throw NumericError("likelihood_weighting: all weights vanished; increase the sample count or use the exact engine");
  Eigen::VectorXd w = (logw.array() - top).exp();
  const double sw = w.sum();
  LwResult out;
  out.mean = (values.transpose() * w) / sw;
  out.std_error.resize(t);
  for (Eigen::Index k = 0; k < t; ++k) {
    Eigen::ArrayXd dev = values.col(k).array() - out.mean(k);
    out.std_error(k) = std::sqrt((w.array().square() * dev.square()).sum()) / sw;
  }
  out.ess = sw * sw / w.squaredNorm();
  return out;
}

enum class Engine { Exact, LikelihoodWeighting };

struct PredictOptions {
  Engine engine = Engine::Exact;
  std::size_t lw_samples = 10000;
  std::uint64_t seed = 0;
};

// Leave-one-node-out predictions: each value is predicted from all other
// variables in its row, plus the row's group when know_group is set.
inline Eigen::MatrixXd predict_all(const BnModel& model, const GroupedDataset& data, bool know_group,
                                   const PredictOptions& options = {}) {
  const auto n = static_cast<Eigen::Index>(data.rows());
  const auto p = static_cast<Eigen::Index>(model.size());
  if (data.width() != model.size()) throw DataError("predict_all: data and model have different variables");
  std::vector<std::size_t> col(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) col[i] = data.column_index(model.variables[i]);
  std::vector<std::size_t> group_of(data.group_count());
  for (std::size_t j = 0; j < data.group_count(); ++j)
    group_of[j] = static_cast<std::size_t>(model.group_index(data.group_labels[j]));

  Eigen::MatrixXd out(n, p);
  if (options.engine == Engine::Exact) {
    // With precision P, E[x_i | x_-i] = mu_i - sum_{m != i} P_im (x_m - mu_m) / P_ii and
    // log p(x_-i) = log p(x) - log N(x_i; E[x_i | x_-i], 1 / P_ii).
    const auto joint = compile_joint(model);
    const auto G = joint.groups();
    std::vector<Eigen::MatrixXd> prec(G);
    std::vector<double> logdet(G);
    for (std::size_t j = 0; j < G; ++j) {
      Eigen::LLT<Eigen::MatrixXd> llt(joint.cov[j]);
      prec[j] = llt.solve(Eigen::MatrixXd::Identity(p, p));
      logdet[j] = 2.0 * llt.matrixL().toDenseMatrix().diagonal().array().log().sum();
    }
    const double log2pi = std::log(2.0 * std::numbers::pi);
    Eigen::VectorXd x(p);
    Eigen::MatrixXd cond(static_cast<Eigen::Index>(G), p), logm(static_cast<Eigen::Index>(G), p);
    for (Eigen::Index r = 0; r < n; ++r) {
      for (Eigen::Index i = 0; i < p; ++i) x(i) = data.values(r, static_cast<Eigen::Index>(col[static_cast<std::size_t>(i)]));
      for (std::size_t j = 0; j < G; ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        Eigen::VectorXd d = x - joint.mean[j];
        Eigen::VectorXd Pd = prec[j] * d;
        const double full = -0.5 * (static_cast<double>(p) * log2pi + logdet[j] + d.dot(Pd));
        for (Eigen::Index i = 0; i < p; ++i) {
          const double pii = prec[j](i, i);
          const double shift = Pd(i) / pii;  // x_i - E[x_i | x_-i]
          cond(jj, i) = x(i) - shift;
          logm(jj, i) = full - (-0.5 * (log2pi - std::log(pii) + shift * shift * pii));
        }
      }
      const auto g = group_of[static_cast<std::size_t>(data.groups[static_cast<std::size_t>(r)])];
      for (Eigen::Index i = 0; i < p; ++i) {
        if (know_group) {
          out(r, i) = cond(static_cast<Eigen::Index>(g), i);
          continue;
        }
        Eigen::VectorXd lw(static_cast<Eigen::Index>(G));
        for (std::size_t j = 0; j < G; ++j) {
          const auto jj = static_cast<Eigen::Index>(j);
          lw(jj) = joint.prior(jj) > 0.0 ? std::log(joint.prior(jj)) + logm(jj, i)
                                         : -std::numeric_limits<double>::infinity();
        }
        out(r, i) = normalize_log(lw).dot(cond.col(i));
      }
    }
    return out;
  }

  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index i = 0; i < p; ++i) {
      Evidence ev;
      for (Eigen::Index m = 0; m < p; ++m)
        if (m != i)
          ev.observed.emplace_back(static_cast<std::size_t>(m),
                                   data.values(r, static_cast<Eigen::Index>(col[static_cast<std::size_t>(m)])));
      if (know_group) ev.group = group_of[static_cast<std::size_t>(data.groups[static_cast<std::size_t>(r)])];
      const auto seed = derive_seed(options.seed, {static_cast<std::uint64_t>(r), static_cast<std::uint64_t>(i)});
      out(r, i) = likelihood_weighting(model, ev, {static_cast<std::size_t>(i)}, options.lw_samples, seed).mean(0);
    }
  return out;
}

// Group posteriors for every row of a data set.
inline std::vector<std::size_t> classify_all(const BnModel& model, const GroupedDataset& data) {
  const auto joint = compile_joint(model);
  std::vector<std::size_t> col(model.size());
  for (std::size_t i = 0; i < model.size(); ++i) col[i] = data.column_index(model.variables[i]);
  std::vector<std::size_t> out;
  Eigen::VectorXd x(static_cast<Eigen::Index>(model.size()));
  for (Eigen::Index r = 0; r < static_cast<Eigen::Index>(data.rows()); ++r) {
    for (std::size_t i = 0; i < model.size(); ++i)
      x(static_cast<Eigen::Index>(i)) = data.values(r, static_cast<Eigen::Index>(col[i]));
    out.push_back(argmax(classify_group(joint, x)));
  }
  return out;
}

}  // namespace mebn
