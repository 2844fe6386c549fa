#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "mebn/dataset.hpp"
#include "mebn/errors.hpp"
#include "mebn/graph.hpp"
#include "mebn/lme.hpp"
#include "mebn/random.hpp"

namespace mebn {

enum class Strategy { GBN, CGBN, LME };

inline const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::GBN: return "gbn";
    case Strategy::CGBN: return "cgbn";
    case Strategy::LME: return "lme";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& s) {
  if (s == "gbn") return Strategy::GBN;
  if (s == "cgbn") return Strategy::CGBN;
  if (s == "lme") return Strategy::LME;
  throw ConfigError("unknown strategy '" + s + "' (expected gbn, cgbn or lme)");
}

// Free parameters of one local distribution with k continuous parents.
inline int nparams(Strategy s, int k, int groups) {
  if (k < 0 || groups < 1) throw std::invalid_argument("nparams: k >= 0 and groups >= 1 required");
  switch (s) {
    case Strategy::GBN: return k + 2;
    case Strategy::CGBN: return (k + 2) * groups;
    case Strategy::LME: return lme_parameter_count(k);
  }
  return 0;
}

// x ~ N(intercept + coefficients' parents, variance)
struct LinearGaussian {
  double intercept = 0.0;
  Eigen::VectorXd coefficients;
  double variance = 1.0;

  double mean(const Eigen::VectorXd& parents) const { return intercept + coefficients.dot(parents); }
};

struct PooledLocal {
  LinearGaussian params;
};

struct PerGroupLocal {
  std::vector<LinearGaussian> groups;
  bool degenerate = false;  // some group needed a pseudoinverse, clamp or fallback
};

struct MixedLocal {
  LmeFit fit;
};

struct LocalDistribution {
  std::vector<std::size_t> parents;  // continuous parent indices, increasing
  std::variant<PooledLocal, PerGroupLocal, MixedLocal> params;
  double loglik = 0.0;  // maximized log-likelihood on the training data

  // The linear-Gaussian conditional used for group j.
  LinearGaussian for_group(std::size_t j) const {
    if (auto* p = std::get_if<PooledLocal>(&params)) return p->params;
    if (auto* g = std::get_if<PerGroupLocal>(&params)) return g->groups.at(j);
    const auto& fit = std::get<MixedLocal>(params).fit;
    Eigen::VectorXd coef = fit.beta + fit.blups.at(j);
    return {coef(0), coef.tail(coef.size() - 1), fit.sigma2};
  }
};

// Per-group joint Gaussian of the continuous variables.
struct GroupJoint {
  std::vector<Eigen::VectorXd> mean;
  std::vector<Eigen::MatrixXd> cov;
  Eigen::VectorXd prior;

  std::size_t groups() const { return mean.size(); }
};

// A fitted Bayesian network over the continuous variables plus (for CGBN and
// LME) the group node. DAG node indices 0..N-1 are the variables in order;
// index N, when present, is the group node.
struct BnModel {
  Dag dag;
  Strategy strategy = Strategy::GBN;
  std::vector<std::string> variables;
  std::string group_node = "F";
  std::vector<std::string> group_labels;
  Eigen::VectorXd group_prior;
  std::vector<LocalDistribution> locals;

  std::size_t size() const { return variables.size(); }
  std::size_t groups() const { return group_labels.size(); }

  // Topological order of the continuous variables.
  std::vector<std::size_t> variable_order() const {
    std::vector<std::size_t> out;
    for (auto i : topological_order(dag))
      if (!dag.is_group(i)) out.push_back(i);
    return out;
  }

  int group_index(const std::string& label) const {
    for (std::size_t j = 0; j < group_labels.size(); ++j)
      if (group_labels[j] == label) return static_cast<int>(j);
    throw DataError("unknown group label '" + label + "'");
  }
};

// Canonical DAG for a strategy: variables first, then (CGBN/LME) the group
// node with an arc to every variable.
inline Dag canonical_dag(const std::vector<std::string>& variables, const std::string& group_node,
                         Strategy s) {
  auto names = variables;
  if (s == Strategy::GBN) return Dag(names);
  names.push_back(group_node);
  Dag g(names, group_node);
  for (std::size_t i = 0; i < variables.size(); ++i) g.set_arc(variables.size(), i, true);
  return g;
}

// ---------------------------------------------------------------------------
// Parameter learning

namespace detail {

inline Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& values, const std::vector<std::size_t>& rows,
                                     const std::vector<std::size_t>& parents) {
  Eigen::MatrixXd X(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(parents.size() + 1));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    auto rr = static_cast<Eigen::Index>(r);
    X(rr, 0) = 1.0;
    for (std::size_t k = 0; k < parents.size(); ++k)
      X(rr, static_cast<Eigen::Index>(k + 1)) = values(static_cast<Eigen::Index>(rows[r]),
                                                        static_cast<Eigen::Index>(parents[k]));
  }
  return X;
}

inline Eigen::VectorXd response(const Eigen::MatrixXd& values, const std::vector<std::size_t>& rows,
                                std::size_t node) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r)
    y(static_cast<Eigen::Index>(r)) = values(static_cast<Eigen::Index>(rows[r]), static_cast<Eigen::Index>(node));
  return y;
}

inline double ml_variance(const Eigen::VectorXd& v) {
  if (v.size() == 0) return 0.0;
  return (v.array() - v.mean()).square().mean();
}

inline double gaussian_loglik(double rss, double n, double variance) {
  return -0.5 * n * std::log(2.0 * std::numbers::pi * variance) - 0.5 * rss / variance;
}

struct OlsResult {
  LinearGaussian params;
  double loglik = 0.0;
  bool degenerate = false;
};

// ML linear regression. Rank-deficient designs use the minimum-norm
// solution; the ML variance is clamped from below at `floor`.
inline OlsResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, double floor) {
  OlsResult out;
  const double n = static_cast<double>(y.size());
  Eigen::VectorXd coef;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
  if (qr.rank() == X.cols() && X.rows() > X.cols()) {
    coef = qr.solve(y);
  } else {
    coef = Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd>(X).solve(y);
    out.degenerate = true;
  }
  const double rss = (y - X * coef).squaredNorm();
  double var = rss / n;
  if (!(var >= floor)) {
    var = floor;
    out.degenerate = true;
  }
  out.params = {coef(0), coef.tail(coef.size() - 1), var};
  out.loglik = gaussian_loglik(rss, n, var);
  return out;
}

inline double variance_floor(const Eigen::MatrixXd& values, std::size_t node) {
  return std::max(1e-6 * ml_variance(values.col(static_cast<Eigen::Index>(node))), 1e-300);
}

}  // namespace detail

struct FitOptions {
  LmeConfig lme;
};

// Fits the local distribution of `node` given continuous `parents`.
inline LocalDistribution fit_local(const GroupedDataset& data, std::size_t node,
                                   const std::vector<std::size_t>& parents, Strategy s,
                                   const FitOptions& options = {}) {
  LocalDistribution local;
  local.parents = parents;
  std::vector<std::size_t> all(data.rows());
  std::iota(all.begin(), all.end(), std::size_t{0});
  const double floor = detail::variance_floor(data.values, node);

  switch (s) {
    case Strategy::GBN: {
      auto r = detail::ols(detail::design_matrix(data.values, all, parents),
                           detail::response(data.values, all, node), floor);
      local.params = PooledLocal{r.params};
      local.loglik = r.loglik;
      break;
    }
    case Strategy::CGBN: {
      PerGroupLocal pg;
      std::optional<detail::OlsResult> pooled;
      for (const auto& rows : data.rows_by_group()) {
        if (rows.empty()) {
          // No data for this group: borrow the pooled fit, contributes no likelihood.
          if (!pooled)
            pooled = detail::ols(detail::design_matrix(data.values, all, parents),
                                 detail::response(data.values, all, node), floor);
          pg.groups.push_back(pooled->params);
          pg.degenerate = true;
          continue;
        }
        auto r = detail::ols(detail::design_matrix(data.values, rows, parents),
                             detail::response(data.values, rows, node), floor);
        pg.groups.push_back(r.params);
        pg.degenerate = pg.degenerate || r.degenerate;
        local.loglik += r.loglik;
      }
      local.params = std::move(pg);
      break;
    }
    case Strategy::LME: {
      LmeProblem p;
      p.design = detail::design_matrix(data.values, all, parents);
      p.response = detail::response(data.values, all, node);
      p.groups = data.groups;
      p.group_count = static_cast<int>(data.group_count());
      auto fit = fit_lme(p, options.lme);
      local.loglik = fit.loglik;
      local.params = MixedLocal{std::move(fit)};
      break;
    }
  }
  return local;
}

inline Eigen::VectorXd empirical_prior(const GroupedDataset& data) {
  Eigen::VectorXd pi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(data.group_count()));
  for (int g : data.groups) pi(g) += 1.0;
  if (data.rows() > 0) pi /= static_cast<double>(data.rows());
  return pi;
}

// Parameter learning for a fixed DAG. The DAG is matched to the data by node
// name; any group node in it is ignored for GBN and implied for CGBN/LME.
inline BnModel fit_parameters(const Dag& dag, const GroupedDataset& data, Strategy s,
                              const FitOptions& options = {}) {
  data.validate();
  if (!dag.acyclic()) throw std::invalid_argument("fit_parameters: DAG has a directed cycle");
  BnModel m;
  m.strategy = s;
  m.variables = data.columns;
  m.group_node = data.group_column;
  m.group_labels = data.group_labels;
  m.group_prior = empirical_prior(data);
  m.dag = canonical_dag(m.variables, m.group_node, s);
  for (auto a : dag.arcs()) {
    // Arcs out of the group node are implied by the canonical DAG.
    if (dag.is_group(a.from) || dag.name(a.from) == data.group_column) continue;
    m.dag.set_arc(data.column_index(dag.name(a.from)), data.column_index(dag.name(a.to)), true);
  }
  if (dag.group_index() && s != Strategy::GBN) {
    for (std::size_t i = 0; i < dag.size(); ++i)
      if (!dag.is_group(i) && !dag.has_arc(*dag.group_index(), i))
        throw std::invalid_argument("fit_parameters: the group node must be a parent of every variable");
  }
  for (std::size_t i = 0; i < m.size(); ++i)
    m.locals.push_back(fit_local(data, i, m.dag.continuous_parents(i), s, options));
  return m;
}

// ---------------------------------------------------------------------------
// Joint compilation, density and sampling

namespace detail {

inline Eigen::VectorXd gather(const Eigen::VectorXd& x, const std::vector<std::size_t>& idx) {
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) out(static_cast<Eigen::Index>(k)) = x(static_cast<Eigen::Index>(idx[k]));
  return out;
}

inline double normal_logpdf(double x, double mean, double variance) {
  const double d = x - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

}  // namespace detail

// Mean and covariance of the variables for one group by linear-Gaussian
// composition along the topological order.
inline void compile_group(const BnModel& model, std::size_t j, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
  const auto n = static_cast<Eigen::Index>(model.size());
  mu = Eigen::VectorXd::Zero(n);
  cov = Eigen::MatrixXd::Zero(n, n);
  std::vector<std::size_t> done;
  for (auto i : model.variable_order()) {
    const auto& local = model.locals[i];
    const auto lg = local.for_group(j);
    const auto ii = static_cast<Eigen::Index>(i);
    mu(ii) = lg.intercept;
    for (std::size_t k = 0; k < local.parents.size(); ++k)
      mu(ii) += lg.coefficients(static_cast<Eigen::Index>(k)) * mu(static_cast<Eigen::Index>(local.parents[k]));
    // Cov(X_i, X_m) = sum_k beta_k Cov(P_k, X_m) for every earlier m.
    for (auto m : done) {
      double c = 0.0;
      for (std::size_t k = 0; k < local.parents.size(); ++k)
        c += lg.coefficients(static_cast<Eigen::Index>(k)) *
             cov(static_cast<Eigen::Index>(local.parents[k]), static_cast<Eigen::Index>(m));
      cov(ii, static_cast<Eigen::Index>(m)) = cov(static_cast<Eigen::Index>(m), ii) = c;
    }
    double v = lg.variance;
    for (std::size_t k = 0; k < local.parents.size(); ++k)
      v += lg.coefficients(static_cast<Eigen::Index>(k)) * cov(ii, static_cast<Eigen::Index>(local.parents[k]));
    cov(ii, ii) = v;
    done.push_back(i);
  }
}

inline GroupJoint compile_joint(const BnModel& model) {
  GroupJoint out;
  out.prior = model.group_prior;
  for (std::size_t j = 0; j < model.groups(); ++j) {
    Eigen::VectorXd mu;
    Eigen::MatrixXd cov;
    compile_group(model, j, mu, cov);
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    if (llt.info() != Eigen::Success)
      throw NumericError("compile_joint: covariance of group '" + model.group_labels[j] +
                         "' is not positive definite");
    out.mean.push_back(std::move(mu));
    out.cov.push_back(std::move(cov));
  }
  return out;
}

// Log density of (row, group) under the factorized model.
inline double log_density(const BnModel& model, const Eigen::VectorXd& row, std::size_t group) {
  if (group >= model.groups()) throw DataError("log_density: unknown group");
  double lp = std::log(model.group_prior(static_cast<Eigen::Index>(group)));
  for (std::size_t i = 0; i < model.size(); ++i) {
    const auto& local = model.locals[i];
    const auto lg = local.for_group(group);
    lp += detail::normal_logpdf(row(static_cast<Eigen::Index>(i)), lg.mean(detail::gather(row, local.parents)),
                                lg.variance);
  }
  return lp;
}

inline double log_density(const BnModel& model, const Eigen::VectorXd& row, const std::string& label) {
  return log_density(model, row, static_cast<std::size_t>(model.group_index(label)));
}

// Ancestral sampling of one row for group j.
inline Eigen::VectorXd sample_row(const BnModel& model, const std::vector<std::size_t>& order, std::size_t j,
                                  Rng& rng) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.size()));
  for (auto i : order) {
    const auto& local = model.locals[i];
    const auto lg = local.for_group(j);
    x(static_cast<Eigen::Index>(i)) =
        lg.mean(detail::gather(x, local.parents)) + std::sqrt(lg.variance) * standard_normal(rng);
  }
  return x;
}

inline GroupedDataset sample_model(const BnModel& model, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(model.group_prior.data(), model.group_prior.data() + model.group_prior.size());
  std::discrete_distribution<int> pick(w.begin(), w.end());
  const auto order = model.variable_order();
  GroupedDataset out;
  out.columns = model.variables;
  out.group_column = model.group_node;
  out.group_labels = model.group_labels;
  out.values.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(model.size()));
  out.groups.resize(count);
  for (std::size_t r = 0; r < count; ++r) {
    int g = pick(rng);
    out.groups[r] = g;
    out.values.row(static_cast<Eigen::Index>(r)) = sample_row(model, order, static_cast<std::size_t>(g), rng).transpose();
  }
  return out;
}

}  // namespace mebn
