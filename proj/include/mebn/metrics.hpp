#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "mebn/errors.hpp"
#include "mebn/graph.hpp"
#include "mebn/infer.hpp"
#include "mebn/model.hpp"
#include "mebn/random.hpp"

namespace mebn {

// Adds an isolated group node to a DAG that lacks one.
inline Dag with_group_node(const Dag& dag, const std::string& group) {
  if (dag.group_index()) return dag;
  auto names = dag.nodes();
  names.push_back(group);
  Dag out(names, group);
  for (auto a : dag.arcs()) out.set_arc(a.from, a.to, true);
  return out;
}

// Drops the group node and its arcs.
inline Dag without_group_node(const Dag& dag) {
  if (!dag.group_index()) return dag;
  std::vector<std::string> names;
  for (std::size_t i = 0; i < dag.size(); ++i)
    if (!dag.is_group(i)) names.push_back(dag.name(i));
  Dag out(names);
  for (auto a : dag.arcs())
    if (!dag.is_group(a.from) && !dag.is_group(a.to))
      out.set_arc(out.index_of(dag.name(a.from)), out.index_of(dag.name(a.to)), true);
  return out;
}

// Structural Hamming distance between the CPDAGs of two DAGs over the same
// node names: one unit per pair whose edge status (absent, either
// direction, undirected) differs.
inline int shd(const Dag& g1, const Dag& g2) {
  if (g1.size() != g2.size()) throw DataError("shd: graphs have different node sets");
  std::vector<std::size_t> map(g1.size());
  for (std::size_t i = 0; i < g1.size(); ++i) {
    try {
      map[i] = g2.index_of(g1.name(i));
    } catch (const std::invalid_argument&) {
      throw DataError("shd: node '" + g1.name(i) + "' missing from second graph");
    }
  }
  const auto c1 = to_cpdag(g1), c2 = to_cpdag(g2);
  int d = 0;
  for (std::size_t u = 0; u < g1.size(); ++u)
    for (std::size_t v = u + 1; v < g1.size(); ++v) {
      auto e1 = c1.edge(u, v);
      auto e2 = c2.edge(map[u], map[v]);
      if (e1 != e2) ++d;
    }
  return d;
}

// KL(N(mu0, S0) || N(mu1, S1)) in nats.
inline double gaussian_kl(const Eigen::VectorXd& mu0, const Eigen::MatrixXd& S0, const Eigen::VectorXd& mu1,
                          const Eigen::MatrixXd& S1) {
  Eigen::LLT<Eigen::MatrixXd> l0(S0), l1(S1);
  if (l0.info() != Eigen::Success || l1.info() != Eigen::Success)
    throw NumericError("gaussian_kl: covariance is not positive definite");
  const auto d = static_cast<double>(mu0.size());
  const double logdet0 = 2.0 * l0.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double logdet1 = 2.0 * l1.matrixL().toDenseMatrix().diagonal().array().log().sum();
  const double trace = l1.solve(S0).trace();
  Eigen::VectorXd diff = mu1 - mu0;
  const double maha = diff.dot(l1.solve(diff));
  return 0.5 * (trace + maha - d + logdet1 - logdet0);
}

namespace detail {

// Permutation taking `from` variable order to `to` variable order.
inline std::vector<std::size_t> align(const std::vector<std::string>& to, const std::vector<std::string>& from) {
  if (to.size() != from.size()) throw DataError("models have different variable sets");
  std::vector<std::size_t> idx(to.size());
  for (std::size_t i = 0; i < to.size(); ++i) {
    auto it = std::find(from.begin(), from.end(), to[i]);
    if (it == from.end()) throw DataError("variable '" + to[i] + "' missing from learned model");
    idx[i] = static_cast<std::size_t>(it - from.begin());
  }
  return idx;
}

inline GroupJoint aligned_joint(const BnModel& reference, const BnModel& other) {
  const auto perm = align(reference.variables, other.variables);
  const auto raw = compile_joint(other);
  GroupJoint out;
  out.prior.resize(static_cast<Eigen::Index>(reference.groups()));
  const auto n = static_cast<Eigen::Index>(perm.size());
  for (std::size_t j = 0; j < reference.groups(); ++j) {
    const auto k = static_cast<std::size_t>(other.group_index(reference.group_labels[j]));
    Eigen::VectorXd mu(n);
    Eigen::MatrixXd S(n, n);
    for (Eigen::Index a = 0; a < n; ++a) {
      mu(a) = raw.mean[k](static_cast<Eigen::Index>(perm[static_cast<std::size_t>(a)]));
      for (Eigen::Index b = 0; b < n; ++b)
        S(a, b) = raw.cov[k](static_cast<Eigen::Index>(perm[static_cast<std::size_t>(a)]),
                             static_cast<Eigen::Index>(perm[static_cast<std::size_t>(b)]));
    }
    out.mean.push_back(std::move(mu));
    out.cov.push_back(std::move(S));
    out.prior(static_cast<Eigen::Index>(j)) = raw.prior(static_cast<Eigen::Index>(k));
  }
  return out;
}

}  // namespace detail

// KL over the joint (X, F): sum_j pi_j [log(pi_j / pihat_j) + KL(true_j || learned_j)].
inline double model_kl(const BnModel& truth, const BnModel& learned) {
  if (learned.groups() != truth.groups()) throw DataError("model_kl: models have different group sets");
  const auto t = compile_joint(truth);
  const auto l = detail::aligned_joint(truth, learned);
  double kl = 0.0;
  for (std::size_t j = 0; j < t.groups(); ++j) {
    const double p = t.prior(static_cast<Eigen::Index>(j));
    if (p <= 0.0) continue;
    const double q = l.prior(static_cast<Eigen::Index>(j));
    if (q <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p * (std::log(p / q) + gaussian_kl(t.mean[j], t.cov[j], l.mean[j], l.cov[j]));
  }
  return kl;
}

struct McEstimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Monte-Carlo KL between the X marginals (group mixtures) of two models.
inline McEstimate mc_kl_x_marginal(const BnModel& truth, const BnModel& learned, std::size_t samples,
                                   std::uint64_t seed) {
  const auto t = compile_joint(truth);
  const auto l = detail::aligned_joint(truth, learned);
  auto log_mix = [](const GroupJoint& g, const std::vector<Eigen::LLT<Eigen::MatrixXd>>& f,
                    const std::vector<double>& logdet, const Eigen::VectorXd& x) {
    Eigen::VectorXd lw(static_cast<Eigen::Index>(g.groups()));
    for (std::size_t j = 0; j < g.groups(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      Eigen::VectorXd z = f[j].matrixL().solve(x - g.mean[j]);
      lw(jj) = (g.prior(jj) > 0.0 ? std::log(g.prior(jj)) : -std::numeric_limits<double>::infinity()) -
               0.5 * (static_cast<double>(x.size()) * std::log(2.0 * std::numbers::pi) + logdet[j] + z.squaredNorm());
    }
    return logsumexp(lw);
  };
  auto factor = [](const GroupJoint& g, std::vector<Eigen::LLT<Eigen::MatrixXd>>& f, std::vector<double>& ld) {
    for (const auto& S : g.cov) {
      f.emplace_back(S);
      ld.push_back(2.0 * f.back().matrixL().toDenseMatrix().diagonal().array().log().sum());
    }
  };
  std::vector<Eigen::LLT<Eigen::MatrixXd>> ft, fl;
  std::vector<double> ldt, ldl;
  factor(t, ft, ldt);
  factor(l, fl, ldl);

  Rng rng(seed);
  std::vector<double> prior(t.prior.data(), t.prior.data() + t.prior.size());
  std::discrete_distribution<int> pick(prior.begin(), prior.end());
  const auto n = t.mean.front().size();
  double sum = 0.0, sum2 = 0.0;
  Eigen::VectorXd z(n);
  for (std::size_t s = 0; s < samples; ++s) {
    const auto j = static_cast<std::size_t>(pick(rng));
    for (Eigen::Index k = 0; k < n; ++k) z(k) = standard_normal(rng);
    Eigen::VectorXd x = t.mean[j] + ft[j].matrixL() * z;
    const double d = log_mix(t, ft, ldt, x) - log_mix(l, fl, ldl, x);
    sum += d;
    sum2 += d * d;
  }
  const double m = sum / static_cast<double>(samples);
  const double var = std::max(0.0, sum2 / static_cast<double>(samples) - m * m);
  return {m, std::sqrt(var / static_cast<double>(samples))};
}

struct RmadResult {
  double value = 0.0;
  std::size_t skipped = 0;  // terms with |observed| < 1e-12
};

// (1/N) sum_i (1/n) sum_k |(x_ik - xhat_ik) / x_ik|. Skipped terms are
// removed from their node's average.
inline RmadResult rmad(const Eigen::MatrixXd& observed, const Eigen::MatrixXd& predicted) {
  if (observed.rows() != predicted.rows() || observed.cols() != predicted.cols())
    throw std::invalid_argument("rmad: shape mismatch");
  RmadResult out;
  if (observed.cols() == 0) return out;
  double total = 0.0;
  for (Eigen::Index i = 0; i < observed.cols(); ++i) {
    double s = 0.0;
    std::size_t used = 0;
    for (Eigen::Index k = 0; k < observed.rows(); ++k) {
      const double x = observed(k, i);
      if (std::abs(x) < 1e-12) {
        ++out.skipped;
        continue;
      }
      s += std::abs((x - predicted(k, i)) / x);
      ++used;
    }
    if (used > 0) total += s / static_cast<double>(used);
  }
  out.value = total / static_cast<double>(observed.cols());
  return out;
}

// Binary F1 of class 0 when there are two classes, otherwise the unweighted
// mean of one-vs-rest F1 scores. A class never predicted and never present
// scores 0.
inline double macro_f1(const std::vector<std::size_t>& truth, const std::vector<std::size_t>& predicted,
                       std::size_t classes) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("macro_f1: length mismatch");
  auto f1_of = [&](std::size_t c) {
    double tp = 0, fp = 0, fn = 0;
    for (std::size_t k = 0; k < truth.size(); ++k) {
      const bool t = truth[k] == c, p = predicted[k] == c;
      tp += t && p;
      fp += !t && p;
      fn += t && !p;
    }
    const double denom = 2 * tp + fp + fn;
    return denom > 0 ? 2 * tp / denom : 0.0;
  };
  if (classes == 2) return f1_of(0);
  double s = 0.0;
  for (std::size_t c = 0; c < classes; ++c) s += f1_of(c);
  return classes ? s / static_cast<double>(classes) : 0.0;
}

// n / p with n the total sample size and p the CGBN parameter count of the
// generating network plus |F| - 1 for the group distribution.
inline double samples_per_parameter(const std::vector<std::size_t>& sizes, const BnModel& truth) {
  double n = 0.0;
  for (auto s : sizes) n += static_cast<double>(s);
  const int groups = static_cast<int>(truth.groups());
  double p = groups - 1;
  for (const auto& local : truth.locals) p += nparams(Strategy::CGBN, static_cast<int>(local.parents.size()), groups);
  return n / p;
}

}  // namespace mebn
