#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mebn/mebn.hpp"

namespace mebn::testing {

inline std::vector<std::string> names(std::size_t n) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back("V" + std::to_string(i));
  return out;
}

// Every DAG over n labelled nodes (n <= 4 keeps this at 543 graphs). When
// `group` is set, node 0 is the group node and may not have parents.
inline std::vector<Dag> all_dags(std::size_t n, bool group = false) {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v) pairs.emplace_back(u, v);
  std::vector<Dag> out;
  auto nm = names(n);
  std::size_t combos = 1;
  for (std::size_t k = 0; k < pairs.size(); ++k) combos *= 3;
  for (std::size_t code = 0; code < combos; ++code) {
    Dag g = group ? Dag(nm, nm[0]) : Dag(nm);
    std::size_t c = code;
    bool ok = true;
    for (auto [u, v] : pairs) {
      const auto s = c % 3;
      c /= 3;
      if (s == 1) g.set_arc(u, v, true);
      if (s == 2) {
        if (group && u == 0) ok = false;
        g.set_arc(v, u, true);
      }
    }
    if (ok && g.acyclic()) out.push_back(g);
  }
  return out;
}

// Skeleton plus unshielded colliders: the classical equivalence invariant.
inline std::pair<std::set<std::pair<std::size_t, std::size_t>>, std::set<std::tuple<std::size_t, std::size_t, std::size_t>>>
equivalence_key(const Dag& g) {
  std::set<std::pair<std::size_t, std::size_t>> skel;
  std::set<std::tuple<std::size_t, std::size_t, std::size_t>> vs;
  for (auto a : g.arcs()) skel.insert({std::min(a.from, a.to), std::max(a.from, a.to)});
  for (std::size_t c = 0; c < g.size(); ++c) {
    auto ps = g.parents(c);
    for (std::size_t i = 0; i < ps.size(); ++i)
      for (std::size_t j = i + 1; j < ps.size(); ++j)
        if (!g.adjacent(ps[i], ps[j])) vs.insert({ps[i], c, ps[j]});
  }
  return {skel, vs};
}

// Grouped data set from an explicit matrix and group vector.
inline GroupedDataset make_dataset(const Eigen::MatrixXd& values, const std::vector<int>& groups, int group_count) {
  GroupedDataset d;
  for (Eigen::Index c = 0; c < values.cols(); ++c) d.columns.push_back("X" + std::to_string(c + 1));
  for (int j = 0; j < group_count; ++j) d.group_labels.push_back("g" + std::to_string(j + 1));
  d.values = values;
  d.groups = groups;
  return d;
}

// Random grouped data: x1 ~ N(0,1), x2 = 1 + 2 x1 + u_j + noise, x3 noise.
inline GroupedDataset chain_data(std::size_t per_group, int groups, std::uint64_t seed, double effect = 1.0) {
  Rng rng(seed);
  const auto n = static_cast<Eigen::Index>(per_group) * groups;
  Eigen::MatrixXd v(n, 3);
  std::vector<int> g;
  std::vector<double> u(static_cast<std::size_t>(groups));
  for (auto& x : u) x = effect * standard_normal(rng);
  for (Eigen::Index r = 0; r < n; ++r) {
    const int j = static_cast<int>(r % groups);
    g.push_back(j);
    v(r, 0) = standard_normal(rng);
    v(r, 1) = 1.0 + 2.0 * v(r, 0) + u[static_cast<std::size_t>(j)] + 0.5 * standard_normal(rng);
    v(r, 2) = standard_normal(rng);
  }
  return make_dataset(v, g, groups);
}

}  // namespace mebn::testing

namespace mebn::testing {

// Model with per-group linear Gaussians given as (intercept, coefficients,
// variance) for every (node, group); parents from `dag` (variables only).
inline BnModel hand_model(const Dag& x_dag, const std::vector<std::vector<LinearGaussian>>& params,
                          const Eigen::VectorXd& prior, Strategy s = Strategy::CGBN) {
  BnModel m;
  m.strategy = s;
  m.variables = x_dag.nodes();
  m.group_prior = prior;
  for (Eigen::Index j = 0; j < prior.size(); ++j) m.group_labels.push_back("g" + std::to_string(j + 1));
  m.dag = canonical_dag(m.variables, m.group_node, s);
  for (auto a : x_dag.arcs()) m.dag.set_arc(a.from, a.to, true);
  for (std::size_t i = 0; i < m.size(); ++i) {
    LocalDistribution l;
    l.parents = x_dag.parents(i);
    if (s == Strategy::GBN) l.params = PooledLocal{params[i].front()};
    else l.params = PerGroupLocal{params[i], false};
    m.locals.push_back(std::move(l));
  }
  return m;
}

// Random CGBN over `n` nodes in index order with arc probability 0.5.
inline BnModel random_model(std::size_t n, std::size_t groups, Rng& rng, Strategy s = Strategy::CGBN) {
  Dag g(names(n));
  for (std::size_t u = 0; u < n; ++u)
    for (std::size_t v = u + 1; v < n; ++v)
      if (uniform01(rng) < 0.5) g.set_arc(u, v, true);
  std::vector<std::vector<LinearGaussian>> params(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<Eigen::Index>(g.parents(i).size());
    for (std::size_t j = 0; j < (s == Strategy::GBN ? 1 : groups); ++j) {
      LinearGaussian lg;
      lg.intercept = standard_normal(rng);
      lg.coefficients = Eigen::VectorXd(k);
      for (Eigen::Index c = 0; c < k; ++c) lg.coefficients(c) = 0.8 * standard_normal(rng);
      lg.variance = 0.3 + uniform01(rng);
      params[i].push_back(lg);
    }
  }
  Eigen::VectorXd prior(static_cast<Eigen::Index>(groups));
  for (Eigen::Index j = 0; j < prior.size(); ++j) prior(j) = 0.5 + uniform01(rng);
  prior /= prior.sum();
  return hand_model(g, params, prior, s);
}

// Joint of a linear SEM x = c + B x + e by matrix inversion.
inline std::pair<Eigen::VectorXd, Eigen::MatrixXd> sem_joint(const BnModel& m, std::size_t j) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd c(n);
  Eigen::MatrixXd D = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& l = m.locals[static_cast<std::size_t>(i)];
    const auto lg = l.for_group(j);
    c(i) = lg.intercept;
    D(i, i) = lg.variance;
    for (std::size_t k = 0; k < l.parents.size(); ++k)
      B(i, static_cast<Eigen::Index>(l.parents[k])) = lg.coefficients(static_cast<Eigen::Index>(k));
  }
  const Eigen::MatrixXd A = (Eigen::MatrixXd::Identity(n, n) - B).inverse();
  return {A * c, A * D * A.transpose()};
}

}  // namespace mebn::testing
