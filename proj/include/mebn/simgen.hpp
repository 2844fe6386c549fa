#pragma once

// Ground-truth networks and data sets for the pooling simulation study.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "mebn/dataset.hpp"
#include "mebn/errors.hpp"
#include "mebn/graph.hpp"
#include "mebn/model.hpp"
#include "mebn/random.hpp"

namespace mebn {

enum class Scenario { Balanced, Unbalanced, Homogeneous };

inline const char* to_string(Scenario s) {
  switch (s) {
    case Scenario::Balanced: return "balanced";
    case Scenario::Unbalanced: return "unbalanced";
    case Scenario::Homogeneous: return "homogeneous";
  }
  return "?";
}

inline Scenario parse_scenario(const std::string& s) {
  if (s == "balanced") return Scenario::Balanced;
  if (s == "unbalanced") return Scenario::Unbalanced;
  if (s == "homogeneous") return Scenario::Homogeneous;
  throw ConfigError("unknown scenario '" + s + "' (expected balanced, unbalanced or homogeneous)");
}

// Generating network: a CGBN model with a uniform group prior in which every
// variable has the group node as a parent.
struct TrueBn {
  BnModel model;
};

// Zero-padded so that lexicographic order equals numeric order.
inline std::vector<std::string> variable_names(std::size_t n, const std::string& prefix = "X") {
  const auto width = std::to_string(n).size();
  std::vector<std::string> out;
  for (std::size_t i = 1; i <= n; ++i) {
    auto s = std::to_string(i);
    out.push_back(prefix + std::string(width - s.size(), '0') + s);
  }
  return out;
}

inline std::vector<std::string> group_label_names(std::size_t groups) {
  return variable_names(groups, "g");
}

inline bool weakly_connected(const Dag& dag) {
  const auto n = dag.size();
  if (n == 0) return true;
  std::vector<char> seen(n, 0);
  std::vector<std::size_t> stack{0};
  seen[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    auto u = stack.back();
    stack.pop_back();
    for (std::size_t v = 0; v < n; ++v)
      if (!seen[v] && dag.adjacent(u, v)) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
  }
  return count == n;
}

inline double arc_probability(std::size_t n, double avg_parents) { return avg_parents * 2.0 / static_cast<double>(n); }

// One unconditioned draw: every pair of nodes gets an arc with probability
// p, oriented from the earlier to the later node of a random permutation.
inline Dag random_dag_draw(std::size_t n, double p, Rng& rng) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  Dag g(variable_names(n));
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (uniform01(rng) < p) g.set_arc(perm[a], perm[b], true);
  return g;
}

// Random DAG over X only whose skeleton is weakly connected (rejection).
inline Dag random_connected_dag(std::size_t n, double avg_parents, std::uint64_t seed, int max_attempts = 10000) {
  if (n < 2) throw ConfigError("random_connected_dag: need at least 2 nodes");
  const double p = arc_probability(n, avg_parents);
  if (!(p > 0.0) || p > 1.0)
    throw ConfigError("random_connected_dag: arc probability " + std::to_string(p) + " outside (0, 1] for N=" +
                      std::to_string(n) + ", avg_parents=" + std::to_string(avg_parents));
  Rng rng(seed);
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    Dag g = random_dag_draw(n, p, rng);
    if (weakly_connected(g)) return g;
  }
  throw NumericError("random_connected_dag: no connected DAG after " + std::to_string(max_attempts) +
                     " attempts (N=" + std::to_string(n) + ", avg_parents=" + std::to_string(avg_parents) + ")");
}

constexpr double kExplainedVariance = 0.85;

// Residual variance that makes the parents explain 85% of the variance.
inline double residual_variance_for(double predicted_variance) {
  return predicted_variance * (1.0 - kExplainedVariance) / kExplainedVariance;
}

// Per-group coefficients beta_ij ~ N(2 + b_ij, s2_ij I), b_ij ~ N(0, I),
// s2_ij ~ chi2(1); residual variances from the 85% rule using the exact
// within-group covariance of the parents.
inline TrueBn sample_true_bn(const Dag& x_dag, std::size_t groups, std::uint64_t seed,
                             const std::string& group_node = "F") {
  if (groups < 1) throw ConfigError("sample_true_bn: need at least one group");
  if (x_dag.group_index()) throw std::invalid_argument("sample_true_bn: expects a DAG over the variables only");
  Rng rng(seed);
  TrueBn bn;
  auto& m = bn.model;
  m.strategy = Strategy::CGBN;
  m.variables = x_dag.nodes();
  m.group_node = group_node;
  m.group_labels = group_label_names(groups);
  m.group_prior = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(groups), 1.0 / static_cast<double>(groups));
  m.dag = canonical_dag(m.variables, group_node, Strategy::CGBN);
  for (auto a : x_dag.arcs()) m.dag.set_arc(a.from, a.to, true);

  const auto n = static_cast<Eigen::Index>(m.size());
  m.locals.resize(m.size());
  std::vector<Eigen::MatrixXd> cov(groups, Eigen::MatrixXd::Zero(n, n));
  std::vector<std::size_t> done;
  for (auto i : topological_order(x_dag)) {
    auto& local = m.locals[i];
    local.parents = x_dag.parents(i);
    const auto k = static_cast<Eigen::Index>(local.parents.size());
    PerGroupLocal pg;
    for (std::size_t j = 0; j < groups; ++j) {
      const double z = standard_normal(rng);
      const double spread = z * z;
      Eigen::VectorXd beta(k + 1);
      for (Eigen::Index c = 0; c <= k; ++c) {
        const double b = standard_normal(rng);
        beta(c) = 2.0 + b + std::sqrt(spread) * standard_normal(rng);
      }
      LinearGaussian lg{beta(0), beta.tail(k), 1.0};
      auto& S = cov[j];
      const auto ii = static_cast<Eigen::Index>(i);
      double predicted = 0.0;
      for (Eigen::Index a = 0; a < k; ++a)
        for (Eigen::Index b = 0; b < k; ++b)
          predicted += lg.coefficients(a) * lg.coefficients(b) *
                       S(static_cast<Eigen::Index>(local.parents[static_cast<std::size_t>(a)]),
                         static_cast<Eigen::Index>(local.parents[static_cast<std::size_t>(b)]));
      if (k > 0) lg.variance = std::max(residual_variance_for(predicted), 1e-12);
      for (auto mm : done) {
        double c = 0.0;
        for (Eigen::Index a = 0; a < k; ++a)
          c += lg.coefficients(a) * S(static_cast<Eigen::Index>(local.parents[static_cast<std::size_t>(a)]),
                                      static_cast<Eigen::Index>(mm));
        S(ii, static_cast<Eigen::Index>(mm)) = S(static_cast<Eigen::Index>(mm), ii) = c;
      }
      S(ii, ii) = predicted + lg.variance;
      pg.groups.push_back(std::move(lg));
    }
    local.params = std::move(pg);
    done.push_back(i);
  }
  return bn;
}

// Per-group sample sizes. Unbalanced: two groups get round(0.3 n) each, the
// rest is split evenly by largest remainder with ties to the lower index.
inline std::vector<std::size_t> group_sizes(Scenario scenario, std::size_t groups, std::size_t n_j) {
  if (groups < 1) throw ConfigError("group_sizes: need at least one group");
  if (scenario != Scenario::Unbalanced) return std::vector<std::size_t>(groups, n_j);
  if (groups != 5 && groups != 10 && groups != 20)
    throw ConfigError("unbalanced scenario requires |F| in {5, 10, 20}, got " + std::to_string(groups));
  const std::size_t n = groups * n_j;
  const auto big = static_cast<std::size_t>(std::llround(0.3 * static_cast<double>(n)));
  const std::size_t rest = n - 2 * big;
  const std::size_t others = groups - 2;
  std::vector<std::size_t> out{big, big};
  for (std::size_t j = 0; j < others; ++j) out.push_back(rest / others + (j < rest % others ? 1 : 0));
  return out;
}

// All groups take the parameters of the first group.
inline TrueBn make_homogeneous(TrueBn bn) {
  for (auto& local : bn.model.locals) {
    auto& pg = std::get<PerGroupLocal>(local.params);
    for (auto& g : pg.groups) g = pg.groups.front();
  }
  return bn;
}

// Ancestral sampling of sizes[j] rows per group, then a seeded shuffle.
inline GroupedDataset generate_dataset(const TrueBn& bn, const std::vector<std::size_t>& sizes, std::uint64_t seed) {
  const auto& m = bn.model;
  if (sizes.size() != m.groups()) throw std::invalid_argument("generate_dataset: one size per group required");
  Rng rng(seed);
  const auto order = m.variable_order();
  const std::size_t total = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::pair<int, Eigen::VectorXd>> rows;
  rows.reserve(total);
  for (std::size_t j = 0; j < sizes.size(); ++j)
    for (std::size_t r = 0; r < sizes[j]; ++r) rows.emplace_back(static_cast<int>(j), sample_row(m, order, j, rng));
  std::shuffle(rows.begin(), rows.end(), rng);

  GroupedDataset out;
  out.columns = m.variables;
  out.group_column = m.group_node;
  out.group_labels = m.group_labels;
  out.values.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(m.size()));
  for (std::size_t r = 0; r < total; ++r) {
    out.groups.push_back(rows[r].first);
    out.values.row(static_cast<Eigen::Index>(r)) = rows[r].second.transpose();
  }
  return out;
}

}  // namespace mebn
