#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <string>
#include <tuple>
#include <vector>

#include "mebn/dataset.hpp"
#include "mebn/model.hpp"

namespace mebn {

// BIC contribution of one node: loglik - (log n / 2) * |params|.
struct NodeScore {
  std::size_t node = 0;
  std::vector<std::size_t> parents;
  double loglik = 0.0;
  double penalty = 0.0;
  double total = 0.0;
};

inline NodeScore bic_node(const GroupedDataset& data, std::size_t node, std::vector<std::size_t> parents,
                          Strategy s, const FitOptions& options = {}) {
  std::sort(parents.begin(), parents.end());
  NodeScore out;
  out.node = node;
  out.parents = parents;
  try {
    out.loglik = fit_local(data, node, parents, s, options).loglik;
  } catch (const std::exception& e) {
    std::string ctx = "node '" + data.columns.at(node) + "' with parents {";
    for (std::size_t k = 0; k < parents.size(); ++k) ctx += (k ? "," : "") + data.columns.at(parents[k]);
    throw NumericError(ctx + "}: " + e.what());
  }
  const int k = static_cast<int>(parents.size());
  const int groups = std::max<int>(1, static_cast<int>(data.group_count()));
  out.penalty = 0.5 * std::log(static_cast<double>(data.rows())) * nparams(s, k, groups);
  out.total = out.loglik - out.penalty;
  return out;
}

// Memoizes node scores by (node, sorted parent set, strategy). One cache
// must only ever see one data set. Reads are concurrent; a miss computes
// outside the lock, so racing writers store identical values.
class ScoreCache {
 public:
  NodeScore get(const GroupedDataset& data, std::size_t node, std::vector<std::size_t> parents, Strategy s,
                const FitOptions& options = {}) {
    std::sort(parents.begin(), parents.end());
    Key key{node, parents, s};
    {
      std::shared_lock lock(mutex_);
      if (auto it = map_.find(key); it != map_.end()) {
        ++hits_;
        return it->second;
      }
    }
    NodeScore score = bic_node(data, node, parents, s, options);
    std::unique_lock lock(mutex_);
    ++misses_;
    return map_.try_emplace(std::move(key), std::move(score)).first->second;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
  }
  std::size_t hits() const { return hits_; }
  std::size_t misses() const { return misses_; }

 private:
  using Key = std::tuple<std::size_t, std::vector<std::size_t>, Strategy>;
  mutable std::shared_mutex mutex_;
  std::map<Key, NodeScore> map_;
  std::atomic<std::size_t> hits_{0}, misses_{0};
};

// Sum of node scores over the continuous variables. The DAG's variables are
// matched to data columns by name; the group node (if any) is skipped and
// enters implicitly through the strategy.
inline double bic_total(const GroupedDataset& data, const Dag& dag, Strategy s, ScoreCache* cache,
                        const FitOptions& options = {}) {
  double total = 0.0;
  for (std::size_t i = 0; i < dag.size(); ++i) {
    if (dag.is_group(i)) continue;
    std::vector<std::size_t> parents;
    for (auto p : dag.continuous_parents(i)) parents.push_back(data.column_index(dag.name(p)));
    const auto node = data.column_index(dag.name(i));
    total += cache ? cache->get(data, node, parents, s, options).total : bic_node(data, node, parents, s, options).total;
  }
  return total;
}

}  // namespace mebn
