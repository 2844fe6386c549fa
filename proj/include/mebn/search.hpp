#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "mebn/graph.hpp"
#include "mebn/model.hpp"
#include "mebn/random.hpp"
#include "mebn/score.hpp"

namespace mebn {

struct SearchConfig {
  int max_iterations = 100000;
  int restarts = 0;
  int perturbation = 0;  // random moves per restart, 0 selects the variable count
  int max_parents = 0;   // 0 means unbounded
  std::uint64_t seed = 0;
  FitOptions fit;
};

struct SearchResult {
  Dag dag;
  double score = -std::numeric_limits<double>::infinity();
  std::vector<double> trace;  // starting score, then the score after each improvement
  int iterations = 0;
};

struct ScoredMove {
  Move move;
  double delta = 0.0;
};

// F -> X_i required and X_i -> F forbidden for CGBN/LME; nothing for GBN.
inline ArcConstraints strategy_constraints(const Dag& dag, Strategy s) {
  ArcConstraints c;
  if (s == Strategy::GBN || !dag.group_index()) return c;
  const auto f = *dag.group_index();
  for (std::size_t i = 0; i < dag.size(); ++i) {
    if (i == f) continue;
    c.required.insert({f, i});
    c.forbidden.insert({i, f});
  }
  return c;
}

namespace detail {

inline std::vector<std::size_t> with(std::vector<std::size_t> p, std::size_t x) {
  p.push_back(x);
  std::sort(p.begin(), p.end());
  return p;
}

inline std::vector<std::size_t> without(std::vector<std::size_t> p, std::size_t x) {
  std::erase(p, x);
  return p;
}

// Smaller key wins among equal deltas: add < delete < reverse, then arc by name.
inline bool tie_before(const Dag& dag, const Move& a, const Move& b) {
  if (a.type != b.type) return a.type < b.type;
  if (dag.name(a.arc.from) != dag.name(b.arc.from)) return dag.name(a.arc.from) < dag.name(b.arc.from);
  return dag.name(a.arc.to) < dag.name(b.arc.to);
}

}  // namespace detail

// Every legal add/delete/reverse move on arcs among the variables, with its
// BIC delta computed by rescoring only the nodes whose parents change.
inline std::vector<ScoredMove> score_moves(const GroupedDataset& data, const Dag& dag, Strategy s,
                                           ScoreCache& cache, const SearchConfig& config = {}) {
  const auto constraints = strategy_constraints(dag, s);
  const std::size_t nvars = data.width();
  const auto rows = data.rows();
  // LME needs more observations than fixed effects.
  auto feasible = [&](std::size_t k) {
    if (config.max_parents > 0 && k > static_cast<std::size_t>(config.max_parents)) return false;
    return s != Strategy::LME || k + 1 < rows;
  };
  auto node_score = [&](std::size_t v, const std::vector<std::size_t>& p) {
    return cache.get(data, v, p, s, config.fit).total;
  };
  std::vector<std::vector<std::size_t>> parents(nvars);
  for (std::size_t v = 0; v < nvars; ++v) parents[v] = dag.continuous_parents(v);

  std::vector<ScoredMove> out;
  for (std::size_t u = 0; u < nvars; ++u)
    for (std::size_t v = 0; v < nvars; ++v) {
      if (u == v) continue;
      std::vector<Move> cands;
      if (dag.has_arc(u, v)) {
        cands.push_back({MoveType::Delete, {u, v}});
        cands.push_back({MoveType::Reverse, {u, v}});
      } else if (!dag.has_arc(v, u)) {
        cands.push_back({MoveType::Add, {u, v}});
      }
      for (const auto& m : cands) {
        if (std::holds_alternative<Rejection>(apply_move(dag, m, constraints))) continue;
        double delta = 0.0;
        switch (m.type) {
          case MoveType::Add:
            if (!feasible(parents[v].size() + 1)) continue;
            delta = node_score(v, detail::with(parents[v], u)) - node_score(v, parents[v]);
            break;
          case MoveType::Delete:
            delta = node_score(v, detail::without(parents[v], u)) - node_score(v, parents[v]);
            break;
          case MoveType::Reverse:
            if (!feasible(parents[u].size() + 1)) continue;
            delta = node_score(v, detail::without(parents[v], u)) - node_score(v, parents[v]) +
                    node_score(u, detail::with(parents[u], v)) - node_score(u, parents[u]);
            break;
        }
        out.push_back({m, delta});
      }
    }
  return out;
}

namespace detail {

inline void climb(const GroupedDataset& data, Strategy s, const SearchConfig& config, ScoreCache& cache,
                  SearchResult& state) {
  const auto constraints = strategy_constraints(state.dag, s);
  for (; state.iterations < config.max_iterations; ++state.iterations) {
    std::optional<ScoredMove> best;
    for (const auto& sm : score_moves(data, state.dag, s, cache, config)) {
      if (!(sm.delta > 1e-9)) continue;
      if (!best || sm.delta > best->delta || (sm.delta == best->delta && tie_before(state.dag, sm.move, best->move)))
        best = sm;
    }
    if (!best) break;
    state.dag = std::get<Dag>(apply_move(state.dag, best->move, constraints));
    state.score = bic_total(data, state.dag, s, &cache, config.fit);
    state.trace.push_back(state.score);
  }
}

}  // namespace detail

// Greedy hill climbing from the constrained empty graph: the group node is
// a fixed parent of every variable for CGBN/LME and absent for GBN.
inline SearchResult hill_climb(const GroupedDataset& data, Strategy s, const SearchConfig& config = {},
                               ScoreCache* shared_cache = nullptr) {
  data.validate();
  if (s != Strategy::GBN && data.group_count() < 2)
    throw DataError("hill_climb: strategies with a group node need at least two groups");
  if (config.max_iterations < 1) throw ConfigError("hill_climb: max_iterations must be >= 1");
  ScoreCache local_cache;
  ScoreCache& cache = shared_cache ? *shared_cache : local_cache;

  SearchResult best;
  best.dag = canonical_dag(data.columns, data.group_column, s);
  best.score = bic_total(data, best.dag, s, &cache, config.fit);
  best.trace.push_back(best.score);
  detail::climb(data, s, config, cache, best);

  Rng rng(config.seed);
  const auto constraints = strategy_constraints(best.dag, s);
  const int kicks = config.perturbation > 0 ? config.perturbation : static_cast<int>(data.width());
  for (int r = 0; r < config.restarts; ++r) {
    SearchResult trial;
    trial.dag = best.dag;
    for (int k = 0; k < kicks; ++k) {
      auto moves = score_moves(data, trial.dag, s, cache, config);
      if (moves.empty()) break;
      const auto pick = std::uniform_int_distribution<std::size_t>(0, moves.size() - 1)(rng);
      trial.dag = std::get<Dag>(apply_move(trial.dag, moves[pick].move, constraints));
    }
    trial.score = bic_total(data, trial.dag, s, &cache, config.fit);
    trial.trace.push_back(trial.score);
    detail::climb(data, s, config, cache, trial);
    if (trial.score > best.score + 1e-9) {
      best.dag = trial.dag;
      best.score = trial.score;
      best.trace.push_back(trial.score);
      best.iterations += trial.iterations;
    }
  }
  return best;
}

}  // namespace mebn
