#pragma once

// Experiment grid: generate ground truth and data, learn with every pooling
// strategy, evaluate against the truth.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "mebn/errors.hpp"
#include "mebn/infer.hpp"
#include "mebn/io.hpp"
#include "mebn/metrics.hpp"
#include "mebn/model.hpp"
#include "mebn/random.hpp"
#include "mebn/search.hpp"
#include "mebn/simgen.hpp"

namespace mebn {

inline constexpr const char* kVersion = "1.0.0";

struct ExperimentConfig {
  std::vector<int> nodes{10};
  std::vector<double> avg_parents{1.0};
  std::vector<int> groups{5};
  std::vector<int> n_j{10};
  std::vector<Scenario> scenarios{Scenario::Balanced};
  std::vector<Strategy> strategies{Strategy::GBN, Strategy::CGBN, Strategy::LME};
  int replicates = 1;
  std::uint64_t seed = 1;
  std::size_t eval_rows = 1000;
  std::size_t kl_mc_samples = 2000;
  Engine engine = Engine::Exact;
  std::size_t lw_samples = 10000;
  int max_parents = 0;
};

struct Cell {
  int nodes = 10;
  double avg_parents = 1.0;
  int groups = 5;
  int n_j = 10;
  Scenario scenario = Scenario::Balanced;

  std::string id() const {
    std::ostringstream s;
    s << "N" << nodes << "_a" << format_double(avg_parents) << "_F" << groups << "_nj" << n_j << "_"
      << to_string(scenario);
    return s.str();
  }
};

namespace detail {

template <class T>
std::vector<T> scalar_or_list(const Json& v, const char* key, std::vector<std::string>& errors) {
  std::vector<T> out;
  try {
    if (v.is_array())
      for (const auto& e : v) out.push_back(e.get<T>());
    else
      out.push_back(v.get<T>());
  } catch (const Json::exception&) {
    errors.push_back(std::string("'") + key + "': expected a number or a list of numbers");
  }
  if (out.empty() && v.is_array()) errors.push_back(std::string("'") + key + "': empty list");
  return out;
}

}  // namespace detail

// Parses a JSON experiment configuration. Unknown keys and every invalid
// field are reported together in one ConfigError.
inline ExperimentConfig parse_experiment_config(const Json& j) {
  static const std::set<std::string> known{"N", "avg_parents", "F", "n_j", "scenario", "strategies",
                                           "replicates", "seed", "eval_rows", "kl_mc_samples", "engine",
                                           "lw_samples", "max_parents"};
  std::vector<std::string> errors;
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!known.contains(k)) errors.push_back("unknown key '" + k + "'");

  ExperimentConfig c;
  if (j.contains("N")) c.nodes = detail::scalar_or_list<int>(j["N"], "N", errors);
  if (j.contains("avg_parents")) c.avg_parents = detail::scalar_or_list<double>(j["avg_parents"], "avg_parents", errors);
  if (j.contains("F")) c.groups = detail::scalar_or_list<int>(j["F"], "F", errors);
  if (j.contains("n_j")) c.n_j = detail::scalar_or_list<int>(j["n_j"], "n_j", errors);
  if (j.contains("scenario")) {
    c.scenarios.clear();
    const auto& v = j["scenario"];
    std::vector<Json> items = v.is_array() ? std::vector<Json>(v.begin(), v.end()) : std::vector<Json>{v};
    for (const auto& s : items) {
      try {
        c.scenarios.push_back(parse_scenario(s.get<std::string>()));
      } catch (const std::exception& e) {
        errors.push_back(std::string("'scenario': ") + e.what());
      }
    }
  }
  if (j.contains("strategies")) {
    c.strategies.clear();
    try {
      for (const auto& s : j["strategies"]) c.strategies.push_back(parse_strategy(s.get<std::string>()));
    } catch (const std::exception& e) {
      errors.push_back(std::string("'strategies': ") + e.what());
    }
  }
  auto integer = [&](const char* key, auto& field, long long lo) {
    if (!j.contains(key)) return;
    try {
      auto v = j[key].get<long long>();
      if (v < lo) errors.push_back(std::string("'") + key + "' must be >= " + std::to_string(lo));
      field = static_cast<std::remove_reference_t<decltype(field)>>(v);
    } catch (const Json::exception&) {
      errors.push_back(std::string("'") + key + "': expected an integer");
    }
  };
  integer("replicates", c.replicates, 1);
  integer("eval_rows", c.eval_rows, 1);
  integer("kl_mc_samples", c.kl_mc_samples, 1);
  integer("lw_samples", c.lw_samples, 1);
  integer("max_parents", c.max_parents, 0);
  if (j.contains("seed")) {
    try {
      c.seed = j["seed"].get<std::uint64_t>();
    } catch (const Json::exception&) {
      errors.push_back("'seed': expected a non-negative integer");
    }
  }
  if (j.contains("engine")) {
    auto e = j["engine"].is_string() ? j["engine"].get<std::string>() : std::string();
    if (e == "exact") c.engine = Engine::Exact;
    else if (e == "lw") c.engine = Engine::LikelihoodWeighting;
    else errors.push_back("'engine' must be \"exact\" or \"lw\"");
  }

  for (int n : c.nodes)
    if (n < 2) errors.push_back("'N' values must be >= 2");
  for (int g : c.groups)
    if (g < 2) errors.push_back("'F' values must be >= 2");
  for (int n : c.n_j)
    if (n < 1) errors.push_back("'n_j' values must be >= 1");
  for (double a : c.avg_parents)
    for (int n : c.nodes) {
      const double p = arc_probability(static_cast<std::size_t>(std::max(n, 1)), a);
      if (!(p > 0.0) || p > 1.0)
        errors.push_back("avg_parents=" + format_double(a) + " with N=" + std::to_string(n) +
                         " gives arc probability " + format_double(p) + " outside (0, 1]");
    }
  for (auto s : c.scenarios)
    if (s == Scenario::Unbalanced)
      for (int g : c.groups)
        if (g != 5 && g != 10 && g != 20)
          errors.push_back("scenario 'unbalanced' requires F in {5, 10, 20}, got F=" + std::to_string(g));
  if (c.strategies.empty()) errors.push_back("'strategies' must not be empty");

  if (!errors.empty()) {
    std::string msg = "invalid configuration:";
    for (const auto& e : errors) msg += "\n  - " + e;
    throw ConfigError(msg);
  }
  return c;
}

inline ExperimentConfig read_experiment_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open configuration file '" + path + "'");
  Json j;
  try {
    in >> j;
  } catch (const Json::exception& e) {
    throw ConfigError("'" + path + "': " + e.what());
  }
  return parse_experiment_config(j);
}

inline std::vector<Cell> grid_cells(const ExperimentConfig& c) {
  std::vector<Cell> out;
  for (int n : c.nodes)
    for (double a : c.avg_parents)
      for (int g : c.groups)
        for (int nj : c.n_j)
          for (auto s : c.scenarios) out.push_back({n, a, g, nj, s});
  return out;
}

// Seeds for one (cell, replicate). The generating network depends only on
// (N, avg_parents, F, replicate), so balanced, unbalanced and homogeneous
// cells share their ground truth.
struct ReplicateSeeds {
  std::uint64_t dag, bn, data, eval, kl, lw;
};

inline ReplicateSeeds replicate_seeds(std::uint64_t master, const Cell& cell, int replicate) {
  const auto truth_key = derive_seed(master, {static_cast<std::uint64_t>(cell.nodes),
                                              static_cast<std::uint64_t>(std::llround(cell.avg_parents * 1000)),
                                              static_cast<std::uint64_t>(cell.groups),
                                              static_cast<std::uint64_t>(replicate)});
  const auto data_key = derive_seed(truth_key, {static_cast<std::uint64_t>(cell.n_j),
                                                static_cast<std::uint64_t>(cell.scenario)});
  return {derive_seed(truth_key, {0}), derive_seed(truth_key, {1}), derive_seed(data_key, {2}),
          derive_seed(truth_key, {3}), derive_seed(data_key, {4}),  derive_seed(data_key, {5})};
}

struct GeneratedReplicate {
  TrueBn truth;
  std::vector<std::size_t> sizes;
  GroupedDataset data;
  GroupedDataset eval;
};

inline GeneratedReplicate generate_replicate(const ExperimentConfig& config, const Cell& cell, int replicate) {
  const auto seeds = replicate_seeds(config.seed, cell, replicate);
  GeneratedReplicate out;
  auto dag = random_connected_dag(static_cast<std::size_t>(cell.nodes), cell.avg_parents, seeds.dag);
  out.truth = sample_true_bn(dag, static_cast<std::size_t>(cell.groups), seeds.bn);
  if (cell.scenario == Scenario::Homogeneous) out.truth = make_homogeneous(std::move(out.truth));
  out.sizes = group_sizes(cell.scenario, static_cast<std::size_t>(cell.groups), static_cast<std::size_t>(cell.n_j));
  out.data = generate_dataset(out.truth, out.sizes, seeds.data);
  out.eval = sample_model(out.truth.model, config.eval_rows, seeds.eval);
  return out;
}

struct MetricRow {
  int shd = 0;
  int shd_xonly = 0;  // SHD over the variables only (group node dropped)
  double kl_joint = 0.0;
  double kl_mc_xonly = 0.0;
  double kl_mc_xonly_se = 0.0;
  double rmad_known_f = 0.0;
  double rmad_unknown_f = 0.0;
  double f1 = 0.0;
  double n_over_p = 0.0;
};

struct EvaluateOptions {
  std::size_t kl_mc_samples = 2000;
  std::uint64_t kl_seed = 0;
  PredictOptions predict;
};

inline MetricRow evaluate(const BnModel& truth, const BnModel& learned, const GroupedDataset& eval,
                          const std::vector<std::size_t>& training_sizes, const EvaluateOptions& options = {}) {
  MetricRow row;
  const auto truth_dag = truth.dag;
  const auto learned_dag = with_group_node(learned.dag, truth.group_node);
  row.shd = shd(truth_dag, learned_dag);
  row.shd_xonly = shd(without_group_node(truth_dag), without_group_node(learned.dag));
  row.kl_joint = model_kl(truth, learned);
  const auto mc = mc_kl_x_marginal(truth, learned, options.kl_mc_samples, options.kl_seed);
  row.kl_mc_xonly = mc.value;
  row.kl_mc_xonly_se = mc.std_error;

  Eigen::MatrixXd observed(static_cast<Eigen::Index>(eval.rows()), static_cast<Eigen::Index>(learned.size()));
  for (std::size_t i = 0; i < learned.size(); ++i)
    observed.col(static_cast<Eigen::Index>(i)) = eval.values.col(static_cast<Eigen::Index>(eval.column_index(learned.variables[i])));
  row.rmad_known_f = rmad(observed, predict_all(learned, eval, true, options.predict)).value;
  row.rmad_unknown_f = rmad(observed, predict_all(learned, eval, false, options.predict)).value;

  const auto predicted = classify_all(learned, eval);
  std::vector<std::size_t> t, p;
  for (std::size_t r = 0; r < eval.rows(); ++r) {
    t.push_back(static_cast<std::size_t>(truth.group_index(eval.group_labels[static_cast<std::size_t>(eval.groups[r])])));
    p.push_back(static_cast<std::size_t>(truth.group_index(learned.group_labels[predicted[r]])));
  }
  row.f1 = macro_f1(t, p, truth.groups());
  row.n_over_p = samples_per_parameter(training_sizes, truth);
  return row;
}

struct LearnResult {
  BnModel model;
  double score = 0.0;
};

inline LearnResult learn(const GroupedDataset& data, Strategy s, const SearchConfig& search = {}) {
  auto result = hill_climb(data, s, search);
  LearnResult out{fit_parameters(result.dag, data, s, search.fit), result.score};
  return out;
}

// ---------------------------------------------------------------------------
// Results CSV

struct ResultRow {
  Cell cell;
  int replicate = 0;
  Strategy strategy = Strategy::GBN;
  std::optional<MetricRow> metrics;
  double runtime_ms = 0.0;
  std::string error;
};

inline const char* kResultsHeader =
    "N,avg_parents,F,n_j,scenario,replicate,strategy,shd,kl_joint,kl_mc_xonly,rmad_known_f,rmad_unknown_f,f1,"
    "n_over_p,runtime_ms,error";

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

inline std::string format_result_row(const ResultRow& r) {
  std::ostringstream s;
  s << r.cell.nodes << ',' << format_double(r.cell.avg_parents) << ',' << r.cell.groups << ',' << r.cell.n_j << ','
    << to_string(r.cell.scenario) << ',' << r.replicate << ',' << to_string(r.strategy) << ',';
  if (r.metrics) {
    const auto& m = *r.metrics;
    s << m.shd << ',' << format_double(m.kl_joint) << ',' << format_double(m.kl_mc_xonly) << ','
      << format_double(m.rmad_known_f) << ',' << format_double(m.rmad_unknown_f) << ',' << format_double(m.f1) << ','
      << format_double(m.n_over_p) << ',';
  } else {
    s << ",,,,,,,";
  }
  s << format_double(r.runtime_ms) << ',' << csv_escape(r.error);
  return s.str();
}

struct RunOptions {
  int jobs = 1;
  bool record_timing = false;  // wall-clock times make the CSV non-reproducible
  std::function<void(const ResultRow&)> on_row;  // progress callback, called under a lock
};

// Runs one (cell, replicate): one row per configured strategy. Failures are
// recorded in the row's error column.
inline std::vector<ResultRow> run_replicate(const ExperimentConfig& config, const Cell& cell, int replicate,
                                            bool record_timing) {
  std::vector<ResultRow> rows;
  std::optional<GeneratedReplicate> gen;
  std::string gen_error;
  try {
    gen = generate_replicate(config, cell, replicate);
  } catch (const std::exception& e) {
    gen_error = std::string("generate: ") + e.what();
  }
  const auto seeds = replicate_seeds(config.seed, cell, replicate);
  for (auto s : config.strategies) {
    ResultRow row{cell, replicate, s, std::nullopt, 0.0, gen_error};
    if (gen) {
      try {
        SearchConfig sc;
        sc.max_parents = config.max_parents;
        const auto t0 = std::chrono::steady_clock::now();
        auto learned = learn(gen->data, s, sc);
        const auto t1 = std::chrono::steady_clock::now();
        if (record_timing) row.runtime_ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        EvaluateOptions eo;
        eo.kl_mc_samples = config.kl_mc_samples;
        eo.kl_seed = seeds.kl;
        eo.predict.engine = config.engine;
        eo.predict.lw_samples = config.lw_samples;
        eo.predict.seed = seeds.lw;
        row.metrics = evaluate(gen->truth.model, learned.model, gen->eval, gen->sizes, eo);
      } catch (const std::exception& e) {
        row.error = e.what();
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

// Runs the whole grid on up to `jobs` threads. Rows come back sorted by
// (cell, replicate, strategy) regardless of scheduling.
inline std::vector<ResultRow> run_experiment(const ExperimentConfig& config, const RunOptions& options = {}) {
  const auto cells = grid_cells(config);
  struct Task {
    std::size_t cell;
    int replicate;
  };
  std::vector<Task> tasks;
  for (std::size_t c = 0; c < cells.size(); ++c)
    for (int r = 0; r < config.replicates; ++r) tasks.push_back({c, r});
  std::vector<std::vector<ResultRow>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::mutex out_mutex;
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++) {
      results[t] = run_replicate(config, cells[tasks[t].cell], tasks[t].replicate, options.record_timing);
      if (options.on_row) {
        std::lock_guard lock(out_mutex);
        for (const auto& row : results[t]) options.on_row(row);
      }
    }
  };
  const int jobs = std::max(1, options.jobs);
  std::vector<std::thread> pool;
  for (int k = 1; k < jobs; ++k) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  std::vector<ResultRow> rows;
  for (auto& r : results)
    for (auto& row : r) rows.push_back(std::move(row));
  return rows;
}

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) out << format_result_row(r) << '\n';
}

}  // namespace mebn
