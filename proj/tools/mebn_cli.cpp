// mebn: generate simulated grouped data, learn pooled / unpooled / mixed
// effects Gaussian BNs, evaluate them and run whole experiment grids.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "mebn/mebn.hpp"

namespace fs = std::filesystem;
using namespace mebn;

namespace {

enum Exit { kOk = 0, kConfig = 1, kData = 2, kNumeric = 3 };

Engine parse_engine(const std::string& s) {
  if (s == "exact") return Engine::Exact;
  if (s == "lw") return Engine::LikelihoodWeighting;
  throw ConfigError("unknown engine '" + s + "' (expected exact or lw)");
}

std::ofstream open_out(const fs::path& p, std::ios::openmode mode = std::ios::trunc) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::out | mode);
  if (!out) throw DataError("cannot write '" + p.string() + "'");
  return out;
}

Json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const Json::exception& e) {
    throw DataError("'" + path + "': " + e.what());
  }
}

Json cell_json(const Cell& c, int replicate) {
  return {{"N", c.nodes},         {"avg_parents", c.avg_parents},        {"F", c.groups},
          {"n_j", c.n_j},         {"scenario", to_string(c.scenario)}, {"replicate", replicate}};
}

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  std::string out;
  std::string strategy = "lme";
  std::string group_col = "F";
  std::string engine = "exact";
  std::size_t lw_samples = 10000;
  int max_parents = 0;
  bool timing = false;
};

ExperimentConfig load_config(const Common& o) {
  auto c = read_experiment_config(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

int cmd_generate(const Common& o) {
  const auto config = load_config(o);
  const fs::path root(o.out);
  Json manifest = {{"version", kVersion}, {"seed", config.seed}, {"entries", Json::array()}};
  for (const auto& cell : grid_cells(config)) {
    for (int r = 0; r < config.replicates; ++r) {
      const auto gen = generate_replicate(config, cell, r);
      const auto dir = root / (cell.id() + "_r" + std::to_string(r));
      fs::create_directories(dir);
      {
        auto out = open_out(dir / "data.csv");
        write_dataset_csv(out, gen.data);
      }
      {
        auto out = open_out(dir / "eval.csv");
        write_dataset_csv(out, gen.eval);
      }
      auto truth = model_to_json(gen.truth.model);
      truth["cell"] = cell_json(cell, r);
      truth["training_group_sizes"] = gen.sizes;
      open_out(dir / "truth.json") << truth.dump(1) << '\n';
      auto entry = cell_json(cell, r);
      entry["dir"] = dir.lexically_relative(root).generic_string();
      entry["group_sizes"] = gen.sizes;
      manifest["entries"].push_back(entry);
    }
  }
  open_out(root / "manifest.json") << manifest.dump(1) << '\n';
  std::cout << "wrote " << manifest["entries"].size() << " replicate(s) to " << root.string() << '\n';
  return kOk;
}

int cmd_learn(const Common& o, const std::string& data_path) {
  const auto data = read_dataset_csv(data_path, o.group_col);
  const auto s = parse_strategy(o.strategy);
  SearchConfig sc;
  sc.max_parents = o.max_parents;
  const auto result = learn(data, s, sc);
  auto j = model_to_json(result.model, result.score);
  j["training_group_sizes"] = data.group_sizes();
  if (o.out.empty())
    std::cout << j.dump(1) << '\n';
  else
    open_out(o.out) << j.dump(1) << '\n';
  std::cerr << "strategy " << to_string(s) << ": " << result.model.dag.arc_count() << " arcs, BIC "
            << format_double(result.score) << '\n';
  return kOk;
}

int cmd_evaluate(const Common& o, const std::string& truth_path, const std::string& model_path,
                 const std::string& eval_path, std::size_t kl_samples) {
  const auto truth_json = read_json(truth_path);
  const auto model_json = read_json(model_path);
  const auto truth = model_from_json(truth_json);
  const auto learned = model_from_json(model_json);
  const auto eval = read_dataset_csv(eval_path, o.group_col);
  if (!model_json.contains("training_group_sizes"))
    throw DataError("'" + model_path + "' lacks training_group_sizes (write it with 'mebn learn')");
  const auto sizes = model_json["training_group_sizes"].get<std::vector<std::size_t>>();

  EvaluateOptions eo;
  eo.kl_mc_samples = kl_samples;
  eo.kl_seed = derive_seed(o.seed.value_or(1), {4});
  eo.predict.engine = parse_engine(o.engine);
  eo.predict.lw_samples = o.lw_samples;
  eo.predict.seed = derive_seed(o.seed.value_or(1), {5});
  const auto m = evaluate(truth, learned, eval, sizes, eo);

  ResultRow row;
  row.strategy = learned.strategy;
  row.metrics = m;
  if (truth_json.contains("cell")) {
    const auto& c = truth_json["cell"];
    row.cell = {c.at("N").get<int>(), c.at("avg_parents").get<double>(), c.at("F").get<int>(),
                c.at("n_j").get<int>(), parse_scenario(c.at("scenario").get<std::string>())};
    row.replicate = c.at("replicate").get<int>();
  } else {
    std::size_t n = 0;
    for (auto s : sizes) n += s;
    row.cell.nodes = static_cast<int>(truth.size());
    row.cell.avg_parents = static_cast<double>(without_group_node(truth.dag).arc_count()) / static_cast<double>(truth.size());
    row.cell.groups = static_cast<int>(truth.groups());
    row.cell.n_j = static_cast<int>(n / std::max<std::size_t>(1, truth.groups()));
  }

  std::cout << "shd " << m.shd << "  shd_xonly " << m.shd_xonly << "  kl_joint " << format_double(m.kl_joint)
            << "  kl_mc_xonly " << format_double(m.kl_mc_xonly) << " (se " << format_double(m.kl_mc_xonly_se)
            << ")  rmad_known_f " << format_double(m.rmad_known_f) << "  rmad_unknown_f "
            << format_double(m.rmad_unknown_f) << "  f1 " << format_double(m.f1) << "  n/p "
            << format_double(m.n_over_p) << '\n';
  if (!o.out.empty()) {
    const bool fresh = !fs::exists(o.out) || fs::file_size(o.out) == 0;
    auto out = open_out(o.out, std::ios::app);
    if (fresh) out << kResultsHeader << '\n';
    out << format_result_row(row) << '\n';
  }
  return kOk;
}

int cmd_experiment(const Common& o, bool engine_given) {
  auto config = load_config(o);
  if (engine_given) config.engine = parse_engine(o.engine);
  RunOptions ro;
  ro.jobs = o.jobs;
  ro.record_timing = o.timing;
  std::size_t done = 0;
  const std::size_t total = grid_cells(config).size() * static_cast<std::size_t>(config.replicates) *
                            config.strategies.size();
  ro.on_row = [&](const ResultRow& r) {
    ++done;
    std::cerr << '[' << done << '/' << total << "] " << r.cell.id() << " r" << r.replicate << ' '
              << to_string(r.strategy) << (r.error.empty() ? "" : " ERROR: " + r.error) << '\n';
  };
  const auto rows = run_experiment(config, ro);
  if (o.out.empty()) {
    write_results_csv(std::cout, rows);
  } else {
    auto out = open_out(o.out);
    write_results_csv(out, rows);
  }
  return kOk;
}

int cmd_predict(const Common& o, const std::string& model_path, const std::string& data_path, bool unknown_f) {
  const auto model = read_model_json(model_path);
  const auto data = read_dataset_csv(data_path, o.group_col);
  PredictOptions po;
  po.engine = parse_engine(o.engine);
  po.lw_samples = o.lw_samples;
  po.seed = o.seed.value_or(1);
  const auto pred = predict_all(model, data, !unknown_f, po);
  std::vector<std::size_t> groups;
  if (unknown_f) groups = classify_all(model, data);

  std::ofstream file;
  if (!o.out.empty()) file = open_out(o.out);
  std::ostream& out = o.out.empty() ? std::cout : file;
  for (std::size_t i = 0; i < model.size(); ++i) out << (i ? "," : "") << model.variables[i];
  out << ',' << model.group_node << '\n';
  for (Eigen::Index r = 0; r < pred.rows(); ++r) {
    for (Eigen::Index c = 0; c < pred.cols(); ++c) out << (c ? "," : "") << format_double(pred(r, c));
    const auto label = unknown_f ? model.group_labels[groups[static_cast<std::size_t>(r)]]
                                 : data.group_labels[static_cast<std::size_t>(data.groups[static_cast<std::size_t>(r)])];
    out << ',' << label << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Gaussian Bayesian networks for grouped data: complete, no and partial pooling"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);

  Common o;
  std::string data_path, truth_path, model_path, eval_path;
  std::size_t kl_samples = 2000;
  bool unknown_f = false;

  auto seed_opt = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>("--seed", [&](const std::uint64_t& v) { o.seed = v; }, "Master seed");
  };

  auto* gen = app.add_subcommand("generate", "Generate ground-truth networks and data sets for a grid");
  gen->add_option("--config", o.config, "Experiment configuration (JSON)")->required();
  gen->add_option("--out", o.out, "Output directory")->required();
  seed_opt(gen);

  auto* lrn = app.add_subcommand("learn", "Learn structure and parameters from a grouped CSV");
  lrn->add_option("data", data_path, "Training data CSV")->required();
  lrn->add_option("--strategy", o.strategy, "gbn, cgbn or lme")->check(CLI::IsMember({"gbn", "cgbn", "lme"}));
  lrn->add_option("--out", o.out, "Model JSON (stdout if omitted)");
  lrn->add_option("--group-col", o.group_col, "Name of the group column");
  lrn->add_option("--max-parents", o.max_parents, "Parent limit for continuous parents (0 = none)");

  auto* evl = app.add_subcommand("evaluate", "Compare a learned model with the generating one");
  evl->add_option("--truth", truth_path, "Generating model JSON")->required();
  evl->add_option("--model", model_path, "Learned model JSON")->required();
  evl->add_option("--eval", eval_path, "Evaluation data CSV")->required();
  evl->add_option("--out", o.out, "Results CSV to append to");
  evl->add_option("--group-col", o.group_col, "Name of the group column");
  evl->add_option("--engine", o.engine, "exact or lw")->check(CLI::IsMember({"exact", "lw"}));
  evl->add_option("--lw-samples", o.lw_samples, "Likelihood-weighting samples per query");
  evl->add_option("--kl-samples", kl_samples, "Monte-Carlo samples for the X-marginal KL");
  seed_opt(evl);

  auto* exp = app.add_subcommand("experiment", "Run the full grid: generate, learn with each strategy, evaluate");
  exp->add_option("--config", o.config, "Experiment configuration (JSON)")->required();
  exp->add_option("--out", o.out, "Results CSV (stdout if omitted)");
  exp->add_option("--jobs", o.jobs, "Concurrent replicates")->check(CLI::PositiveNumber);
  exp->add_option("--engine", o.engine, "Override the configured prediction engine")
      ->check(CLI::IsMember({"exact", "lw"}));
  exp->add_flag("--timing", o.timing, "Record learning wall time in runtime_ms");
  seed_opt(exp);

  auto* prd = app.add_subcommand("predict", "Predict every variable from the others");
  prd->add_option("--model", model_path, "Model JSON")->required();
  prd->add_option("data", data_path, "Data CSV")->required();
  prd->add_option("--out", o.out, "Predictions CSV (stdout if omitted)");
  prd->add_option("--group-col", o.group_col, "Name of the group column");
  prd->add_option("--engine", o.engine, "exact or lw")->check(CLI::IsMember({"exact", "lw"}));
  prd->add_option("--lw-samples", o.lw_samples, "Likelihood-weighting samples per query");
  prd->add_flag("--unknown-f", unknown_f, "Treat the group as unobserved");
  seed_opt(prd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kConfig;
  }

  try {
    if (*gen) return cmd_generate(o);
    if (*lrn) return cmd_learn(o, data_path);
    if (*evl) return cmd_evaluate(o, truth_path, model_path, eval_path, kl_samples);
    if (*exp) return cmd_experiment(o, exp->count("--engine") > 0);
    if (*prd) return cmd_predict(o, model_path, data_path, unknown_f);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kNumeric;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  }
  return kOk;
}
