#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "metabags/dataset.hpp"
#include "metabags/ensemble.hpp"
#include "metabags/errors.hpp"
#include "metabags/eval.hpp"
#include "metabags/persistence.hpp"

namespace metabags::cli {

namespace {

namespace fs = std::filesystem;

// Everything a command may read from the command line.
struct RunConfig {
  std::vector<std::string> data;
  std::string target = "y";
  bool no_header = false;
  std::string model;
  std::string out = ".";
  std::uint64_t seed = kDefaultSeed;
  std::size_t jobs = 1;

  std::vector<std::string> experts = {"rf", "gb", "knn", "lasso", "cart"};
  std::size_t tuning_budget = 60;
  bool no_tuning = false;
  std::size_t phi = 10;
  std::size_t rho = 3;
  std::size_t psi = 100;
  double s = 0.10;
  std::size_t d = 300;
  std::string bias = "squared_mean";
  std::string variant = "full";

  std::size_t folds = 5;
  std::size_t reps = 3;
  double alpha = 0.05;
  std::size_t ds_k = 5;
  bool quartic = false;
  std::vector<std::string> methods;

  std::vector<std::size_t> sizes = {10000, 20000, 40000};
  std::vector<std::size_t> dims = {10};
  std::size_t scal_psi = 10;
};

void add_common(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--seed", rc.seed, "Run seed")->capture_default_str();
  cmd->add_option("--out", rc.out, "Output directory")->capture_default_str();
  cmd->add_option("--jobs", rc.jobs, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_data(CLI::App* cmd, RunConfig& rc, bool required) {
  auto* opt = cmd->add_option("--data", rc.data, "Input CSV file");
  if (required) opt->required();
  cmd->add_option("--target", rc.target, "Target column name")->capture_default_str();
  cmd->add_flag("--no-header", rc.no_header, "CSV has no header row (columns are c1..cK)");
}

void add_hyper(CLI::App* cmd, RunConfig& rc) {
  cmd->add_option("--experts", rc.experts, "Expert pool, comma separated")->delimiter(',')->capture_default_str();
  cmd->add_option("--tuning-budget", rc.tuning_budget, "Random-search points per expert")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  cmd->add_flag("--no-tuning", rc.no_tuning, "Train experts with default hyperparameters");
  cmd->add_option("--phi", rc.phi, "Candidate splits per meta-feature")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--rho", rc.rho, "Golden-section iteration cap")->capture_default_str();
  cmd->add_option("--psi", rc.psi, "Neighbourhood size")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--s", rc.s, "Bootstrap fraction")->capture_default_str();
  cmd->add_option("--d", rc.d, "Number of meta-trees")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--bias", rc.bias, "Node bias measure")
      ->capture_default_str()
      ->check(CLI::IsMember({"squared_mean", "mean_squared"}));
}

MetaBagsConfig to_config(const RunConfig& rc) {
  MetaBagsConfig c;
  c.experts.clear();
  for (const auto& id : rc.experts) {
    LearnerConfig e;
    e.learner = id;
    e.tuning_budget = rc.tuning_budget;
    c.experts.push_back(std::move(e));
  }
  c.tune_experts = !rc.no_tuning;
  c.phi = rc.phi;
  c.rho = rc.rho;
  c.psi = rc.psi;
  c.s = rc.s;
  c.d = rc.d;
  c.bias = rc.bias == "mean_squared" ? BiasMode::MeanSquared : BiasMode::SquaredMean;
  c.jobs = rc.jobs;
  c.validate();
  return c;
}

void echo_rules(const MetaBagsConfig& c, std::size_t rows, std::ostream& out) {
  const auto boot = static_cast<std::size_t>(std::ceil(c.s * static_cast<double>(rows)));
  const auto upsilon = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(boot * c.upsilon_fraction)));
  out << "phi=" << c.phi << " rho=" << c.rho << " psi=" << c.psi << " s=" << c.s << " d=" << c.d << "\n";
  out << "epsilon = |I(root)| * " << c.epsilon_fraction << " (per tree)\n";
  out << "upsilon = max(2, ceil(" << boot << " * " << c.upsilon_fraction << ")) = " << upsilon << "\n";
}

Dataset load_one(const RunConfig& rc) {
  if (rc.data.size() != 1) throw std::invalid_argument("exactly one --data file is required");
  return load_csv(rc.data.front(), rc.target, !rc.no_header);
}

std::vector<std::string> read_header(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path.string());
  if (!line.empty() && line.back() == '\r') line.pop_back();
  std::vector<std::string> names;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) names.push_back(cell);
  return names;
}

int cmd_inspect(const RunConfig& rc, std::ostream& out) {
  std::vector<DatasetStats> rows;
  for (const auto& path : rc.data) {
    const Dataset data = load_csv(path, rc.target, !rc.no_header);
    rows.push_back(describe(data, fs::path(path).stem().string()));
  }
  if (rc.quartic) {
    rows.push_back(describe(generate_quartic_surface(1000, 0.0, 0.8, rc.seed), "quartic"));
  }
  if (rows.empty()) throw std::invalid_argument("inspect needs --data or --quartic");
  std::ostringstream csv;
  csv << stats_csv_header() << "\n";
  for (const auto& r : rows) csv << stats_csv_row(r) << "\n";
  out << csv.str();
  if (rc.out != ".") {
    fs::create_directories(rc.out);
    std::ofstream f(fs::path(rc.out) / "stats.csv");
    if (!f) throw DataError("cannot write " + (fs::path(rc.out) / "stats.csv").string());
    f << csv.str();
  }
  return kOk;
}

int cmd_train(const RunConfig& rc, std::ostream& out) {
  const Dataset data = load_one(rc);
  const MetaBagsConfig config = to_config(rc);
  const Variant variant = parse_variant(rc.variant);
  echo_rules(config, data.size(), out);
  const MetaBagsModel model = fit_ablation(data, config, rc.seed, variant);
  fs::create_directories(rc.out);
  const fs::path path = fs::path(rc.out) / "model.json";
  save_model(model, path);
  std::size_t nodes = 0;
  for (const auto& t : model.trees()) nodes += t.nodes().size();
  out << "trained " << model.trees().size() << " meta-trees (" << nodes << " nodes) over "
      << model.expert_count() << " experts on " << data.size() << " rows\n";
  out << "model written to " << path.string() << "\n";
  return kOk;
}

int cmd_predict(const RunConfig& rc, std::ostream& out) {
  if (rc.model.empty()) throw std::invalid_argument("predict needs --model");
  if (rc.data.size() != 1) throw std::invalid_argument("exactly one --data file is required");
  const MetaBagsModel model = load_model(rc.model);
  const auto& expected = model.schema().base_names();
  const auto header = read_header(rc.data.front());
  Matrix queries;
  std::vector<double> targets;
  const std::string& target = model.metadata().target_name;
  if (std::find(header.begin(), header.end(), target) != header.end()) {
    const Dataset data = load_csv(rc.data.front(), target, true);
    if (data.feature_names() != expected) {
      throw DataError("schema mismatch: query columns do not match the model's features");
    }
    queries = data.features();
    targets = data.target();
  } else {
    queries = load_feature_csv(rc.data.front(), expected);
  }

  std::vector<IntegratorResult> results(queries.rows());
  for (std::size_t i = 0; i < queries.rows(); ++i) results[i] = model.predict(queries.row(i));

  fs::create_directories(rc.out);
  const fs::path path = fs::path(rc.out) / "predictions.csv";
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f.precision(17);
  f << "row,prediction";
  for (std::size_t j = 0; j < model.expert_count(); ++j) f << ",selected_" << model.schema().expert_ids()[j];
  f << "\n";
  for (std::size_t i = 0; i < results.size(); ++i) {
    std::vector<std::size_t> hist(model.expert_count(), 0);
    for (std::size_t j : results[i].selected) ++hist[j];
    f << i << ',' << results[i].prediction;
    for (std::size_t h : hist) f << ',' << h;
    f << "\n";
  }
  out << "wrote " << results.size() << " predictions to " << path.string() << "\n";
  if (!targets.empty()) {
    std::vector<double> p;
    for (const auto& r : results) p.push_back(r.prediction);
    out << "rmse " << rmse(p, targets) << "\n";
  }
  return kOk;
}

int cmd_benchmark(const RunConfig& rc, std::ostream& out) {
  std::vector<BenchmarkDataset> datasets;
  for (const auto& path : rc.data) {
    datasets.push_back({fs::path(path).stem().string(), load_csv(path, rc.target, !rc.no_header)});
  }
  if (rc.quartic) datasets.push_back({"quartic", generate_quartic_surface(1000, 0.0, 0.8, rc.seed)});
  if (datasets.empty()) throw std::invalid_argument("benchmark needs --data or --quartic");

  BenchmarkOptions options;
  options.config = to_config(rc);
  options.config.jobs = 1;
  options.folds = rc.folds;
  options.repetitions = rc.reps;
  options.alpha = rc.alpha;
  options.ds_k = rc.ds_k;
  options.jobs = rc.jobs;
  if (!rc.methods.empty()) {
    options.methods = rc.methods;
  } else {
    options.methods = rc.experts;
    for (const char* m : {"metabags", "ls", "ds", "best"}) options.methods.emplace_back(m);
    if (rc.variant == "metareg" || rc.variant == "all") options.methods.emplace_back("metareg");
    if (rc.variant == "mbwlm" || rc.variant == "all") options.methods.emplace_back("mbwlm");
  }
  echo_rules(options.config, datasets.front().data.size() * (rc.folds - 1) / rc.folds, out);
  const EvalReport report = run_benchmark(datasets, options, rc.seed);
  const fs::path dir = make_run_dir(rc.out, "benchmark", rc.seed);
  write_report(report, dir);
  out << render_summary(report);
  out << "report written to " << dir.string() << "\n";
  return kOk;
}

int cmd_scalability(const RunConfig& rc, std::ostream& out) {
  ScalabilityOptions options;
  options.sizes = rc.sizes;
  options.dims = rc.dims;
  options.repetitions = rc.reps;
  options.psi = rc.scal_psi;
  options.phi = rc.phi;
  options.rho = rc.rho;
  options.jobs = rc.jobs;
  const auto rows = scalability_run(options, rc.seed);
  const std::string csv = scalability_csv(rows);
  const fs::path dir = make_run_dir(rc.out, "scalability", rc.seed);
  std::ofstream f(dir / "scalability.csv");
  if (!f) throw DataError("cannot write " + (dir / "scalability.csv").string());
  f << csv;
  out << csv << "report written to " << dir.string() << "\n";
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig rc;
  CLI::App app{"MetaBags: bagged meta-decision trees for regression", "metabags"};
  app.require_subcommand(1);

  auto* inspect = app.add_subcommand("inspect", "Dataset statistics (shape, target range, Tukey outliers)");
  add_data(inspect, rc, false);
  inspect->add_flag("--quartic", rc.quartic, "Include the synthetic quartic surface (1k rows on [0,0.8]^2)");
  add_common(inspect, rc);

  auto* train = app.add_subcommand("train", "Fit a MetaBags model and write model.json to --out");
  add_data(train, rc, true);
  add_hyper(train, rc);
  train->add_option("--variant", rc.variant, "full, metareg or mbwlm")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "metareg", "mbwlm"}));
  add_common(train, rc);

  auto* predict = app.add_subcommand("predict", "Predict a CSV with a saved model");
  predict->add_option("--model", rc.model, "Model archive")->required();
  predict->add_option("--data", rc.data, "Query CSV (features, optional target column)")->required();
  add_common(predict, rc);

  auto* bench = app.add_subcommand("benchmark", "Repeated k-fold comparison of MetaBags and baselines");
  add_data(bench, rc, false);
  bench->add_flag("--quartic", rc.quartic, "Include the synthetic quartic surface");
  add_hyper(bench, rc);
  bench->add_option("--variant", rc.variant, "Ablation columns to add: full (none), metareg, mbwlm, all")
      ->capture_default_str()
      ->check(CLI::IsMember({"full", "metareg", "mbwlm", "all"}));
  bench->add_option("--folds", rc.folds, "CV folds")->capture_default_str();
  bench->add_option("--reps", rc.reps, "CV repetitions")->capture_default_str()->check(CLI::PositiveNumber);
  bench->add_option("--alpha", rc.alpha, "Significance level")->capture_default_str();
  bench->add_option("--ds-k", rc.ds_k, "Neighbours for dynamic selection")->capture_default_str();
  bench->add_option("--methods", rc.methods, "Explicit method list")->delimiter(',');
  add_common(bench, rc);

  auto* scal = app.add_subcommand("scalability", "Time meta-tree induction over a size grid");
  scal->add_option("--sizes", rc.sizes, "Meta-table sizes")->delimiter(',')->capture_default_str();
  scal->add_option("--dims", rc.dims, "Feature counts (>= 2)")->delimiter(',')->capture_default_str();
  scal->add_option("--reps", rc.reps, "Timed repetitions per point")->capture_default_str();
  scal->add_option("--psi", rc.scal_psi, "Neighbourhood size for the meta table")->capture_default_str();
  scal->add_option("--phi", rc.phi, "Candidate splits per meta-feature")->capture_default_str();
  scal->add_option("--rho", rc.rho, "Golden-section iteration cap")->capture_default_str();
  add_common(scal, rc);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kOk : kUsage;
  }

  try {
    if (*inspect) return cmd_inspect(rc, out);
    if (*train) return cmd_train(rc, out);
    if (*predict) return cmd_predict(rc, out);
    if (*bench) return cmd_benchmark(rc, out);
    if (*scal) return cmd_scalability(rc, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const ArchiveError& e) {
    err << "archive error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return kRuntimeFailure;
  }
  return kUsage;
}

}  // namespace metabags::cli
