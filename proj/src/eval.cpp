#include "metabags/eval.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "metabags/errors.hpp"
#include "metabags/parallel.hpp"
#include "metabags/random.hpp"
#include "metabags/stats.hpp"

namespace metabags {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::vector<double> present(std::span<const double> v) {
  std::vector<double> out;
  for (double x : v) {
    if (!std::isnan(x)) out.push_back(x);
  }
  return out;
}

bool is_integrator(std::string_view m) {
  const auto& ids = integrator_methods();
  return std::find(ids.begin(), ids.end(), m) != ids.end();
}

std::vector<std::string> resolve_methods(const BenchmarkOptions& options) {
  std::vector<std::string> methods = options.methods.empty() ? all_methods(options.config.experts) : options.methods;
  const auto known = all_methods(options.config.experts);
  for (const auto& m : methods) {
    if (std::find(known.begin(), known.end(), m) == known.end()) {
      throw std::invalid_argument("unknown benchmark method: " + m);
    }
  }
  if (std::adjacent_find(known.begin(), known.end()) != known.end()) {
    throw std::invalid_argument("method identifiers must be unique");
  }
  return methods;
}

// Squared error of the bag mean against the mean per-tree squared error.
void jensen_audit(const MetaBagsModel& model, const Dataset& test, SplitResult& out) {
  for (std::size_t i = 0; i < test.size(); ++i) {
    const IntegratorResult r = model.predict(test.row(i));
    const double y = test.target()[i];
    // Weighted by vote share so a unanimous bag gives weight exactly 1.
    std::vector<std::size_t> votes(r.expert_predictions.size(), 0);
    for (std::size_t j : r.selected) ++votes[j];
    double per_tree = 0.0;
    for (std::size_t j = 0; j < votes.size(); ++j) {
      if (votes[j] == 0) continue;
      const double e = y - r.expert_predictions[j];
      per_tree += static_cast<double>(votes[j]) / static_cast<double>(r.selected.size()) * (e * e);
    }
    const double bag = (y - r.prediction) * (y - r.prediction);
    ++out.jensen_checked;
    if (bag > per_tree) ++out.jensen_violations;
  }
}

}  // namespace

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw std::invalid_argument("rmse: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("rmse: empty input");
  double ss = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - targets[i];
    ss += e * e;
  }
  return std::sqrt(ss / static_cast<double>(predictions.size()));
}

std::string_view verdict_name(Verdict v) {
  switch (v) {
    case Verdict::AWins:
      return "a_wins";
    case Verdict::BWins:
      return "b_wins";
    case Verdict::NoDifference:
    default:
      return "no_difference";
  }
}

TTestResult two_sample_t(std::span<const double> a, std::span<const double> b, double alpha) {
  if (a.size() < 2 || b.size() < 2) throw std::invalid_argument("two_sample_t: each sample needs >= 2 values");
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  const double ma = mean(a);
  const double mb = mean(b);
  const double va = sample_stdev(a) * sample_stdev(a) / na;
  const double vb = sample_stdev(b) * sample_stdev(b) / nb;
  TTestResult r;
  const double se2 = va + vb;
  if (se2 == 0.0) {
    if (ma == mb) return r;
    r.t = ma < mb ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();
    r.p = 0.0;
    r.df = na + nb - 2.0;
  } else {
    r.t = (ma - mb) / std::sqrt(se2);
    r.df = se2 * se2 / (va * va / (na - 1.0) + vb * vb / (nb - 1.0));
    const boost::math::students_t dist(r.df);
    r.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t))));
  }
  if (r.p < alpha) r.verdict = ma < mb ? Verdict::AWins : Verdict::BWins;
  return r;
}

const std::vector<std::string>& integrator_methods() {
  static const std::vector<std::string> ids = {"metabags", "metareg", "mbwlm", "ls", "ds", "best"};
  return ids;
}

std::vector<std::string> all_methods(const std::vector<LearnerConfig>& pool) {
  std::vector<std::string> out;
  for (const auto& c : pool) out.push_back(c.learner);
  for (const auto& m : integrator_methods()) out.push_back(m);
  return out;
}

SplitResult evaluate_split(const Dataset& train, const Dataset& test, const BenchmarkOptions& options,
                           std::uint64_t seed) {
  const auto methods = resolve_methods(options);
  SplitResult out;
  for (const auto& m : methods) out.rmse[m] = kNaN;

  MetaBagsConfig config = options.config;
  config.jobs = 1;
  TrainedPool pool;
  try {
    pool = train_experts(train, config.experts, config.tune_experts, derive_seed(seed, 0), 1);
  } catch (const std::exception& e) {
    for (const auto& m : methods) out.errors[m] = std::string("expert training failed: ") + e.what();
    return out;
  }

  std::vector<std::vector<double>> expert_preds(pool.models.size());
  for (std::size_t j = 0; j < pool.models.size(); ++j) {
    expert_preds[j] = pool.models[j]->predict_batch(test.features());
  }
  auto score = [&](const std::string& m, auto&& fn) {
    try {
      out.rmse[m] = rmse(fn(), test.target());
    } catch (const std::exception& e) {
      out.errors[m] = e.what();
    }
  };

  std::optional<MetaLevel> level;
  auto ensure_level = [&]() -> const MetaLevel& {
    if (!level) level = build_meta_level(train, pool, config, derive_seed(seed, 1));
    return *level;
  };

  for (const auto& m : methods) {
    if (!is_integrator(m)) {
      const auto ids = pool.identifiers();
      const std::size_t j = static_cast<std::size_t>(std::find(ids.begin(), ids.end(), m) - ids.begin());
      score(m, [&] { return expert_preds.at(j); });
    } else if (m == "ls") {
      score(m, [&] {
        const LinearStacker ls = fit_linear_stacking(train, pool.models);
        std::vector<double> p(test.size());
        std::vector<double> row(pool.models.size());
        for (std::size_t i = 0; i < test.size(); ++i) {
          for (std::size_t j = 0; j < row.size(); ++j) row[j] = expert_preds[j][i];
          p[i] = ls.combine(row);
        }
        return p;
      });
    } else if (m == "ds") {
      score(m, [&] {
        const DynamicSelector ds(train, pool.models, std::min(options.ds_k, train.size()));
        std::vector<double> p(test.size());
        for (std::size_t i = 0; i < test.size(); ++i) p[i] = expert_preds[ds.select(test.row(i))][i];
        return p;
      });
    } else if (m == "best") {
      score(m, [&] {
        const std::size_t folds = std::min(options.best_folds, train.size());
        return expert_preds[select_best(train, pool.configs, folds, derive_seed(seed, 2))];
      });
    } else {
      const Variant variant = m == "metabags" ? Variant::Full : parse_variant(m);
      score(m, [&] {
        const MetaBagsModel model = fit_from_meta_level(train, pool, ensure_level(), config,
                                                        derive_seed(seed, 3), variant);
        if (variant != Variant::MetaReg) jensen_audit(model, test, out);
        return model.predict_batch(test.features());
      });
    }
  }
  return out;
}

std::size_t EvalReport::method_index(std::string_view method) const {
  const auto it = std::find(methods.begin(), methods.end(), method);
  if (it == methods.end()) throw std::invalid_argument("report has no method " + std::string(method));
  return static_cast<std::size_t>(it - methods.begin());
}

const MethodSummary& EvalReport::at(std::size_t dataset, std::string_view method) const {
  return summary.at(dataset).at(method_index(method));
}

TTestResult EvalReport::compare(std::size_t dataset, std::string_view a, std::string_view b) const {
  for (const auto& t : tests) {
    if (t.dataset != datasets.at(dataset)) continue;
    if (t.a == a && t.b == b) return t.result;
    if (t.a == b && t.b == a) {
      TTestResult r = t.result;
      r.t = -r.t;
      if (r.verdict == Verdict::AWins) {
        r.verdict = Verdict::BWins;
      } else if (r.verdict == Verdict::BWins) {
        r.verdict = Verdict::AWins;
      }
      return r;
    }
  }
  throw std::invalid_argument("report has no test for that pair");
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto key = [&](std::size_t i) {
    return std::isnan(values[i]) ? std::numeric_limits<double>::infinity() : values[i];
  };
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key(a) < key(b); });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && key(order[j + 1]) == key(order[i])) ++j;
    const double r = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

EvalReport run_benchmark(const std::vector<BenchmarkDataset>& datasets, const BenchmarkOptions& options,
                         std::uint64_t seed) {
  if (datasets.empty()) throw std::invalid_argument("run_benchmark: no datasets");
  if (options.folds < 2) throw std::invalid_argument("run_benchmark: folds must be >= 2");
  if (options.repetitions == 0) throw std::invalid_argument("run_benchmark: repetitions must be >= 1");
  if (options.jobs == 0) throw std::invalid_argument("run_benchmark: jobs must be >= 1");
  options.config.validate();

  EvalReport report;
  report.methods = resolve_methods(options);
  report.alpha = options.alpha;
  for (const auto& d : datasets) report.datasets.push_back(d.name);

  struct Cell {
    std::size_t dataset, rep, fold;
    std::vector<std::size_t> train_rows, test_rows;
  };
  std::vector<Cell> cells;
  for (std::size_t di = 0; di < datasets.size(); ++di) {
    const auto plans = make_folds(datasets[di].data.size(), options.folds, options.repetitions,
                                  derive_seed(seed, di));
    for (std::size_t r = 0; r < plans.size(); ++r) {
      for (std::size_t k = 0; k < options.folds; ++k) {
        cells.push_back({di, r, k, plans[r].training_indices(k), plans[r].folds[k]});
      }
    }
  }
  std::vector<SplitResult> results(cells.size());
  parallel_for(cells.size(), options.jobs, [&](std::size_t c) {
    const Cell& cell = cells[c];
    const Dataset& data = datasets[cell.dataset].data;
    const std::uint64_t cell_seed =
        derive_seed(derive_seed(seed, 1000 + cell.dataset), cell.rep * options.folds + cell.fold);
    results[c] = evaluate_split(data.subset(cell.train_rows), data.subset(cell.test_rows), options, cell_seed);
  });

  const std::size_t per_dataset = options.folds * options.repetitions;
  report.summary.assign(datasets.size(), std::vector<MethodSummary>(report.methods.size()));
  for (auto& row : report.summary) {
    for (auto& s : row) s.samples.assign(per_dataset, kNaN);
  }
  for (std::size_t c = 0; c < cells.size(); ++c) {
    const Cell& cell = cells[c];
    const std::size_t slot = cell.rep * options.folds + cell.fold;
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      report.summary[cell.dataset][m].samples[slot] = results[c].rmse.at(report.methods[m]);
    }
    for (const auto& [method, message] : results[c].errors) {
      report.failures.push_back(datasets[cell.dataset].name + " rep " + std::to_string(cell.rep) + " fold " +
                                std::to_string(cell.fold) + " " + method + ": " + message);
    }
    report.jensen_checked += results[c].jensen_checked;
    report.jensen_violations += results[c].jensen_violations;
  }

  for (std::size_t di = 0; di < datasets.size(); ++di) {
    std::vector<double> means;
    for (auto& s : report.summary[di]) {
      const auto v = present(s.samples);
      s.missing = per_dataset - v.size();
      s.mean = v.empty() ? kNaN : mean(v);
      s.std_error = v.size() < 2 ? kNaN : sample_stdev(v) / std::sqrt(static_cast<double>(v.size()));
      means.push_back(s.mean);
    }
    report.ranks.push_back(average_ranks(means));
    for (std::size_t a = 0; a < report.methods.size(); ++a) {
      for (std::size_t b = a + 1; b < report.methods.size(); ++b) {
        const auto sa = present(report.summary[di][a].samples);
        const auto sb = present(report.summary[di][b].samples);
        PairTest t{datasets[di].name, report.methods[a], report.methods[b], {}};
        if (sa.size() >= 2 && sb.size() >= 2) {
          t.result = two_sample_t(sa, sb, options.alpha);
        } else {
          t.result.p = kNaN;
          t.result.t = kNaN;
        }
        report.tests.push_back(t);
      }
    }
  }
  return report;
}

std::vector<Improvement> summarize_improvement(const EvalReport& report, std::string_view reference) {
  const std::size_t ref = report.method_index(reference);
  if (report.methods.size() < 2) throw std::invalid_argument("summarize_improvement: no competitor");
  std::vector<Improvement> out;
  for (std::size_t m = 0; m < report.methods.size(); ++m) {
    if (m == ref) continue;
    Improvement imp{report.methods[m], {}, std::nullopt};
    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
      const double comp = report.summary[d][m].mean;
      const double mb = report.summary[d][ref].mean;
      if (comp == 0.0 || std::isnan(comp) || std::isnan(mb)) {
        imp.per_dataset.push_back(std::nullopt);
        continue;
      }
      const double v = 100.0 * (comp - mb) / comp;
      imp.per_dataset.push_back(v);
      total += v;
      ++count;
    }
    if (count > 0) imp.mean = total / static_cast<double>(count);
    out.push_back(std::move(imp));
  }
  return out;
}

std::string render_summary(const EvalReport& report) {
  std::ostringstream out;
  for (std::size_t d = 0; d < report.datasets.size(); ++d) {
    out << "dataset " << report.datasets[d] << "\n";
    char buf[256];
    std::snprintf(buf, sizeof buf, "  %-10s %14s %14s %6s %8s\n", "method", "rmse", "std.err", "rank",
                  "vs mb");
    out << buf;
    const bool has_mb = std::find(report.methods.begin(), report.methods.end(), "metabags") != report.methods.end();
    for (std::size_t m = 0; m < report.methods.size(); ++m) {
      const auto& s = report.summary[d][m];
      std::string versus = "-";
      if (has_mb && report.methods[m] != "metabags") {
        const auto r = report.compare(d, "metabags", report.methods[m]);
        versus = r.verdict == Verdict::AWins ? "win" : r.verdict == Verdict::BWins ? "loss" : "tie";
      }
      std::snprintf(buf, sizeof buf, "  %-10s %14s %14s %6s %8s\n", report.methods[m].c_str(),
                    fmt(s.mean).c_str(), fmt(s.std_error).c_str(), fmt(report.ranks[d][m]).c_str(),
                    versus.c_str());
      out << buf;
    }
  }
  if (std::find(report.methods.begin(), report.methods.end(), "metabags") != report.methods.end()) {
    out << "mean improvement of metabags (%)\n";
    for (const auto& imp : summarize_improvement(report)) {
      out << "  " << imp.competitor << " " << (imp.mean ? fmt(*imp.mean) : "undefined") << "\n";
    }
  }
  out << "failed cells: " << report.failures.size() << "\n";
  out << "jensen checks: " << report.jensen_checked << ", violations: " << report.jensen_violations << "\n";
  return out.str();
}

void write_report(const EvalReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto open = [&](const char* name) {
    std::ofstream f(dir / name);
    if (!f) throw DataError("cannot write report file: " + (dir / name).string());
    return f;
  };
  {
    auto f = open("rmse.csv");
    f << "dataset,method,mean_rmse,std_error,missing";
    const std::size_t samples = report.summary.empty() || report.summary[0].empty()
                                    ? 0
                                    : report.summary[0][0].samples.size();
    for (std::size_t i = 0; i < samples; ++i) f << ",cell" << i;
    f << "\n";
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
      for (std::size_t m = 0; m < report.methods.size(); ++m) {
        const auto& s = report.summary[d][m];
        f << report.datasets[d] << ',' << report.methods[m] << ',' << fmt(s.mean) << ',' << fmt(s.std_error)
          << ',' << s.missing;
        for (double v : s.samples) f << ',' << fmt(v);
        f << "\n";
      }
    }
  }
  {
    auto f = open("pvalues.csv");
    f << "dataset,method_a,method_b,t,df,p,verdict\n";
    for (const auto& t : report.tests) {
      f << t.dataset << ',' << t.a << ',' << t.b << ',' << fmt(t.result.t) << ',' << fmt(t.result.df) << ','
        << fmt(t.result.p) << ',' << verdict_name(t.result.verdict) << "\n";
    }
  }
  {
    auto f = open("ranks.csv");
    f << "dataset";
    for (const auto& m : report.methods) f << ',' << m;
    f << "\n";
    for (std::size_t d = 0; d < report.datasets.size(); ++d) {
      f << report.datasets[d];
      for (double r : report.ranks[d]) f << ',' << fmt(r);
      f << "\n";
    }
  }
  {
    auto f = open("improvement.csv");
    f << "competitor";
    for (const auto& d : report.datasets) f << ',' << d;
    f << ",mean\n";
    if (std::find(report.methods.begin(), report.methods.end(), "metabags") != report.methods.end()) {
      for (const auto& imp : summarize_improvement(report)) {
        f << imp.competitor;
        for (const auto& v : imp.per_dataset) f << ',' << (v ? fmt(*v) : "undefined");
        f << ',' << (imp.mean ? fmt(*imp.mean) : "undefined") << "\n";
      }
    }
  }
  {
    auto f = open("summary.txt");
    f << render_summary(report);
    for (const auto& failure : report.failures) f << "failure: " << failure << "\n";
  }
}

std::filesystem::path make_run_dir(const std::filesystem::path& base, std::string_view prefix,
                                   std::uint64_t seed) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y%m%d-%H%M%S", &tm);
  std::filesystem::path dir = base / (std::string(prefix) + "-" + stamp + "-seed" + std::to_string(seed));
  for (int n = 1; std::filesystem::exists(dir); ++n) {
    dir = base / (std::string(prefix) + "-" + stamp + "-seed" + std::to_string(seed) + "-" + std::to_string(n));
  }
  std::filesystem::create_directories(dir);
  return dir;
}

std::vector<ScalabilityRow> scalability_run(const ScalabilityOptions& options, std::uint64_t seed) {
  if (options.sizes.empty() || options.dims.empty()) throw std::invalid_argument("scalability grid is empty");
  if (options.repetitions == 0) throw std::invalid_argument("scalability repetitions must be >= 1");
  std::vector<ScalabilityRow> rows;
  for (std::size_t n : options.dims) {
    for (std::size_t size : options.sizes) {
      const Dataset data = generate_scalability_set(size, n, derive_seed(seed, size * 1000 + n));
      std::vector<LearnerConfig> pool_cfg(2);
      pool_cfg[0].learner = "lasso";
      pool_cfg[1].learner = "cart";
      const TrainedPool pool = train_experts(data, pool_cfg, false, derive_seed(seed, 1), options.jobs);
      const LandmarkerSet landmarkers = fit_landmarkers(data);
      const MetaFeatureSchema schema(data.feature_names(), pool.identifiers(), options.psi, true);
      const MetaTable table = build_meta_table(data, pool.models, landmarkers, schema, derive_seed(seed, 2),
                                               options.jobs);
      InductionConfig ic;
      ic.phi = options.phi;
      ic.rho = options.rho;
      ScalabilityRow row{size, n, 0.0, {}, 0};
      for (std::size_t r = 0; r < options.repetitions; ++r) {
        ic.seed = derive_seed(seed, 100 + r);
        const auto start = std::chrono::steady_clock::now();
        const MetaDecisionTree tree = induce_tree(table.features, table.residuals, ic);
        const auto stop = std::chrono::steady_clock::now();
        row.samples.push_back(std::chrono::duration<double>(stop - start).count());
        row.tree_nodes = tree.nodes().size();
      }
      row.seconds = quantile(row.samples, 0.5);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

std::string scalability_csv(const std::vector<ScalabilityRow>& rows) {
  std::ostringstream out;
  out << "N,n,seconds,tree_nodes\n";
  for (const auto& r : rows) out << r.rows << ',' << r.dims << ',' << fmt(r.seconds) << ',' << r.tree_nodes << "\n";
  return out.str();
}

}  // namespace metabags
