#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "metabags/eval.hpp"
#include "metabags/random.hpp"

using namespace metabags;
namespace fs = std::filesystem;

namespace {

// Two-sided Student-t tail by Simpson integration of the density.
double t_two_sided(double t, double df) {
  const double c = std::exp(std::lgamma((df + 1) / 2) - std::lgamma(df / 2)) / std::sqrt(df * M_PI);
  auto pdf = [&](double x) { return c * std::pow(1.0 + x * x / df, -(df + 1) / 2); };
  const double a = 0.0, b = std::abs(t);
  const int n = 20000;
  const double h = (b - a) / n;
  double s = pdf(a) + pdf(b);
  for (int i = 1; i < n; ++i) s += pdf(a + i * h) * (i % 2 ? 4 : 2);
  const double centre = s * h / 3.0;
  return 1.0 - 2.0 * centre;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

MetaBagsConfig quick_config() {
  MetaBagsConfig c;
  c.experts = {{"cart", {}, 1, 3}, {"knn", {}, 1, 3}, {"lasso", {}, 1, 3}};
  c.tune_experts = false;
  c.d = 10;
  c.psi = 10;
  return c;
}

}  // namespace

TEST_CASE("rmse") {
  const std::vector<double> a = {1, 2, 3};
  CHECK(rmse(a, a) == 0.0);
  CHECK(rmse(std::vector<double>{1, 2}, std::vector<double>{1, 3}) == doctest::Approx(0.70711).epsilon(1e-5));
  CHECK_THROWS_AS((void)rmse(std::vector<double>{}, std::vector<double>{}), std::invalid_argument);
  CHECK_THROWS_AS((void)rmse(a, std::vector<double>{1}), std::invalid_argument);
  Rng rng(1);
  std::normal_distribution<double> z;
  std::vector<double> p(100), t(100);
  double s = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    p[i] = z(rng);
    t[i] = z(rng);
    s += (p[i] - t[i]) * (p[i] - t[i]);
  }
  CHECK(std::abs(rmse(p, t) - std::sqrt(s / 100)) < 1e-12);
}

TEST_CASE("Welch t-test examples") {
  const std::vector<double> a = {1, 2, 3, 4, 5}, b = {11, 12, 13, 14, 15};
  const auto same = two_sample_t(a, a);
  CHECK(same.t == 0.0);
  CHECK(same.p == doctest::Approx(1.0));
  CHECK(same.verdict == Verdict::NoDifference);

  const auto r = two_sample_t(a, b);
  CHECK(r.verdict == Verdict::AWins);
  CHECK(r.p < 0.001);
  CHECK(r.t == doctest::Approx(-10.0));
  CHECK(r.df == doctest::Approx(8.0));
  CHECK(two_sample_t(b, a).verdict == Verdict::BWins);
  CHECK(two_sample_t(a, b, 1e-12).verdict == Verdict::NoDifference);

  const std::vector<double> c = {2, 2, 2}, d = {2, 2, 2}, e = {3, 3, 3};
  CHECK(two_sample_t(c, d).p == 1.0);
  CHECK(two_sample_t(c, d).verdict == Verdict::NoDifference);
  CHECK(two_sample_t(c, e).verdict == Verdict::AWins);
  CHECK_THROWS_AS((void)two_sample_t(std::vector<double>{1}, a), std::invalid_argument);
}

TEST_CASE("Welch t-test against an independent computation") {
  Rng rng(2);
  std::normal_distribution<double> z;
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t na = 4 + trial % 7, nb = 3 + trial % 5;
    std::vector<double> a(na), b(nb);
    for (auto& v : a) v = z(rng) * 1.5;
    for (auto& v : b) v = 0.8 + z(rng);
    auto mv = [](const std::vector<double>& x) {
      double m = 0.0;
      for (double v : x) m += v;
      m /= x.size();
      double s = 0.0;
      for (double v : x) s += (v - m) * (v - m);
      return std::pair{m, s / (x.size() - 1)};
    };
    const auto [ma, va] = mv(a);
    const auto [mb, vb] = mv(b);
    const double qa = va / na, qb = vb / nb;
    const double t = (ma - mb) / std::sqrt(qa + qb);
    const double df = (qa + qb) * (qa + qb) / (qa * qa / (na - 1) + qb * qb / (nb - 1));
    const auto r = two_sample_t(a, b);
    CHECK(r.t == doctest::Approx(t).epsilon(1e-12));
    CHECK(r.df == doctest::Approx(df).epsilon(1e-12));
    CHECK(std::abs(r.p - t_two_sided(t, df)) < 1e-7);

    // Swapping the samples relabels the verdict.
    const auto s = two_sample_t(b, a);
    CHECK(s.p == doctest::Approx(r.p).epsilon(1e-12));
    CHECK(s.t == doctest::Approx(-r.t));
    if (r.verdict == Verdict::AWins) CHECK(s.verdict == Verdict::BWins);
    if (r.verdict == Verdict::BWins) CHECK(s.verdict == Verdict::AWins);
    if (r.verdict == Verdict::NoDifference) CHECK(s.verdict == Verdict::NoDifference);
  }
}

TEST_CASE("average ranks") {
  const std::vector<double> v = {3.0, 1.0, 2.0, 2.0};
  const auto r = average_ranks(v);
  CHECK(r == std::vector<double>{4.0, 1.0, 2.5, 2.5});
  const auto n = average_ranks(std::vector<double>{NAN, 1.0, 0.5});
  CHECK(n[0] == 3.0);
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> x(9);
    for (auto& e : x) e = static_cast<double>(rng() % 4);
    const auto rk = average_ranks(x);
    double sum = 0.0;
    for (double e : rk) sum += e;
    CHECK(sum == doctest::Approx(45.0));
  }
}

TEST_CASE("improvement arithmetic") {
  EvalReport rep;
  rep.datasets = {"d1", "d2"};
  rep.methods = {"metabags", "gb", "zero"};
  auto cell = [](double m) {
    MethodSummary s;
    s.mean = m;
    s.samples = {m, m};
    return s;
  };
  rep.summary = {{cell(1.8), cell(2.0), cell(0.0)}, {cell(3.0), cell(3.0), cell(1.0)}};
  const auto imp = summarize_improvement(rep);
  REQUIRE(imp.size() == 2);
  CHECK(imp[0].competitor == "gb");
  CHECK(*imp[0].per_dataset[0] == doctest::Approx(10.0));
  CHECK(*imp[0].per_dataset[1] == doctest::Approx(0.0));
  CHECK(*imp[0].mean == doctest::Approx(5.0));
  CHECK(!imp[1].per_dataset[0].has_value());
  CHECK(*imp[1].per_dataset[1] == doctest::Approx(-200.0));
}

TEST_CASE("small benchmark: protocol arithmetic, invariants and determinism") {
  const Dataset q = generate_quartic_surface(120, 0.0, 1.0, 4);
  BenchmarkOptions opt;
  opt.folds = 2;
  opt.repetitions = 2;
  opt.config = quick_config();
  opt.methods = {"knn", "lasso", "metabags", "ls", "ds", "best", "mbwlm"};
  const auto rep = run_benchmark({{"quartic", q}}, opt, 5);
  CHECK(rep.methods == opt.methods);
  for (const auto& m : rep.methods) {
    const auto& s = rep.at(0, m);
    CHECK(s.samples.size() == 4);
    CHECK(s.missing == 0);
    double mean = 0.0;
    for (double v : s.samples) mean += v;
    CHECK(s.mean == doctest::Approx(mean / 4));
  }
  double sum = 0.0;
  for (double r : rep.ranks[0]) sum += r;
  CHECK(sum == doctest::Approx(7.0 * 8.0 / 2.0));
  CHECK(rep.tests.size() == 21);
  CHECK(rep.jensen_violations == 0);
  CHECK(rep.jensen_checked == 2 * 120 * 2);
  for (const auto& t : rep.tests) {
    const auto fwd = rep.compare(0, t.a, t.b);
    const auto back = rep.compare(0, t.b, t.a);
    CHECK(fwd.p == back.p);
    CHECK((fwd.verdict == Verdict::AWins) == (back.verdict == Verdict::BWins));
  }

  const fs::path d1 = fs::temp_directory_path() / "metabags_eval_a", d2 = fs::temp_directory_path() / "metabags_eval_b";
  fs::remove_all(d1);
  fs::remove_all(d2);
  write_report(rep, d1);
  write_report(run_benchmark({{"quartic", q}}, opt, 5), d2);
  for (const char* f : {"rmse.csv", "pvalues.csv", "ranks.csv", "improvement.csv", "summary.txt"}) {
    CHECK(fs::exists(d1 / f));
    CHECK(slurp(d1 / f) == slurp(d2 / f));
  }
  CHECK(slurp(d1 / "rmse.csv").find("quartic") != std::string::npos);

  BenchmarkOptions bad = opt;
  bad.methods = {"svr"};
  CHECK_THROWS_AS((void)run_benchmark({{"quartic", q}}, bad, 1), std::invalid_argument);
}

TEST_CASE("failed cells are recorded, not fatal") {
  // A zero iteration cap makes lasso training throw on every split.
  const Dataset q = generate_quartic_surface(60, 0.0, 1.0, 6);
  BenchmarkOptions opt;
  opt.folds = 2;
  opt.repetitions = 1;
  opt.config = quick_config();
  opt.config.experts = {{"cart", {}, 1, 3}, {"lasso", {{"max_iterations", 0}}, 1, 3}};
  opt.methods = {"cart", "lasso"};
  const auto rep = run_benchmark({{"q", q}}, opt, 1);
  CHECK(rep.at(0, "cart").missing == 2);
  CHECK(rep.at(0, "lasso").missing == 2);
  CHECK(std::isnan(rep.at(0, "lasso").mean));
  CHECK(!rep.failures.empty());
  CHECK(render_summary(rep).find("NA") != std::string::npos);
}

TEST_CASE("evaluate_split is reproducible") {
  const Dataset train = generate_quartic_surface(100, 0.0, 0.8, 7);
  const Dataset test = generate_quartic_surface(50, 0.0, 1.0, 8);
  BenchmarkOptions opt;
  opt.config = quick_config();
  opt.methods = {"cart", "metabags", "metareg"};
  const auto a = evaluate_split(train, test, opt, 3);
  const auto b = evaluate_split(train, test, opt, 3);
  CHECK(a.rmse == b.rmse);
  CHECK(a.errors.empty());
  CHECK(a.jensen_checked == 50);
}

TEST_CASE("run directory naming") {
  const auto base = fs::temp_directory_path() / "metabags_runs";
  const auto dir = make_run_dir(base, "benchmark", 42);
  CHECK(fs::is_directory(dir));
  const std::string name = dir.filename().string();
  CHECK(name.rfind("benchmark-", 0) == 0);
  CHECK(name.size() == std::string("benchmark-20260101-000000-seed42").size());
  CHECK(name.substr(name.size() - 7) == "-seed42");
}

TEST_CASE("scalability run") {
  ScalabilityOptions opt;
  opt.sizes = {1000};
  opt.dims = {2};
  opt.repetitions = 3;
  const auto rows = scalability_run(opt, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].rows == 1000);
  CHECK(rows[0].dims == 2);
  REQUIRE(rows[0].samples.size() == 3);
  auto s = rows[0].samples;
  std::sort(s.begin(), s.end());
  CHECK(rows[0].seconds == s[1]);
  CHECK(rows[0].tree_nodes >= 1);
  const std::string csv = scalability_csv(rows);
  CHECK(csv.rfind("N,n,seconds,tree_nodes\n1000,2,", 0) == 0);
  ScalabilityOptions empty;
  empty.sizes.clear();
  CHECK_THROWS_AS((void)scalability_run(empty, 1), std::invalid_argument);
}
