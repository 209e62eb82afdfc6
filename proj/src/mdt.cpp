#include "metabags/mdt.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "metabags/random.hpp"

namespace metabags {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kTieTolerance = 1e-20;

double bias_term(double sum, double sumsq, double count, BiasMode mode) {
  if (mode == BiasMode::SquaredMean) {
    const double m = sum / count;
    return m * m;
  }
  return sumsq / count;
}

// Only the minimum; the tie-break never changes the value.
double impurity_value(const double* sum, const double* sumsq, std::size_t m, double count,
                      BiasMode mode) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < m; ++j) best = std::min(best, bias_term(sum[j], sumsq[j], count, mode));
  return best;
}

Impurity impurity_full(const std::vector<double>& sum, const std::vector<double>& sumsq, double count,
                       BiasMode mode) {
  Impurity out;
  out.squared_bias.resize(sum.size());
  for (std::size_t j = 0; j < sum.size(); ++j) out.squared_bias[j] = bias_term(sum[j], sumsq[j], count, mode);
  out.value = *std::min_element(out.squared_bias.begin(), out.squared_bias.end());
  // Biases within rounding noise of the minimum count as tied.
  const double scale = *std::max_element(sumsq.begin(), sumsq.end()) / count;
  const double tie = out.value + kTieTolerance * scale;
  out.expert = sum.size();
  for (std::size_t j = 0; j < sum.size(); ++j) {
    if (out.squared_bias[j] > tie) continue;
    if (out.expert == sum.size() || sumsq[j] < sumsq[out.expert]) out.expert = j;
  }
  return out;
}

// One meta-feature restricted to a node, sorted, with residual prefix sums.
class SortedFeature {
 public:
  SortedFeature(const std::vector<double>& column, const std::vector<double>& residuals,
                std::size_t m, std::span<const std::uint32_t> rows, double parent, BiasMode mode)
      : m_(m), parent_(parent), mode_(mode) {
    const std::size_t n = rows.size();
    std::vector<std::uint32_t> order(rows.begin(), rows.end());
    std::stable_sort(order.begin(), order.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return column[a] < column[b]; });
    values_.resize(n);
    sum_.assign((n + 1) * m, 0.0);
    sumsq_.assign((n + 1) * m, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      values_[i] = column[order[i]];
      const double* r = &residuals[static_cast<std::size_t>(order[i]) * m];
      for (std::size_t j = 0; j < m; ++j) {
        sum_[(i + 1) * m + j] = sum_[i * m + j] + r[j];
        sumsq_[(i + 1) * m + j] = sumsq_[i * m + j] + r[j] * r[j];
      }
    }
  }

  double min() const { return values_.front(); }
  double max() const { return values_.back(); }

  double gain_at(double t) const {
    const std::size_t n = values_.size();
    const std::size_t l = static_cast<std::size_t>(
        std::upper_bound(values_.begin(), values_.end(), t) - values_.begin());
    if (l == 0 || l == n) return kNegInf;
    left_sum_.resize(m_);
    left_sq_.resize(m_);
    right_sum_.resize(m_);
    right_sq_.resize(m_);
    for (std::size_t j = 0; j < m_; ++j) {
      left_sum_[j] = sum_[l * m_ + j];
      left_sq_[j] = sumsq_[l * m_ + j];
      right_sum_[j] = sum_[n * m_ + j] - left_sum_[j];
      right_sq_[j] = sumsq_[n * m_ + j] - left_sq_[j];
    }
    const double nl = static_cast<double>(l);
    const double nr = static_cast<double>(n - l);
    const double total = static_cast<double>(n);
    const double il = impurity_value(left_sum_.data(), left_sq_.data(), m_, nl, mode_);
    const double ir = impurity_value(right_sum_.data(), right_sq_.data(), m_, nr, mode_);
    return parent_ - (nl / total) * il - (nr / total) * ir;
  }

 private:
  std::size_t m_;
  double parent_;
  BiasMode mode_;
  std::vector<double> values_;
  std::vector<double> sum_;
  std::vector<double> sumsq_;
  mutable std::vector<double> left_sum_, left_sq_, right_sum_, right_sq_;
};

// Column-major copy of the sampled meta rows.
struct SampleTable {
  std::vector<std::vector<double>> columns;  // Q x n
  std::vector<double> residuals;             // n x M
  std::size_t m = 0;
};

SampleTable gather(const Matrix& features, const Matrix& residuals, std::span<const std::size_t> rows) {
  SampleTable t;
  t.m = residuals.cols();
  t.columns.assign(features.cols(), std::vector<double>(rows.size()));
  t.residuals.resize(rows.size() * t.m);
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t r = rows[k];
    if (r >= features.rows()) throw std::invalid_argument("induce_tree: row index out of range");
    for (std::size_t q = 0; q < features.cols(); ++q) t.columns[q][k] = features(r, q);
    for (std::size_t j = 0; j < t.m; ++j) t.residuals[k * t.m + j] = residuals(r, j);
  }
  return t;
}

Impurity impurity_of(const SampleTable& t, std::span<const std::uint32_t> rows, BiasMode mode) {
  std::vector<double> sum(t.m, 0.0), sumsq(t.m, 0.0);
  for (std::uint32_t r : rows) {
    for (std::size_t j = 0; j < t.m; ++j) {
      const double v = t.residuals[static_cast<std::size_t>(r) * t.m + j];
      sum[j] += v;
      sumsq[j] += v * v;
    }
  }
  return impurity_full(sum, sumsq, static_cast<double>(rows.size()), mode);
}

struct BestCandidate {
  std::size_t feature = 0;
  std::size_t column = 0;
  double gain = kNegInf;
};

// Fills row q of thresholds/gains; returns the row's sorted view.
void fill_candidates(const SortedFeature& sf, std::size_t phi, Rng& rng, double* thresholds,
                     double* gains) {
  const double lo = sf.min();
  const double hi = sf.max();
  if (!(lo < hi)) {
    for (std::size_t c = 0; c < phi; ++c) {
      thresholds[c] = lo;
      gains[c] = kNegInf;
    }
    return;
  }
  std::uniform_real_distribution<double> draw(lo, hi);
  for (std::size_t c = 0; c < phi; ++c) {
    thresholds[c] = draw(rng);
    gains[c] = sf.gain_at(thresholds[c]);
  }
}

std::vector<std::uint32_t> all_rows(std::size_t n) {
  std::vector<std::uint32_t> rows(n);
  std::iota(rows.begin(), rows.end(), 0u);
  return rows;
}

void check_table(const Matrix& features, const Matrix& residuals) {
  if (features.rows() != residuals.rows()) {
    throw std::invalid_argument("meta features and residuals differ in row count");
  }
  if (residuals.cols() == 0) throw std::invalid_argument("at least one expert is required");
}

}  // namespace

Impurity node_impurity(const Matrix& residuals, BiasMode mode) {
  if (residuals.rows() == 0) throw std::invalid_argument("node_impurity: empty node");
  if (residuals.cols() == 0) throw std::invalid_argument("node_impurity: no experts");
  std::vector<double> sum(residuals.cols(), 0.0), sumsq(residuals.cols(), 0.0);
  for (std::size_t i = 0; i < residuals.rows(); ++i) {
    for (std::size_t j = 0; j < residuals.cols(); ++j) {
      sum[j] += residuals(i, j);
      sumsq[j] += residuals(i, j) * residuals(i, j);
    }
  }
  return impurity_full(sum, sumsq, static_cast<double>(residuals.rows()), mode);
}

double split_gain(const Matrix& residuals, const std::vector<bool>& left, BiasMode mode) {
  if (left.size() != residuals.rows()) throw std::invalid_argument("split_gain: mask size mismatch");
  std::vector<std::size_t> l, r;
  for (std::size_t i = 0; i < left.size(); ++i) (left[i] ? l : r).push_back(i);
  if (l.empty() || r.empty()) throw std::invalid_argument("split_gain: empty side");
  const double n = static_cast<double>(residuals.rows());
  const double parent = node_impurity(residuals, mode).value;
  const double il = node_impurity(residuals.select_rows(l), mode).value;
  const double ir = node_impurity(residuals.select_rows(r), mode).value;
  return parent - (static_cast<double>(l.size()) / n) * il - (static_cast<double>(r.size()) / n) * ir;
}

CandidateMatrices candidate_matrices(const Matrix& features, const Matrix& residuals, std::size_t phi,
                                     std::uint64_t seed, BiasMode mode) {
  check_table(features, residuals);
  if (features.rows() < 2) throw std::invalid_argument("candidate_matrices: node support below 2");
  if (phi == 0) throw std::invalid_argument("candidate_matrices: phi must be positive");
  std::vector<std::size_t> idx(features.rows());
  std::iota(idx.begin(), idx.end(), 0);
  const SampleTable t = gather(features, residuals, idx);
  const auto rows = all_rows(features.rows());
  const double parent = impurity_of(t, rows, mode).value;
  CandidateMatrices out{Matrix(features.cols(), phi), Matrix(features.cols(), phi)};
  Rng rng = make_rng(seed);
  for (std::size_t q = 0; q < features.cols(); ++q) {
    const SortedFeature sf(t.columns[q], t.residuals, t.m, rows, parent, mode);
    fill_candidates(sf, phi, rng, &out.thresholds(q, 0), &out.gains(q, 0));
  }
  return out;
}

std::optional<std::size_t> select_criterion(const Matrix& gains) {
  if (gains.rows() == 0 || gains.cols() == 0) throw std::invalid_argument("select_criterion: empty matrix");
  std::optional<std::size_t> best;
  double best_gain = kNegInf;
  for (std::size_t q = 0; q < gains.rows(); ++q) {
    for (double g : gains.row(q)) {
      if (g > best_gain) {
        best_gain = g;
        best = q;
      }
    }
  }
  return best;
}

RefineResult golden_refine(const std::function<double(double)>& gain, double lo, double hi,
                           std::size_t rho, double seed_threshold, double seed_gain) {
  if (!(lo < hi)) throw std::invalid_argument("golden_refine: empty bracket");
  RefineResult best{seed_threshold, seed_gain};
  if (rho == 0) return best;
  const double ratio = (std::sqrt(5.0) - 1.0) / 2.0;
  auto consider = [&](double t, double g) {
    if (g > best.gain) best = {t, g};
  };
  double a = lo, b = hi;
  double c = b - ratio * (b - a);
  double d = a + ratio * (b - a);
  double fc = gain(c);
  double fd = gain(d);
  consider(c, fc);
  consider(d, fd);
  for (std::size_t step = 1; step < rho; ++step) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - ratio * (b - a);
      fc = gain(c);
      consider(c, fc);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + ratio * (b - a);
      fd = gain(d);
      consider(d, fd);
    }
  }
  return best;
}

RefineResult golden_refine(const std::function<double(double)>& gain, double lo, double hi,
                           std::size_t rho, double seed_threshold) {
  return golden_refine(gain, lo, hi, rho, seed_threshold, gain(seed_threshold));
}

void InductionConfig::validate() const {
  if (phi == 0) throw std::invalid_argument("phi must be at least 1");
  if (upsilon_floor < 2) throw std::invalid_argument("upsilon floor must be at least 2");
  if (!(epsilon_fraction >= 0.0) || !std::isfinite(epsilon_fraction)) {
    throw std::invalid_argument("epsilon fraction must be a finite non-negative number");
  }
  if (!(upsilon_fraction >= 0.0) || !std::isfinite(upsilon_fraction)) {
    throw std::invalid_argument("upsilon fraction must be a finite non-negative number");
  }
}

MetaDecisionTree::MetaDecisionTree(std::vector<MetaTreeNode> nodes, std::size_t feature_count,
                                   std::size_t expert_count, double epsilon, std::size_t upsilon)
    : nodes_(std::move(nodes)),
      feature_count_(feature_count),
      expert_count_(expert_count),
      epsilon_(epsilon),
      upsilon_(upsilon) {
  if (nodes_.empty()) throw std::invalid_argument("meta tree needs at least one node");
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.expert >= expert_count_) throw std::invalid_argument("meta tree leaf names an unknown expert");
    if (n.is_leaf()) continue;
    if (static_cast<std::size_t>(n.feature) >= feature_count_ || n.left <= i || n.right <= i ||
        n.left >= nodes_.size() || n.right >= nodes_.size()) {
      throw std::invalid_argument("meta tree has a malformed internal node");
    }
  }
}

std::size_t MetaDecisionTree::depth() const {
  std::size_t d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

std::size_t MetaDecisionTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const MetaTreeNode& n) { return n.is_leaf(); }));
}

std::size_t MetaDecisionTree::leaf_for(std::span<const double> z) const {
  if (z.size() != feature_count_) throw std::invalid_argument("meta vector does not match the tree");
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    i = z[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right;
  }
  return i;
}

std::string MetaDecisionTree::dump() const {
  std::string out;
  char buf[256];
  std::snprintf(buf, sizeof buf, "metatree nodes=%zu features=%zu experts=%zu epsilon=%.17g upsilon=%zu\n",
                nodes_.size(), feature_count_, expert_count_, epsilon_, upsilon_);
  out += buf;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.is_leaf()) {
      std::snprintf(buf, sizeof buf, "%zu leaf depth=%zu expert=%zu support=%zu\n", i, n.depth,
                    n.expert, n.support);
    } else {
      std::snprintf(buf, sizeof buf,
                    "%zu split depth=%zu feature=%d threshold=%.17g gain=%.17g support=%zu left=%u right=%u\n",
                    i, n.depth, n.feature, n.threshold, n.gain, n.support, n.left, n.right);
    }
    out += buf;
  }
  return out;
}

MetaDecisionTree induce_tree(const Matrix& features, const Matrix& residuals,
                             std::span<const std::size_t> rows, const InductionConfig& config) {
  config.validate();
  check_table(features, residuals);
  if (rows.empty()) throw std::invalid_argument("induce_tree: empty sample");
  if (features.cols() == 0) throw std::invalid_argument("induce_tree: no meta-features");

  const SampleTable t = gather(features, residuals, rows);
  const std::size_t n = rows.size();
  const std::size_t q_count = features.cols();
  const std::size_t upsilon = std::max(
      config.upsilon_floor,
      static_cast<std::size_t>(std::ceil(static_cast<double>(n) * config.upsilon_fraction)));
  Rng rng = make_rng(config.seed);

  struct Pending {
    std::uint32_t node;
    std::vector<std::uint32_t> rows;
  };
  std::vector<MetaTreeNode> nodes(1);
  std::vector<Pending> stack;
  stack.push_back({0, all_rows(n)});
  double epsilon = 0.0;
  std::vector<double> thresholds(config.phi), gains(config.phi);
  std::vector<double> best_row(config.phi);

  while (!stack.empty()) {
    Pending p = std::move(stack.back());
    stack.pop_back();
    const Impurity imp = impurity_of(t, p.rows, config.bias);
    if (p.node == 0) epsilon = std::abs(imp.value) * config.epsilon_fraction;
    {
      auto& node = nodes[p.node];
      node.support = p.rows.size();
      node.expert = imp.expert;
      node.squared_bias = imp.squared_bias;
    }
    if (p.rows.size() < upsilon || imp.value <= 0.0) continue;

    BestCandidate best;
    for (std::size_t q = 0; q < q_count; ++q) {
      const SortedFeature sf(t.columns[q], t.residuals, t.m, p.rows, imp.value, config.bias);
      fill_candidates(sf, config.phi, rng, thresholds.data(), gains.data());
      for (std::size_t c = 0; c < config.phi; ++c) {
        if (gains[c] > best.gain) {
          best = {q, c, gains[c]};
          best_row = thresholds;
        }
      }
    }
    if (best.gain == kNegInf) continue;

    const SortedFeature sf(t.columns[best.feature], t.residuals, t.m, p.rows, imp.value, config.bias);
    const double seed_t = best_row[best.column];
    double lo = sf.min(), hi = sf.max();
    for (double b : best_row) {
      if (b < seed_t) lo = std::max(lo, b);
      if (b > seed_t) hi = std::min(hi, b);
    }
    RefineResult refined{seed_t, best.gain};
    if (lo < hi) {
      refined = golden_refine([&](double x) { return sf.gain_at(x); }, lo, hi, config.rho, seed_t,
                              best.gain);
    }
    if (!(refined.gain > 0.0) || refined.gain < epsilon) continue;

    std::vector<std::uint32_t> left_rows, right_rows;
    const auto& column = t.columns[best.feature];
    for (std::uint32_t r : p.rows) (column[r] <= refined.threshold ? left_rows : right_rows).push_back(r);
    if (left_rows.empty() || right_rows.empty()) continue;

    const std::size_t depth = nodes[p.node].depth;
    const auto left_id = static_cast<std::uint32_t>(nodes.size());
    const auto right_id = left_id + 1;
    nodes.resize(nodes.size() + 2);
    auto& node = nodes[p.node];
    node.feature = static_cast<int>(best.feature);
    node.threshold = refined.threshold;
    node.gain = refined.gain;
    node.left = left_id;
    node.right = right_id;
    nodes[left_id].depth = depth + 1;
    nodes[right_id].depth = depth + 1;
    // Right pushed first so the left subtree is expanded (and draws randomness) first.
    stack.push_back({right_id, std::move(right_rows)});
    stack.push_back({left_id, std::move(left_rows)});
  }
  return MetaDecisionTree(std::move(nodes), q_count, t.m, epsilon, upsilon);
}

MetaDecisionTree induce_tree(const Matrix& features, const Matrix& residuals,
                             const InductionConfig& config) {
  std::vector<std::size_t> rows(features.rows());
  std::iota(rows.begin(), rows.end(), 0);
  return induce_tree(features, residuals, rows, config);
}

}  // namespace metabags
