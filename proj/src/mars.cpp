#include "metabags/mars.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "metabags/stats.hpp"

namespace metabags {

IntervalInfo locate_interval(const FeatureIntervals& intervals, double coordinate) {
  const auto& e = intervals.edges;
  if (e.empty()) throw std::invalid_argument("locate_interval: empty partition");
  IntervalInfo info;
  if (e.size() == 1) {
    info.lower = std::min(e[0], coordinate);
    info.upper = std::max(e[0], coordinate);
    info.mass = intervals.mass.empty() ? 1.0 : intervals.mass[0];
  } else {
    const std::size_t count = e.size() - 1;
    std::size_t i;
    if (coordinate < e.front()) {
      i = 0;
    } else if (coordinate >= e.back()) {
      i = count - 1;
    } else {
      i = static_cast<std::size_t>(std::upper_bound(e.begin(), e.end(), coordinate) - e.begin()) - 1;
    }
    info.lower = std::min(e[i], coordinate);
    info.upper = std::max(e[i + 1], coordinate);
    info.mass = intervals.mass[i];
  }
  info.width = info.upper - info.lower;
  info.edge_distance = std::min(coordinate - info.lower, info.upper - coordinate);
  return info;
}

MarsModel::MarsModel(double intercept, std::vector<HingeTerm> terms,
                     std::vector<double> coefficients, std::vector<FeatureIntervals> intervals)
    : intercept_(intercept),
      terms_(std::move(terms)),
      coefficients_(std::move(coefficients)),
      intervals_(std::move(intervals)) {
  if (terms_.size() != coefficients_.size()) {
    throw std::invalid_argument("mars: term and coefficient counts differ");
  }
}

double MarsModel::predict(std::span<const double> x) const {
  check_dimension(x);
  double out = intercept_;
  for (std::size_t t = 0; t < terms_.size(); ++t) out += coefficients_[t] * terms_[t].evaluate(x);
  return out;
}

std::vector<double> MarsModel::knots(std::size_t feature) const {
  std::vector<double> out;
  for (const auto& t : terms_) {
    if (t.feature == feature) out.push_back(t.knot);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<double> MarsModel::feature_contributions(std::span<const double> x) const {
  check_dimension(x);
  std::vector<double> sums(dimension(), 0.0);
  for (std::size_t t = 0; t < terms_.size(); ++t) {
    sums[terms_[t].feature] += coefficients_[t] * terms_[t].evaluate(x);
  }
  for (auto& s : sums) s = std::abs(s);
  return sums;
}

std::size_t MarsModel::dominant_feature(std::span<const double> x) const {
  const auto c = feature_contributions(x);
  if (c.empty()) return 0;
  return static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

void hinge_column(const std::vector<double>& x, double knot, int direction,
                  std::vector<double>& out) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = direction > 0 ? x[i] - knot : knot - x[i];
    out[i] = v > 0.0 ? v : 0.0;
  }
}

// Candidate hinge pair with cached projections onto the orthonormal basis.
struct Candidate {
  std::size_t feature;
  double knot;
  double norm_up, norm_down, cross;  // |h+|^2, |h-|^2, h+.h-
  std::vector<double> proj_up, proj_down;
  bool used = false;
};

// Orthogonalizes v against the basis (two passes) and appends it when it is
// not numerically dependent. Returns true when appended.
bool append_orthonormal(std::vector<std::vector<double>>& basis, std::vector<double> v) {
  const double original = dot(v, v);
  if (original <= 0.0) return false;
  for (int pass = 0; pass < 2; ++pass) {
    for (const auto& q : basis) {
      const double c = dot(q, v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] -= c * q[i];
    }
  }
  const double remaining = dot(v, v);
  if (remaining <= 1e-10 * original) return false;
  const double inv = 1.0 / std::sqrt(remaining);
  for (auto& x : v) x *= inv;
  basis.push_back(std::move(v));
  return true;
}

}  // namespace

MarsModel train_mars_lite(const Dataset& data, std::size_t max_basis,
                          std::size_t candidate_knots) {
  if (max_basis == 0) throw std::invalid_argument("mars: max_basis must be >= 1");
  if (candidate_knots == 0) throw std::invalid_argument("mars: candidate_knots must be >= 1");
  const std::size_t n = data.size();
  const std::size_t p = data.dimension();
  const auto& y = data.target();

  std::vector<std::vector<double>> columns(p);
  std::vector<double> col_min(p), col_max(p);
  for (std::size_t f = 0; f < p; ++f) {
    columns[f] = data.features().column(f);
    auto [mn, mx] = std::minmax_element(columns[f].begin(), columns[f].end());
    col_min[f] = *mn;
    col_max[f] = *mx;
  }

  // Knot grid: interpolated quantiles k/(K+1), strictly inside the range.
  std::vector<Candidate> candidates;
  std::vector<double> up(n), down(n);
  for (std::size_t f = 0; f < p; ++f) {
    std::vector<double> sorted = columns[f];
    std::sort(sorted.begin(), sorted.end());
    std::vector<double> grid;
    for (std::size_t k = 1; k <= candidate_knots; ++k) {
      const double q = quantile_sorted(sorted, static_cast<double>(k) /
                                                   static_cast<double>(candidate_knots + 1));
      if (q > col_min[f] && q < col_max[f]) grid.push_back(q);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    for (double t : grid) {
      hinge_column(columns[f], t, 1, up);
      hinge_column(columns[f], t, -1, down);
      candidates.push_back({f, t, dot(up, up), dot(down, down), dot(up, down), {}, {}});
    }
  }

  std::vector<std::vector<double>> basis;
  append_orthonormal(basis, std::vector<double>(n, 1.0));
  const double y_mean = mean(y);
  std::vector<double> residual(n);
  for (std::size_t i = 0; i < n; ++i) residual[i] = y[i] - y_mean;
  const double total_ss = dot(residual, residual);
  auto rmse = [&]() { return std::sqrt(dot(residual, residual) / static_cast<double>(n)); };

  std::vector<double> trace{rmse()};
  std::vector<HingeTerm> terms;
  std::size_t synced = 0;

  for (std::size_t stage = 0; stage < max_basis && !candidates.empty(); ++stage) {
    double best_reduction = 0.0;
    std::size_t best = candidates.size();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
      Candidate& cand = candidates[c];
      hinge_column(columns[cand.feature], cand.knot, 1, up);
      hinge_column(columns[cand.feature], cand.knot, -1, down);
      for (std::size_t b = synced; b < basis.size(); ++b) {
        cand.proj_up.push_back(dot(basis[b], up));
        cand.proj_down.push_back(dot(basis[b], down));
      }
      if (cand.used) continue;
      // Gram matrix of both hinges after removing the current span.
      double aa = cand.norm_up, bb = cand.norm_down, ab = cand.cross;
      for (std::size_t b = 0; b < basis.size(); ++b) {
        aa -= cand.proj_up[b] * cand.proj_up[b];
        bb -= cand.proj_down[b] * cand.proj_down[b];
        ab -= cand.proj_up[b] * cand.proj_down[b];
      }
      // The residual is orthogonal to the basis, so h.r equals (projected h).r.
      const double ga = dot(up, residual), gb = dot(down, residual);
      const bool keep_a = aa > 1e-9 * cand.norm_up;
      const bool keep_b = bb > 1e-9 * cand.norm_down;
      double reduction = 0.0;
      const double det = aa * bb - ab * ab;
      if (keep_a && keep_b && det > 1e-9 * aa * bb) {
        reduction = (bb * ga * ga - 2.0 * ab * ga * gb + aa * gb * gb) / det;
      } else if (keep_a) {
        reduction = ga * ga / aa;
      } else if (keep_b) {
        reduction = gb * gb / bb;
      }
      if (reduction > best_reduction) {
        best_reduction = reduction;
        best = c;
      }
    }
    synced = basis.size();
    if (best == candidates.size() || !(best_reduction > 1e-12 * total_ss)) break;

    Candidate& chosen = candidates[best];
    chosen.used = true;
    terms.push_back({chosen.feature, chosen.knot, 1});
    terms.push_back({chosen.feature, chosen.knot, -1});
    const std::size_t before = basis.size();
    hinge_column(columns[chosen.feature], chosen.knot, 1, up);
    append_orthonormal(basis, up);
    hinge_column(columns[chosen.feature], chosen.knot, -1, down);
    append_orthonormal(basis, down);
    for (std::size_t b = before; b < basis.size(); ++b) {
      const double c = dot(basis[b], residual);
      for (std::size_t i = 0; i < n; ++i) residual[i] -= c * basis[b][i];
    }
    trace.push_back(rmse());
  }

  // Least-squares refit of intercept and hinge coefficients (minimum norm).
  Eigen::MatrixXd design(n, terms.size() + 1);
  Eigen::VectorXd target(n);
  for (std::size_t i = 0; i < n; ++i) {
    design(static_cast<Eigen::Index>(i), 0) = 1.0;
    auto x = data.row(i);
    for (std::size_t t = 0; t < terms.size(); ++t) {
      design(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(t + 1)) = terms[t].evaluate(x);
    }
    target(static_cast<Eigen::Index>(i)) = y[i];
  }
  Eigen::VectorXd solution = design.completeOrthogonalDecomposition().solve(target);
  std::vector<double> coefficients(terms.size());
  for (std::size_t t = 0; t < terms.size(); ++t) {
    coefficients[t] = solution(static_cast<Eigen::Index>(t + 1));
  }
  const double intercept = terms.empty() ? y_mean : solution(0);

  std::vector<FeatureIntervals> intervals(p);
  for (std::size_t f = 0; f < p; ++f) {
    FeatureIntervals& fi = intervals[f];
    fi.edges.push_back(col_min[f]);
    std::vector<double> ks;
    for (const auto& t : terms) {
      if (t.feature == f && t.knot > col_min[f] && t.knot < col_max[f]) ks.push_back(t.knot);
    }
    std::sort(ks.begin(), ks.end());
    ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
    fi.edges.insert(fi.edges.end(), ks.begin(), ks.end());
    if (col_max[f] > col_min[f]) fi.edges.push_back(col_max[f]);
    const std::size_t count = std::max<std::size_t>(fi.edges.size() - 1, 1);
    std::vector<double> hits(count, 0.0);
    for (double v : columns[f]) {
      std::size_t i = 0;
      if (fi.edges.size() > 1) {
        i = static_cast<std::size_t>(std::upper_bound(fi.edges.begin(), fi.edges.end(), v) -
                                     fi.edges.begin());
        i = std::min(i == 0 ? 0 : i - 1, count - 1);
      }
      hits[i] += 1.0;
    }
    for (auto& h : hits) h /= static_cast<double>(n);
    fi.mass = std::move(hits);
  }

  MarsModel model(intercept, std::move(terms), std::move(coefficients), std::move(intervals));
  model.set_rmse_trace(std::move(trace));
  return model;
}

}  // namespace metabags
