#include "metabags/knn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <stdexcept>

namespace metabags {

namespace {

constexpr std::uint32_t kLeafSize = 16;

struct Candidate {
  double dist2;
  std::size_t index;
  bool operator<(const Candidate& o) const noexcept {
    return dist2 < o.dist2 || (dist2 == o.dist2 && index < o.index);
  }
};

// Max-heap of the k best candidates seen so far.
class BestK {
 public:
  explicit BestK(std::size_t k) : k_(k) {}

  bool full() const noexcept { return heap_.size() == k_; }
  double worst() const noexcept { return heap_.top().dist2; }

  void offer(Candidate c) {
    if (!full()) {
      heap_.push(c);
    } else if (c < heap_.top()) {
      heap_.pop();
      heap_.push(c);
    }
  }

  std::vector<Neighbor> sorted() {
    std::vector<Candidate> all;
    while (!heap_.empty()) {
      all.push_back(heap_.top());
      heap_.pop();
    }
    std::sort(all.begin(), all.end());
    std::vector<Neighbor> out(all.size());
    for (std::size_t i = 0; i < all.size(); ++i) out[i] = {all[i].index, std::sqrt(all[i].dist2)};
    return out;
  }

 private:
  std::size_t k_;
  std::priority_queue<Candidate> heap_;
};

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

}  // namespace

NeighborIndex::NeighborIndex(const Matrix& raw_features)
    : transform_(raw_features), points_(transform_.apply(raw_features)) {
  if (points_.rows() == 0) throw std::invalid_argument("neighbor index needs at least one point");
  order_.resize(points_.rows());
  std::iota(order_.begin(), order_.end(), 0u);
  build(0, static_cast<std::uint32_t>(order_.size()));
}

std::uint32_t NeighborIndex::build(std::uint32_t begin, std::uint32_t end) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({begin, end, -1, 0.0, 0, 0});
  if (end - begin <= kLeafSize) return id;

  std::size_t axis = 0;
  double widest = -1.0;
  for (std::size_t c = 0; c < points_.cols(); ++c) {
    double lo = points_(order_[begin], c), hi = lo;
    for (std::uint32_t i = begin; i < end; ++i) {
      lo = std::min(lo, points_(order_[i], c));
      hi = std::max(hi, points_(order_[i], c));
    }
    if (hi - lo > widest) {
      widest = hi - lo;
      axis = c;
    }
  }
  if (widest <= 0.0) return id;

  const std::uint32_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) { return points_(a, axis) < points_(b, axis); });
  const double split = points_(order_[mid], axis);
  const std::uint32_t left = build(begin, mid);
  const std::uint32_t right = build(mid, end);
  KdNode& node = nodes_[id];
  node.axis = static_cast<std::int32_t>(axis);
  node.split = split;
  node.left = left;
  node.right = right;
  return id;
}

std::vector<Neighbor> NeighborIndex::nearest(std::span<const double> raw_query,
                                             std::size_t k) const {
  if (k == 0 || k > size()) throw std::invalid_argument("nearest: k must lie in [1, N]");
  const std::vector<double> q = transform_.apply(raw_query);
  BestK best(k);

  // Left subtree holds values <= split, right subtree values >= split, so the
  // plane distance lower-bounds every point on the far side.
  auto visit = [&](auto&& self, std::uint32_t id) -> void {
    const KdNode& node = nodes_[id];
    if (node.axis < 0) {
      for (std::uint32_t i = node.begin; i < node.end; ++i) {
        const std::uint32_t p = order_[i];
        best.offer({squared_distance(q, points_.row(p)), p});
      }
      return;
    }
    const double diff = q[static_cast<std::size_t>(node.axis)] - node.split;
    const std::uint32_t near = diff <= 0.0 ? node.left : node.right;
    const std::uint32_t far = diff <= 0.0 ? node.right : node.left;
    self(self, near);
    if (!best.full() || diff * diff <= best.worst()) self(self, far);
  };
  visit(visit, 0);
  return best.sorted();
}

std::vector<Neighbor> NeighborIndex::brute_force(std::span<const double> raw_query,
                                                 std::size_t k) const {
  if (k == 0 || k > size()) throw std::invalid_argument("nearest: k must lie in [1, N]");
  const std::vector<double> q = transform_.apply(raw_query);
  std::vector<Candidate> all(size());
  for (std::size_t i = 0; i < size(); ++i) all[i] = {squared_distance(q, points_.row(i)), i};
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k), all.end());
  std::vector<Neighbor> out(k);
  for (std::size_t i = 0; i < k; ++i) out[i] = {all[i].index, std::sqrt(all[i].dist2)};
  return out;
}

KnnModel::KnnModel(const Dataset& data, std::size_t k)
    : raw_(data.features()), targets_(data.target()), index_(data.features()), k_(k) {
  if (k == 0 || k > data.size()) throw std::invalid_argument("knn: k must lie in [1, N]");
}

double KnnModel::predict(std::span<const double> x) const {
  check_dimension(x);
  double sum = 0.0;
  for (const auto& nb : index_.nearest(x, k_)) sum += targets_[nb.index];
  return sum / static_cast<double>(k_);
}

KnnModel train_knn(const Dataset& data, std::size_t k) { return KnnModel(data, k); }

}  // namespace metabags
