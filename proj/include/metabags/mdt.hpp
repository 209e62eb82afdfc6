#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "metabags/matrix.hpp"

namespace metabags {

/// How the per-expert bias at a node is measured.
///   SquaredMean: (mean residual)^2   (default)
///   MeanSquared: mean(residual^2)
enum class BiasMode { SquaredMean, MeanSquared };

struct Impurity {
  double value = 0.0;       // min over experts of the squared bias
  std::size_t expert = 0;   // argmin; ties (within 1e-20 x node MSE scale) by lower MSE, then index
  std::vector<double> squared_bias;
};

/// Impurity of a node holding every row of `residuals` (rows x experts).
Impurity node_impurity(const Matrix& residuals, BiasMode mode = BiasMode::SquaredMean);

/// I(p) - P_l I(l) - P_r I(r). `left` has one flag per residual row.
/// Throws std::invalid_argument if either side is empty.
double split_gain(const Matrix& residuals, const std::vector<bool>& left,
                  BiasMode mode = BiasMode::SquaredMean);

struct CandidateMatrices {
  Matrix thresholds;  // Q x phi
  Matrix gains;       // Q x phi, -inf where a side would be empty
};

/// phi uniform thresholds per meta-feature over its node-local [min, max].
CandidateMatrices candidate_matrices(const Matrix& features, const Matrix& residuals,
                                     std::size_t phi, std::uint64_t seed,
                                     BiasMode mode = BiasMode::SquaredMean);

/// Row holding the largest gain, ties to the lower row. nullopt when every
/// entry is -inf (no valid split).
std::optional<std::size_t> select_criterion(const Matrix& gains);

struct RefineResult {
  double threshold = 0.0;
  double gain = 0.0;
};

/// At most `rho` golden-section steps maximizing `gain` on [lo, hi]. The seed
/// point counts as evaluated, so the result is never worse than it.
RefineResult golden_refine(const std::function<double(double)>& gain, double lo, double hi,
                           std::size_t rho, double seed_threshold, double seed_gain);
RefineResult golden_refine(const std::function<double(double)>& gain, double lo, double hi,
                           std::size_t rho, double seed_threshold);

struct InductionConfig {
  std::size_t phi = 10;
  std::size_t rho = 3;
  double epsilon_fraction = 1e-2;  // epsilon = |I(root)| * fraction
  double upsilon_fraction = 1e-2;  // upsilon = max(floor, ceil(N * fraction))
  std::size_t upsilon_floor = 2;
  BiasMode bias = BiasMode::SquaredMean;
  std::uint64_t seed = 0;

  void validate() const;
};

struct MetaTreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::uint32_t left = 0;
  std::uint32_t right = 0;
  std::size_t support = 0;
  std::size_t expert = 0;
  double gain = 0.0;
  std::size_t depth = 0;
  std::vector<double> squared_bias;

  bool is_leaf() const noexcept { return feature < 0; }
};

class MetaDecisionTree {
 public:
  MetaDecisionTree() = default;
  MetaDecisionTree(std::vector<MetaTreeNode> nodes, std::size_t feature_count,
                   std::size_t expert_count, double epsilon, std::size_t upsilon);

  const std::vector<MetaTreeNode>& nodes() const noexcept { return nodes_; }
  std::size_t feature_count() const noexcept { return feature_count_; }
  std::size_t expert_count() const noexcept { return expert_count_; }
  double epsilon() const noexcept { return epsilon_; }
  std::size_t upsilon() const noexcept { return upsilon_; }

  std::size_t depth() const;
  std::size_t leaf_count() const;

  /// Node index of the leaf reached by `z`; goes left when z[feature] <= threshold.
  std::size_t leaf_for(std::span<const double> z) const;
  std::size_t route(std::span<const double> z) const { return nodes_[leaf_for(z)].expert; }

  /// One line per node, in node order.
  std::string dump() const;

 private:
  std::vector<MetaTreeNode> nodes_;
  std::size_t feature_count_ = 0;
  std::size_t expert_count_ = 0;
  double epsilon_ = 0.0;
  std::size_t upsilon_ = 2;
};

/// Grows one tree on the listed rows (duplicates allowed) of the meta table.
MetaDecisionTree induce_tree(const Matrix& features, const Matrix& residuals,
                             std::span<const std::size_t> rows, const InductionConfig& config);
MetaDecisionTree induce_tree(const Matrix& features, const Matrix& residuals,
                             const InductionConfig& config);

}  // namespace metabags
