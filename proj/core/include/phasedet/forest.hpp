#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phasedet/features.hpp"
#include "phasedet/phase.hpp"

namespace phasedet {

struct ForestParams {
  int n_trees = 80;
  int max_depth = 9;
  // 0 resolves to max(1, round(n_features * 8 / 17)) at training time, which
  // keeps the 8-of-17 ratio across feature modes.
  int features_per_node = 0;
  int min_samples_leaf = 1;
  std::uint64_t seed = 0;
};

int default_features_per_node(int n_features);

// Internal node when left/right are set, leaf otherwise. Samples route left
// iff feature value <= threshold.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  std::unique_ptr<TreeNode> left;
  std::unique_ptr<TreeNode> right;
  int label = -1;
  std::array<std::int64_t, kNumPhases> class_counts{};

  bool is_leaf() const { return left == nullptr; }
  int depth() const;
};

struct RandomForest {
  std::vector<std::unique_ptr<TreeNode>> trees;
  ForestParams params;  // features_per_node holds the resolved value
  std::vector<std::string> feature_names;

  std::size_t n_features() const { return feature_names.size(); }
};

struct SplitChoice {
  int feature = -1;
  double threshold = 0.0;
  double impurity_decrease = 0.0;
};

// 1 - sum(p_c^2). Throws DataError when all counts are zero.
double gini_impurity(std::span<const std::int64_t> class_counts);

// Minimizes weighted child Gini impurity over the candidate features, with
// thresholds at midpoints between consecutive distinct values. Ties break to
// the lower feature index, then the lower threshold. Returns nullopt when the
// node is pure or no split reduces impurity.
std::optional<SplitChoice> best_split(std::span<const std::size_t> samples,
                                      const FeatureMatrix& features, std::span<const int> labels,
                                      std::span<const int> candidate_features,
                                      int min_samples_leaf = 1);

// Bootstrap sample of size n drawn with replacement from the stream derived
// from (forest seed, tree index).
std::vector<std::size_t> bootstrap_indices(std::uint64_t forest_seed, int tree_index,
                                           std::size_t n);

// Grows one tree from an explicit bootstrap. Per-node feature subsets come
// from streams derived from (tree_seed, node counter), so the tree is a pure
// function of its inputs.
std::unique_ptr<TreeNode> train_tree(const FeatureMatrix& features, std::span<const int> labels,
                                     std::span<const std::size_t> bootstrap,
                                     const ForestParams& params, std::uint64_t tree_seed);

RandomForest train_forest(const FeatureMatrix& features, std::span<const int> labels,
                          const ForestParams& params, int jobs = 1);

int tree_predict(const TreeNode& root, std::span<const double> row);

// Majority vote; ties break to the lowest phase index.
int forest_predict(const RandomForest& model, std::span<const double> row);

// Fraction of trees voting for each phase; sums to 1.
std::array<double, kNumPhases> forest_vote_distribution(const RandomForest& model,
                                                        std::span<const double> row);

std::string forest_to_json(const RandomForest& model);
RandomForest forest_from_json(const std::string& text);
void save_forest(const RandomForest& model, const std::filesystem::path& path);
RandomForest load_forest(const std::filesystem::path& path);

}  // namespace phasedet
