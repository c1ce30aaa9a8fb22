#include "phasedet/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <thread>

#include <nlohmann/json.hpp>

#include "phasedet/error.hpp"
#include "phasedet/io.hpp"
#include "phasedet/rng.hpp"

namespace phasedet {

namespace {

// Stream tags for seed derivation.
constexpr std::uint64_t kTreeStream = 1;
constexpr std::uint64_t kBootstrapStream = 2;
constexpr std::uint64_t kNodeStream = 3;

void validate_params(const ForestParams& params, std::size_t n_features) {
  if (params.n_trees < 1) throw DataError("n_trees must be >= 1");
  if (params.max_depth < 1) throw DataError("max_depth must be >= 1");
  if (params.min_samples_leaf < 1) throw DataError("min_samples_leaf must be >= 1");
  if (params.features_per_node < 0 ||
      params.features_per_node > static_cast<int>(n_features)) {
    throw DataError("features_per_node must be in 1..n_features");
  }
}

std::array<std::int64_t, kNumPhases> count_classes(std::span<const std::size_t> samples,
                                                   std::span<const int> labels) {
  std::array<std::int64_t, kNumPhases> counts{};
  for (const std::size_t s : samples) ++counts[static_cast<std::size_t>(labels[s])];
  return counts;
}

int majority_class(const std::array<std::int64_t, kNumPhases>& counts) {
  int best = 0;
  for (int c = 1; c < kNumPhases; ++c) {
    if (counts[static_cast<std::size_t>(c)] > counts[static_cast<std::size_t>(best)]) best = c;
  }
  return best;
}

struct TreeBuilder {
  const FeatureMatrix& features;
  std::span<const int> labels;
  const ForestParams& params;
  std::uint64_t tree_seed;
  std::uint64_t node_counter = 0;
  std::vector<int> candidate_buf;

  std::unique_ptr<TreeNode> build(std::vector<std::size_t>& samples, int depth) {
    auto node = std::make_unique<TreeNode>();
    node->class_counts = count_classes(samples, labels);
    node->label = majority_class(node->class_counts);

    const std::uint64_t node_seed = derive_seed(tree_seed, kNodeStream, node_counter++);

    const bool pure =
        node->class_counts[static_cast<std::size_t>(node->label)] ==
        static_cast<std::int64_t>(samples.size());
    if (depth >= params.max_depth || pure || samples.size() < 2) {
      return node;
    }

    // Fresh random feature subset for this node.
    const int n_features = static_cast<int>(features.n_cols);
    candidate_buf.resize(static_cast<std::size_t>(n_features));
    std::iota(candidate_buf.begin(), candidate_buf.end(), 0);
    Rng rng(node_seed);
    const int k = params.features_per_node;
    for (int i = 0; i < k; ++i) {
      const std::size_t j =
          static_cast<std::size_t>(i) +
          rng.uniform_index(static_cast<std::size_t>(n_features - i));
      std::swap(candidate_buf[static_cast<std::size_t>(i)], candidate_buf[j]);
    }
    std::sort(candidate_buf.begin(), candidate_buf.begin() + k);

    const auto split = best_split(samples, features, labels,
                                  std::span<const int>(candidate_buf.data(),
                                                       static_cast<std::size_t>(k)),
                                  params.min_samples_leaf);
    if (!split) return node;

    node->feature = split->feature;
    node->threshold = split->threshold;

    std::vector<std::size_t> left_samples, right_samples;
    left_samples.reserve(samples.size());
    right_samples.reserve(samples.size());
    for (const std::size_t s : samples) {
      if (features.at(s, static_cast<std::size_t>(split->feature)) <= split->threshold) {
        left_samples.push_back(s);
      } else {
        right_samples.push_back(s);
      }
    }
    samples.clear();
    samples.shrink_to_fit();

    node->left = build(left_samples, depth + 1);
    node->right = build(right_samples, depth + 1);
    return node;
  }
};

}  // namespace

int default_features_per_node(int n_features) {
  const int k = static_cast<int>(std::lround(n_features * 8.0 / 17.0));
  return std::max(1, std::min(k, n_features));
}

int TreeNode::depth() const {
  if (is_leaf()) return 0;
  return 1 + std::max(left->depth(), right->depth());
}

double gini_impurity(std::span<const std::int64_t> class_counts) {
  std::int64_t total = 0;
  for (const std::int64_t c : class_counts) {
    if (c < 0) throw DataError("gini_impurity: negative count");
    total += c;
  }
  if (total == 0) throw DataError("gini_impurity: all counts zero");
  double sum_sq = 0.0;
  for (const std::int64_t c : class_counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

namespace {

// Split quality as exact integers: a split is better when
// sum_sq_left/n_left + sum_sq_right/n_right is larger. Exact comparison makes
// the documented tie rules independent of floating-point rounding.
struct SplitQuality {
  std::int64_t sum_sq_left = 0;
  std::int64_t sum_sq_right = 0;
  std::int64_t n_left = 0;
  std::int64_t n_right = 0;

  __int128 numerator() const {
    return static_cast<__int128>(sum_sq_left) * n_right +
           static_cast<__int128>(sum_sq_right) * n_left;
  }
  __int128 denominator() const { return static_cast<__int128>(n_left) * n_right; }
};

bool strictly_better(const SplitQuality& a, const SplitQuality& b) {
  return a.numerator() * b.denominator() > b.numerator() * a.denominator();
}

bool improves_on_parent(const SplitQuality& a, std::int64_t parent_sum_sq, std::int64_t n) {
  return a.numerator() * n > static_cast<__int128>(parent_sum_sq) * a.denominator();
}

std::int64_t sum_of_squares(const std::array<std::int64_t, kNumPhases>& counts) {
  std::int64_t sq = 0;
  for (const std::int64_t c : counts) sq += c * c;
  return sq;
}

}  // namespace

std::optional<SplitChoice> best_split(std::span<const std::size_t> samples,
                                      const FeatureMatrix& features, std::span<const int> labels,
                                      std::span<const int> candidate_features,
                                      int min_samples_leaf) {
  if (samples.size() < 2 || candidate_features.empty()) return std::nullopt;

  const std::int64_t n = static_cast<std::int64_t>(samples.size());
  const auto parent_counts = count_classes(samples, labels);
  const std::int64_t parent_sum_sq = sum_of_squares(parent_counts);
  const double parent_gini = gini_impurity(parent_counts);
  if (parent_gini == 0.0) return std::nullopt;

  std::vector<int> ordered(candidate_features.begin(), candidate_features.end());
  std::sort(ordered.begin(), ordered.end());
  ordered.erase(std::unique(ordered.begin(), ordered.end()), ordered.end());

  std::optional<SplitChoice> best;
  SplitQuality best_quality;

  std::vector<std::pair<double, int>> column(samples.size());
  for (const int f : ordered) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      column[i] = {features.at(samples[i], static_cast<std::size_t>(f)),
                   labels[samples[i]]};
    }
    std::sort(column.begin(), column.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    std::array<std::int64_t, kNumPhases> left_counts{};
    auto right_counts = parent_counts;
    std::int64_t n_left = 0;

    std::size_t i = 0;
    while (i < column.size()) {
      // Move the whole run of equal values to the left side.
      const double value = column[i].first;
      while (i < column.size() && column[i].first == value) {
        ++left_counts[static_cast<std::size_t>(column[i].second)];
        --right_counts[static_cast<std::size_t>(column[i].second)];
        ++n_left;
        ++i;
      }
      if (i == column.size()) break;

      if (n_left < min_samples_leaf || n - n_left < min_samples_leaf) continue;

      const SplitQuality quality{sum_of_squares(left_counts), sum_of_squares(right_counts),
                                 n_left, n - n_left};
      if (!improves_on_parent(quality, parent_sum_sq, n)) continue;
      if (best && !strictly_better(quality, best_quality)) continue;

      const double next_value = column[i].first;
      double threshold = value + (next_value - value) / 2.0;
      if (!(threshold < next_value)) threshold = value;  // adjacent doubles
      const double child_gini =
          1.0 - (static_cast<double>(quality.sum_sq_left) / static_cast<double>(quality.n_left) +
                 static_cast<double>(quality.sum_sq_right) / static_cast<double>(quality.n_right)) /
                    static_cast<double>(n);
      best = SplitChoice{f, threshold, parent_gini - child_gini};
      best_quality = quality;
    }
  }
  return best;
}

std::vector<std::size_t> bootstrap_indices(std::uint64_t forest_seed, int tree_index,
                                           std::size_t n) {
  const std::uint64_t tree_seed =
      derive_seed(forest_seed, kTreeStream, static_cast<std::uint64_t>(tree_index));
  Rng rng(derive_seed(tree_seed, kBootstrapStream));
  std::vector<std::size_t> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = rng.uniform_index(n);
  return out;
}

std::unique_ptr<TreeNode> train_tree(const FeatureMatrix& features, std::span<const int> labels,
                                     std::span<const std::size_t> bootstrap,
                                     const ForestParams& params, std::uint64_t tree_seed) {
  std::vector<std::size_t> samples(bootstrap.begin(), bootstrap.end());
  TreeBuilder builder{features, labels, params, tree_seed};
  return builder.build(samples, 0);
}

RandomForest train_forest(const FeatureMatrix& features, std::span<const int> labels,
                          const ForestParams& params, int jobs) {
  if (features.n_rows == 0 || labels.empty()) throw DataError("train_forest: empty training set");
  if (features.n_rows != labels.size()) {
    throw DataError("train_forest: feature rows and label count differ");
  }
  for (const int l : labels) {
    if (!is_valid_phase(l)) throw DataError("train_forest: label out of range");
  }

  RandomForest model;
  model.params = params;
  if (model.params.features_per_node == 0) {
    model.params.features_per_node = default_features_per_node(static_cast<int>(features.n_cols));
  }
  validate_params(model.params, features.n_cols);
  if (model.params.features_per_node < 1) throw DataError("features_per_node must be >= 1");
  model.feature_names = features.names;
  model.trees.resize(static_cast<std::size_t>(model.params.n_trees));

  const auto train_one = [&](int tree_index) {
    const std::uint64_t tree_seed =
        derive_seed(params.seed, kTreeStream, static_cast<std::uint64_t>(tree_index));
    const auto bootstrap = bootstrap_indices(params.seed, tree_index, features.n_rows);
    model.trees[static_cast<std::size_t>(tree_index)] =
        train_tree(features, labels, bootstrap, model.params, tree_seed);
  };

  const int workers = std::max(1, std::min(jobs, model.params.n_trees));
  if (workers == 1) {
    for (int t = 0; t < model.params.n_trees; ++t) train_one(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        while (true) {
          const int t = next.fetch_add(1);
          if (t >= model.params.n_trees) break;
          train_one(t);
        }
      });
    }
    for (auto& th : pool) th.join();
  }
  return model;
}

int tree_predict(const TreeNode& root, std::span<const double> row) {
  const TreeNode* node = &root;
  while (!node->is_leaf()) {
    node = row[static_cast<std::size_t>(node->feature)] <= node->threshold ? node->left.get()
                                                                           : node->right.get();
  }
  return node->label;
}

int forest_predict(const RandomForest& model, std::span<const double> row) {
  if (row.size() != model.n_features()) {
    throw DataError("forest_predict: expected " + std::to_string(model.n_features()) +
                    " features, got " + std::to_string(row.size()));
  }
  std::array<std::int64_t, kNumPhases> votes{};
  for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree_predict(*tree, row))];
  return majority_class(votes);
}

std::array<double, kNumPhases> forest_vote_distribution(const RandomForest& model,
                                                        std::span<const double> row) {
  if (row.size() != model.n_features()) {
    throw DataError("forest_vote_distribution: expected " + std::to_string(model.n_features()) +
                    " features, got " + std::to_string(row.size()));
  }
  std::array<std::int64_t, kNumPhases> votes{};
  for (const auto& tree : model.trees) ++votes[static_cast<std::size_t>(tree_predict(*tree, row))];
  std::array<double, kNumPhases> out{};
  for (int c = 0; c < kNumPhases; ++c) {
    out[static_cast<std::size_t>(c)] = static_cast<double>(votes[static_cast<std::size_t>(c)]) /
                                       static_cast<double>(model.trees.size());
  }
  return out;
}

namespace {

nlohmann::ordered_json node_to_json(const TreeNode& node) {
  nlohmann::ordered_json j;
  if (node.is_leaf()) {
    j["label"] = node.label;
    j["class_counts"] = node.class_counts;
  } else {
    j["feature"] = node.feature;
    j["threshold"] = node.threshold;
    j["left"] = node_to_json(*node.left);
    j["right"] = node_to_json(*node.right);
  }
  return j;
}

std::unique_ptr<TreeNode> node_from_json(const nlohmann::json& j) {
  auto node = std::make_unique<TreeNode>();
  if (j.contains("feature")) {
    node->feature = j.at("feature").get<int>();
    node->threshold = j.at("threshold").get<double>();
    node->left = node_from_json(j.at("left"));
    node->right = node_from_json(j.at("right"));
  } else {
    node->label = j.at("label").get<int>();
    const auto counts = j.at("class_counts").get<std::vector<std::int64_t>>();
    if (counts.size() != kNumPhases) throw DataError("forest model: bad class_counts length");
    std::copy(counts.begin(), counts.end(), node->class_counts.begin());
  }
  return node;
}

}  // namespace

std::string forest_to_json(const RandomForest& model) {
  nlohmann::ordered_json j;
  j["kind"] = "random_forest";
  j["params"] = {{"n_trees", model.params.n_trees},
                 {"max_depth", model.params.max_depth},
                 {"features_per_node", model.params.features_per_node},
                 {"min_samples_leaf", model.params.min_samples_leaf},
                 {"seed", model.params.seed}};
  j["feature_names"] = model.feature_names;
  nlohmann::ordered_json trees = nlohmann::ordered_json::array();
  for (const auto& tree : model.trees) trees.push_back(node_to_json(*tree));
  j["trees"] = std::move(trees);
  return j.dump(2) + "\n";
}

RandomForest forest_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("forest model: invalid JSON: ") + e.what());
  }
  if (j.value("kind", "") != "random_forest") {
    throw DataError("forest model: missing kind 'random_forest'");
  }
  RandomForest model;
  const auto& p = j.at("params");
  model.params.n_trees = p.at("n_trees").get<int>();
  model.params.max_depth = p.at("max_depth").get<int>();
  model.params.features_per_node = p.at("features_per_node").get<int>();
  model.params.min_samples_leaf = p.at("min_samples_leaf").get<int>();
  model.params.seed = p.at("seed").get<std::uint64_t>();
  model.feature_names = j.at("feature_names").get<std::vector<std::string>>();
  for (const auto& t : j.at("trees")) model.trees.push_back(node_from_json(t));
  if (model.trees.size() != static_cast<std::size_t>(model.params.n_trees)) {
    throw DataError("forest model: tree count does not match params");
  }
  return model;
}

void save_forest(const RandomForest& model, const std::filesystem::path& path) {
  write_file_atomic(path, forest_to_json(model));
}

RandomForest load_forest(const std::filesystem::path& path) {
  return forest_from_json(read_file(path));
}

}  // namespace phasedet
