#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xppm/encoding.hpp"
#include "xppm/local_regions.hpp"

namespace xppm {

struct TreeConfig {
  int max_depth = 4;
  int min_samples_leaf = 5;
  // Minimum decrease of the node's mean squared error required to split.
  double min_variance_reduction = 1e-7;

  void validate() const;
  bool operator==(const TreeConfig&) const = default;
};

enum class SplitKind { kNumeric, kCategorical };

// Numeric split: left iff x <= threshold. Categorical (one-hot column) split:
// left iff the instance has the level (x > threshold, threshold 0.5).
struct TreeNode {
  bool leaf = true;
  std::size_t feature = 0;
  SplitKind kind = SplitKind::kNumeric;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  int depth = 0;
  double value = 0.0;  // mean target of the node's samples
  std::size_t samples = 0;
  // Leaf annotations (set by annotate_leaves).
  int leaf_class = 0;            // 1 iff value >= tau
  double confidence = 0.0;       // agreement with black-box classes at tau
  double truth_confidence = 0.0; // agreement with ground-truth labels
};

struct SurrogateTree {
  int cluster_id = -1;
  std::vector<TreeNode> nodes;  // nodes[0] is the root
  double tau = 0.5;

  const TreeNode& root() const { return nodes.front(); }
  std::size_t leaf_count() const;
  bool goes_left(const TreeNode& node, std::span<const double> x) const;
  // Index of the leaf an instance is routed to.
  std::size_t route(std::span<const double> x) const;
  double predict(std::span<const double> x) const;
  std::vector<double> predict(const Eigen::MatrixXd& x) const;
};

// Column kinds for split generation; one-hot columns produce categorical
// splits. An empty span means every column is numeric.
std::vector<SplitKind> split_kinds(const FeatureSchema& schema);

// Greedy CART growth on variance reduction. Ties: lowest feature index, then
// lowest threshold.
SurrogateTree fit_tree(const Eigen::MatrixXd& x, std::span<const double> targets,
                       const TreeConfig& config, std::span<const SplitKind> kinds = {});

// Sets leaf_class, confidence (black-box classes) and truth_confidence
// (ground-truth labels) for every leaf.
void annotate_leaves(SurrogateTree& tree, const Eigen::MatrixXd& x,
                     std::span<const double> blackbox_scores, std::span<const int> labels,
                     double tau);

struct PathStep {
  std::size_t node = 0;
  bool went_left = false;
};

struct DecisionPath {
  std::vector<PathStep> steps;  // internal nodes, root first
  std::size_t leaf = 0;

  // "Left-Left-Right"; "(root leaf)" when the tree is a single leaf.
  std::string directions() const;
};

DecisionPath decision_path(const SurrogateTree& tree, std::span<const double> x);

// Display metadata for one column of the encoded vector.
struct FeatureInfo {
  std::string name;          // encoded column name
  std::string display;       // "duration since start", "Impact"
  FeatureKind kind = FeatureKind::kNumeric;
  std::string unit;          // "seconds" or empty
  std::string level;         // one-hot level
  double mean = 0.0;         // scaler (numeric only)
  double stddev = 1.0;
  bool constant = false;

  double to_raw(double scaled) const;
};

std::vector<FeatureInfo> describe_features(const FeatureSchema& schema);
// Plain numeric columns named `name` (single column) or name0, name1, ...
std::vector<FeatureInfo> plain_features(std::size_t count, const std::string& name = "x");

enum class Comparator { kLessEqual, kGreater, kIs, kIsNot };

struct Condition {
  std::size_t feature = 0;
  Comparator comparator = Comparator::kLessEqual;
  double threshold = 0.0;  // encoded (scaled) units, exact
  double raw_threshold = 0.0;

  bool holds(std::span<const double> x) const;
};

struct Rule {
  std::vector<Condition> conditions;
  double predicted_score = 0.0;
  double confidence = 0.0;
  double truth_confidence = 0.0;
  std::size_t support = 0;
  std::size_t leaf = 0;

  bool matches(std::span<const double> x) const;
};

// Conditions on the path, merged per feature into the tightest interval.
Rule extract_rule(const SurrogateTree& tree, const DecisionPath& path);

// Condition text in raw units: "duration since start is greater than 169
// seconds", "Impact is Medium", ...
std::string render_condition(const Condition& c, const std::vector<FeatureInfo>& features);
// Compact form for graphs: "x <= 6", "Impact = Medium".
std::string render_condition_compact(const Condition& c, const std::vector<FeatureInfo>& features);
std::string render_rule(const Rule& rule, const std::vector<FeatureInfo>& features);

// 4 significant digits.
std::string format_significant(double value);

// (# leaf members whose black-box class at tau equals the leaf class) /
// (# leaf members). Throws DataError on an empty leaf.
double rule_confidence(const SurrogateTree& tree, const Rule& rule, const Eigen::MatrixXd& x,
                       std::span<const double> blackbox_scores, double tau);

struct ClusterSurrogate {
  SurrogateTree tree;
  std::optional<double> r2;  // empty when flagged
  std::string flag;          // "", "too-small", "degenerate"
  std::size_t size = 0;
  double local_accuracy = 0.0;
};

// One tree per cluster fit on that cluster's members only.
std::vector<ClusterSurrogate> fit_cluster_surrogates(const RegionModel& regions,
                                                     const Eigen::MatrixXd& x,
                                                     std::span<const double> blackbox_scores,
                                                     std::span<const int> labels, double tau,
                                                     const TreeConfig& config,
                                                     std::span<const SplitKind> kinds = {});

// Graphviz digraph; internal nodes carry raw-unit conditions, leaves carry
// score, support and confidence.
void export_tree_dot(const SurrogateTree& tree, const std::vector<FeatureInfo>& features,
                     std::ostream& out);

}  // namespace xppm
