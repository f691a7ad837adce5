#include "xppm/surrogate.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "xppm/error.hpp"
#include "xppm/metrics.hpp"

namespace xppm {
namespace {

struct Split {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double reduction = 0.0;
};

class TreeBuilder {
 public:
  TreeBuilder(const Eigen::MatrixXd& x, std::span<const double> y, const TreeConfig& config,
              std::span<const SplitKind> kinds)
      : x_(x), y_(y), config_(config), kinds_(kinds) {}

  int build(std::vector<std::size_t> samples, int depth, SurrogateTree& tree) {
    const int id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    {
      TreeNode& node = tree.nodes.back();
      node.depth = depth;
      node.samples = samples.size();
      double sum = 0.0;
      for (auto s : samples) sum += y_[s];
      node.value = sum / static_cast<double>(samples.size());
    }
    const auto min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);
    if (depth >= config_.max_depth || samples.size() < 2 * min_leaf) return id;

    const Split split = best_split(samples);
    if (!split.found ||
        split.reduction / static_cast<double>(samples.size()) < config_.min_variance_reduction) {
      return id;
    }
    const SplitKind kind = kind_of(split.feature);
    std::vector<std::size_t> left, right;
    for (auto s : samples) {
      const double v = x_(static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(split.feature));
      const bool go_left = kind == SplitKind::kNumeric ? v <= split.threshold : v > split.threshold;
      (go_left ? left : right).push_back(s);
    }
    {
      TreeNode& node = tree.nodes[static_cast<std::size_t>(id)];
      node.leaf = false;
      node.feature = split.feature;
      node.kind = kind;
      node.threshold = split.threshold;
    }
    const int l = build(std::move(left), depth + 1, tree);
    const int r = build(std::move(right), depth + 1, tree);
    tree.nodes[static_cast<std::size_t>(id)].left = l;
    tree.nodes[static_cast<std::size_t>(id)].right = r;
    return id;
  }

 private:
  SplitKind kind_of(std::size_t feature) const {
    return kinds_.empty() ? SplitKind::kNumeric : kinds_[feature];
  }

  Split best_split(const std::vector<std::size_t>& samples) const {
    const std::size_t n = samples.size();
    const auto min_leaf = static_cast<std::size_t>(config_.min_samples_leaf);
    double mean = 0.0;
    for (auto s : samples) mean += y_[s];
    mean /= static_cast<double>(n);

    // Centered targets keep the running sums well conditioned.
    double total = 0.0, total_sq = 0.0;
    for (auto s : samples) {
      const double d = y_[s] - mean;
      total += d;
      total_sq += d * d;
    }
    const double parent_sse = total_sq - total * total / static_cast<double>(n);

    Split best;
    std::vector<std::pair<double, double>> column(n);
    for (Eigen::Index f = 0; f < x_.cols(); ++f) {
      for (std::size_t i = 0; i < n; ++i) {
        column[i] = {x_(static_cast<Eigen::Index>(samples[i]), f), y_[samples[i]] - mean};
      }
      std::stable_sort(column.begin(), column.end(),
                       [](const auto& a, const auto& b) { return a.first < b.first; });
      double left_sum = 0.0, left_sq = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) {
        left_sum += column[i].second;
        left_sq += column[i].second * column[i].second;
        const std::size_t n_left = i + 1;
        const std::size_t n_right = n - n_left;
        if (n_left < min_leaf) continue;
        if (n_right < min_leaf) break;
        if (!(column[i].first < column[i + 1].first)) continue;
        const double right_sum = total - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / static_cast<double>(n_left)) +
                           (right_sq - right_sum * right_sum / static_cast<double>(n_right));
        const double reduction = parent_sse - sse;
        if (!best.found || reduction > best.reduction) {
          best.found = true;
          best.feature = static_cast<std::size_t>(f);
          best.threshold = column[i].first + (column[i + 1].first - column[i].first) / 2.0;
          best.reduction = reduction;
        }
      }
    }
    return best;
  }

  const Eigen::MatrixXd& x_;
  std::span<const double> y_;
  const TreeConfig& config_;
  std::span<const SplitKind> kinds_;
};

std::string capitalize(std::string s) {
  if (!s.empty()) s[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(s[0])));
  return s;
}

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

void TreeConfig::validate() const {
  if (max_depth < 1) throw ConfigError("max_depth must be >= 1");
  if (min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
}

std::size_t SurrogateTree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.leaf; }));
}

bool SurrogateTree::goes_left(const TreeNode& node, std::span<const double> x) const {
  const double v = x[node.feature];
  return node.kind == SplitKind::kNumeric ? v <= node.threshold : v > node.threshold;
}

std::size_t SurrogateTree::route(std::span<const double> x) const {
  std::size_t at = 0;
  while (!nodes[at].leaf) {
    const auto& node = nodes[at];
    if (node.feature >= x.size()) throw DataError("instance does not match the tree's schema");
    at = static_cast<std::size_t>(goes_left(node, x) ? node.left : node.right);
  }
  return at;
}

double SurrogateTree::predict(std::span<const double> x) const { return nodes[route(x)].value; }

std::vector<double> SurrogateTree::predict(const Eigen::MatrixXd& x) const {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    row = x.row(i);
    out[static_cast<std::size_t>(i)] = predict(std::span<const double>(row.data(), static_cast<std::size_t>(row.size())));
  }
  return out;
}

std::vector<SplitKind> split_kinds(const FeatureSchema& schema) {
  std::vector<SplitKind> kinds(schema.dimension(), SplitKind::kNumeric);
  for (std::size_t i = schema.categorical_offset(); i < kinds.size(); ++i) {
    kinds[i] = SplitKind::kCategorical;
  }
  return kinds;
}

SurrogateTree fit_tree(const Eigen::MatrixXd& x, std::span<const double> targets,
                       const TreeConfig& config, std::span<const SplitKind> kinds) {
  config.validate();
  if (x.rows() == 0 || targets.empty()) throw DataError("cannot fit a tree on empty input");
  if (static_cast<std::size_t>(x.rows()) != targets.size()) {
    throw DataError("one target per instance is required");
  }
  if (!kinds.empty() && kinds.size() != static_cast<std::size_t>(x.cols())) {
    throw DataError("split kinds do not match the feature count");
  }
  SurrogateTree tree;
  std::vector<std::size_t> samples(targets.size());
  std::iota(samples.begin(), samples.end(), 0);
  TreeBuilder(x, targets, config, kinds).build(std::move(samples), 0, tree);
  return tree;
}

void annotate_leaves(SurrogateTree& tree, const Eigen::MatrixXd& x,
                     std::span<const double> blackbox_scores, std::span<const int> labels,
                     double tau) {
  tree.tau = tau;
  std::vector<double> agree(tree.nodes.size(), 0.0), truth(tree.nodes.size(), 0.0),
      members(tree.nodes.size(), 0.0);
  for (auto& node : tree.nodes) {
    if (node.leaf) node.leaf_class = node.value >= tau ? 1 : 0;
  }
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    row = x.row(i);
    const auto leaf = tree.route({row.data(), static_cast<std::size_t>(row.size())});
    const int cls = tree.nodes[leaf].leaf_class;
    members[leaf] += 1.0;
    const auto idx = static_cast<std::size_t>(i);
    if ((blackbox_scores[idx] >= tau ? 1 : 0) == cls) agree[leaf] += 1.0;
    if (!labels.empty() && labels[idx] == cls) truth[leaf] += 1.0;
  }
  for (std::size_t n = 0; n < tree.nodes.size(); ++n) {
    if (!tree.nodes[n].leaf) continue;
    tree.nodes[n].confidence = members[n] > 0 ? agree[n] / members[n] : 0.0;
    tree.nodes[n].truth_confidence = members[n] > 0 ? truth[n] / members[n] : 0.0;
  }
}

std::string DecisionPath::directions() const {
  if (steps.empty()) return "(root leaf)";
  std::string out;
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (i > 0) out += '-';
    out += steps[i].went_left ? "Left" : "Right";
  }
  return out;
}

DecisionPath decision_path(const SurrogateTree& tree, std::span<const double> x) {
  DecisionPath path;
  std::size_t at = 0;
  while (!tree.nodes[at].leaf) {
    const auto& node = tree.nodes[at];
    if (node.feature >= x.size()) throw DataError("instance does not match the tree's schema");
    const bool left = tree.goes_left(node, x);
    path.steps.push_back({at, left});
    at = static_cast<std::size_t>(left ? node.left : node.right);
  }
  path.leaf = at;
  return path;
}

double FeatureInfo::to_raw(double scaled) const {
  if (kind != FeatureKind::kNumeric) return scaled;
  if (constant) return mean;
  return scaled * stddev + mean;
}

std::vector<FeatureInfo> describe_features(const FeatureSchema& schema) {
  std::vector<FeatureInfo> out;
  const auto names = schema.feature_names();
  for (std::size_t i = 0; i < names.size(); ++i) {
    FeatureInfo info;
    info.name = names[i];
    info.kind = schema.kind(i);
    switch (info.kind) {
      case FeatureKind::kTransition:
        info.display = names[i];
        break;
      case FeatureKind::kNumeric: {
        const auto& s = schema.scaler[i - schema.numeric_offset()];
        info.mean = s.mean;
        info.stddev = s.stddev;
        info.constant = s.constant;
        if (names[i] == kDurationSinceStart) {
          info.display = "duration since start";
          info.unit = "seconds";
        } else if (names[i] == kDurationSincePrevious) {
          info.display = "duration since previous event";
          info.unit = "seconds";
        } else {
          info.display = names[i];
        }
        break;
      }
      case FeatureKind::kOneHot: {
        auto [attribute, level] = schema.one_hot_level(i);
        info.display = capitalize(attribute);
        info.level = level;
        break;
      }
    }
    out.push_back(std::move(info));
  }
  return out;
}

std::vector<FeatureInfo> plain_features(std::size_t count, const std::string& name) {
  std::vector<FeatureInfo> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].name = count == 1 ? name : name + std::to_string(i);
    out[i].display = out[i].name;
    out[i].kind = FeatureKind::kNumeric;
  }
  return out;
}

bool Condition::holds(std::span<const double> x) const {
  const double v = x[feature];
  switch (comparator) {
    case Comparator::kLessEqual: return v <= threshold;
    case Comparator::kGreater:
    case Comparator::kIs: return v > threshold;
    case Comparator::kIsNot: return v <= threshold;
  }
  return false;
}

bool Rule::matches(std::span<const double> x) const {
  return std::all_of(conditions.begin(), conditions.end(),
                     [&](const Condition& c) { return c.holds(x); });
}

Rule extract_rule(const SurrogateTree& tree, const DecisionPath& path) {
  struct Bounds {
    std::optional<double> lower;  // x > lower
    std::optional<double> upper;  // x <= upper
    std::optional<Comparator> categorical;
    double cat_threshold = 0.5;
  };
  std::vector<std::size_t> order;
  std::map<std::size_t, Bounds> bounds;
  for (const auto& step : path.steps) {
    const auto& node = tree.nodes[step.node];
    if (!bounds.count(node.feature)) order.push_back(node.feature);
    auto& b = bounds[node.feature];
    if (node.kind == SplitKind::kCategorical) {
      b.categorical = step.went_left ? Comparator::kIs : Comparator::kIsNot;
      b.cat_threshold = node.threshold;
    } else if (step.went_left) {
      b.upper = b.upper ? std::min(*b.upper, node.threshold) : node.threshold;
    } else {
      b.lower = b.lower ? std::max(*b.lower, node.threshold) : node.threshold;
    }
  }
  Rule rule;
  for (auto f : order) {
    const auto& b = bounds[f];
    if (b.categorical) {
      rule.conditions.push_back({f, *b.categorical, b.cat_threshold, b.cat_threshold});
      continue;
    }
    if (b.lower) rule.conditions.push_back({f, Comparator::kGreater, *b.lower, *b.lower});
    if (b.upper) rule.conditions.push_back({f, Comparator::kLessEqual, *b.upper, *b.upper});
  }
  const auto& leaf = tree.nodes[path.leaf];
  rule.leaf = path.leaf;
  rule.predicted_score = leaf.value;
  rule.support = leaf.samples;
  rule.confidence = leaf.confidence;
  rule.truth_confidence = leaf.truth_confidence;
  return rule;
}

std::string format_significant(double value) {
  if (value == 0.0) return "0";
  return fmt::format("{:.4g}", value);
}

namespace {

const FeatureInfo& info_for(const Condition& c, const std::vector<FeatureInfo>& features) {
  if (c.feature >= features.size()) throw DataError("condition references an unknown feature");
  return features[c.feature];
}

std::string with_unit(const std::string& number, const FeatureInfo& info) {
  return info.unit.empty() ? number : number + " " + info.unit;
}

}  // namespace

std::string render_condition(const Condition& c, const std::vector<FeatureInfo>& features) {
  const auto& info = info_for(c, features);
  if (c.comparator == Comparator::kIs) return fmt::format("{} is {}", info.display, info.level);
  if (c.comparator == Comparator::kIsNot) {
    return fmt::format("{} is not {}", info.display, info.level);
  }
  const double raw = info.to_raw(c.threshold);
  if (info.kind == FeatureKind::kTransition) {
    // Counts are integral: x <= t  <=>  x < floor(t) + 1.
    const double next = std::floor(raw) + 1.0;
    return c.comparator == Comparator::kLessEqual
               ? fmt::format("the {} is less than {}", info.display, format_significant(next))
               : fmt::format("the {} is at least {}", info.display, format_significant(next));
  }
  return c.comparator == Comparator::kLessEqual
             ? fmt::format("{} is at most {}", info.display, with_unit(format_significant(raw), info))
             : fmt::format("{} is greater than {}", info.display,
                           with_unit(format_significant(raw), info));
}

std::string render_condition_compact(const Condition& c,
                                     const std::vector<FeatureInfo>& features) {
  const auto& info = info_for(c, features);
  if (c.comparator == Comparator::kIs) return fmt::format("{} = {}", info.display, info.level);
  if (c.comparator == Comparator::kIsNot) return fmt::format("{} != {}", info.display, info.level);
  const char* op = c.comparator == Comparator::kLessEqual ? "<=" : ">";
  return fmt::format("{} {} {}", info.display, op,
                     with_unit(format_significant(info.to_raw(c.threshold)), info));
}

std::string render_rule(const Rule& rule, const std::vector<FeatureInfo>& features) {
  std::string text;
  for (std::size_t i = 0; i < rule.conditions.size(); ++i) {
    text += i == 0 ? "IF " : "\nAND ";
    text += render_condition(rule.conditions[i], features);
  }
  if (rule.conditions.empty()) text += "IF (any instance)";
  text += fmt::format("\nTHEN Prediction of Surrogate Model is {:.3f}", rule.predicted_score);
  return text;
}

double rule_confidence(const SurrogateTree& tree, const Rule& rule, const Eigen::MatrixXd& x,
                       std::span<const double> blackbox_scores, double tau) {
  const int leaf_class = tree.nodes[rule.leaf].value >= tau ? 1 : 0;
  double members = 0.0, agree = 0.0;
  Eigen::RowVectorXd row;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    row = x.row(i);
    if (tree.route({row.data(), static_cast<std::size_t>(row.size())}) != rule.leaf) continue;
    members += 1.0;
    if ((blackbox_scores[static_cast<std::size_t>(i)] >= tau ? 1 : 0) == leaf_class) agree += 1.0;
  }
  if (members == 0.0) throw DataError("rule leaf has no member instances");
  return agree / members;
}

std::vector<ClusterSurrogate> fit_cluster_surrogates(const RegionModel& regions,
                                                     const Eigen::MatrixXd& x,
                                                     std::span<const double> blackbox_scores,
                                                     std::span<const int> labels, double tau,
                                                     const TreeConfig& config,
                                                     std::span<const SplitKind> kinds) {
  config.validate();
  if (regions.assignments.size() != static_cast<std::size_t>(x.rows()) ||
      blackbox_scores.size() != regions.assignments.size()) {
    throw DataError("regions, features and scores must cover the same instances");
  }
  std::vector<ClusterSurrogate> out(static_cast<std::size_t>(regions.k));
  const auto accuracies =
      labels.empty() ? std::vector<double>(out.size(), 0.0)
                     : cluster_accuracies(regions.assignments, regions.k, blackbox_scores, labels, tau);
  for (std::size_t c = 0; c < out.size(); ++c) {
    std::vector<Eigen::Index> members;
    for (std::size_t i = 0; i < regions.assignments.size(); ++i) {
      if (regions.assignments[i] == c) members.push_back(static_cast<Eigen::Index>(i));
    }
    auto& result = out[c];
    result.size = members.size();
    result.local_accuracy = accuracies[c];
    if (members.empty()) {
      result.flag = "empty";
      result.tree.cluster_id = static_cast<int>(c);
      result.tree.nodes.emplace_back();
      continue;
    }
    Eigen::MatrixXd xc(static_cast<Eigen::Index>(members.size()), x.cols());
    std::vector<double> yc(members.size());
    std::vector<int> lc;
    for (std::size_t i = 0; i < members.size(); ++i) {
      xc.row(static_cast<Eigen::Index>(i)) = x.row(members[i]);
      yc[i] = blackbox_scores[static_cast<std::size_t>(members[i])];
      if (!labels.empty()) lc.push_back(labels[static_cast<std::size_t>(members[i])]);
    }
    const bool too_small = members.size() < 2 * static_cast<std::size_t>(config.min_samples_leaf);
    if (too_small) {
      TreeNode leaf;
      leaf.samples = yc.size();
      leaf.value = std::accumulate(yc.begin(), yc.end(), 0.0) / static_cast<double>(yc.size());
      result.tree.nodes = {leaf};
    } else {
      result.tree = fit_tree(xc, yc, config, kinds);
    }
    result.tree.cluster_id = static_cast<int>(c);
    annotate_leaves(result.tree, xc, yc, lc, tau);
    if (too_small) {
      result.flag = "too-small";
      continue;
    }
    try {
      result.r2 = fidelity_r2(result.tree.predict(xc), yc);
    } catch (const DataError&) {
      result.flag = "degenerate";
    }
  }
  return out;
}

void export_tree_dot(const SurrogateTree& tree, const std::vector<FeatureInfo>& features,
                     std::ostream& out) {
  out << "digraph cluster_" << std::max(tree.cluster_id, 0) << " {\n"
      << "  node [shape=box, fontname=\"Helvetica\"];\n";
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    std::string label;
    if (node.leaf) {
      label = fmt::format("score {:.3f}\\nsupport {}\\nconfidence {:.2f}", node.value,
                          node.samples, node.confidence);
    } else {
      const Condition c{node.feature,
                        node.kind == SplitKind::kNumeric ? Comparator::kLessEqual : Comparator::kIs,
                        node.threshold, node.threshold};
      label = dot_escape(render_condition_compact(c, features));
    }
    out << "  n" << i << " [label=\"" << label << "\""
        << (node.leaf ? ", style=rounded" : "") << "];\n";
  }
  for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
    const auto& node = tree.nodes[i];
    if (node.leaf) continue;
    out << "  n" << i << " -> n" << node.left << " [label=\"yes\"];\n";
    out << "  n" << i << " -> n" << node.right << " [label=\"no\"];\n";
  }
  out << "}\n";
}

}  // namespace xppm
