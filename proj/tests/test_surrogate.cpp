#include <doctest.h>

#include <sstream>

#include "oracles.hpp"
#include "xppm/error.hpp"
#include "xppm/rng.hpp"
#include "xppm/surrogate.hpp"

using namespace xppm;

namespace {

Eigen::MatrixXd column(const std::vector<double>& v) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(v.size()), 1);
  for (std::size_t i = 0; i < v.size(); ++i) x(static_cast<Eigen::Index>(i), 0) = v[i];
  return x;
}

TreeConfig small_leaves(int depth = 4) {
  TreeConfig c;
  c.max_depth = depth;
  c.min_samples_leaf = 1;
  return c;
}

std::vector<double> copy_row(const Eigen::MatrixXd& x, Eigen::Index i) {
  std::vector<double> out(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index j = 0; j < x.cols(); ++j) out[static_cast<std::size_t>(j)] = x(i, j);
  return out;
}

Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index n, Eigen::Index d, int grid) {
  Eigen::MatrixXd x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x.data()[i] = static_cast<double>(rng.below(static_cast<std::uint64_t>(grid)));
  }
  return x;
}

}  // namespace

TEST_CASE("constant targets give a single leaf") {
  const auto x = column({1, 2, 3, 4, 5, 6});
  const std::vector<double> y(6, 0.42);
  const auto tree = fit_tree(x, y, small_leaves());
  CHECK(tree.nodes.size() == 1);
  CHECK(tree.root().value == doctest::Approx(0.42));
  CHECK(decision_path(tree, std::vector<double>{3.0}).directions() == "(root leaf)");
  CHECK_THROWS_AS(fit_tree(Eigen::MatrixXd(0, 1), std::vector<double>{}, small_leaves()), DataError);
}

TEST_CASE("one-dimensional step fixture") {
  const auto x = column({1, 2, 10, 11});
  const std::vector<double> y{0, 0, 1, 1};
  const auto tree = fit_tree(x, y, small_leaves());
  REQUIRE(tree.nodes.size() == 3);
  CHECK_FALSE(tree.root().leaf);
  CHECK(tree.root().threshold == 6.0);
  CHECK(tree.nodes[static_cast<std::size_t>(tree.root().left)].value == 0.0);
  CHECK(tree.nodes[static_cast<std::size_t>(tree.root().right)].value == 1.0);

  const auto path = decision_path(tree, std::vector<double>{1.0});
  REQUIRE(path.steps.size() == 1);
  CHECK(path.steps[0].went_left);
  CHECK(path.directions() == "Left");
  CHECK(tree.predict(std::vector<double>{1.0}) == 0.0);

  const auto names = plain_features(1);
  const auto rule = extract_rule(tree, path);
  REQUIRE(rule.conditions.size() == 1);
  CHECK(render_condition_compact(rule.conditions[0], names) == "x <= 6");
  CHECK(render_condition(rule.conditions[0], names) == "x is at most 6");

  std::ostringstream dot;
  export_tree_dot(tree, names, dot);
  CHECK(dot.str().find("digraph") == 0);
  CHECK(dot.str().find("x <= 6") != std::string::npos);
  CHECK(dot.str().find("n0 -> n1") != std::string::npos);
  CHECK(dot.str().find("n0 -> n2") != std::string::npos);
  CHECK(dot.str().find("n3") == std::string::npos);
}

TEST_CASE("single-leaf DOT has one node") {
  const auto tree = fit_tree(column({1, 2, 3}), std::vector<double>{0.5, 0.5, 0.5}, small_leaves());
  std::ostringstream dot;
  export_tree_dot(tree, plain_features(1), dot);
  CHECK(dot.str().find("n0 [") != std::string::npos);
  CHECK(dot.str().find("n1") == std::string::npos);
  CHECK(dot.str().find("->") == std::string::npos);
}

TEST_CASE("conditions on one feature merge into the tightest interval") {
  // Root x <= 10, then x <= 5 on the left branch.
  SurrogateTree tree;
  TreeNode root;
  root.leaf = false;
  root.threshold = 10.0;
  root.left = 1;
  root.right = 4;
  TreeNode inner;
  inner.leaf = false;
  inner.threshold = 5.0;
  inner.left = 2;
  inner.right = 3;
  inner.depth = 1;
  TreeNode leaf_a, leaf_b, leaf_c;
  leaf_a.value = 0.1;
  leaf_b.value = 0.2;
  leaf_c.value = 0.3;
  tree.nodes = {root, inner, leaf_a, leaf_b, leaf_c};

  const auto path = decision_path(tree, std::vector<double>{3.0});
  CHECK(path.directions() == "Left-Left");
  const auto rule = extract_rule(tree, path);
  REQUIRE(rule.conditions.size() == 1);
  CHECK(rule.conditions[0].comparator == Comparator::kLessEqual);
  CHECK(rule.conditions[0].threshold == 5.0);
  CHECK(render_condition_compact(rule.conditions[0], plain_features(1)) == "x <= 5");

  const auto middle = extract_rule(tree, decision_path(tree, std::vector<double>{7.0}));
  REQUIRE(middle.conditions.size() == 2);
  CHECK(middle.conditions[0].comparator == Comparator::kGreater);
  CHECK(middle.conditions[1].comparator == Comparator::kLessEqual);
}

TEST_CASE("rendering in raw units") {
  FeatureSchema schema;
  schema.ngram_vocabulary = {"Accepted-In.Progress---Queued-Awaiting.Assignment"};
  schema.numeric_features = {kDurationSinceStart, kDurationSincePrevious};
  schema.scaler = {{100.0, 50.0, false}, {10.0, 2.0, false}};
  schema.categorical_features = {{"impact", {"High", "Low", "Medium"}}};
  const auto info = describe_features(schema);
  REQUIRE(info.size() == 6);

  // The scaled threshold that maps back to 169 seconds.
  const Condition duration{1, Comparator::kGreater, (169.0 - 100.0) / 50.0, 0.0};
  CHECK(render_condition(duration, info) == "duration since start is greater than 169 seconds");

  const Condition medium{5, Comparator::kIs, 0.5, 0.5};
  CHECK(render_condition(medium, info) == "Impact is Medium");
  CHECK(render_condition(Condition{5, Comparator::kIsNot, 0.5, 0.5}, info) == "Impact is not Medium");
  CHECK(render_condition_compact(medium, info) == "Impact = Medium");

  const Condition count{0, Comparator::kLessEqual, 0.5, 0.5};
  CHECK(render_condition(count, info) ==
        "the Accepted-In.Progress---Queued-Awaiting.Assignment is less than 1");

  Rule rule;
  rule.conditions = {count, duration, medium};
  rule.predicted_score = 0.2671;
  CHECK(render_rule(rule, info) ==
        "IF the Accepted-In.Progress---Queued-Awaiting.Assignment is less than 1\n"
        "AND duration since start is greater than 169 seconds\n"
        "AND Impact is Medium\n"
        "THEN Prediction of Surrogate Model is 0.267");
  CHECK(format_significant(169.00000001) == "169");
  CHECK(format_significant(0.123456) == "0.1235");
}

TEST_CASE("categorical splits send the level holders left") {
  Eigen::MatrixXd x(6, 2);
  x << 1, 0, 1, 0, 1, 0, 0, 1, 0, 1, 0, 1;
  const std::vector<double> y{0.9, 0.9, 0.9, 0.1, 0.1, 0.1};
  const std::vector<SplitKind> kinds{SplitKind::kCategorical, SplitKind::kCategorical};
  const auto tree = fit_tree(x, y, small_leaves(), kinds);
  REQUIRE(tree.nodes.size() == 3);
  CHECK(tree.root().kind == SplitKind::kCategorical);
  CHECK(tree.root().feature == 0);
  CHECK(tree.nodes[static_cast<std::size_t>(tree.root().left)].value == doctest::Approx(0.9));
  const auto rule = extract_rule(tree, decision_path(tree, copy_row(x, 0)));
  CHECK(rule.conditions[0].comparator == Comparator::kIs);
}

TEST_CASE("rule confidence against black-box classes") {
  const auto x = column({1, 2, 3, 4, 5, 10, 11, 12, 13, 14});
  const std::vector<double> y{0.2, 0.2, 0.2, 0.2, 0.2, 0.9, 0.9, 0.9, 0.9, 0.9};
  TreeConfig config;
  config.max_depth = 1;
  config.min_samples_leaf = 5;
  auto tree = fit_tree(x, y, config);
  REQUIRE(tree.nodes.size() == 3);
  const auto rule = extract_rule(tree, decision_path(tree, std::vector<double>{12.0}));
  CHECK(rule_confidence(tree, rule, x, y, 0.5) == 1.0);

  // Same tree, scores of which only 3 of the 5 right-leaf members reach tau.
  const std::vector<double> mixed{0.2, 0.2, 0.2, 0.2, 0.2, 0.9, 0.9, 0.9, 0.1, 0.1};
  CHECK(rule_confidence(tree, rule, x, mixed, 0.5) == doctest::Approx(0.6));

  annotate_leaves(tree, x, mixed, std::vector<int>{0, 0, 0, 0, 0, 1, 1, 1, 1, 1}, 0.5);
  const auto& leaf = tree.nodes[rule.leaf];
  CHECK(leaf.confidence == doctest::Approx(0.6));
  CHECK(leaf.truth_confidence == doctest::Approx(1.0));

  const auto far = column({100, 200});
  CHECK_THROWS_AS(rule_confidence(tree, extract_rule(tree, decision_path(tree, std::vector<double>{1.0})),
                                  far, std::vector<double>{0.5, 0.5}, 0.5),
                  DataError);
}

TEST_CASE("cluster surrogates on a step fixture and a constant cluster") {
  Eigen::MatrixXd x(20, 2);
  std::vector<double> scores(20);
  RegionModel regions;
  regions.k = 3;
  regions.assignments.resize(20);
  for (int i = 0; i < 20; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    x(r, 0) = i;
    x(r, 1) = i % 3;
    if (i < 10) {
      regions.assignments[static_cast<std::size_t>(i)] = 0;
      scores[static_cast<std::size_t>(i)] = i < 5 ? 0.2 : 0.8;
    } else {
      regions.assignments[static_cast<std::size_t>(i)] = 1;
      scores[static_cast<std::size_t>(i)] = x(r, 1) == 0 ? 0.3 : 0.7;
    }
  }
  // Cluster 2: constant scores.
  Eigen::MatrixXd all(30, 2);
  all << x, Eigen::MatrixXd::Constant(10, 2, 50.0);
  for (int i = 0; i < 10; ++i) {
    regions.assignments.push_back(2);
    scores.push_back(0.5);
  }
  for (int i = 20; i < 30; ++i) all(i, 0) = 50 + i;
  std::vector<int> labels(30, 1);

  TreeConfig config;
  config.min_samples_leaf = 2;
  const auto fits = fit_cluster_surrogates(regions, all, scores, labels, 0.5, config);
  REQUIRE(fits.size() == 3);
  REQUIRE(fits[0].r2);
  REQUIRE(fits[1].r2);
  CHECK(*fits[0].r2 == 1.0);
  CHECK(*fits[1].r2 == 1.0);
  CHECK(fits[0].size == 10);
  CHECK_FALSE(fits[2].r2);
  CHECK(fits[2].flag == "degenerate");
  CHECK(fits[2].tree.nodes.size() == 1);

  TreeConfig big;
  big.min_samples_leaf = 6;
  const auto small = fit_cluster_surrogates(regions, all, scores, labels, 0.5, big);
  CHECK(small[0].flag == "too-small");
  CHECK(small[0].tree.nodes.size() == 1);

  TreeConfig bad;
  bad.max_depth = 0;
  CHECK_THROWS_AS(fit_cluster_surrogates(regions, all, scores, labels, 0.5, bad), ConfigError);
}

TEST_CASE("property: root split equals exhaustive search") {
  Rng rng(21);
  for (int trial = 0; trial < 150; ++trial) {
    const auto n = static_cast<Eigen::Index>(4 + rng.below(197));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(4));
    const auto x = random_matrix(rng, n, d, 2 + static_cast<int>(rng.below(30)));
    std::vector<double> y(static_cast<std::size_t>(n));
    for (auto& v : y) v = rng.uniform();
    const auto min_leaf = static_cast<int>(1 + rng.below(5));
    TreeConfig config;
    config.max_depth = 1;
    config.min_samples_leaf = min_leaf;
    config.min_variance_reduction = 0.0;
    const auto tree = fit_tree(x, y, config);
    const auto best = oracle::exhaustive_root_split(x, y, static_cast<std::size_t>(min_leaf));
    if (!best.found) {
      CHECK(tree.nodes.size() == 1);
      continue;
    }
    REQUIRE(tree.nodes.size() == 3);
    const double got = oracle::split_reduction(x, y, static_cast<int>(tree.root().feature),
                                               tree.root().threshold);
    CHECK(std::abs(got - best.reduction) <= 1e-12);
  }
}

TEST_CASE("property: fidelity invariants of fitted trees") {
  Rng rng(22);
  for (int trial = 0; trial < 40; ++trial) {
    const auto x = random_matrix(rng, 80, 3, 20);
    std::vector<double> y(80);
    for (Eigen::Index i = 0; i < 80; ++i) {
      y[static_cast<std::size_t>(i)] =
          std::clamp(0.03 * x(i, 0) + 0.01 * x(i, 1) * x(i, 2) / 20.0 + rng.uniform(-0.05, 0.05), 0.0, 1.0);
    }
    // A single-leaf tree explains none of the variance.
    TreeConfig stump;
    stump.max_depth = 1;
    stump.min_samples_leaf = 80;
    const auto leaf = fit_tree(x, y, stump);
    CHECK(leaf.nodes.size() == 1);
    CHECK(fidelity_r2(leaf.predict(x), y) == 0.0);

    double previous = -1.0;
    for (int depth = 1; depth <= 6; ++depth) {
      TreeConfig c;
      c.max_depth = depth;
      c.min_samples_leaf = 3;
      const auto tree = fit_tree(x, y, c);
      const auto pred = tree.predict(x);
      const double r2 = fidelity_r2(pred, y);
      CHECK(r2 >= previous - 1e-12);
      previous = r2;

      std::size_t total = 0;
      for (const auto& node : tree.nodes) {
        if (node.leaf) {
          total += node.samples;
          CHECK(node.value >= 0.0);
          CHECK(node.value <= 1.0);
        } else {
          CHECK(node.left > 0);
          CHECK(node.right > 0);
        }
      }
      CHECK(total == 80);

      for (Eigen::Index i = 0; i < x.rows(); ++i) {
        const auto r = copy_row(x, i);
        const auto path = decision_path(tree, r);
        CHECK(pred[static_cast<std::size_t>(i)] == tree.nodes[path.leaf].value);
      }
    }
  }
}

TEST_CASE("property: a rule matches exactly the instances routed to its leaf") {
  Rng rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = random_matrix(rng, 120, 4, 12);
    std::vector<double> y(120);
    for (auto& v : y) v = rng.uniform();
    std::vector<SplitKind> kinds(4, SplitKind::kNumeric);
    Eigen::MatrixXd xs = x;
    for (Eigen::Index i = 0; i < xs.rows(); ++i) xs(i, 3) = xs(i, 3) > 5 ? 1.0 : 0.0;
    kinds[3] = SplitKind::kCategorical;
    const auto tree = fit_tree(xs, y, small_leaves(5), kinds);
    const auto probes = random_matrix(rng, 60, 4, 14);
    for (Eigen::Index p = 0; p < 20; ++p) {
      const auto anchor = copy_row(xs, p);
      const auto path = decision_path(tree, anchor);
      const auto rule = extract_rule(tree, path);
      for (Eigen::Index q = 0; q < probes.rows(); ++q) {
        auto probe = copy_row(probes, q);
        probe[3] = probe[3] > 6 ? 1.0 : 0.0;
        CHECK(rule.matches(probe) == (tree.route(probe) == path.leaf));
      }
      CHECK(rule.matches(anchor));
    }
  }
}
