#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "xppm/error.hpp"
#include "xppm/metrics.hpp"
#include "xppm/rng.hpp"

using namespace xppm;

namespace {

struct Sample {
  std::vector<double> scores;
  std::vector<int> labels;
};

// Random scores drawn from a small grid so that ties are frequent.
Sample random_sample(Rng& rng, std::size_t max_n) {
  Sample s;
  const std::size_t n = 2 + rng.below(max_n - 1);
  const std::uint64_t grid = 1 + rng.below(50);
  for (std::size_t i = 0; i < n; ++i) {
    s.scores.push_back(static_cast<double>(rng.below(grid + 1)) / static_cast<double>(grid));
    s.labels.push_back(static_cast<int>(rng.below(2)));
  }
  s.labels[0] = 1;
  s.labels[1] = 0;
  return s;
}

Eigen::MatrixXd rectangle() {
  Eigen::MatrixXd p(4, 2);
  p << 0, 0, 0, 1, 10, 0, 10, 1;
  return p;
}

}  // namespace

TEST_CASE("confusion counts") {
  const std::vector<double> s{0.9, 0.2};
  const std::vector<int> y{1, 0};
  CHECK(confusion_at_threshold(s, y, 0.5) == ConfusionMatrix{1, 0, 0, 1});

  const std::vector<double> s3{0.6, 0.6, 0.4};
  const std::vector<int> y3{1, 0, 1};
  CHECK(confusion_at_threshold(s3, y3, 0.5) == ConfusionMatrix{1, 1, 1, 0});
  const auto all = confusion_at_threshold(s3, y3, 0.0);
  CHECK(all.fp == 1);
  CHECK(all.tn == 0);
  CHECK(all.total() == 3);
  // Score exactly at tau is positive.
  CHECK(confusion_at_threshold(s3, y3, 0.6).tp == 1);

  CHECK_THROWS_AS(confusion_at_threshold({}, {}, 0.5), DataError);
}

TEST_CASE("classification measures") {
  const auto m = classification_measures({8, 2, 2, 8});
  CHECK(m.accuracy == doctest::Approx(0.8));
  CHECK(m.precision == doctest::Approx(0.8));
  CHECK(m.recall == doctest::Approx(0.8));
  CHECK(m.f1 == doctest::Approx(0.8));
  CHECK(m.mcc == doctest::Approx(0.6));
  CHECK(m.undefined.empty());

  const auto perfect = classification_measures({5, 0, 0, 7});
  CHECK(perfect.accuracy == 1.0);
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.specificity == 1.0);
  CHECK(perfect.f1 == 1.0);
  CHECK(perfect.mcc == 1.0);
  CHECK(perfect.fnr == 0.0);
  CHECK(perfect.fpr == 0.0);

  const auto no_negatives = classification_measures({3, 0, 1, 0});
  CHECK(no_negatives.specificity == 0.0);
  CHECK(no_negatives.mcc == 0.0);
  CHECK(std::find(no_negatives.undefined.begin(), no_negatives.undefined.end(), "specificity") !=
        no_negatives.undefined.end());
}

TEST_CASE("published precision and recall imply the published F1") {
  const double p = 0.9944, r = 0.8934;
  CHECK(2 * p * r / (p + r) == doctest::Approx(0.9412).epsilon(1e-4));
}

TEST_CASE("ROC area examples") {
  const std::vector<int> y{1, 1, 0, 0};
  CHECK(auroc(std::vector<double>{0.9, 0.8, 0.3, 0.1}, y) == 1.0);
  CHECK(auroc(std::vector<double>{0.9, 0.6, 0.4, 0.2}, std::vector<int>{1, 0, 1, 0}) == 0.75);
  CHECK(auroc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, y) == 0.5);
  const auto roc = roc_and_auroc(std::vector<double>{0.9, 0.6, 0.4, 0.2}, std::vector<int>{1, 0, 1, 0});
  CHECK(roc.points.front().fpr == 0.0);
  CHECK(roc.points.front().tpr == 0.0);
  CHECK(roc.points.back().fpr == 1.0);
  CHECK(roc.points.back().tpr == 1.0);
  CHECK_THROWS_AS(auroc(std::vector<double>{0.1, 0.2}, std::vector<int>{1, 1}), DataError);
}

TEST_CASE("equal-error threshold examples") {
  const auto sel = select_equal_error_threshold(std::vector<double>{0.1, 0.2, 0.6, 0.9},
                                                std::vector<int>{0, 0, 1, 1});
  CHECK(sel.tau == doctest::Approx(0.4));
  const auto m = classification_measures(sel.confusion);
  CHECK(m.fnr == 0.0);
  CHECK(m.fpr == 0.0);

  const auto two = select_equal_error_threshold(std::vector<double>{0.3, 0.7}, std::vector<int>{0, 1});
  CHECK(two.tau == doctest::Approx(0.5));

  CHECK_THROWS_AS(select_equal_error_threshold(std::vector<double>{0.3}, std::vector<int>{1}),
                  DataError);

  // The published operating point has nearly equal error rates.
  CHECK(std::abs(0.1066 - 0.1054) == doctest::Approx(0.0012));
}

TEST_CASE("clustering sum of squares") {
  const auto p = rectangle();
  const std::vector<std::size_t> two{0, 0, 1, 1};
  Eigen::MatrixXd c(2, 2);
  c << 0, 0.5, 10, 0.5;
  const auto ss = clustering_ss(p, two, c);
  CHECK(ss.sswc == doctest::Approx(1.0));
  CHECK(ss.ssbc == doctest::Approx(100.0));
  CHECK(ss.explained_variance == doctest::Approx(100.0 / 101.0));
  CHECK(ss.between_within_ratio == doctest::Approx(100.0));
  CHECK(ss.cluster_sizes == std::vector<std::size_t>{2, 2});

  const std::vector<std::size_t> one(4, 0);
  const Eigen::MatrixXd mean = p.colwise().mean();
  const auto single = clustering_ss(p, one, mean);
  CHECK(single.ssbc == doctest::Approx(0.0));
  CHECK(single.explained_variance == doctest::Approx(0.0));

  Eigen::MatrixXd three(3, 2);
  three << 0, 0.5, 10, 0.5, 50, 50;
  const auto with_empty = clustering_ss(p, two, three);
  CHECK(with_empty.empty_clusters == std::vector<std::size_t>{2});

  const auto exact = clustering_ss(p, std::vector<std::size_t>{0, 1, 2, 3}, p);
  CHECK(exact.sswc == 0.0);
  CHECK(exact.ratio_undefined);
}

TEST_CASE("fidelity R2") {
  const std::vector<double> yhat{0.2, 0.4, 0.6, 0.8};
  CHECK(fidelity_r2(yhat, yhat) == 1.0);
  CHECK(fidelity_r2(std::vector<double>{0.3, 0.4, 0.6, 0.7}, yhat) == doctest::Approx(0.9));
  try {
    fidelity_r2(std::vector<double>{0.1, 0.2}, std::vector<double>{0.5, 0.5});
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("degenerate black-box scores") != std::string::npos);
  }
  // The literal reading uses surrogate deviations around the black-box mean.
  const std::vector<double> y{0.3, 0.4, 0.6, 0.7};
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    num += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    den += (y[i] - 0.5) * (y[i] - 0.5);
  }
  CHECK(fidelity_r2(y, yhat, R2Denominator::kLiteral) == doctest::Approx(1.0 - num / den));
}

TEST_CASE("property: error rates complement recall and specificity") {
  Rng rng(1);
  for (int trial = 0; trial < 500; ++trial) {
    ConfusionMatrix cm{rng.below(20), rng.below(20), rng.below(20), rng.below(20)};
    if (cm.total() == 0) continue;
    const auto m = classification_measures(cm);
    if (cm.tp + cm.fn > 0) CHECK(m.fnr + m.recall == 1.0);
    if (cm.tn + cm.fp > 0) CHECK(m.fpr + m.specificity == 1.0);
    CHECK(m.mcc >= -1.0);
    CHECK(m.mcc <= 1.0);
  }
}

TEST_CASE("property: AUROC equals the pairwise oracle and ignores monotone transforms") {
  Rng rng(2);
  for (int trial = 0; trial < 300; ++trial) {
    const auto s = random_sample(rng, 200);
    const double a = auroc(s.scores, s.labels);
    CHECK(std::abs(a - oracle::pairwise_auroc(s.scores, s.labels)) <= 1e-12);
    std::vector<double> t;
    for (double v : s.scores) t.push_back(std::exp(3.0 * v) - 7.0);
    CHECK(std::abs(auroc(t, s.labels) - a) <= 1e-12);

    const auto roc = roc_and_auroc(s.scores, s.labels);
    for (std::size_t i = 1; i < roc.points.size(); ++i) {
      CHECK(roc.points[i - 1].fpr <= roc.points[i].fpr);
      CHECK(roc.points[i - 1].tpr <= roc.points[i].tpr);
    }
  }
}

TEST_CASE("property: equal-error threshold matches an exhaustive scan") {
  Rng rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto s = random_sample(rng, 500);
    const auto sel = select_equal_error_threshold(s.scores, s.labels);
    const auto brute = oracle::brute_equal_error(s.scores, s.labels);
    CHECK(sel.tau == doctest::Approx(brute.tau).epsilon(1e-12));
    CHECK(sel.confusion.tp == brute.counts.tp);
    CHECK(sel.confusion.fp == brute.counts.fp);
    CHECK(sel.confusion.fn == brute.counts.fn);
    CHECK(sel.confusion.tn == brute.counts.tn);
  }
}

TEST_CASE("property: SSWC + SSBC decomposes the total for any assignment") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(60));
    const auto d = static_cast<Eigen::Index>(1 + rng.below(5));
    const auto k = static_cast<std::size_t>(1 + rng.below(6));
    Eigen::MatrixXd p(n, d);
    for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(-10.0, 10.0);
    std::vector<std::size_t> a(static_cast<std::size_t>(n));
    for (auto& v : a) v = rng.below(k);
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), d);
    std::vector<double> counts(k, 0.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      c.row(static_cast<Eigen::Index>(a[static_cast<std::size_t>(i)])) += p.row(i);
      counts[a[static_cast<std::size_t>(i)]] += 1.0;
    }
    for (std::size_t j = 0; j < k; ++j) {
      if (counts[j] > 0) c.row(static_cast<Eigen::Index>(j)) /= counts[j];
    }
    const auto ss = clustering_ss(p, a, c);
    const double total = (p.rowwise() - p.colwise().mean()).squaredNorm();
    CHECK(std::abs(ss.sswc + ss.ssbc - total) <= 1e-9 * total);
    CHECK(ss.sswc >= 0.0);
    CHECK(ss.ssbc >= 0.0);
  }
}

TEST_CASE("property: R2 decreases as the surrogate drifts away") {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<double> yhat(20), dir(20);
    for (std::size_t i = 0; i < yhat.size(); ++i) {
      yhat[i] = rng.uniform();
      dir[i] = rng.uniform(-1.0, 1.0);
    }
    double previous = 2.0;
    for (double step : {0.0, 0.01, 0.05, 0.1, 0.3}) {
      std::vector<double> y(yhat.size());
      for (std::size_t i = 0; i < y.size(); ++i) y[i] = yhat[i] + step * dir[i];
      const double r2 = fidelity_r2(y, yhat);
      CHECK(r2 < previous);
      previous = r2;
    }
  }
}
