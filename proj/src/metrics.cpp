#include "xppm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "xppm/error.hpp"

namespace xppm {
namespace {

void check_aligned(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError(fmt::format("{} scores but {} labels", scores.size(), labels.size()));
  }
  if (scores.empty()) throw DataError("empty score vector");
}

std::pair<std::uint64_t, std::uint64_t> class_counts(std::span<const int> labels) {
  std::uint64_t pos = 0;
  for (int l : labels) pos += (l == 1);
  return {pos, labels.size() - pos};
}

void require_both_classes(std::span<const int> labels) {
  auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw DataError("both classes must be present");
}

// Instance indices sorted by descending score.
std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

double ratio(double num, double den, const char* name, std::vector<std::string>& undefined) {
  if (den == 0.0) {
    undefined.emplace_back(name);
    return 0.0;
  }
  return num / den;
}

}  // namespace

ConfusionMatrix confusion_at_threshold(std::span<const double> scores,
                                       std::span<const int> labels, double tau) {
  check_aligned(scores, labels);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= tau;
    const bool actual = labels[i] == 1;
    if (predicted && actual) ++cm.tp;
    else if (predicted) ++cm.fp;
    else if (actual) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

ClassificationMeasures classification_measures(const ConfusionMatrix& cm) {
  const auto tp = static_cast<double>(cm.tp);
  const auto fp = static_cast<double>(cm.fp);
  const auto fn = static_cast<double>(cm.fn);
  const auto tn = static_cast<double>(cm.tn);
  ClassificationMeasures m;
  auto& u = m.undefined;
  m.accuracy = ratio(tp + tn, tp + tn + fp + fn, "accuracy", u);
  m.precision = ratio(tp, tp + fp, "precision", u);
  m.recall = ratio(tp, tp + fn, "recall", u);
  m.specificity = ratio(tn, tn + fp, "specificity", u);
  m.f1 = ratio(2 * tp, 2 * tp + fp + fn, "f1", u);
  m.fnr = ratio(fn, fn + tp, "fnr", u);
  m.fpr = ratio(fp, tn + fp, "fpr", u);
  const double den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  m.mcc = ratio(tp * tn - fp * fn, den, "mcc", u);
  // Keep the complements exact: fnr + recall = 1 and fpr + specificity = 1.
  if (cm.tp + cm.fn > 0) m.fnr = 1.0 - m.recall;
  if (cm.tn + cm.fp > 0) m.fpr = 1.0 - m.specificity;
  return m;
}

RocCurve roc_and_auroc(std::span<const double> scores, std::span<const int> labels) {
  check_aligned(scores, labels);
  require_both_classes(labels);
  const auto [pos, neg] = class_counts(labels);
  const auto order = descending_order(scores);

  RocCurve roc;
  roc.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  // Twice the area in units of (1/pos)*(1/neg), kept integral for exactness.
  std::uint64_t tp = 0, fp = 0;
  std::uint64_t doubled_area = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    std::uint64_t dtp = 0, dfp = 0;
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? dtp : dfp) += 1;
      ++i;
    }
    // Trapezoid over the tie group.
    doubled_area += dfp * (2 * tp + dtp);
    tp += dtp;
    fp += dfp;
    roc.points.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                          static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  roc.auroc = static_cast<double>(doubled_area) /
              (2.0 * static_cast<double>(pos) * static_cast<double>(neg));
  return roc;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  return roc_and_auroc(scores, labels).auroc;
}

ThresholdSelection select_equal_error_threshold(std::span<const double> scores,
                                                std::span<const int> labels) {
  check_aligned(scores, labels);
  require_both_classes(labels);
  const auto [pos, neg] = class_counts(labels);

  // Ascending distinct scores with per-score class counts.
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  struct Group {
    double score;
    std::uint64_t positives;
    std::uint64_t negatives;
  };
  std::vector<Group> groups;
  for (auto idx : order) {
    if (groups.empty() || groups.back().score != scores[idx]) {
      groups.push_back({scores[idx], 0, 0});
    }
    (labels[idx] == 1 ? groups.back().positives : groups.back().negatives) += 1;
  }

  // With candidate tau between groups g-1 and g, instances in groups < g are
  // predicted negative. FNR = fn/pos, FPR = fp/neg; rates are compared
  // through the integer numerators fn*neg and fp*pos.
  struct Candidate {
    double tau;
    std::uint64_t fn, tn;
  };
  auto key = [&](const Candidate& c) {
    const std::uint64_t fp = neg - c.tn;
    const std::uint64_t a = c.fn * neg;
    const std::uint64_t b = fp * pos;
    return std::pair{a > b ? a - b : b - a, std::max(a, b)};
  };

  const double lowest = groups.front().score;
  const double highest = groups.back().score;
  Candidate best{std::nextafter(lowest, -std::numeric_limits<double>::infinity()), 0, 0};
  auto best_key = key(best);
  std::uint64_t fn = 0, tn = 0;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    fn += groups[g].positives;
    tn += groups[g].negatives;
    const double tau = g + 1 < groups.size()
                           ? groups[g].score + (groups[g + 1].score - groups[g].score) / 2.0
                           : std::nextafter(highest, std::numeric_limits<double>::infinity());
    const Candidate c{tau, fn, tn};
    const auto k = key(c);
    if (k < best_key) {
      best = c;
      best_key = k;
    }
  }

  ThresholdSelection out;
  out.tau = best.tau;
  out.confusion = ConfusionMatrix{pos - best.fn, neg - best.tn, best.fn, best.tn};
  return out;
}

ClusterSS clustering_ss(const Eigen::MatrixXd& points,
                        std::span<const std::size_t> assignments,
                        const Eigen::MatrixXd& centroids) {
  if (static_cast<std::size_t>(points.rows()) != assignments.size()) {
    throw DataError("every point needs exactly one assignment");
  }
  if (points.rows() == 0) throw DataError("no points");
  if (centroids.cols() != points.cols()) throw DataError("centroid dimension mismatch");

  ClusterSS ss;
  const auto k = static_cast<std::size_t>(centroids.rows());
  ss.cluster_sizes.assign(k, 0);
  const Eigen::RowVectorXd grand_mean = points.colwise().mean();
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto c = assignments[static_cast<std::size_t>(i)];
    if (c >= k) throw DataError(fmt::format("assignment {} has no centroid", c));
    ++ss.cluster_sizes[c];
    ss.sswc += (points.row(i) - centroids.row(static_cast<Eigen::Index>(c))).squaredNorm();
    ss.total += (points.row(i) - grand_mean).squaredNorm();
  }
  for (std::size_t c = 0; c < k; ++c) {
    if (ss.cluster_sizes[c] == 0) {
      ss.empty_clusters.push_back(c);
      continue;
    }
    ss.ssbc += static_cast<double>(ss.cluster_sizes[c]) *
               (centroids.row(static_cast<Eigen::Index>(c)) - grand_mean).squaredNorm();
  }
  const double denom = ss.ssbc + ss.sswc;
  ss.explained_variance = denom > 0.0 ? ss.ssbc / denom : 0.0;
  ss.ratio_undefined = ss.sswc == 0.0;
  ss.between_within_ratio = ss.ratio_undefined ? 0.0 : ss.ssbc / ss.sswc;
  return ss;
}

double fidelity_r2(std::span<const double> y, std::span<const double> yhat,
                   R2Denominator denominator) {
  if (y.size() != yhat.size()) {
    throw DataError(fmt::format("{} surrogate scores but {} black-box scores", y.size(),
                                yhat.size()));
  }
  if (y.size() < 2) throw DataError("fidelity R^2 needs at least 2 instances");
  const double mean =
      std::accumulate(yhat.begin(), yhat.end(), 0.0) / static_cast<double>(yhat.size());
  double residual = 0.0, spread = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    residual += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    const double d = (denominator == R2Denominator::kBlackBox ? yhat[i] : y[i]) - mean;
    spread += d * d;
  }
  if (spread == 0.0) throw DataError("degenerate black-box scores");
  return 1.0 - residual / spread;
}

}  // namespace xppm
