#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace xppm {

// Predicted positive iff score >= tau. Positive = no push-to-front.
struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;
  std::uint64_t tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

struct ClassificationMeasures {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double specificity = 0.0;
  double mcc = 0.0;
  double f1 = 0.0;
  double fnr = 0.0;
  double fpr = 0.0;
  // Names of measures whose denominator was zero (reported as 0).
  std::vector<std::string> undefined;
};

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auroc = 0.0;
};

struct ThresholdSelection {
  double tau = 0.0;
  ConfusionMatrix confusion;
};

// Sum-of-squares decomposition of a partition. explained_variance is
// SSBC / (SSBC + SSWC); between_within_ratio is SSBC / SSWC.
struct ClusterSS {
  double sswc = 0.0;
  double ssbc = 0.0;
  double total = 0.0;  // around the grand mean
  double explained_variance = 0.0;
  double between_within_ratio = 0.0;
  bool ratio_undefined = false;  // SSWC == 0
  std::vector<std::size_t> cluster_sizes;
  std::vector<std::size_t> empty_clusters;
};

ConfusionMatrix confusion_at_threshold(std::span<const double> scores,
                                       std::span<const int> labels, double tau);

ClassificationMeasures classification_measures(const ConfusionMatrix& cm);

RocCurve roc_and_auroc(std::span<const double> scores, std::span<const int> labels);

// Convenience: AUROC only.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Chooses tau minimizing |FNR - FPR| over midpoints between consecutive
// distinct scores plus one sentinel below the minimum and one above the
// maximum. Ties: smaller max(FNR, FPR), then smaller tau.
ThresholdSelection select_equal_error_threshold(std::span<const double> scores,
                                                std::span<const int> labels);

// Points are rows. assignments[i] indexes a row of centroids.
ClusterSS clustering_ss(const Eigen::MatrixXd& points,
                        std::span<const std::size_t> assignments,
                        const Eigen::MatrixXd& centroids);

enum class R2Denominator {
  kBlackBox,  // sum (yhat_i - mean(yhat))^2
  kLiteral,   // sum (y_i - mean(yhat))^2, as printed in the source table
};

// y: surrogate scores, yhat: black-box scores. Throws DataError when the
// denominator is zero ("degenerate black-box scores").
double fidelity_r2(std::span<const double> y, std::span<const double> yhat,
                   R2Denominator denominator = R2Denominator::kBlackBox);

}  // namespace xppm
