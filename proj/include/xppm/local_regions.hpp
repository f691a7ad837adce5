#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "xppm/metrics.hpp"

namespace xppm {

enum class RegionSpace { kLatent, kOriginal };

std::string to_string(RegionSpace space);

struct KMeansOptions {
  int max_iterations = 300;
  double tolerance = 1e-6;  // max centroid movement (Euclidean)
};

struct RegionModel {
  RegionSpace space = RegionSpace::kLatent;
  Eigen::MatrixXd centroids;  // k x dim
  std::vector<std::size_t> assignments;
  int k = 0;
  std::uint64_t seed = 0;
  int restarts = 1;
  double inertia = 0.0;  // SSWC of the returned partition
  ClusterSS fit_summary;
  // SSWC after every assignment step of the winning restart.
  std::vector<double> inertia_trace;
};

// Nearest centroid by Euclidean distance; ties go to the lowest cluster id.
std::size_t assign(const RegionModel& model, std::span<const double> point);
std::size_t assign(const Eigen::MatrixXd& centroids, std::span<const double> point);

// Lloyd iterations from k-means++ seeds, best of `restarts` by SSWC. Empty
// clusters are reseeded at the point farthest from its centroid. Rows of
// `points` are observations.
RegionModel kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts,
                   const KMeansOptions& options = {}, RegionSpace space = RegionSpace::kLatent);

enum class AccuracyWeighting { kUnweighted, kInstanceWeighted };

struct KCandidate {
  int k = 0;
  bool feasible = true;
  double mean_accuracy = 0.0;
  double explained_variance = 0.0;
  bool chosen = false;
};

struct KSelectionTrace {
  std::vector<KCandidate> candidates;
  AccuracyWeighting weighting = AccuracyWeighting::kUnweighted;
  int chosen_k() const;
};

struct KSelection {
  RegionModel model;
  KSelectionTrace trace;
};

// Per-cluster accuracy of the black-box classification (score >= tau).
std::vector<double> cluster_accuracies(std::span<const std::size_t> assignments, int k,
                                       std::span<const double> scores,
                                       std::span<const int> labels, double tau);

double mean_cluster_accuracy(std::span<const std::size_t> assignments, int k,
                             std::span<const double> scores, std::span<const int> labels,
                             double tau, AccuracyWeighting weighting);

// Fits k-means for every candidate k and keeps the one maximizing the mean
// per-cluster black-box accuracy at tau (ties: smaller k).
KSelection select_k(const Eigen::MatrixXd& codes, std::span<const double> scores,
                    std::span<const int> labels, double tau, std::span<const int> k_range,
                    std::uint64_t seed, int restarts,
                    AccuracyWeighting weighting = AccuracyWeighting::kUnweighted,
                    RegionSpace space = RegionSpace::kLatent);

// The same clustering run on the original (scaled) feature space.
RegionModel baseline_regions(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                             int restarts);
KSelection baseline_regions(const Eigen::MatrixXd& features, std::span<const double> scores,
                            std::span<const int> labels, double tau,
                            std::span<const int> k_range, std::uint64_t seed, int restarts,
                            AccuracyWeighting weighting = AccuracyWeighting::kUnweighted);

std::vector<int> k_range(int lo, int hi);

}  // namespace xppm
