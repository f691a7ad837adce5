#include "xppm/local_regions.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "xppm/error.hpp"
#include "xppm/rng.hpp"

namespace xppm {
namespace {

struct Run {
  Eigen::MatrixXd centroids;
  std::vector<std::size_t> assignments;
  double inertia = 0.0;
  std::vector<double> trace;
};

std::size_t distinct_rows(const Eigen::MatrixXd& points) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(points.rows()));
  std::iota(rows.begin(), rows.end(), 0);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index c = 0; c < points.cols(); ++c) {
      if (points(a, c) != points(b, c)) return points(a, c) < points(b, c);
    }
    return false;
  };
  std::sort(rows.begin(), rows.end(), less);
  std::size_t distinct = rows.empty() ? 0 : 1;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (less(rows[i - 1], rows[i])) ++distinct;
  }
  return distinct;
}

// k-means++: first centre uniform, then proportional to squared distance to
// the nearest chosen centre.
Eigen::MatrixXd seed_centroids(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const auto n = points.rows();
  Eigen::MatrixXd centroids(k, points.cols());
  centroids.row(0) = points.row(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n))));
  Eigen::VectorXd nearest(n);
  for (Eigen::Index i = 0; i < n; ++i) nearest(i) = (points.row(i) - centroids.row(0)).squaredNorm();
  for (int c = 1; c < k; ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = n - 1;
    if (total > 0.0) {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        acc += nearest(i);
        if (acc > target && nearest(i) > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centroids.row(c) = points.row(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      nearest(i) = std::min(nearest(i), (points.row(i) - centroids.row(c)).squaredNorm());
    }
  }
  return centroids;
}

// Nearest-centroid assignment; returns squared distances.
Eigen::VectorXd assign_all(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids,
                           std::vector<std::size_t>& assignments) {
  const auto n = points.rows();
  Eigen::VectorXd dist(n);
  assignments.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    std::size_t arg = 0;
    for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) {
        best = d;
        arg = static_cast<std::size_t>(c);
      }
    }
    assignments[static_cast<std::size_t>(i)] = arg;
    dist(i) = best;
  }
  return dist;
}

// Moves every empty cluster's centroid onto the point farthest from its own
// centroid (among clusters with more than one member).
void repair_empty(const Eigen::MatrixXd& points, Eigen::MatrixXd& centroids,
                  std::vector<std::size_t>& assignments, Eigen::VectorXd& dist) {
  const auto k = static_cast<std::size_t>(centroids.rows());
  std::vector<std::size_t> sizes(k, 0);
  for (auto a : assignments) ++sizes[a];
  for (std::size_t c = 0; c < k; ++c) {
    if (sizes[c] > 0) continue;
    Eigen::Index far = -1;
    double far_dist = 0.0;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      if (sizes[assignments[static_cast<std::size_t>(i)]] > 1 && dist(i) > far_dist) {
        far_dist = dist(i);
        far = i;
      }
    }
    if (far < 0) throw DataError("cannot repair an empty cluster: too few distinct points");
    --sizes[assignments[static_cast<std::size_t>(far)]];
    assignments[static_cast<std::size_t>(far)] = c;
    ++sizes[c];
    centroids.row(static_cast<Eigen::Index>(c)) = points.row(far);
    dist(far) = 0.0;
  }
}

Eigen::MatrixXd cluster_means(const Eigen::MatrixXd& points,
                              const std::vector<std::size_t>& assignments, Eigen::Index k) {
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, points.cols());
  Eigen::VectorXd counts = Eigen::VectorXd::Zero(k);
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const auto c = static_cast<Eigen::Index>(assignments[static_cast<std::size_t>(i)]);
    sums.row(c) += points.row(i);
    counts(c) += 1.0;
  }
  for (Eigen::Index c = 0; c < k; ++c) sums.row(c) /= counts(c);
  return sums;
}

double partition_sswc(const Eigen::MatrixXd& points, const Run& run) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    total += (points.row(i) -
              run.centroids.row(static_cast<Eigen::Index>(run.assignments[static_cast<std::size_t>(i)])))
                 .squaredNorm();
  }
  return total;
}

// Hartigan transfers: moving x from cluster a to b changes SSWC by
// n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2. Applies every strictly
// improving move, one point at a time, until none is left.
bool transfer_pass(const Eigen::MatrixXd& points, Run& run, int k, int max_sweeps) {
  std::vector<double> sizes(static_cast<std::size_t>(k), 0.0);
  for (auto a : run.assignments) sizes[a] += 1.0;
  bool moved_any = false;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    bool moved = false;
    for (Eigen::Index i = 0; i < points.rows(); ++i) {
      const auto from = run.assignments[static_cast<std::size_t>(i)];
      const double na = sizes[from];
      if (na <= 1.0) continue;
      const double removal =
          na / (na - 1.0) * (points.row(i) - run.centroids.row(static_cast<Eigen::Index>(from))).squaredNorm();
      double best = removal;
      std::size_t to = from;
      for (int c = 0; c < k; ++c) {
        if (static_cast<std::size_t>(c) == from) continue;
        const double nb = sizes[static_cast<std::size_t>(c)];
        const double cost = nb / (nb + 1.0) * (points.row(i) - run.centroids.row(c)).squaredNorm();
        if (cost < best) {
          best = cost;
          to = static_cast<std::size_t>(c);
        }
      }
      // Relative margin keeps rounding noise from cycling points back and forth.
      if (to == from || best >= removal * (1.0 - 1e-12)) continue;
      const auto a = static_cast<Eigen::Index>(from), b = static_cast<Eigen::Index>(to);
      run.centroids.row(a) = (run.centroids.row(a) * na - points.row(i)) / (na - 1.0);
      const double nb = sizes[to];
      run.centroids.row(b) = (run.centroids.row(b) * nb + points.row(i)) / (nb + 1.0);
      sizes[from] -= 1.0;
      sizes[to] += 1.0;
      run.assignments[static_cast<std::size_t>(i)] = to;
      moved = true;
    }
    if (!moved) break;
    moved_any = true;
    // Recompute exactly to shed incremental rounding.
    run.centroids = cluster_means(points, run.assignments, k);
    run.trace.push_back(partition_sswc(points, run));
  }
  return moved_any;
}

Run lloyd(const Eigen::MatrixXd& points, int k, Rng& rng, const KMeansOptions& options) {
  Run run;
  run.centroids = seed_centroids(points, k, rng);
  Eigen::VectorXd dist;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    dist = assign_all(points, run.centroids, run.assignments);
    repair_empty(points, run.centroids, run.assignments, dist);
    run.trace.push_back(dist.sum());
    Eigen::MatrixXd next = cluster_means(points, run.assignments, k);
    const double movement = (next - run.centroids).rowwise().norm().maxCoeff();
    run.centroids = std::move(next);
    if (movement < options.tolerance) break;
  }
  for (int round = 0; round < options.max_iterations; ++round) {
    // Continue until the stored partition is exactly the nearest-centroid
    // partition of its own means.
    for (int iter = 0; iter < options.max_iterations; ++iter) {
      std::vector<std::size_t> next;
      dist = assign_all(points, run.centroids, next);
      repair_empty(points, run.centroids, next, dist);
      if (next == run.assignments) break;
      run.assignments = std::move(next);
      run.trace.push_back(dist.sum());
      run.centroids = cluster_means(points, run.assignments, k);
    }
    if (!transfer_pass(points, run, k, options.max_iterations)) break;
  }
  run.inertia = partition_sswc(points, run);
  return run;
}

}  // namespace

std::string to_string(RegionSpace space) {
  return space == RegionSpace::kLatent ? "latent" : "original";
}

std::size_t assign(const Eigen::MatrixXd& centroids, std::span<const double> point) {
  if (static_cast<Eigen::Index>(point.size()) != centroids.cols()) {
    throw DataError(fmt::format("point has dimension {}, centroids have {}", point.size(),
                                centroids.cols()));
  }
  const Eigen::Map<const Eigen::RowVectorXd> p(point.data(), static_cast<Eigen::Index>(point.size()));
  double best = std::numeric_limits<double>::infinity();
  std::size_t arg = 0;
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    const double d = (p - centroids.row(c)).squaredNorm();
    if (d < best) {
      best = d;
      arg = static_cast<std::size_t>(c);
    }
  }
  return arg;
}

std::size_t assign(const RegionModel& model, std::span<const double> point) {
  return assign(model.centroids, point);
}

RegionModel kmeans(const Eigen::MatrixXd& points, int k, std::uint64_t seed, int restarts,
                   const KMeansOptions& options, RegionSpace space) {
  if (k < 1) throw ConfigError(fmt::format("k must be >= 1, got {}", k));
  if (restarts < 1) throw ConfigError("restarts must be >= 1");
  if (k > points.rows()) {
    throw DataError(fmt::format("k = {} exceeds the number of points ({})", k, points.rows()));
  }
  if (static_cast<std::size_t>(k) > distinct_rows(points)) {
    throw DataError(fmt::format("k = {} exceeds the number of distinct points", k));
  }

  Run best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (int r = 0; r < restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    Run run = lloyd(points, k, rng, options);
    if (run.inertia < best.inertia) best = std::move(run);
  }

  RegionModel model;
  model.space = space;
  model.k = k;
  model.seed = seed;
  model.restarts = restarts;
  model.centroids = std::move(best.centroids);
  model.assignments = std::move(best.assignments);
  model.inertia = best.inertia;
  model.inertia_trace = std::move(best.trace);
  model.fit_summary = clustering_ss(points, model.assignments, model.centroids);
  return model;
}

int KSelectionTrace::chosen_k() const {
  for (const auto& c : candidates) {
    if (c.chosen) return c.k;
  }
  return 0;
}

std::vector<double> cluster_accuracies(std::span<const std::size_t> assignments, int k,
                                       std::span<const double> scores,
                                       std::span<const int> labels, double tau) {
  if (assignments.size() != scores.size() || scores.size() != labels.size()) {
    throw DataError("assignments, scores and labels must be aligned");
  }
  std::vector<double> correct(static_cast<std::size_t>(k), 0.0);
  std::vector<double> size(static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    const int predicted = scores[i] >= tau ? 1 : 0;
    size[assignments[i]] += 1.0;
    if (predicted == labels[i]) correct[assignments[i]] += 1.0;
  }
  std::vector<double> acc(static_cast<std::size_t>(k), 0.0);
  for (std::size_t c = 0; c < acc.size(); ++c) {
    acc[c] = size[c] > 0 ? correct[c] / size[c] : 0.0;
  }
  return acc;
}

double mean_cluster_accuracy(std::span<const std::size_t> assignments, int k,
                             std::span<const double> scores, std::span<const int> labels,
                             double tau, AccuracyWeighting weighting) {
  const auto acc = cluster_accuracies(assignments, k, scores, labels, tau);
  if (weighting == AccuracyWeighting::kInstanceWeighted) {
    std::vector<double> size(static_cast<std::size_t>(k), 0.0);
    for (auto a : assignments) size[a] += 1.0;
    double total = 0.0;
    for (std::size_t c = 0; c < acc.size(); ++c) total += acc[c] * size[c];
    return total / static_cast<double>(assignments.size());
  }
  double total = 0.0;
  for (double a : acc) total += a;
  return total / static_cast<double>(acc.size());
}

KSelection select_k(const Eigen::MatrixXd& codes, std::span<const double> scores,
                    std::span<const int> labels, double tau, std::span<const int> k_range,
                    std::uint64_t seed, int restarts, AccuracyWeighting weighting,
                    RegionSpace space) {
  if (k_range.empty()) throw ConfigError("k range is empty");
  if (static_cast<std::size_t>(codes.rows()) != scores.size() ||
      scores.size() != labels.size()) {
    throw DataError("codes, scores and labels must be aligned by instance");
  }
  std::vector<int> ks(k_range.begin(), k_range.end());
  std::sort(ks.begin(), ks.end());
  ks.erase(std::unique(ks.begin(), ks.end()), ks.end());
  const std::size_t distinct = distinct_rows(codes);

  KSelection out;
  out.trace.weighting = weighting;
  std::ptrdiff_t chosen = -1;
  for (int k : ks) {
    KCandidate cand;
    cand.k = k;
    if (k < 1 || k > codes.rows() || static_cast<std::size_t>(k) > distinct) {
      cand.feasible = false;
      out.trace.candidates.push_back(cand);
      continue;
    }
    RegionModel model = kmeans(codes, k, seed, restarts, {}, space);
    cand.mean_accuracy = mean_cluster_accuracy(model.assignments, k, scores, labels, tau, weighting);
    cand.explained_variance = model.fit_summary.explained_variance;
    spdlog::debug("k = {}: mean local accuracy {:.4f}, explained variance {:.4f}", k,
                  cand.mean_accuracy, cand.explained_variance);
    if (chosen < 0 || cand.mean_accuracy >
                          out.trace.candidates[static_cast<std::size_t>(chosen)].mean_accuracy) {
      chosen = static_cast<std::ptrdiff_t>(out.trace.candidates.size());
      out.model = std::move(model);
    }
    out.trace.candidates.push_back(cand);
  }
  if (chosen < 0) throw DataError("no feasible k in the candidate range");
  out.trace.candidates[static_cast<std::size_t>(chosen)].chosen = true;
  return out;
}

RegionModel baseline_regions(const Eigen::MatrixXd& features, int k, std::uint64_t seed,
                             int restarts) {
  return kmeans(features, k, seed, restarts, {}, RegionSpace::kOriginal);
}

KSelection baseline_regions(const Eigen::MatrixXd& features, std::span<const double> scores,
                            std::span<const int> labels, double tau,
                            std::span<const int> k_range, std::uint64_t seed, int restarts,
                            AccuracyWeighting weighting) {
  return select_k(features, scores, labels, tau, k_range, seed, restarts, weighting,
                  RegionSpace::kOriginal);
}

std::vector<int> k_range(int lo, int hi) {
  std::vector<int> ks;
  for (int k = lo; k <= hi; ++k) ks.push_back(k);
  return ks;
}

}  // namespace xppm
