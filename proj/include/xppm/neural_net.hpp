#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "xppm/encoding.hpp"
#include "xppm/rng.hpp"

namespace xppm {

// Rectifier hidden layers, a single sigmoid output unit.
struct NetworkConfig {
  std::vector<int> hidden_layer_sizes{64, 32};
  double input_dropout_ratio = 0.1;
  double hidden_dropout_ratio = 0.3;
  std::uint64_t seed = 42;

  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

struct TrainingConfig {
  double rho = 0.99;
  double epsilon = 1e-8;
  int minibatch_size = 32;
  int max_epochs = 200;
  double stopping_tolerance = 0.01;  // relative
  int stopping_rounds = 10;
  // Hogwild-style concurrent minibatch updates; forfeits determinism.
  bool lock_free_parallel = false;
  int threads = 0;  // 0: hardware concurrency (lock-free mode only)

  void validate() const;
  bool operator==(const TrainingConfig&) const = default;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // fan_out x fan_in
  Eigen::VectorXd bias;
};

// Exact (bitwise-value) equality of shapes and entries.
bool operator==(const DenseLayer& a, const DenseLayer& b);

enum class ForwardMode { kTrain, kInfer };

// Activations of every layer for one input; hidden[i] is post-rectifier.
struct ForwardResult {
  std::vector<Eigen::VectorXd> hidden;
  double logit = 0.0;
  double score = 0.0;
};

class Network {
 public:
  Network() = default;
  // Uniform adaptive initialization: weights ~ U[-r, r] with
  // r = sqrt(6 / (fan_in + fan_out)); biases 0.
  Network(int input_dim, const NetworkConfig& config);
  Network(std::vector<DenseLayer> layers, const NetworkConfig& config);

  int input_dim() const;
  int latent_dim() const;
  const NetworkConfig& config() const { return config_; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  // Dropout masks are drawn from `rng` only in kTrain mode (inverted dropout:
  // kept units scaled by 1 / (1 - ratio)).
  ForwardResult forward(std::span<const double> x, ForwardMode mode, Rng* rng = nullptr) const;
  double score(std::span<const double> x) const;

  // Mean binary cross-entropy over the rows of `x` and its gradient with
  // respect to every parameter, flattened in parameter order (per layer:
  // weights column-major, then bias).
  double loss_and_gradient(const Eigen::MatrixXd& x, std::span<const int> labels,
                           ForwardMode mode, Rng* rng, Eigen::VectorXd& gradient) const;

  std::size_t parameter_count() const;
  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);

  bool operator==(const Network&) const = default;

 private:
  NetworkConfig config_;
  std::vector<DenseLayer> layers_;
};

// ADADELTA accumulators over a flat parameter vector.
struct AdadeltaState {
  Eigen::VectorXd mean_sq_grad;
  Eigen::VectorXd mean_sq_update;

  explicit AdadeltaState(std::size_t n = 0)
      : mean_sq_grad(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))),
        mean_sq_update(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n))) {}
};

// E[g^2] <- rho E[g^2] + (1 - rho) g^2
// dx = -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
// E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
// params += dx. Returns dx.
Eigen::VectorXd adadelta_step(AdadeltaState& state, Eigen::VectorXd& params,
                              const Eigen::VectorXd& gradient, double rho, double epsilon);

struct TrainedNetwork {
  Network network;
  TrainingConfig training;
  std::vector<double> history;  // validation AUROC per epoch
  int epoch_selected = 0;       // 1-based; 0 when no epoch ran

  bool operator==(const TrainedNetwork&) const = default;
};

// Minibatch backprop of cross-entropy with ADADELTA; validation AUROC after
// every epoch; early stopping on the relative tolerance; returns the
// best-epoch snapshot.
TrainedNetwork train(const Dataset& train_set, const Dataset& validation_set,
                     const NetworkConfig& net_config, const TrainingConfig& train_config);

std::vector<double> predict_scores(const Network& net, const Eigen::MatrixXd& features);
std::vector<double> predict_scores(const TrainedNetwork& net, const Dataset& data);

// Last-hidden-layer activations (inference mode), one row per instance.
Eigen::MatrixXd latent_codes(const Network& net, const Eigen::MatrixXd& features);
Eigen::MatrixXd latent_codes(const TrainedNetwork& net, const Dataset& data);

}  // namespace xppm
