#include "xppm/neural_net.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <thread>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "xppm/error.hpp"
#include "xppm/metrics.hpp"

namespace xppm {
namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// log(1 + exp(-|z|)) + max(z, 0) - y z
double cross_entropy_from_logit(double z, int y) {
  return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0) - (y == 1 ? z : 0.0);
}

// Inverted-dropout mask: entries are 0 or 1 / (1 - ratio).
Eigen::MatrixXd dropout_mask(Eigen::Index rows, Eigen::Index cols, double ratio, Rng& rng) {
  Eigen::MatrixXd mask(rows, cols);
  const double keep = 1.0 - ratio;
  const double scale = 1.0 / keep;
  for (Eigen::Index c = 0; c < cols; ++c) {
    for (Eigen::Index r = 0; r < rows; ++r) {
      mask(r, c) = rng.uniform() < keep ? scale : 0.0;
    }
  }
  return mask;
}

void check_dimension(const Network& net, Eigen::Index cols) {
  if (cols != net.input_dim()) {
    throw DataError(fmt::format("input has {} features, network expects {}", cols,
                                net.input_dim()));
  }
}

}  // namespace

bool operator==(const DenseLayer& a, const DenseLayer& b) {
  return a.weights.rows() == b.weights.rows() && a.weights.cols() == b.weights.cols() &&
         a.bias.size() == b.bias.size() && a.weights == b.weights && a.bias == b.bias;
}

void NetworkConfig::validate() const {
  if (hidden_layer_sizes.empty()) throw ConfigError("network needs at least one hidden layer");
  for (int s : hidden_layer_sizes) {
    if (s < 1) throw ConfigError(fmt::format("hidden layer size {} must be >= 1", s));
  }
  auto check_ratio = [](double r, const char* what) {
    if (!(r >= 0.0 && r < 1.0)) {
      throw ConfigError(fmt::format("{} dropout ratio {} not in [0,1)", what, r));
    }
  };
  check_ratio(input_dropout_ratio, "input");
  check_ratio(hidden_dropout_ratio, "hidden");
}

void TrainingConfig::validate() const {
  if (!(rho > 0.0 && rho < 1.0)) throw ConfigError(fmt::format("rho {} not in (0,1)", rho));
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be > 0");
  if (minibatch_size < 1) throw ConfigError("minibatch size must be >= 1");
  if (max_epochs < 0) throw ConfigError("max_epochs must be >= 0");
  if (stopping_rounds < 1) throw ConfigError("stopping_rounds must be >= 1");
  if (stopping_tolerance < 0.0) throw ConfigError("stopping_tolerance must be >= 0");
}

Network::Network(int input_dim, const NetworkConfig& config) : config_(config) {
  config_.validate();
  if (input_dim < 1) throw ConfigError("input dimension must be >= 1");
  Rng rng(config.seed);
  int fan_in = input_dim;
  std::vector<int> sizes = config.hidden_layer_sizes;
  sizes.push_back(1);
  for (int fan_out : sizes) {
    DenseLayer layer;
    const double r = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    layer.weights.resize(fan_out, fan_in);
    for (Eigen::Index c = 0; c < fan_in; ++c) {
      for (Eigen::Index row = 0; row < fan_out; ++row) {
        layer.weights(row, c) = rng.uniform(-r, r);
      }
    }
    layer.bias = Eigen::VectorXd::Zero(fan_out);
    layers_.push_back(std::move(layer));
    fan_in = fan_out;
  }
}

Network::Network(std::vector<DenseLayer> layers, const NetworkConfig& config)
    : config_(config), layers_(std::move(layers)) {
  if (layers_.size() < 2) throw ConfigError("network needs a hidden and an output layer");
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    const auto& l = layers_[i];
    if (l.bias.size() != l.weights.rows()) throw ConfigError("bias size mismatch");
    if (i > 0 && l.weights.cols() != layers_[i - 1].weights.rows()) {
      throw ConfigError(fmt::format("layer {} input width does not chain", i));
    }
  }
  if (layers_.back().weights.rows() != 1) throw ConfigError("output layer must have one unit");
  config_.hidden_layer_sizes.clear();
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    config_.hidden_layer_sizes.push_back(static_cast<int>(layers_[i].weights.rows()));
  }
}

int Network::input_dim() const {
  return layers_.empty() ? 0 : static_cast<int>(layers_.front().weights.cols());
}

int Network::latent_dim() const {
  return layers_.size() < 2 ? 0 : static_cast<int>(layers_[layers_.size() - 2].weights.rows());
}

ForwardResult Network::forward(std::span<const double> x, ForwardMode mode, Rng* rng) const {
  if (static_cast<int>(x.size()) != input_dim()) {
    throw DataError(fmt::format("input has {} features, network expects {}", x.size(),
                                input_dim()));
  }
  const bool dropout = mode == ForwardMode::kTrain;
  if (dropout && rng == nullptr) throw DataError("training-mode forward needs an rng");
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  if (dropout) a = a.cwiseProduct(dropout_mask(a.size(), 1, config_.input_dropout_ratio, *rng));

  ForwardResult result;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) {
    Eigen::VectorXd h = (layers_[i].weights * a + layers_[i].bias).cwiseMax(0.0);
    if (dropout) h = h.cwiseProduct(dropout_mask(h.size(), 1, config_.hidden_dropout_ratio, *rng));
    result.hidden.push_back(h);
    a = std::move(h);
  }
  result.logit = (layers_.back().weights * a + layers_.back().bias)(0);
  result.score = sigmoid(result.logit);
  return result;
}

double Network::score(std::span<const double> x) const {
  return forward(x, ForwardMode::kInfer).score;
}

double Network::loss_and_gradient(const Eigen::MatrixXd& x, std::span<const int> labels,
                                  ForwardMode mode, Rng* rng,
                                  Eigen::VectorXd& gradient) const {
  check_dimension(*this, x.cols());
  if (static_cast<std::size_t>(x.rows()) != labels.size() || x.rows() == 0) {
    throw DataError("loss needs one label per row and at least one row");
  }
  const bool dropout = mode == ForwardMode::kTrain;
  if (dropout && rng == nullptr) throw DataError("training-mode loss needs an rng");
  const Eigen::Index batch = x.rows();
  const std::size_t depth = layers_.size();

  // Column-per-instance activations.
  std::vector<Eigen::MatrixXd> inputs(depth);   // input to layer i (after masks)
  std::vector<Eigen::MatrixXd> pre(depth);      // pre-activation of layer i
  std::vector<Eigen::MatrixXd> masks(depth);    // dropout mask applied to output of hidden i
  inputs[0] = x.transpose();
  if (dropout) {
    inputs[0] = inputs[0].cwiseProduct(
        dropout_mask(inputs[0].rows(), batch, config_.input_dropout_ratio, *rng));
  }
  for (std::size_t i = 0; i < depth; ++i) {
    pre[i] = (layers_[i].weights * inputs[i]).colwise() + layers_[i].bias;
    if (i + 1 == depth) break;
    Eigen::MatrixXd h = pre[i].cwiseMax(0.0);
    if (dropout) {
      masks[i] = dropout_mask(h.rows(), batch, config_.hidden_dropout_ratio, *rng);
      h = h.cwiseProduct(masks[i]);
    }
    inputs[i + 1] = std::move(h);
  }

  const double inv_batch = 1.0 / static_cast<double>(batch);
  double loss = 0.0;
  Eigen::MatrixXd delta(1, batch);
  for (Eigen::Index b = 0; b < batch; ++b) {
    const double z = pre[depth - 1](0, b);
    const int y = labels[static_cast<std::size_t>(b)];
    loss += cross_entropy_from_logit(z, y);
    delta(0, b) = (sigmoid(z) - static_cast<double>(y)) * inv_batch;
  }
  loss *= inv_batch;

  gradient.resize(static_cast<Eigen::Index>(parameter_count()));
  std::vector<Eigen::Index> offsets(depth);
  Eigen::Index offset = 0;
  for (std::size_t i = 0; i < depth; ++i) {
    offsets[i] = offset;
    offset += layers_[i].weights.size() + layers_[i].bias.size();
  }
  for (std::size_t i = depth; i-- > 0;) {
    const auto& layer = layers_[i];
    Eigen::Map<Eigen::MatrixXd> gw(gradient.data() + offsets[i], layer.weights.rows(),
                                   layer.weights.cols());
    gw.noalias() = delta * inputs[i].transpose();
    gradient.segment(offsets[i] + layer.weights.size(), layer.bias.size()) = delta.rowwise().sum();
    if (i == 0) break;
    Eigen::MatrixXd upstream = layer.weights.transpose() * delta;
    if (dropout) upstream = upstream.cwiseProduct(masks[i - 1]);
    delta = upstream.cwiseProduct((pre[i - 1].array() > 0.0).cast<double>().matrix());
  }
  return loss;
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

Eigen::VectorXd Network::parameters() const {
  Eigen::VectorXd flat(static_cast<Eigen::Index>(parameter_count()));
  Eigen::Index offset = 0;
  for (const auto& l : layers_) {
    flat.segment(offset, l.weights.size()) =
        Eigen::Map<const Eigen::VectorXd>(l.weights.data(), l.weights.size());
    offset += l.weights.size();
    flat.segment(offset, l.bias.size()) = l.bias;
    offset += l.bias.size();
  }
  return flat;
}

void Network::set_parameters(const Eigen::VectorXd& flat) {
  if (static_cast<std::size_t>(flat.size()) != parameter_count()) {
    throw DataError("parameter vector has the wrong length");
  }
  Eigen::Index offset = 0;
  for (auto& l : layers_) {
    Eigen::Map<Eigen::VectorXd>(l.weights.data(), l.weights.size()) =
        flat.segment(offset, l.weights.size());
    offset += l.weights.size();
    l.bias = flat.segment(offset, l.bias.size());
    offset += l.bias.size();
  }
}

Eigen::VectorXd adadelta_step(AdadeltaState& state, Eigen::VectorXd& params,
                              const Eigen::VectorXd& gradient, double rho, double epsilon) {
  state.mean_sq_grad = rho * state.mean_sq_grad + (1.0 - rho) * gradient.cwiseAbs2();
  Eigen::VectorXd update =
      -((state.mean_sq_update.array() + epsilon).sqrt() /
        (state.mean_sq_grad.array() + epsilon).sqrt() * gradient.array())
           .matrix();
  state.mean_sq_update = rho * state.mean_sq_update + (1.0 - rho) * update.cwiseAbs2();
  params += update;
  return update;
}

namespace {

Eigen::MatrixXd gather_rows(const Eigen::MatrixXd& x, std::span<const std::size_t> rows) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

std::vector<int> gather_labels(std::span<const int> labels, std::span<const std::size_t> rows) {
  std::vector<int> out;
  out.reserve(rows.size());
  for (auto r : rows) out.push_back(labels[r]);
  return out;
}

// One epoch of sequential minibatch ADADELTA.
void sequential_epoch(Network& net, AdadeltaState& state, Eigen::VectorXd& params,
                      const Eigen::MatrixXd& x, std::span<const int> labels,
                      std::span<const std::size_t> order, const TrainingConfig& cfg,
                      Rng& rng) {
  Eigen::VectorXd gradient;
  const auto batch = static_cast<std::size_t>(cfg.minibatch_size);
  for (std::size_t start = 0; start < order.size(); start += batch) {
    const auto rows = order.subspan(start, std::min(batch, order.size() - start));
    const auto xb = gather_rows(x, rows);
    const auto yb = gather_labels(labels, rows);
    net.loss_and_gradient(xb, yb, ForwardMode::kTrain, &rng, gradient);
    adadelta_step(state, params, gradient, cfg.rho, cfg.epsilon);
    net.set_parameters(params);
  }
}

// One epoch of lock-free concurrent minibatch ADADELTA. Each worker reads a
// (possibly torn across elements) snapshot of the shared parameters and
// applies its update element by element with relaxed atomics.
void lock_free_epoch(Network& net, AdadeltaState& state, Eigen::VectorXd& params,
                     const Eigen::MatrixXd& x, std::span<const int> labels,
                     std::span<const std::size_t> order, const TrainingConfig& cfg,
                     std::uint64_t seed) {
  const auto batch = static_cast<std::size_t>(cfg.minibatch_size);
  const std::size_t n_batches = (order.size() + batch - 1) / batch;
  unsigned workers = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads)
                                     : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, std::max<std::size_t>(n_batches, 1)));
  std::atomic<std::size_t> next{0};
  const Eigen::Index n_params = params.size();

  auto worker = [&](unsigned id) {
    Rng rng(derive_seed(seed, id));
    Network local = net;
    Eigen::VectorXd snapshot(n_params), gradient;
    for (std::size_t b = next.fetch_add(1); b < n_batches; b = next.fetch_add(1)) {
      for (Eigen::Index p = 0; p < n_params; ++p) {
        snapshot(p) = std::atomic_ref<double>(params(p)).load(std::memory_order_relaxed);
      }
      local.set_parameters(snapshot);
      const auto rows = order.subspan(b * batch, std::min(batch, order.size() - b * batch));
      local.loss_and_gradient(gather_rows(x, rows), gather_labels(labels, rows),
                              ForwardMode::kTrain, &rng, gradient);
      for (Eigen::Index p = 0; p < n_params; ++p) {
        std::atomic_ref<double> eg(state.mean_sq_grad(p));
        std::atomic_ref<double> edx(state.mean_sq_update(p));
        std::atomic_ref<double> w(params(p));
        const double g = gradient(p);
        const double eg2 = cfg.rho * eg.load(std::memory_order_relaxed) + (1.0 - cfg.rho) * g * g;
        eg.store(eg2, std::memory_order_relaxed);
        const double prev = edx.load(std::memory_order_relaxed);
        const double dx = -std::sqrt(prev + cfg.epsilon) / std::sqrt(eg2 + cfg.epsilon) * g;
        edx.store(cfg.rho * prev + (1.0 - cfg.rho) * dx * dx, std::memory_order_relaxed);
        w.store(w.load(std::memory_order_relaxed) + dx, std::memory_order_relaxed);
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < workers; ++t) pool.emplace_back(worker, t);
  for (auto& t : pool) t.join();
  net.set_parameters(params);
}

bool has_both_classes(std::span<const int> labels) {
  bool pos = false, neg = false;
  for (int l : labels) (l == 1 ? pos : neg) = true;
  return pos && neg;
}

}  // namespace

TrainedNetwork train(const Dataset& train_set, const Dataset& validation_set,
                     const NetworkConfig& net_config, const TrainingConfig& train_config) {
  net_config.validate();
  train_config.validate();
  if (!train_set.schema || !validation_set.schema ||
      train_set.schema->dimension() != validation_set.schema->dimension()) {
    throw DataError("training and validation sets must share one schema");
  }
  if (validation_set.instances.empty()) throw DataError("validation set is empty");
  const auto train_labels = train_set.labels();
  if (!has_both_classes(train_labels)) throw DataError("degenerate labels");

  const Eigen::MatrixXd x = train_set.matrix();
  const Eigen::MatrixXd x_val = validation_set.matrix();
  auto val_labels = validation_set.labels();
  const bool val_usable = has_both_classes(val_labels);
  if (!val_usable) {
    spdlog::warn("validation set holds a single class; stopping on training AUROC");
  }

  TrainedNetwork result;
  result.training = train_config;
  result.network = Network(static_cast<int>(x.cols()), net_config);
  if (train_config.max_epochs == 0) return result;

  Network net = result.network;
  Eigen::VectorXd params = net.parameters();
  AdadeltaState state(static_cast<std::size_t>(params.size()));
  Rng rng(derive_seed(net_config.seed, 1));
  std::vector<std::size_t> order(static_cast<std::size_t>(x.rows()));
  std::iota(order.begin(), order.end(), 0);

  std::optional<double> stop_reference;
  double best_auc = -std::numeric_limits<double>::infinity();
  int stale_rounds = 0;
  for (int epoch = 1; epoch <= train_config.max_epochs; ++epoch) {
    rng.shuffle(std::span<std::size_t>(order));
    if (train_config.lock_free_parallel) {
      lock_free_epoch(net, state, params, x, train_labels, order, train_config,
                      derive_seed(net_config.seed, 1000 + static_cast<std::uint64_t>(epoch)));
    } else {
      sequential_epoch(net, state, params, x, train_labels, order, train_config, rng);
    }

    const double auc = val_usable ? auroc(predict_scores(net, x_val), val_labels)
                                  : auroc(predict_scores(net, x), train_labels);
    result.history.push_back(auc);
    if (auc > best_auc) {
      best_auc = auc;
      result.network = net;
      result.epoch_selected = epoch;
    }
    if (!stop_reference ||
        auc > *stop_reference + train_config.stopping_tolerance * std::abs(*stop_reference)) {
      stop_reference = auc;
      stale_rounds = 0;
    } else if (++stale_rounds >= train_config.stopping_rounds) {
      spdlog::debug("early stop after epoch {} (best AUROC {:.4f} at epoch {})", epoch,
                    best_auc, result.epoch_selected);
      break;
    }
  }
  return result;
}

std::vector<double> predict_scores(const Network& net, const Eigen::MatrixXd& features) {
  check_dimension(net, features.cols());
  const auto& layers = net.layers();
  Eigen::MatrixXd a = features.transpose();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    a = ((layers[i].weights * a).colwise() + layers[i].bias).cwiseMax(0.0);
  }
  const Eigen::MatrixXd logits = (layers.back().weights * a).colwise() + layers.back().bias;
  std::vector<double> scores(static_cast<std::size_t>(features.rows()));
  for (Eigen::Index i = 0; i < logits.cols(); ++i) {
    scores[static_cast<std::size_t>(i)] = sigmoid(logits(0, i));
  }
  return scores;
}

std::vector<double> predict_scores(const TrainedNetwork& net, const Dataset& data) {
  return predict_scores(net.network, data.matrix());
}

Eigen::MatrixXd latent_codes(const Network& net, const Eigen::MatrixXd& features) {
  check_dimension(net, features.cols());
  const auto& layers = net.layers();
  if (layers.size() < 2) throw DataError("network has no hidden layer");
  Eigen::MatrixXd a = features.transpose();
  for (std::size_t i = 0; i + 1 < layers.size(); ++i) {
    a = ((layers[i].weights * a).colwise() + layers[i].bias).cwiseMax(0.0);
  }
  return a.transpose();
}

Eigen::MatrixXd latent_codes(const TrainedNetwork& net, const Dataset& data) {
  return latent_codes(net.network, data.matrix());
}

}  // namespace xppm
