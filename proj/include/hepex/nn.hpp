#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hepex/data.hpp"

namespace hepex {

using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class Arch { Autoenc1, Autoenc2, Autoenc3 };

Arch parse_arch(std::string_view name);
std::string to_string(Arch arch);
std::vector<Eigen::Index> arch_dims(Arch arch);

/// {training epochs, re-training epochs} per architecture.
struct EpochPlan {
  int train;
  int retrain;
};
EpochPlan default_epochs(Arch arch);

/// Fully-connected layer with a binary prune mask over its weights.
struct FCLayer {
  Matrix weights;  // out_dim x in_dim
  Vector bias;     // out_dim
  Mask mask;       // 1 = active, 0 = pruned

  Eigen::Index in_dim() const { return weights.cols(); }
  Eigen::Index out_dim() const { return weights.rows(); }

  /// Forces weights to zero wherever the mask is zero.
  void apply_mask();
  Eigen::Index active_count() const;
};

/// Chain of FC layers, each followed by x -> x^2 unless `linear_output`
/// exempts the last one.
struct Network {
  std::vector<FCLayer> layers;
  bool linear_output = false;

  Eigen::Index input_dim() const { return layers.front().in_dim(); }
  Eigen::Index output_dim() const { return layers.back().out_dim(); }
  bool squares(std::size_t layer) const {
    return !(linear_output && layer + 1 == layers.size());
  }

  /// Throws ShapeError when adjacent layers do not compose.
  void validate() const;
  bool masks_consistent() const;
};

/// dims = {in, hidden..., out}; weights and biases uniform in +-sqrt(1/in_dim).
Network build_network(std::span<const Eigen::Index> dims, std::uint64_t seed,
                      bool linear_output = false);
Network build_autoencoder(Arch arch, std::uint64_t seed, bool linear_output = false);

class StaleCacheError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

struct ForwardCache {
  std::vector<Matrix> inputs;  // activation entering each layer (batch x in)
  std::vector<Matrix> pre;     // z = a W^T + b (batch x out)
  std::uint64_t fingerprint = 0;
};

struct ForwardResult {
  Matrix output;
  ForwardCache cache;
};

/// Batched inference; `batch` has one sample per row.
ForwardResult forward(const Network& net, const Matrix& batch);

/// Output only, without keeping the cache.
Matrix predict(const Network& net, const Matrix& batch);

/// Inference where every pre-activation is the correctly rounded sum of the
/// (individually rounded) products and the bias. The result does not depend
/// on the order of the inputs, so reindexed networks agree bit for bit.
Matrix predict_exact(const Network& net, const Matrix& batch);

/// Mean over all elements of the squared difference.
double mse_loss(const Matrix& output, const Matrix& target);

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<Vector> bias;
};

/// Gradients of mse_loss(forward(batch), target). Entries at masked weights
/// are exactly zero.
Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& target);

/// Adam with first/second moments per parameter.
struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Matrix> m_weights, v_weights;
  std::vector<Vector> m_bias, v_bias;

  /// Allocates zero moments matching `net` if not already shaped.
  void bind(const Network& net);
  /// One update, followed by mask re-application.
  void apply(Network& net, const Gradients& grads);
};

struct TrainOptions {
  int epochs = 1;
  int batch_size = 10;
  std::uint64_t seed = 0;
};

/// Shuffled mini-batch training; returns the mean training loss per epoch.
/// The dataset form reconstructs its own samples.
std::vector<double> train(Network& net, const Dataset& data, const TrainOptions& options,
                          AdamState& adam);
std::vector<double> train(Network& net, const Matrix& inputs, const Matrix& targets,
                          const TrainOptions& options, AdamState& adam);

/// Mean test MSE over the dataset in its stored order.
double evaluate(const Network& net, const Dataset& data);
double evaluate(const Network& net, const Matrix& inputs, const Matrix& targets);

/// Checksum over shapes, weights and biases; used to detect stale caches.
std::uint64_t parameter_fingerprint(const Network& net);

}  // namespace hepex
