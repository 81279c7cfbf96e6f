#include "hepex/nn.hpp"

#include <bit>
#include <cmath>
#include <numeric>

#include "exact_sum.hpp"
#include "hepex/rng.hpp"

namespace hepex {

namespace {

constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kShuffleStream = 1000;

// Rows of `source` selected by `rows`, copied into `out`.
void gather_rows(const Matrix& source, std::span<const Eigen::Index> rows, Matrix& out) {
  out.resize(static_cast<Eigen::Index>(rows.size()), source.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = source.row(rows[i]);
  }
}

void check_batch(const Network& net, const Matrix& batch) {
  if (net.layers.empty()) throw ShapeError("network has no layers");
  if (batch.cols() != net.input_dim()) {
    throw ShapeError("batch feature dim " + std::to_string(batch.cols()) +
                     " does not match network input dim " + std::to_string(net.input_dim()));
  }
}

ForwardResult forward_impl(const Network& net, const Matrix& batch);

Gradients backward_impl(const Network& net, const ForwardCache& cache, const Matrix& target,
                        std::span<const Matrix> float_masks) {
  const std::size_t depth = net.layers.size();
  const Matrix& last_pre = cache.pre.back();
  if (target.rows() != last_pre.rows() || target.cols() != last_pre.cols()) {
    throw ShapeError("target shape does not match network output");
  }
  Gradients grads;
  grads.weights.resize(depth);
  grads.bias.resize(depth);

  const Matrix& out_act = depth > 0 && net.squares(depth - 1)
                              ? Matrix(last_pre.array().square())
                              : last_pre;
  const double scale = 2.0 / static_cast<double>(target.size());
  Matrix delta = (out_act - target) * scale;  // dL/da for the last layer

  for (std::size_t k = depth; k-- > 0;) {
    // dL/dz = dL/da * 2z for square activations.
    if (net.squares(k)) delta.array() *= 2.0 * cache.pre[k].array();
    grads.weights[k].noalias() = delta.transpose() * cache.inputs[k];
    if (!float_masks.empty()) {
      grads.weights[k].array() *= float_masks[k].array();
    } else {
      grads.weights[k].array() *= net.layers[k].mask.cast<double>().array();
    }
    grads.bias[k] = delta.colwise().sum().transpose();
    if (k > 0) {
      Matrix next = delta * net.layers[k].weights;
      delta = std::move(next);
    }
  }
  return grads;
}

}  // namespace

Arch parse_arch(std::string_view name) {
  std::string lower(name);
  for (char& c : lower) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (lower == "autoenc1") return Arch::Autoenc1;
  if (lower == "autoenc2") return Arch::Autoenc2;
  if (lower == "autoenc3") return Arch::Autoenc3;
  throw std::invalid_argument("unknown architecture '" + std::string(name) +
                              "' (expected autoenc1, autoenc2 or autoenc3)");
}

std::string to_string(Arch arch) {
  switch (arch) {
    case Arch::Autoenc1: return "autoenc1";
    case Arch::Autoenc2: return "autoenc2";
    case Arch::Autoenc3: return "autoenc3";
  }
  return "unknown";
}

std::vector<Eigen::Index> arch_dims(Arch arch) {
  switch (arch) {
    case Arch::Autoenc1: return {784, 32, 784};
    case Arch::Autoenc2: return {784, 64, 784};
    case Arch::Autoenc3: return {784, 64, 32, 64, 784};
  }
  return {};
}

EpochPlan default_epochs(Arch arch) {
  switch (arch) {
    case Arch::Autoenc1: return {20, 10};
    case Arch::Autoenc2: return {30, 20};
    case Arch::Autoenc3: return {30, 20};
  }
  return {1, 1};
}

void FCLayer::apply_mask() { weights.array() *= mask.cast<double>().array(); }

Eigen::Index FCLayer::active_count() const { return mask.cast<Eigen::Index>().sum(); }

void Network::validate() const {
  if (layers.empty()) throw ShapeError("network has no layers");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const FCLayer& layer = layers[k];
    if (layer.bias.size() != layer.out_dim()) {
      throw ShapeError("layer " + std::to_string(k) + ": bias length mismatch");
    }
    if (layer.mask.rows() != layer.out_dim() || layer.mask.cols() != layer.in_dim()) {
      throw ShapeError("layer " + std::to_string(k) + ": mask shape mismatch");
    }
    if (k + 1 < layers.size() && layer.out_dim() != layers[k + 1].in_dim()) {
      throw ShapeError("layer " + std::to_string(k) + " output dim does not match layer " +
                       std::to_string(k + 1) + " input dim");
    }
  }
}

bool Network::masks_consistent() const {
  for (const FCLayer& layer : layers) {
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      const std::uint8_t m = layer.mask.data()[i];
      if (m > 1) return false;
      if (m == 0 && layer.weights.data()[i] != 0.0) return false;
    }
  }
  return true;
}

Network build_network(std::span<const Eigen::Index> dims, std::uint64_t seed,
                      bool linear_output) {
  if (dims.size() < 2) throw ShapeError("a network needs at least an input and output dim");
  Rng rng = Rng::derive(seed, kInitStream);
  Network net;
  net.linear_output = linear_output;
  for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
    const Eigen::Index in = dims[k];
    const Eigen::Index out = dims[k + 1];
    if (in < 1 || out < 1) throw ShapeError("layer dims must be positive");
    const double bound = std::sqrt(1.0 / static_cast<double>(in));
    FCLayer layer;
    layer.weights.resize(out, in);
    for (Eigen::Index i = 0; i < layer.weights.size(); ++i) {
      layer.weights.data()[i] = rng.uniform(-bound, bound);
    }
    layer.bias.resize(out);
    for (Eigen::Index i = 0; i < out; ++i) layer.bias[i] = rng.uniform(-bound, bound);
    layer.mask = Mask::Ones(out, in);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

Network build_autoencoder(Arch arch, std::uint64_t seed, bool linear_output) {
  const auto dims = arch_dims(arch);
  return build_network(dims, seed, linear_output);
}

std::uint64_t parameter_fingerprint(const Network& net) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 0x100000001b3ULL;
  };
  for (const FCLayer& layer : net.layers) {
    mix(static_cast<std::uint64_t>(layer.out_dim()));
    mix(static_cast<std::uint64_t>(layer.in_dim()));
    mix(std::bit_cast<std::uint64_t>(layer.weights.sum()));
    mix(std::bit_cast<std::uint64_t>(layer.weights.cwiseAbs().sum()));
    mix(std::bit_cast<std::uint64_t>(layer.bias.sum()));
  }
  return h;
}

namespace {

ForwardResult forward_impl(const Network& net, const Matrix& batch) {
  ForwardResult result;
  ForwardCache& cache = result.cache;
  cache.inputs.reserve(net.layers.size());
  cache.pre.reserve(net.layers.size());
  Matrix act = batch;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const FCLayer& layer = net.layers[k];
    Matrix z = act * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    cache.inputs.push_back(std::move(act));
    act = net.squares(k) ? Matrix(z.array().square()) : z;
    cache.pre.push_back(std::move(z));
  }
  result.output = std::move(act);
  return result;
}

}  // namespace

ForwardResult forward(const Network& net, const Matrix& batch) {
  check_batch(net, batch);
  ForwardResult result = forward_impl(net, batch);
  result.cache.fingerprint = parameter_fingerprint(net);
  return result;
}

Matrix predict(const Network& net, const Matrix& batch) {
  check_batch(net, batch);
  Matrix act = batch;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const FCLayer& layer = net.layers[k];
    Matrix z = act * layer.weights.transpose();
    z.rowwise() += layer.bias.transpose();
    act = net.squares(k) ? Matrix(z.array().square()) : std::move(z);
  }
  return act;
}

Matrix predict_exact(const Network& net, const Matrix& batch) {
  check_batch(net, batch);
  detail::ExactSum acc;
  Matrix act = batch;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const FCLayer& layer = net.layers[k];
    Matrix next(act.rows(), layer.out_dim());
    for (Eigen::Index s = 0; s < act.rows(); ++s) {
      for (Eigen::Index i = 0; i < layer.out_dim(); ++i) {
        acc.clear();
        for (Eigen::Index j = 0; j < layer.in_dim(); ++j) {
          acc.add(layer.weights(i, j) * act(s, j));
        }
        acc.add(layer.bias[i]);
        const double z = acc.result();
        next(s, i) = net.squares(k) ? z * z : z;
      }
    }
    act = std::move(next);
  }
  return act;
}

double mse_loss(const Matrix& output, const Matrix& target) {
  if (output.rows() != target.rows() || output.cols() != target.cols()) {
    throw ShapeError("mse_loss: output and target shapes differ");
  }
  if (output.size() == 0) throw ShapeError("mse_loss: empty matrices");
  double total = 0.0;
  for (Eigen::Index r = 0; r < output.rows(); ++r) {
    total += (output.row(r) - target.row(r)).squaredNorm();
  }
  return total / static_cast<double>(output.size());
}

Gradients backward(const Network& net, const ForwardCache& cache, const Matrix& target) {
  if (cache.pre.size() != net.layers.size() || cache.inputs.size() != net.layers.size() ||
      cache.fingerprint != parameter_fingerprint(net)) {
    throw StaleCacheError("forward cache does not belong to the current network parameters");
  }
  return backward_impl(net, cache, target, {});
}

void AdamState::bind(const Network& net) {
  bool shaped = m_weights.size() == net.layers.size();
  for (std::size_t k = 0; shaped && k < net.layers.size(); ++k) {
    shaped = m_weights[k].rows() == net.layers[k].out_dim() &&
             m_weights[k].cols() == net.layers[k].in_dim();
  }
  if (shaped) return;
  m_weights.clear();
  v_weights.clear();
  m_bias.clear();
  v_bias.clear();
  for (const FCLayer& layer : net.layers) {
    m_weights.push_back(Matrix::Zero(layer.out_dim(), layer.in_dim()));
    v_weights.push_back(Matrix::Zero(layer.out_dim(), layer.in_dim()));
    m_bias.push_back(Vector::Zero(layer.out_dim()));
    v_bias.push_back(Vector::Zero(layer.out_dim()));
  }
  step = 0;
}

void AdamState::apply(Network& net, const Gradients& grads) {
  bind(net);
  ++step;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
  const double lr = learning_rate;
  const double b1 = beta1, b2 = beta2, eps = epsilon;
  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m.array() = b1 * m.array() + (1.0 - b1) * g.array();
    v.array() = b2 * v.array() + (1.0 - b2) * g.array().square();
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    FCLayer& layer = net.layers[k];
    update(layer.weights, m_weights[k], v_weights[k], grads.weights[k]);
    update(layer.bias, m_bias[k], v_bias[k], grads.bias[k]);
    layer.apply_mask();
  }
}

std::vector<double> train(Network& net, const Matrix& inputs, const Matrix& targets,
                          const TrainOptions& options, AdamState& adam) {
  if (options.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (inputs.rows() == 0) throw std::invalid_argument("train: empty dataset");
  check_batch(net, inputs);
  if (targets.rows() != inputs.rows() || targets.cols() != net.output_dim()) {
    throw ShapeError("train: targets do not match inputs and network output");
  }
  net.validate();
  adam.bind(net);

  std::vector<Matrix> float_masks;
  for (const FCLayer& layer : net.layers) float_masks.push_back(layer.mask.cast<double>());

  std::vector<Eigen::Index> order(static_cast<std::size_t>(inputs.rows()));
  std::vector<double> history;
  Matrix batch;
  Matrix batch_targets;
  const bool self_target = &inputs == &targets;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng = Rng::derive(options.seed, kShuffleStream + static_cast<std::uint64_t>(epoch));
    rng.shuffle(std::span<Eigen::Index>(order));

    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(options.batch_size)) {
      const std::size_t len =
          std::min(order.size() - start, static_cast<std::size_t>(options.batch_size));
      const auto rows = std::span(order).subspan(start, len);
      gather_rows(inputs, rows, batch);
      if (!self_target) gather_rows(targets, rows, batch_targets);
      const Matrix& target = self_target ? batch : batch_targets;
      ForwardResult fr = forward_impl(net, batch);
      loss_sum += mse_loss(fr.output, target) * static_cast<double>(len);
      Gradients grads = backward_impl(net, fr.cache, target, float_masks);
      adam.apply(net, grads);
    }
    history.push_back(loss_sum / static_cast<double>(order.size()));
  }
  return history;
}

std::vector<double> train(Network& net, const Dataset& data, const TrainOptions& options,
                          AdamState& adam) {
  return train(net, data.samples(), data.samples(), options, adam);
}

double evaluate(const Network& net, const Matrix& inputs, const Matrix& targets) {
  if (inputs.rows() == 0) throw std::invalid_argument("evaluate: empty dataset");
  check_batch(net, inputs);
  if (targets.rows() != inputs.rows() || targets.cols() != net.output_dim()) {
    throw ShapeError("evaluate: targets do not match inputs and network output");
  }
  constexpr Eigen::Index kChunk = 1000;
  double total = 0.0;
  for (Eigen::Index start = 0; start < inputs.rows(); start += kChunk) {
    const Eigen::Index len = std::min(kChunk, inputs.rows() - start);
    const Matrix out = predict(net, inputs.middleRows(start, len));
    for (Eigen::Index r = 0; r < len; ++r) {
      total += (out.row(r) - targets.row(start + r)).squaredNorm();
    }
  }
  return total / static_cast<double>(targets.rows() * targets.cols());
}

double evaluate(const Network& net, const Dataset& data) {
  return evaluate(net, data.samples(), data.samples());
}

}  // namespace hepex
