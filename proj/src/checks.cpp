#include "hepex/checks.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "hepex/data.hpp"
#include "hepex/hesim.hpp"
#include "hepex/permute.hpp"
#include "hepex/rng.hpp"
#include "hepex/tiling.hpp"

namespace hepex {

namespace {

constexpr std::uint64_t kProbeStream = 6000;
constexpr std::uint64_t kDataStream = 6001;
constexpr std::uint64_t kPermStream = 6002;

std::string format_error(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

}  // namespace

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

double gradient_check(const Network& net, const Matrix& inputs, int probes, std::uint64_t seed,
                      double step) {
  const ForwardResult fr = forward(net, inputs);
  const Gradients grads = backward(net, fr.cache, inputs);
  Rng rng = Rng::derive(seed, kProbeStream);
  Network probe = net;
  double worst = 0.0;
  for (int p = 0; p < probes; ++p) {
    const std::size_t k = rng.below(net.layers.size());
    FCLayer& layer = probe.layers[k];
    const bool use_bias = rng.below(4) == 0;
    double* param = nullptr;
    double analytic = 0.0;
    if (use_bias) {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(layer.out_dim())));
      param = &layer.bias[i];
      analytic = grads.bias[k][i];
    } else {
      const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(layer.out_dim())));
      const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(layer.in_dim())));
      if (layer.mask(i, j) == 0) continue;
      param = &layer.weights(i, j);
      analytic = grads.weights[k](i, j);
    }
    const double saved = *param;
    *param = saved + step;
    const double up = mse_loss(predict(probe, inputs), inputs);
    *param = saved - step;
    const double down = mse_loss(predict(probe, inputs), inputs);
    *param = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-7});
    worst = std::max(worst, std::abs(analytic - numeric) / scale);
  }
  return worst;
}

std::vector<CheckResult> run_invariant_suite(const Network& net, std::uint64_t seed,
                                             const TileShape& tile) {
  net.validate();
  std::vector<CheckResult> results;
  const Matrix inputs = synthetic_dataset(Rng::derive(seed, kDataStream).next(), 4,
                                          net.input_dim(), 0.5)
                            .samples();

  {
    const double err = gradient_check(net, inputs.topRows(2), 40, seed);
    results.push_back({"gradient check", err < 1e-4, "max relative error " + format_error(err)});
  }

  {
    Rng rng = Rng::derive(seed, kPermStream);
    LayerPermutations perms = LayerPermutations::identity(net);
    for (Permutation& p : perms.boundaries) rng.shuffle(std::span<Eigen::Index>(p));
    const LayerPermutations searched = permute_network(net, tile, seed);
    bool exact = true;
    const std::array<const LayerPermutations*, 2> candidates{&perms, &searched};
    for (const LayerPermutations* ps : candidates) {
      const Network permuted = apply_permutations(net, *ps);
      const Matrix out = restore_outputs(predict_exact(permuted, permute_inputs(inputs, *ps)), *ps);
      exact &= out == predict_exact(net, inputs);
      const Network back = apply_permutations(permuted, ps->inverse());
      for (std::size_t k = 0; k < net.layers.size(); ++k) {
        exact &= back.layers[k].weights == net.layers[k].weights &&
                 back.layers[k].bias == net.layers[k].bias && back.layers[k].mask == net.layers[k].mask;
      }
    }
    const bool never_worse = count_zero_tiles(apply_permutations(net, searched), tile).zero >=
                             count_zero_tiles(net, tile).zero;
    results.push_back({"permutation equivalence", exact && never_worse,
                       exact ? (never_worse ? "outputs bit-identical" : "zero tiles decreased")
                             : "outputs differ after reindexing"});
  }

  {
    bool ok = true;
    for (const FCLayer& layer : net.layers) {
      ok &= decode_matrix(pack_matrix(layer.weights, tile)) == layer.weights;
    }
    const Eigen::Index n = std::min<Eigen::Index>(inputs.rows(), tile.t3);
    ok &= decode_batch(pack_batch(inputs.topRows(n), tile)) == inputs.topRows(n);
    results.push_back({"tiling round-trip", ok, ok ? "exact" : "decoded values differ"});
  }

  {
    try {
      const double dev = verify_equivalence(net, inputs, tile, 1e-9);
      results.push_back({"simulated inference", true, "max deviation " + format_error(dev)});
    } catch (const EquivalenceError& e) {
      results.push_back({"simulated inference", false, e.what()});
    }
  }
  return results;
}

}  // namespace hepex
