#pragma once

#include <stdexcept>
#include <vector>

#include "hepex/data.hpp"
#include "hepex/nn.hpp"
#include "hepex/tiling.hpp"

namespace hepex {

inline constexpr double kDefaultBytesPerSlot = 16.0;  // one complex slot, two doubles

/// Relative cost per operation used for the latency proxy.
struct LatencyWeights {
  double add = 1.0;
  double mul = 4.0;
  double rot = 16.0;
  double relin = 16.0;

  double cost(const OpCounts& c) const {
    return add * static_cast<double>(c.add) + mul * static_cast<double>(c.mul) +
           rot * static_cast<double>(c.rot) + relin * static_cast<double>(c.relin);
  }
};

struct SimOptions {
  double bytes_per_slot = kDefaultBytesPerSlot;
  LatencyWeights latency;
};

struct LayerSim {
  OpCounts ops;
  Eigen::Index weight_tiles = 0;     // grid size
  Eigen::Index allocated_tiles = 0;  // weight tiles that are not zero-flags
  Eigen::Index output_tiles = 0;
  Matrix output;                     // decoded activation leaving the layer
};

struct SimReport {
  TileShape tile;
  OpCounts ops;
  std::vector<LayerSim> layers;
  Eigen::Index allocated_tiles = 0;
  Eigen::Index total_tiles = 0;
  double bytes_per_slot = kDefaultBytesPerSlot;
  double memory_bytes = 0.0;
  LatencyWeights latency_weights;
  double latency_proxy = 0.0;
  Matrix output;
  double max_abs_deviation = 0.0;  // against predict() on the same batch
};

/// Encrypted-inference stand-in over tile tensors. Even layers pack W with
/// outputs along t1 and reduce along t2; odd layers pack W^T and reduce
/// along t1, so each layer's output lands in the layout the next expects.
SimReport simulate_inference(const Network& net, const Matrix& batch, const TileShape& tile,
                             const SimOptions& options = {});

struct MemoryEstimate {
  Eigen::Index allocated_tiles = 0;
  Eigen::Index total_tiles = 0;
  double bytes_per_slot = kDefaultBytesPerSlot;
  double bytes = 0.0;
};

MemoryEstimate memory_estimate(const Network& net, const TileShape& tile,
                               double bytes_per_slot = kDefaultBytesPerSlot);

class EquivalenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Runs the simulator over `inputs` in chunks of at most t3 samples and
/// returns the largest deviation from predict(). Throws EquivalenceError
/// naming the first offending layer and output tile when it exceeds
/// `tolerance`.
double verify_equivalence(const Network& net, const Matrix& inputs, const TileShape& tile,
                          double tolerance = 1e-9);

}  // namespace hepex
