#include "hepex/hesim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hepex {

namespace {

Matrix masked_weights(const FCLayer& layer) {
  return layer.weights.cwiseProduct(layer.mask.cast<double>());
}

// Bias of one output tile, replicated along the reduced axis and the batch.
Tile bias_tile(const Vector& bias, Eigen::Index block, int feature_axis, const TileShape& shape) {
  const Eigen::Index width = feature_axis == 0 ? shape.t1 : shape.t2;
  std::vector<double> values(static_cast<std::size_t>(width), 0.0);
  bool any = false;
  for (Eigen::Index f = 0; f < width; ++f) {
    const Eigen::Index idx = block * width + f;
    if (idx >= bias.size()) break;
    values[static_cast<std::size_t>(f)] = bias[idx];
    any |= bias[idx] != 0.0;
  }
  if (!any) return Tile::zero_flag(shape);
  std::array<Eigen::Index, 3> ext{1, 1, 1};
  ext[static_cast<std::size_t>(feature_axis)] = width;
  return Tile::dense(shape, ext, std::move(values), false);
}

struct LayerRun {
  TiledTensor output;
  LayerSim sim;
};

LayerRun run_layer(const Network& net, std::size_t k, const TiledTensor& input,
                   const TileShape& shape) {
  const FCLayer& layer = net.layers[k];
  const bool even = k % 2 == 0;
  // Even layers: W is out x in, inputs along t2, reduce along t2.
  // Odd layers: W^T is in x out, inputs along t1, reduce along t1.
  const Matrix w = masked_weights(layer);
  const TiledTensor packed = even ? pack_matrix(w, shape) : pack_matrix(w.transpose(), shape);
  const int reduce_axis = even ? 1 : 0;
  const int out_axis = even ? 0 : 1;
  const Eigen::Index out_blocks = even ? packed.grid_rows : packed.grid_cols;
  const Eigen::Index in_blocks = even ? packed.grid_cols : packed.grid_rows;

  LayerRun run;
  run.sim.weight_tiles = static_cast<Eigen::Index>(packed.tiles.size());
  run.sim.allocated_tiles = packed.allocated_tiles();
  run.sim.output_tiles = out_blocks;

  TiledTensor& out = run.output;
  out.kind = TiledTensor::Kind::Batch;
  out.shape = shape;
  out.rows = layer.out_dim();
  out.cols = input.cols;
  out.grid_rows = out_blocks;
  out.grid_cols = 1;
  out.feature_axis = out_axis;
  out.tiles.reserve(static_cast<std::size_t>(out_blocks));

  OpCounts& ops = run.sim.ops;
  for (Eigen::Index o = 0; o < out_blocks; ++o) {
    Tile acc = Tile::zero_flag(shape);
    for (Eigen::Index i = 0; i < in_blocks; ++i) {
      const Tile& wt = even ? packed.tile(o, i) : packed.tile(i, o);
      acc = tile_add(acc, tile_mul(wt, input.tile(i, 0), ops), ops);
    }
    // Tiles fed only by biases stay plaintext and cost nothing.
    if (!acc.is_flag()) {
      acc = rotate_and_sum(acc, reduce_axis, ops);
      if (acc.is_encrypted()) ++ops.relin;
    }
    acc = tile_add(acc, bias_tile(layer.bias, o, out_axis, shape), ops);
    if (net.squares(k) && !acc.is_flag()) {
      acc = tile_mul(acc, acc, ops);
      if (acc.is_encrypted()) ++ops.relin;
    }
    out.tiles.push_back(std::move(acc));
  }
  run.sim.output = decode_batch(out);
  return run;
}

}  // namespace

SimReport simulate_inference(const Network& net, const Matrix& batch, const TileShape& tile,
                             const SimOptions& options) {
  net.validate();
  tile.validate();
  if (batch.cols() != net.input_dim()) {
    throw ShapeError("simulate_inference: batch has " + std::to_string(batch.cols()) +
                     " features, network expects " + std::to_string(net.input_dim()));
  }
  if (batch.rows() < 1 || batch.rows() > tile.t3) {
    throw ShapeError("simulate_inference: batch size " + std::to_string(batch.rows()) +
                     " must be within [1, t3 = " + std::to_string(tile.t3) + "]");
  }

  SimReport report;
  report.tile = tile;
  report.bytes_per_slot = options.bytes_per_slot;
  report.latency_weights = options.latency;

  TiledTensor current = pack_batch(batch, tile, 1);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    LayerRun run = run_layer(net, k, current, tile);
    report.ops += run.sim.ops;
    report.allocated_tiles += run.sim.allocated_tiles;
    report.total_tiles += run.sim.weight_tiles;
    report.layers.push_back(std::move(run.sim));
    current = std::move(run.output);
  }
  report.output = report.layers.back().output;
  report.memory_bytes = static_cast<double>(report.allocated_tiles) *
                        static_cast<double>(tile.slots()) * options.bytes_per_slot;
  report.latency_proxy = options.latency.cost(report.ops);
  report.max_abs_deviation = (report.output - predict(net, batch)).cwiseAbs().maxCoeff();
  return report;
}

MemoryEstimate memory_estimate(const Network& net, const TileShape& tile, double bytes_per_slot) {
  net.validate();
  tile.validate();
  MemoryEstimate est;
  est.bytes_per_slot = bytes_per_slot;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Matrix w = masked_weights(net.layers[k]);
    const TiledTensor packed = k % 2 == 0 ? pack_matrix(w, tile) : pack_matrix(w.transpose(), tile);
    est.allocated_tiles += packed.allocated_tiles();
    est.total_tiles += static_cast<Eigen::Index>(packed.tiles.size());
  }
  est.bytes = static_cast<double>(est.allocated_tiles) * static_cast<double>(tile.slots()) *
              bytes_per_slot;
  return est;
}

double verify_equivalence(const Network& net, const Matrix& inputs, const TileShape& tile,
                          double tolerance) {
  double worst = 0.0;
  for (Eigen::Index start = 0; start < inputs.rows(); start += tile.t3) {
    const Eigen::Index n = std::min(tile.t3, inputs.rows() - start);
    const Matrix chunk = inputs.middleRows(start, n);
    const SimReport sim = simulate_inference(net, chunk, tile);
    const ForwardResult ref = forward(net, chunk);
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      const Matrix& expected = k + 1 < net.layers.size() ? ref.cache.inputs[k + 1] : ref.output;
      Eigen::Index row = 0;
      Eigen::Index col = 0;
      const double dev = (sim.layers[k].output - expected).cwiseAbs().maxCoeff(&row, &col);
      if (std::isnan(dev) || dev > tolerance) {
        const Eigen::Index width = k % 2 == 0 ? tile.t1 : tile.t2;
        std::ostringstream msg;
        msg << "simulated output deviates by " << dev << " (tolerance " << tolerance
            << ") at layer " << k << ", output tile " << col / width << ", sample "
            << start + row;
        throw EquivalenceError(msg.str());
      }
      worst = std::max(worst, dev);
    }
  }
  return worst;
}

}  // namespace hepex
