#include "hepex/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <tuple>
#include <vector>

#include "hepex/rng.hpp"

namespace hepex {

namespace {

constexpr std::uint64_t kRandomWeightStream = 2000;
constexpr std::uint64_t kRandomNeuronStream = 3000;

struct Candidate {
  double score;
  std::size_t layer;
  Eigen::Index row;
  Eigen::Index col;

  bool operator<(const Candidate& o) const {
    return std::tie(score, layer, row, col) < std::tie(o.score, o.layer, o.row, o.col);
  }
};

std::string criterion_token(Criterion c) {
  switch (c) {
    case Criterion::L1: return "L1";
    case Criterion::Random: return "Rnd";
    case Criterion::TileAvg: return "T-Avg";
    case Criterion::TileMax: return "T-Max";
    case Criterion::TileMin: return "T-Min";
    case Criterion::TileNonzeroThreshold: return "T-Nz";
  }
  return "?";
}

// Lowest-scoring `count` candidates in (score, layer, row, col) order.
void select_lowest(std::vector<Candidate>& pool, Eigen::Index count) {
  if (count <= 0) {
    pool.clear();
    return;
  }
  const auto n = static_cast<std::size_t>(count);
  if (n < pool.size()) {
    std::nth_element(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(n), pool.end());
    pool.resize(n);
  }
}

// Uniformly random `count` of `pool` via a partial Fisher-Yates pass.
void select_random(std::vector<Candidate>& pool, Eigen::Index count, Rng& rng) {
  const auto n = static_cast<std::size_t>(std::max<Eigen::Index>(count, 0));
  for (std::size_t i = 0; i < n && i < pool.size(); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(std::min(n, pool.size()));
}

std::vector<Candidate> active_weights(const Network& net, std::size_t k, bool by_magnitude) {
  const FCLayer& layer = net.layers[k];
  std::vector<Candidate> pool;
  pool.reserve(static_cast<std::size_t>(layer.weights.size()));
  for (Eigen::Index r = 0; r < layer.weights.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weights.cols(); ++c) {
      if (layer.mask(r, c) == 0) continue;
      pool.push_back({by_magnitude ? std::abs(layer.weights(r, c)) : 0.0, k, r, c});
    }
  }
  return pool;
}

void mask_weights(Network& net, const std::vector<Candidate>& victims) {
  for (const Candidate& v : victims) net.layers[v.layer].mask(v.row, v.col) = 0;
}

void prune_weights(Network& net, const PruneConfig& cfg, std::uint64_t seed) {
  const bool magnitude = cfg.criterion == Criterion::L1;
  if (cfg.scope == Scope::Global) {
    std::vector<Candidate> pool;
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      auto layer_pool = active_weights(net, k, magnitude);
      pool.insert(pool.end(), layer_pool.begin(), layer_pool.end());
    }
    const Eigen::Index count = prune_count(cfg.fraction, static_cast<Eigen::Index>(pool.size()));
    if (magnitude) {
      select_lowest(pool, count);
    } else {
      Rng rng = Rng::derive(seed, kRandomWeightStream);
      select_random(pool, count, rng);
    }
    mask_weights(net, pool);
    return;
  }
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    auto pool = active_weights(net, k, magnitude);
    const Eigen::Index count = prune_count(cfg.fraction, static_cast<Eigen::Index>(pool.size()));
    if (magnitude) {
      select_lowest(pool, count);
    } else {
      Rng rng = Rng::derive(seed, kRandomWeightStream + 1 + k);
      select_random(pool, count, rng);
    }
    mask_weights(net, pool);
  }
}

void prune_neurons(Network& net, const PruneConfig& cfg, std::uint64_t seed) {
  if (cfg.scope == Scope::Global && cfg.criterion == Criterion::L1) {
    throw StructuralError("Gl/L1/Neu is not supported: global scope applies to weight pruning only");
  }
  // Hidden neurons are the outputs of every layer but the last.
  for (std::size_t k = 0; k + 1 < net.layers.size(); ++k) {
    FCLayer& in_layer = net.layers[k];
    FCLayer& out_layer = net.layers[k + 1];
    std::vector<Candidate> pool;
    for (Eigen::Index n = 0; n < in_layer.out_dim(); ++n) {
      const bool active = (in_layer.mask.row(n).array() != 0).any() ||
                          (out_layer.mask.col(n).array() != 0).any();
      if (!active) continue;
      pool.push_back({in_layer.weights.row(n).cwiseAbs().sum(), k, n, 0});
    }
    const auto active_count = static_cast<Eigen::Index>(pool.size());
    const Eigen::Index count = prune_count(cfg.fraction, active_count);
    if (active_count > 0 && count >= active_count) {
      throw StructuralError("pruning fraction " + std::to_string(cfg.fraction) +
                            " would remove every neuron of hidden layer " + std::to_string(k));
    }
    if (cfg.criterion == Criterion::L1) {
      select_lowest(pool, count);
    } else {
      Rng rng = Rng::derive(seed, kRandomNeuronStream + k);
      select_random(pool, count, rng);
    }
    for (const Candidate& v : pool) {
      in_layer.mask.row(v.row).setZero();
      out_layer.mask.col(v.row).setZero();
    }
  }
}

struct TileRef {
  double score;
  std::size_t layer;
  Eigen::Index tile_row;
  Eigen::Index tile_col;

  bool operator<(const TileRef& o) const {
    return std::tie(score, layer, tile_row, tile_col) <
           std::tie(o.score, o.layer, o.tile_row, o.tile_col);
  }
};

void mask_tile(Mask& mask, const TileShape& shape, Eigen::Index tr, Eigen::Index tc,
               std::uint8_t value) {
  const Eigen::Index r0 = tr * shape.t1;
  const Eigen::Index c0 = tc * shape.t2;
  const Eigen::Index rows = std::min(shape.t1, mask.rows() - r0);
  const Eigen::Index cols = std::min(shape.t2, mask.cols() - c0);
  mask.block(r0, c0, rows, cols).setConstant(value);
}

std::vector<TileRef> scored_tiles(const Network& net, std::size_t k, const TileShape& shape,
                                  Criterion reduction) {
  const FCLayer& layer = net.layers[k];
  const CountGrid active = tile_active_counts(layer.mask, shape);
  std::vector<TileRef> tiles;
  for (Eigen::Index tr = 0; tr < active.rows(); ++tr) {
    for (Eigen::Index tc = 0; tc < active.cols(); ++tc) {
      if (active(tr, tc) == 0) continue;
      const Eigen::Index r0 = tr * shape.t1;
      const Eigen::Index c0 = tc * shape.t2;
      const auto block = layer.weights
                             .block(r0, c0, std::min(shape.t1, layer.weights.rows() - r0),
                                    std::min(shape.t2, layer.weights.cols() - c0))
                             .cwiseAbs();
      double score = 0.0;
      switch (reduction) {
        case Criterion::TileAvg: score = block.mean(); break;
        case Criterion::TileMax: score = block.maxCoeff(); break;
        case Criterion::TileMin: score = block.minCoeff(); break;
        default: throw std::invalid_argument("prune_pack: reduction must be T-Avg, T-Max or T-Min");
      }
      tiles.push_back({score, k, tr, tc});
    }
  }
  return tiles;
}

void keep_lowest(std::vector<TileRef>& tiles, Eigen::Index count) {
  const auto n = static_cast<std::size_t>(std::max<Eigen::Index>(count, 0));
  if (n < tiles.size()) {
    std::nth_element(tiles.begin(), tiles.begin() + static_cast<std::ptrdiff_t>(n), tiles.end());
    tiles.resize(n);
  }
}

}  // namespace

void PruneConfig::validate() const {
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("pruning fraction must lie in [0, 1]");
  }
  if (is_tile_reduction() && target != Target::Tile) {
    throw std::invalid_argument("T-Avg/T-Max/T-Min criteria require the tile target '-'");
  }
  if (target == Target::Tile && !is_tile_reduction() &&
      criterion != Criterion::TileNonzeroThreshold) {
    throw std::invalid_argument("the tile target requires a tile criterion");
  }
  if (criterion == Criterion::TileNonzeroThreshold && !threshold_n) {
    throw std::invalid_argument("the non-zero threshold criterion requires threshold_n");
  }
}

PruneConfig parse_prune_config(std::string_view text) {
  const auto s1 = text.find('/');
  const auto s2 = s1 == std::string_view::npos ? s1 : text.find('/', s1 + 1);
  if (s1 == std::string_view::npos || s2 == std::string_view::npos) {
    throw std::invalid_argument("malformed pruning config '" + std::string(text) +
                                "' (expected scope/criterion/target, e.g. Lc/L1/Wei)");
  }
  const std::string_view scope = text.substr(0, s1);
  const std::string_view criterion = text.substr(s1 + 1, s2 - s1 - 1);
  const std::string_view target = text.substr(s2 + 1);

  PruneConfig cfg;
  if (scope == "Lc" || scope == "-") {
    cfg.scope = Scope::Local;
  } else if (scope == "Gl") {
    cfg.scope = Scope::Global;
  } else {
    throw std::invalid_argument("unknown pruning scope '" + std::string(scope) + "'");
  }

  if (criterion == "L1") cfg.criterion = Criterion::L1;
  else if (criterion == "Rnd") cfg.criterion = Criterion::Random;
  else if (criterion == "T-Avg") cfg.criterion = Criterion::TileAvg;
  else if (criterion == "T-Max") cfg.criterion = Criterion::TileMax;
  else if (criterion == "T-Min") cfg.criterion = Criterion::TileMin;
  else if (criterion == "T-Nz") cfg.criterion = Criterion::TileNonzeroThreshold;
  else throw std::invalid_argument("unknown pruning criterion '" + std::string(criterion) + "'");

  if (target == "Wei") cfg.target = Target::Weight;
  else if (target == "Neu") cfg.target = Target::Neuron;
  else if (target == "-") cfg.target = Target::Tile;
  else throw std::invalid_argument("unknown pruning target '" + std::string(target) + "'");

  if (cfg.criterion == Criterion::TileNonzeroThreshold) cfg.threshold_n = 0;
  cfg.validate();
  return cfg;
}

std::string to_string(const PruneConfig& cfg) {
  std::string scope = cfg.criterion == Criterion::Random ? "-"
                      : cfg.scope == Scope::Local       ? "Lc"
                                                        : "Gl";
  std::string target = cfg.target == Target::Weight   ? "Wei"
                       : cfg.target == Target::Neuron ? "Neu"
                                                      : "-";
  return scope + "/" + criterion_token(cfg.criterion) + "/" + target;
}

Eigen::Index prune_count(double fraction, Eigen::Index pool) {
  // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  const double raw = fraction * static_cast<double>(pool);
  return std::min(pool, static_cast<Eigen::Index>(std::floor(raw + 1e-9)));
}

void prune(Network& net, const PruneConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  net.validate();
  switch (cfg.target) {
    case Target::Weight: prune_weights(net, cfg, seed); break;
    case Target::Neuron: prune_neurons(net, cfg, seed); break;
    case Target::Tile:
      throw std::invalid_argument("prune: tile targets go through prune_pack");
  }
  for (FCLayer& layer : net.layers) layer.apply_mask();
}

void prune_pack(Network& net, const TileShape& tile, Criterion reduction, Scope scope,
                double fraction) {
  tile.validate();
  if (!(fraction >= 0.0 && fraction <= 1.0)) {
    throw std::invalid_argument("pruning fraction must lie in [0, 1]");
  }
  std::vector<TileRef> victims;
  if (scope == Scope::Global) {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      auto layer_tiles = scored_tiles(net, k, layer_tile(tile, k), reduction);
      victims.insert(victims.end(), layer_tiles.begin(), layer_tiles.end());
    }
    keep_lowest(victims, prune_count(fraction, static_cast<Eigen::Index>(victims.size())));
  } else {
    for (std::size_t k = 0; k < net.layers.size(); ++k) {
      auto layer_tiles = scored_tiles(net, k, layer_tile(tile, k), reduction);
      keep_lowest(layer_tiles, prune_count(fraction, static_cast<Eigen::Index>(layer_tiles.size())));
      victims.insert(victims.end(), layer_tiles.begin(), layer_tiles.end());
    }
  }
  for (const TileRef& v : victims) {
    mask_tile(net.layers[v.layer].mask, layer_tile(tile, v.layer), v.tile_row, v.tile_col, 0);
  }
  for (FCLayer& layer : net.layers) layer.apply_mask();
}

void prune_pack_threshold(Mask& mask, const TileShape& tile, int n) {
  if (n < 0) throw std::invalid_argument("prune_pack_threshold: N must be >= 0");
  const CountGrid active = tile_active_counts(mask, tile);
  for (Eigen::Index tr = 0; tr < active.rows(); ++tr) {
    for (Eigen::Index tc = 0; tc < active.cols(); ++tc) {
      if (active(tr, tc) > 0 && active(tr, tc) <= n) mask_tile(mask, tile, tr, tc, 0);
    }
  }
}

int default_threshold_n(const TileShape& tile) {
  return std::max<int>(1, static_cast<int>(tile.area() / 16));
}

void prune_pack_threshold(Network& net, const TileShape& tile, int n) {
  if (n < 0) throw std::invalid_argument("prune_pack_threshold: N must be >= 0");
  tile.validate();
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    prune_pack_threshold(net.layers[k].mask, layer_tile(tile, k), n);
    net.layers[k].apply_mask();
  }
}

void expand(Mask& mask, const TileShape& tile) {
  const CountGrid active = tile_active_counts(mask, tile);
  for (Eigen::Index tr = 0; tr < active.rows(); ++tr) {
    for (Eigen::Index tc = 0; tc < active.cols(); ++tc) {
      if (active(tr, tc) > 0) mask_tile(mask, tile, tr, tc, 1);
    }
  }
}

void expand(Network& net, const TileShape& tile) {
  tile.validate();
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    expand(net.layers[k].mask, layer_tile(tile, k));
    // Weights under previously masked cells are already zero.
    net.layers[k].apply_mask();
  }
}

}  // namespace hepex
