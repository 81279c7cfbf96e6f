#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hepex/data.hpp"
#include "hepex/hesim.hpp"
#include "hepex/nn.hpp"
#include "hepex/permute.hpp"
#include "hepex/pruning.hpp"
#include "hepex/tile_shape.hpp"

namespace hepex {

enum class StrategyName { P2, P2T, P3, P3E, P4, P4E };

StrategyName parse_strategy(std::string_view name);
std::string to_string(StrategyName name);

/// Stage names in execution order, e.g. {"Train", "Prune", "Retrain", "Pack"}.
std::vector<std::string> stage_sequence(StrategyName name);
/// The sequence joined with " -> ".
std::string stage_sequence_string(StrategyName name);

struct Strategy {
  StrategyName name = StrategyName::P2;
  PruneConfig prune;  // fraction included
  TileShape tile = TileShape::from_slots(4, 4);
  std::optional<int> threshold_n;
  int retrain_epochs = 20;
  int batch_size = 10;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  PermuteOptions permute;
  /// Samples from the test set pushed through the simulator for op counts.
  Eigen::Index sim_samples = 64;

  /// Throws std::invalid_argument for invalid name/config pairings.
  void validate() const;
  nlohmann::json to_json() const;
};

struct StageSnapshot {
  std::string stage;
  double seconds = 0.0;
  TileCount zero_tiles;
};

struct Report {
  Strategy strategy;
  std::string sequence;
  std::vector<std::string> stage_log;
  std::vector<StageSnapshot> stages;
  double loss_before = 0.0;  // test MSE of the pretrained network
  double loss_after = 0.0;   // test MSE of the final network
  std::vector<TileCount> zero_tiles_per_layer;
  TileCount zero_tiles;
  std::vector<Eigen::Index> zero_cell_histogram;
  OpCounts ops;
  Eigen::Index allocated_tiles = 0;
  double memory_bytes = 0.0;
  double bytes_per_slot = kDefaultBytesPerSlot;
  double latency_proxy = 0.0;
  Eigen::Index sim_samples = 0;
  double sim_deviation = 0.0;
  std::vector<std::string> notes;

  /// Zero-tile fraction recorded after the named stage, if it ran.
  std::optional<double> fraction_after(std::string_view stage) const;
};

struct StrategyResult {
  Network net;
  LayerPermutations permutations;
  Report report;
};

/// Runs the strategy's stages on a copy of `trained`. Retraining uses a
/// fresh Adam state and keeps masks frozen.
StrategyResult run_strategy(const Strategy& s, const Network& trained, const Dataset& train,
                            const Dataset& test);

/// Scores a report; nullopt marks it infeasible. Higher is better.
struct Objective {
  std::string name;
  std::function<std::optional<double>(const Report&)> score;
};

/// Lowest loss among points with zero-tile fraction >= min_zero.
Objective min_loss_objective(double min_zero);
/// Highest zero-tile fraction among points with loss <= max_loss.
Objective max_zero_objective(double max_loss);
/// "min_loss:zero>=X" or "max_zero:loss<=Y".
Objective parse_objective(std::string_view text);

struct GridPoint {
  double fraction = 0.0;
  TileShape tile;
  std::optional<int> threshold_n;
};

struct GridResult {
  std::vector<GridPoint> points;
  std::vector<Report> reports;  // one per point, grid order
  std::optional<std::size_t> best;
  std::optional<StrategyResult> best_model;
};

/// Fractions x tile shapes x N values (outer to inner), each point run from
/// the same pretrained base. Ties keep the earliest point.
GridResult grid_search(const Strategy& base, const Network& trained, const Dataset& train,
                       const Dataset& test, const std::vector<double>& fractions,
                       const std::vector<TileShape>& tiles,
                       const std::vector<std::optional<int>>& n_values,
                       const Objective& objective);

/// Pipeline/sweep configuration file.
struct PipelineConfig {
  Arch arch = Arch::Autoenc2;
  StrategyName strategy = StrategyName::P4E;
  std::string prune = "Lc/L1/Wei";
  std::vector<double> fractions{0.9};
  std::vector<std::string> tile_shapes{"4x4"};
  std::vector<std::optional<int>> n_values{1};
  std::vector<std::uint64_t> seeds{0};
  std::optional<int> train_epochs;
  std::optional<int> retrain_epochs;
  int batch_size = 10;
  double learning_rate = 1e-3;
  Eigen::Index slots = kDefaultSlots;
  std::string objective = "max_zero:loss<=1";
  std::optional<std::string> mnist_dir;
  std::optional<Eigen::Index> train_limit;
  std::optional<Eigen::Index> test_limit;
  bool linear_output = false;

  static PipelineConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  std::vector<TileShape> tiles() const;
  /// Strategy for the first grid point and the given seed.
  Strategy strategy_for(std::uint64_t seed) const;
};

}  // namespace hepex
