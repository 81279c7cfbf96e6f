#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

#include "hepex/nn.hpp"
#include "hepex/tile_shape.hpp"

namespace hepex {

enum class Scope { Local, Global };
enum class Criterion { L1, Random, TileAvg, TileMax, TileMin, TileNonzeroThreshold };
enum class Target { Weight, Neuron, Tile };

/// Pruning request in {scope}/{criterion}/{target} form, e.g. "Lc/L1/Wei",
/// "-/Rnd/Wei", "Gl/T-Avg/-".
struct PruneConfig {
  Scope scope = Scope::Local;
  Criterion criterion = Criterion::L1;
  Target target = Target::Weight;
  double fraction = 0.0;
  std::optional<int> threshold_n;

  void validate() const;
  bool is_tile_reduction() const {
    return criterion == Criterion::TileAvg || criterion == Criterion::TileMax ||
           criterion == Criterion::TileMin;
  }
};

/// Parses the scope/criterion/target triple; fraction is left at 0.
PruneConfig parse_prune_config(std::string_view text);
std::string to_string(const PruneConfig& cfg);

/// Raised when a request would remove every neuron of a layer or names an
/// unsupported combination.
class StructuralError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Number of elements pruned from a pool: floor(fraction * pool).
Eigen::Index prune_count(double fraction, Eigen::Index pool);

/// Weight or neuron pruning by magnitude (L1) or at random. Fractions count
/// against currently active elements; ties break on (layer, row, col).
/// Neuron pruning touches hidden neurons only.
void prune(Network& net, const PruneConfig& cfg, std::uint64_t seed);

/// Tile pruning: scores each tile with at least one active cell by
/// avg/max/min of |w| over its real cells and masks the lowest fraction.
void prune_pack(Network& net, const TileShape& tile, Criterion reduction, Scope scope,
                double fraction);

/// Masks every tile with at most `n` active cells.
void prune_pack_threshold(Network& net, const TileShape& tile, int n);
/// max(1, t1*t2/16): 1 at 2x2 and 4x4, 4 at 8x8, 16 at 16x16.
int default_threshold_n(const TileShape& tile);

/// Re-activates every real cell of tiles that still hold an active cell.
/// Newly active weights start at zero.
void expand(Network& net, const TileShape& tile);

/// Single-matrix forms used by the network versions and the tests.
void prune_pack_threshold(Mask& mask, const TileShape& tile, int n);
void expand(Mask& mask, const TileShape& tile);

}  // namespace hepex
