#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "hepex/nn.hpp"

namespace hepex {

inline constexpr Eigen::Index kDefaultSlots = 16384;

/// Tile geometry [t1, t2, t3]; t1 x t2 covers a weight block and t3 is the
/// batch extent. One tile maps to one ciphertext of t1*t2*t3 slots.
struct TileShape {
  Eigen::Index t1 = 1;
  Eigen::Index t2 = 1;
  Eigen::Index t3 = 1;

  Eigen::Index slots() const { return t1 * t2 * t3; }
  Eigen::Index area() const { return t1 * t2; }

  /// t3 derived from the slot budget: slots / (t1 * t2).
  static TileShape from_slots(Eigen::Index t1, Eigen::Index t2,
                              Eigen::Index slots = kDefaultSlots);

  /// Throws std::invalid_argument for degenerate extents.
  void validate() const;
  /// Stricter check used by the simulator and CLI: t1, t2 in {2, 4, 8, 16}.
  void validate_supported() const;

  bool operator==(const TileShape&) const = default;
};

/// Parses "t1xt2" (t3 from the slot budget) or "t1xt2xt3".
TileShape parse_tile_shape(std::string_view text, Eigen::Index slots = kDefaultSlots);
/// As above, but first requires t1 and t2 in {2, 4, 8, 16}.
TileShape parse_supported_tile_shape(std::string_view text, Eigen::Index slots = kDefaultSlots);
/// "t1xt2"; the batch extent is implied by the slot budget.
std::string to_string(const TileShape& shape);

/// Grid used for layer `k` of a network. Odd layers are packed transposed by
/// the simulator (input features along t1), so their weight blocks are
/// t2 x t1 in out x in coordinates. Neuron boundaries then see the same tile
/// extent from both adjacent matrices.
TileShape layer_tile(const TileShape& shape, std::size_t k);

/// Tile extent along the neurons of boundary `b` (0 = network input,
/// layers.size() = network output).
Eigen::Index boundary_extent(const TileShape& shape, std::size_t b);

inline Eigen::Index ceil_div(Eigen::Index a, Eigen::Index b) { return (a + b - 1) / b; }

struct TileCount {
  Eigen::Index zero = 0;
  Eigen::Index total = 0;

  double fraction() const {
    return total == 0 ? 0.0 : static_cast<double>(zero) / static_cast<double>(total);
  }
  TileCount& operator+=(const TileCount& o) {
    zero += o.zero;
    total += o.total;
    return *this;
  }
  bool operator==(const TileCount&) const = default;
};

using CountGrid = Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Active (mask == 1) cells per tile over the zero-padded grid, using
/// t1 along rows and t2 along columns.
CountGrid tile_active_counts(const Mask& mask, const TileShape& shape);

/// A tile is zero when none of its real cells is active.
TileCount count_zero_tiles(const Mask& mask, const TileShape& shape);

/// Sum over layers, each on its layer_tile grid.
TileCount count_zero_tiles(const Network& net, const TileShape& shape);
std::vector<TileCount> count_zero_tiles_per_layer(const Network& net, const TileShape& shape);

/// Histogram of tiles by number of zero cells (padding counts as zero);
/// index z holds the number of tiles with exactly z zero cells.
std::vector<Eigen::Index> zero_cell_histogram(const Mask& mask, const TileShape& shape);
std::vector<Eigen::Index> zero_cell_histogram(const Network& net, const TileShape& shape);

}  // namespace hepex
