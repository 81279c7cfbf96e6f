#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "hepex/nn.hpp"
#include "hepex/tile_shape.hpp"

namespace hepex {

struct OpCounts {
  std::int64_t add = 0;
  std::int64_t mul = 0;
  std::int64_t rot = 0;
  std::int64_t relin = 0;

  OpCounts& operator+=(const OpCounts& o) {
    add += o.add;
    mul += o.mul;
    rot += o.rot;
    relin += o.relin;
    return *this;
  }
  friend OpCounts operator+(OpCounts a, const OpCounts& b) { return a += b; }
  bool operator==(const OpCounts&) const = default;
};

/// One ciphertext worth of slots, laid out row-major over (t1, t2, t3), or a
/// zero-flag standing in for an all-zero tile.
///
/// Data tiles are either encrypted or plaintext. Operations whose operands
/// are all plaintext (weights, biases, values derived only from them) are
/// evaluated in the clear and not counted; the result stays plaintext.
///
/// Each axis is stored either in full or as a single replicated value, so a
/// weight tile copied along the batch axis costs t1*t2 doubles. The batch
/// axis may also hold fewer than t3 populated samples; the remaining slots
/// are unused and read as zero.
class Tile {
 public:
  Tile() = default;

  static Tile zero_flag(const TileShape& shape);
  /// `extents[a]` is 1 (replicated) or the full axis length; for the batch
  /// axis any populated count up to t3 is allowed. `values` is row-major.
  static Tile dense(const TileShape& shape, std::array<Eigen::Index, 3> extents,
                    std::vector<double> values, bool encrypted = true);

  bool is_flag() const { return flag_; }
  bool is_encrypted() const { return !flag_ && encrypted_; }
  Tile as_plaintext() const;
  const TileShape& shape() const { return shape_; }
  const std::array<Eigen::Index, 3>& extents() const { return extents_; }
  const std::vector<double>& values() const { return values_; }

  /// Slot value with replication resolved; flags and unused batch slots
  /// read as zero.
  double at(Eigen::Index i, Eigen::Index j, Eigen::Index b) const;
  bool all_zero() const;

 private:
  TileShape shape_{};
  std::array<Eigen::Index, 3> extents_{1, 1, 1};
  bool flag_ = true;
  bool encrypted_ = true;
  std::vector<double> values_;
};

Tile tile_add(const Tile& a, const Tile& b, OpCounts& counter);
Tile tile_mul(const Tile& a, const Tile& b, OpCounts& counter);

/// Cyclic shift by `shift` positions inside axis 0, 1 or 2: the slot at
/// position p receives the value from position p + shift. One rotation is
/// counted per call on an encrypted tile.
Tile rotate(const Tile& t, int axis, Eigen::Index shift, OpCounts& counter);

/// log2(extent) rounds of rotate-by-half-stride and add along `axis`
/// (0 or 1). Afterwards every slot of that axis holds the axis sum.
Tile rotate_and_sum(const Tile& t, int axis, OpCounts& counter);

/// Grid of tiles, row-major over (grid_rows, grid_cols).
struct TiledTensor {
  enum class Kind { Matrix, Batch };

  Kind kind = Kind::Matrix;
  TileShape shape;
  Eigen::Index rows = 0;  // logical extent: matrix rows, or feature count
  Eigen::Index cols = 0;  // logical extent: matrix cols, or sample count
  Eigen::Index grid_rows = 0;
  Eigen::Index grid_cols = 0;
  int feature_axis = 1;   // Batch only: tile axis carrying the features
  std::vector<Tile> tiles;

  const Tile& tile(Eigen::Index r, Eigen::Index c) const { return tiles[static_cast<std::size_t>(r * grid_cols + c)]; }
  Tile& tile(Eigen::Index r, Eigen::Index c) { return tiles[static_cast<std::size_t>(r * grid_cols + c)]; }

  Eigen::Index allocated_tiles() const;
  Eigen::Index flag_tiles() const { return static_cast<Eigen::Index>(tiles.size()) - allocated_tiles(); }
};

/// ceil(M/t1) x ceil(N/t2) plaintext blocks, zero-padded, replicated along
/// the batch axis. Blocks without a nonzero value become zero-flags.
TiledTensor pack_matrix(const Matrix& weights, const TileShape& shape);

/// Encrypted samples along the batch axis and features along `feature_axis`
/// (1 = t2, 0 = t1), replicated along the other one. Grid is feature tiles x batch
/// tiles; the batch must fit one tile or be a multiple of t3.
TiledTensor pack_batch(const Matrix& batch, const TileShape& shape, int feature_axis = 1);

Matrix decode_matrix(const TiledTensor& packed);
/// Back to samples x features, reading slot 0 of the replicated axis.
Matrix decode_batch(const TiledTensor& packed);

}  // namespace hepex
