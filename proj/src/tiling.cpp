#include "hepex/tiling.hpp"

#include <algorithm>
#include <bit>
#include <stdexcept>
#include <string>

namespace hepex {

namespace {

Eigen::Index axis_length(const TileShape& s, int axis) {
  return axis == 0 ? s.t1 : axis == 1 ? s.t2 : s.t3;
}

void check_same_shape(const Tile& a, const Tile& b, const char* op) {
  if (!(a.shape() == b.shape())) {
    throw ShapeError(std::string(op) + ": tile shapes differ");
  }
}

std::array<Eigen::Index, 3> broadcast_extents(const Tile& a, const Tile& b, const char* op) {
  std::array<Eigen::Index, 3> out{};
  for (int k = 0; k < 3; ++k) {
    const Eigen::Index x = a.extents()[k];
    const Eigen::Index y = b.extents()[k];
    if (x != y && x != 1 && y != 1) {
      throw ShapeError(std::string(op) + ": populated extents " + std::to_string(x) + " and " +
                       std::to_string(y) + " differ on axis " + std::to_string(k));
    }
    out[static_cast<std::size_t>(k)] = std::max(x, y);
  }
  return out;
}

template <typename F>
Tile combine(const Tile& a, const Tile& b, const char* op, F f) {
  const bool encrypted = a.is_encrypted() || b.is_encrypted();
  const auto ext = broadcast_extents(a, b, op);
  std::vector<double> values(static_cast<std::size_t>(ext[0] * ext[1] * ext[2]));
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < ext[0]; ++i) {
    for (Eigen::Index j = 0; j < ext[1]; ++j) {
      for (Eigen::Index k = 0; k < ext[2]; ++k) values[n++] = f(a.at(i, j, k), b.at(i, j, k));
    }
  }
  return Tile::dense(a.shape(), ext, std::move(values), encrypted);
}

}  // namespace

Tile Tile::zero_flag(const TileShape& shape) {
  shape.validate();
  Tile t;
  t.shape_ = shape;
  return t;
}

Tile Tile::dense(const TileShape& shape, std::array<Eigen::Index, 3> extents,
                 std::vector<double> values, bool encrypted) {
  shape.validate();
  for (int a = 0; a < 2; ++a) {
    const Eigen::Index e = extents[static_cast<std::size_t>(a)];
    if (e != 1 && e != axis_length(shape, a)) {
      throw ShapeError("tile axis " + std::to_string(a) + " extent must be 1 or " +
                       std::to_string(axis_length(shape, a)));
    }
  }
  if (extents[2] < 1 || extents[2] > shape.t3) {
    throw ShapeError("tile batch extent must be within [1, t3]");
  }
  if (static_cast<Eigen::Index>(values.size()) != extents[0] * extents[1] * extents[2]) {
    throw ShapeError("tile value count does not match its extents");
  }
  Tile t;
  t.shape_ = shape;
  t.extents_ = extents;
  t.flag_ = false;
  t.encrypted_ = encrypted;
  t.values_ = std::move(values);
  return t;
}

Tile Tile::as_plaintext() const {
  Tile t = *this;
  t.encrypted_ = false;
  return t;
}

double Tile::at(Eigen::Index i, Eigen::Index j, Eigen::Index b) const {
  if (flag_) return 0.0;
  const Eigen::Index ii = extents_[0] == 1 ? 0 : i;
  const Eigen::Index jj = extents_[1] == 1 ? 0 : j;
  Eigen::Index bb = b;
  if (extents_[2] == 1 && shape_.t3 > 1) {
    bb = 0;
  } else if (b >= extents_[2]) {
    return 0.0;
  }
  return values_[static_cast<std::size_t>((ii * extents_[1] + jj) * extents_[2] + bb)];
}

bool Tile::all_zero() const {
  return flag_ || std::all_of(values_.begin(), values_.end(), [](double v) { return v == 0.0; });
}

Tile tile_add(const Tile& a, const Tile& b, OpCounts& counter) {
  check_same_shape(a, b, "tile_add");
  if (a.is_flag()) return b;
  if (b.is_flag()) return a;
  Tile out = combine(a, b, "tile_add", [](double x, double y) { return x + y; });
  if (out.is_encrypted()) ++counter.add;
  return out;
}

Tile tile_mul(const Tile& a, const Tile& b, OpCounts& counter) {
  check_same_shape(a, b, "tile_mul");
  if (a.is_flag() || b.is_flag()) return Tile::zero_flag(a.shape());
  Tile out = combine(a, b, "tile_mul", [](double x, double y) { return x * y; });
  if (out.is_encrypted()) ++counter.mul;
  return out;
}

Tile rotate(const Tile& t, int axis, Eigen::Index shift, OpCounts& counter) {
  if (axis < 0 || axis > 2) throw std::invalid_argument("rotate: axis must be 0, 1 or 2");
  if (t.is_flag()) return t;
  if (t.is_encrypted()) ++counter.rot;
  const Eigen::Index len = axis_length(t.shape(), axis);
  auto ext = t.extents();
  if (ext[static_cast<std::size_t>(axis)] == 1 && !(axis == 2 && len > 1)) return t;
  // Unused batch slots become real zeros once they can move.
  if (axis == 2) ext[2] = len;
  const Eigen::Index s = ((shift % len) + len) % len;
  std::vector<double> values(static_cast<std::size_t>(ext[0] * ext[1] * ext[2]));
  std::size_t n = 0;
  for (Eigen::Index i = 0; i < ext[0]; ++i) {
    for (Eigen::Index j = 0; j < ext[1]; ++j) {
      for (Eigen::Index k = 0; k < ext[2]; ++k) {
        std::array<Eigen::Index, 3> src{i, j, k};
        src[static_cast<std::size_t>(axis)] = (src[static_cast<std::size_t>(axis)] + s) % len;
        values[n++] = t.at(src[0], src[1], src[2]);
      }
    }
  }
  return Tile::dense(t.shape(), ext, std::move(values), t.is_encrypted());
}

Tile rotate_and_sum(const Tile& t, int axis, OpCounts& counter) {
  if (axis != 0 && axis != 1) throw std::invalid_argument("rotate_and_sum: axis must be 0 or 1");
  const Eigen::Index extent = axis_length(t.shape(), axis);
  if (!std::has_single_bit(static_cast<std::uint64_t>(extent))) {
    throw std::invalid_argument("rotate_and_sum: extent " + std::to_string(extent) +
                                " is not a power of two");
  }
  if (t.is_flag()) return t;
  Tile acc = t;
  for (Eigen::Index stride = extent / 2; stride >= 1; stride /= 2) {
    acc = tile_add(acc, rotate(acc, axis, stride, counter), counter);
  }
  return acc;
}

Eigen::Index TiledTensor::allocated_tiles() const {
  return static_cast<Eigen::Index>(
      std::count_if(tiles.begin(), tiles.end(), [](const Tile& t) { return !t.is_flag(); }));
}

TiledTensor pack_matrix(const Matrix& weights, const TileShape& shape) {
  shape.validate();
  TiledTensor out;
  out.kind = TiledTensor::Kind::Matrix;
  out.shape = shape;
  out.rows = weights.rows();
  out.cols = weights.cols();
  out.grid_rows = ceil_div(weights.rows(), shape.t1);
  out.grid_cols = ceil_div(weights.cols(), shape.t2);
  out.tiles.reserve(static_cast<std::size_t>(out.grid_rows * out.grid_cols));
  for (Eigen::Index r = 0; r < out.grid_rows; ++r) {
    for (Eigen::Index c = 0; c < out.grid_cols; ++c) {
      std::vector<double> values(static_cast<std::size_t>(shape.area()), 0.0);
      bool any = false;
      for (Eigen::Index i = 0; i < shape.t1; ++i) {
        const Eigen::Index row = r * shape.t1 + i;
        if (row >= weights.rows()) break;
        for (Eigen::Index j = 0; j < shape.t2; ++j) {
          const Eigen::Index col = c * shape.t2 + j;
          if (col >= weights.cols()) break;
          const double v = weights(row, col);
          values[static_cast<std::size_t>(i * shape.t2 + j)] = v;
          any |= v != 0.0;
        }
      }
      out.tiles.push_back(any ? Tile::dense(shape, {shape.t1, shape.t2, 1}, std::move(values), false)
                              : Tile::zero_flag(shape));
    }
  }
  return out;
}

TiledTensor pack_batch(const Matrix& batch, const TileShape& shape, int feature_axis) {
  shape.validate();
  if (feature_axis != 0 && feature_axis != 1) {
    throw std::invalid_argument("pack_batch: feature axis must be 0 or 1");
  }
  const Eigen::Index samples = batch.rows();
  if (samples < 1) throw ShapeError("pack_batch: empty batch");
  if (samples > shape.t3 && samples % shape.t3 != 0) {
    throw ShapeError("pack_batch: batch of " + std::to_string(samples) +
                     " must fit one tile or be a multiple of t3 = " + std::to_string(shape.t3));
  }
  const Eigen::Index width = feature_axis == 0 ? shape.t1 : shape.t2;
  TiledTensor out;
  out.kind = TiledTensor::Kind::Batch;
  out.shape = shape;
  out.rows = batch.cols();
  out.cols = samples;
  out.feature_axis = feature_axis;
  out.grid_rows = ceil_div(batch.cols(), width);
  out.grid_cols = ceil_div(samples, shape.t3);
  const Eigen::Index per_tile = std::min(samples, shape.t3);
  std::array<Eigen::Index, 3> ext{1, 1, per_tile};
  ext[static_cast<std::size_t>(feature_axis)] = width;
  for (Eigen::Index r = 0; r < out.grid_rows; ++r) {
    for (Eigen::Index c = 0; c < out.grid_cols; ++c) {
      std::vector<double> values(static_cast<std::size_t>(width * per_tile), 0.0);
      bool any = false;
      for (Eigen::Index f = 0; f < width; ++f) {
        const Eigen::Index feature = r * width + f;
        if (feature >= batch.cols()) break;
        for (Eigen::Index b = 0; b < per_tile; ++b) {
          const double v = batch(c * shape.t3 + b, feature);
          values[static_cast<std::size_t>(f * per_tile + b)] = v;
          any |= v != 0.0;
        }
      }
      out.tiles.push_back(any ? Tile::dense(shape, ext, std::move(values)) : Tile::zero_flag(shape));
    }
  }
  return out;
}

Matrix decode_matrix(const TiledTensor& packed) {
  if (packed.kind != TiledTensor::Kind::Matrix) throw ShapeError("decode_matrix: not a matrix");
  const TileShape& s = packed.shape;
  Matrix out(packed.rows, packed.cols);
  for (Eigen::Index row = 0; row < packed.rows; ++row) {
    for (Eigen::Index col = 0; col < packed.cols; ++col) {
      out(row, col) = packed.tile(row / s.t1, col / s.t2).at(row % s.t1, col % s.t2, 0);
    }
  }
  return out;
}

Matrix decode_batch(const TiledTensor& packed) {
  if (packed.kind != TiledTensor::Kind::Batch) throw ShapeError("decode_batch: not a batch");
  const TileShape& s = packed.shape;
  const Eigen::Index width = packed.feature_axis == 0 ? s.t1 : s.t2;
  Matrix out(packed.cols, packed.rows);
  for (Eigen::Index b = 0; b < packed.cols; ++b) {
    for (Eigen::Index f = 0; f < packed.rows; ++f) {
      const Tile& t = packed.tile(f / width, b / s.t3);
      const Eigen::Index pos = f % width;
      out(b, f) = packed.feature_axis == 0 ? t.at(pos, 0, b % s.t3) : t.at(0, pos, b % s.t3);
    }
  }
  return out;
}

}  // namespace hepex
