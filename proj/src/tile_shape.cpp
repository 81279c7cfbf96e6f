#include "hepex/tile_shape.hpp"

#include <charconv>
#include <stdexcept>

namespace hepex {

namespace {

Eigen::Index parse_extent(std::string_view text, std::string_view whole) {
  Eigen::Index value = 0;
  const auto* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw std::invalid_argument("malformed tile shape '" + std::string(whole) +
                                "' (expected t1xt2, e.g. 4x4)");
  }
  return value;
}

bool supported_extent(Eigen::Index t) { return t == 2 || t == 4 || t == 8 || t == 16; }

}  // namespace

TileShape TileShape::from_slots(Eigen::Index t1, Eigen::Index t2, Eigen::Index slots) {
  if (t1 < 1 || t2 < 1) throw std::invalid_argument("tile extents must be >= 1");
  if (slots % (t1 * t2) != 0) {
    throw std::invalid_argument("slot budget " + std::to_string(slots) +
                                " is not divisible by t1*t2");
  }
  return TileShape{t1, t2, slots / (t1 * t2)};
}

void TileShape::validate() const {
  if (t1 < 1 || t2 < 1 || t3 < 1) {
    throw std::invalid_argument("degenerate tile shape: every extent must be >= 1");
  }
}

void TileShape::validate_supported() const {
  validate();
  if (!supported_extent(t1) || !supported_extent(t2)) {
    throw std::invalid_argument("tile extents t1 and t2 must be one of {2, 4, 8, 16}; got " +
                                std::to_string(t1) + "x" + std::to_string(t2));
  }
}

TileShape parse_tile_shape(std::string_view text, Eigen::Index slots) {
  const auto x1 = text.find('x');
  if (x1 == std::string_view::npos) {
    throw std::invalid_argument("malformed tile shape '" + std::string(text) +
                                "' (expected t1xt2, e.g. 4x4)");
  }
  const auto x2 = text.find('x', x1 + 1);
  const Eigen::Index t1 = parse_extent(text.substr(0, x1), text);
  if (x2 == std::string_view::npos) {
    const Eigen::Index t2 = parse_extent(text.substr(x1 + 1), text);
    return TileShape::from_slots(t1, t2, slots);
  }
  const Eigen::Index t2 = parse_extent(text.substr(x1 + 1, x2 - x1 - 1), text);
  const Eigen::Index t3 = parse_extent(text.substr(x2 + 1), text);
  TileShape shape{t1, t2, t3};
  shape.validate();
  return shape;
}

TileShape parse_supported_tile_shape(std::string_view text, Eigen::Index slots) {
  const auto x1 = text.find('x');
  if (x1 != std::string_view::npos) {
    const auto x2 = text.find('x', x1 + 1);
    const Eigen::Index t1 = parse_extent(text.substr(0, x1), text);
    const Eigen::Index t2 = parse_extent(
        text.substr(x1 + 1, x2 == std::string_view::npos ? std::string_view::npos : x2 - x1 - 1), text);
    TileShape{t1, t2, 1}.validate_supported();
  }
  TileShape shape = parse_tile_shape(text, slots);
  shape.validate_supported();
  return shape;
}

std::string to_string(const TileShape& shape) {
  return std::to_string(shape.t1) + "x" + std::to_string(shape.t2);
}

TileShape layer_tile(const TileShape& shape, std::size_t k) {
  if (k % 2 == 0) return shape;
  return TileShape{shape.t2, shape.t1, shape.t3};
}

Eigen::Index boundary_extent(const TileShape& shape, std::size_t b) {
  return b % 2 == 1 ? shape.t1 : shape.t2;
}

CountGrid tile_active_counts(const Mask& mask, const TileShape& shape) {
  shape.validate();
  CountGrid grid = CountGrid::Zero(ceil_div(mask.rows(), shape.t1), ceil_div(mask.cols(), shape.t2));
  for (Eigen::Index r = 0; r < mask.rows(); ++r) {
    const Eigen::Index gr = r / shape.t1;
    for (Eigen::Index c = 0; c < mask.cols(); ++c) {
      if (mask(r, c) != 0) ++grid(gr, c / shape.t2);
    }
  }
  return grid;
}

TileCount count_zero_tiles(const Mask& mask, const TileShape& shape) {
  const CountGrid grid = tile_active_counts(mask, shape);
  TileCount count;
  count.total = grid.size();
  count.zero = (grid.array() == 0).count();
  return count;
}

std::vector<TileCount> count_zero_tiles_per_layer(const Network& net, const TileShape& shape) {
  std::vector<TileCount> counts;
  counts.reserve(net.layers.size());
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    counts.push_back(count_zero_tiles(net.layers[k].mask, layer_tile(shape, k)));
  }
  return counts;
}

TileCount count_zero_tiles(const Network& net, const TileShape& shape) {
  TileCount total;
  for (const TileCount& c : count_zero_tiles_per_layer(net, shape)) total += c;
  return total;
}

std::vector<Eigen::Index> zero_cell_histogram(const Mask& mask, const TileShape& shape) {
  const CountGrid grid = tile_active_counts(mask, shape);
  std::vector<Eigen::Index> histogram(static_cast<std::size_t>(shape.area() + 1), 0);
  for (Eigen::Index i = 0; i < grid.size(); ++i) {
    ++histogram[static_cast<std::size_t>(shape.area() - grid.data()[i])];
  }
  return histogram;
}

std::vector<Eigen::Index> zero_cell_histogram(const Network& net, const TileShape& shape) {
  std::vector<Eigen::Index> histogram(static_cast<std::size_t>(shape.area() + 1), 0);
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const auto layer = zero_cell_histogram(net.layers[k].mask, layer_tile(shape, k));
    for (std::size_t z = 0; z < layer.size(); ++z) histogram[z] += layer[z];
  }
  return histogram;
}

}  // namespace hepex
