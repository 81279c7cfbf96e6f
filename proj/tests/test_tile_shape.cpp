#include <doctest.h>

#include <numeric>

#include "hepex/tile_shape.hpp"
#include "support.hpp"

using namespace hepex;

TEST_CASE("batch extent follows the slot budget") {
  CHECK(TileShape::from_slots(2, 2).t3 == 4096);
  CHECK(TileShape::from_slots(4, 4).t3 == 1024);
  CHECK(TileShape::from_slots(8, 8).t3 == 256);
  CHECK(TileShape::from_slots(16, 16).t3 == 64);
  CHECK(TileShape::from_slots(16, 16).slots() == 16384);
  CHECK_THROWS_AS(TileShape::from_slots(3, 3), std::invalid_argument);
}

TEST_CASE("tile shape parsing") {
  CHECK(parse_tile_shape("4x4") == TileShape{4, 4, 1024});
  CHECK(parse_tile_shape("2x8") == TileShape{2, 8, 1024});
  CHECK(parse_tile_shape("3x3x5") == TileShape{3, 3, 5});
  CHECK(parse_tile_shape("8x8", 4096).t3 == 64);
  CHECK(to_string(TileShape{16, 16, 64}) == "16x16");
  CHECK_THROWS_AS(parse_tile_shape("4"), std::invalid_argument);
  CHECK_THROWS_AS(parse_tile_shape("4xq"), std::invalid_argument);
  CHECK_THROWS_AS(parse_tile_shape("0x4x4"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(parse_supported_tile_shape("3x3"), doctest::Contains("{2, 4, 8, 16}"),
                       std::invalid_argument);
  CHECK_NOTHROW(parse_supported_tile_shape("16x2"));
}

TEST_CASE("zero tile counting") {
  const TileShape t22{2, 2, 1};
  CHECK(count_zero_tiles(Mask::Zero(4, 4), t22) == TileCount{4, 4});
  Mask diag = Mask::Zero(4, 4);
  for (int i = 0; i < 4; ++i) diag(i, i) = 1;
  CHECK(count_zero_tiles(diag, t22) == TileCount{2, 4});
  CHECK(count_zero_tiles(Mask::Zero(5, 5), t22) == TileCount{9, 9});
  CHECK(count_zero_tiles(Mask::Ones(5, 5), t22) == TileCount{0, 9});
  CHECK(TileCount{}.fraction() == 0.0);
}

TEST_CASE("odd layers use the transposed grid") {
  const TileShape s{2, 8, 1};
  CHECK(layer_tile(s, 0) == s);
  CHECK(layer_tile(s, 1) == TileShape{8, 2, 1});
  CHECK(boundary_extent(s, 0) == 8);
  CHECK(boundary_extent(s, 1) == 2);
  CHECK(boundary_extent(s, 2) == 8);
  // Layer 0 rows and layer 1 columns meet at boundary 1 with the same extent.
  CHECK(layer_tile(s, 0).t1 == boundary_extent(s, 1));
  CHECK(layer_tile(s, 1).t2 == boundary_extent(s, 1));
}

TEST_CASE("zero-cell histogram covers every tile") {
  Rng rng(3);
  const Mask m = test::random_mask(rng, 13, 11, 0.3);
  const TileShape s{4, 4, 1};
  const auto h = zero_cell_histogram(m, s);
  CHECK(h.size() == 17);
  CHECK(std::accumulate(h.begin(), h.end(), Eigen::Index{0}) == count_zero_tiles(m, s).total);
  CHECK(h.back() == count_zero_tiles(m, s).zero);

  const Eigen::Index dims[] = {10, 6, 10};
  const Network net = test::random_pruned_network(dims, 2, 0.4);
  const auto hn = zero_cell_histogram(net, s);
  CHECK(std::accumulate(hn.begin(), hn.end(), Eigen::Index{0}) == count_zero_tiles(net, s).total);
}
