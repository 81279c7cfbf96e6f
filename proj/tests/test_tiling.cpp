#include <doctest.h>

#include "hepex/tiling.hpp"
#include "support.hpp"

using namespace hepex;

namespace {

Tile full_tile(const TileShape& s, double start) {
  std::vector<double> v(static_cast<std::size_t>(s.slots()));
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = start + static_cast<double>(i);
  return Tile::dense(s, {s.t1, s.t2, s.t3}, std::move(v));
}

}  // namespace

TEST_CASE("pack_matrix flags all-zero blocks") {
  const TileShape t{2, 2, 4};
  Matrix w = Matrix::Zero(4, 4);
  w(0, 0) = 1.5;
  w(3, 2) = -2.0;
  const TiledTensor p = pack_matrix(w, t);
  CHECK(p.grid_rows == 2);
  CHECK(p.grid_cols == 2);
  CHECK(p.allocated_tiles() == 2);
  CHECK(p.flag_tiles() == 2);
  CHECK_FALSE(p.tile(0, 0).is_flag());
  CHECK(p.tile(0, 1).is_flag());
  CHECK(p.tile(1, 0).is_flag());
  CHECK(p.tile(1, 1).at(1, 0, 3) == -2.0);
  CHECK(decode_matrix(p) == w);
}

TEST_CASE("pack_matrix pads ragged edges") {
  const TileShape t{4, 4, 2};
  Matrix w(5, 3);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<double>(i + 1);
  const TiledTensor p = pack_matrix(w, t);
  CHECK(p.grid_rows == 2);
  CHECK(p.grid_cols == 1);
  CHECK(p.tile(1, 0).at(0, 3, 0) == 0.0);
  CHECK(p.tile(1, 0).at(1, 0, 0) == 0.0);
  CHECK(decode_matrix(p) == w);
}

TEST_CASE("an MNIST image spans 49 feature tiles at 4x16") {
  const TileShape t = TileShape::from_slots(4, 16);
  Matrix x = Matrix::Ones(3, 784);
  const TiledTensor p = pack_batch(x, t, 1);
  CHECK(p.grid_rows == 49);
  CHECK(p.grid_cols == 1);
  CHECK(decode_batch(p) == x);
}

TEST_CASE("pack_batch round-trips on either feature axis") {
  Rng rng(3);
  for (int axis : {0, 1}) {
    const TileShape t{4, 8, 4};
    Matrix x(8, 13);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1);
    const TiledTensor p = pack_batch(x, t, axis);
    CHECK(p.grid_cols == 2);
    CHECK(decode_batch(p) == x);
    CHECK(decode_batch(pack_batch(x.topRows(3), t, axis)) == x.topRows(3));
  }
  CHECK_THROWS_AS(pack_batch(Matrix::Ones(6, 4), TileShape{2, 2, 4}), ShapeError);
  CHECK_THROWS_AS(pack_batch(Matrix::Ones(2, 4), TileShape{2, 2, 4}, 2), std::invalid_argument);
  CHECK(pack_batch(Matrix::Zero(2, 4), TileShape{2, 2, 4}).allocated_tiles() == 0);
}

TEST_CASE("dense tiles validate their extents") {
  const TileShape t{2, 4, 8};
  CHECK_THROWS_AS(Tile::dense(t, {3, 4, 1}, std::vector<double>(12)), ShapeError);
  CHECK_THROWS_AS(Tile::dense(t, {2, 4, 9}, std::vector<double>(72)), ShapeError);
  CHECK_THROWS_AS(Tile::dense(t, {2, 4, 1}, std::vector<double>(7)), ShapeError);
  const Tile rep = Tile::dense(t, {1, 4, 1}, {1, 2, 3, 4});
  CHECK(rep.at(1, 2, 5) == 3.0);
  const Tile partial = Tile::dense(t, {1, 1, 3}, {7, 8, 9});
  CHECK(partial.at(0, 0, 2) == 9.0);
  CHECK(partial.at(0, 0, 3) == 0.0);
}

TEST_CASE("flag algebra") {
  const TileShape t{2, 2, 2};
  const Tile z = Tile::zero_flag(t);
  const Tile a = full_tile(t, 1);
  OpCounts c;
  CHECK(tile_add(z, z, c).is_flag());
  CHECK(tile_add(z, a, c).values() == a.values());
  CHECK(tile_add(a, z, c).values() == a.values());
  CHECK(tile_mul(z, a, c).is_flag());
  CHECK(tile_mul(a, z, c).is_flag());
  CHECK(rotate(z, 0, 1, c).is_flag());
  CHECK(rotate_and_sum(z, 1, c).is_flag());
  CHECK(c == OpCounts{});

  const Tile s = tile_add(a, a, c);
  const Tile p = tile_mul(a, a, c);
  CHECK(c == OpCounts{1, 1, 0, 0});
  for (Eigen::Index i = 0; i < 2; ++i) {
    for (Eigen::Index j = 0; j < 2; ++j) {
      for (Eigen::Index b = 0; b < 2; ++b) {
        CHECK(s.at(i, j, b) == 2 * a.at(i, j, b));
        CHECK(p.at(i, j, b) == a.at(i, j, b) * a.at(i, j, b));
      }
    }
  }
  CHECK_THROWS_AS(tile_add(a, full_tile(TileShape{2, 2, 4}, 0), c), ShapeError);
}

TEST_CASE("plaintext tiles are computed in the clear") {
  const TileShape t{2, 2, 2};
  const Tile enc = full_tile(t, 1);
  const Tile plain = enc.as_plaintext();
  CHECK(enc.is_encrypted());
  CHECK_FALSE(plain.is_encrypted());
  CHECK_FALSE(Tile::zero_flag(t).is_encrypted());
  CHECK_FALSE(pack_matrix(Matrix::Ones(2, 2), t).tile(0, 0).is_encrypted());
  CHECK(pack_batch(Matrix::Ones(2, 2), t).tile(0, 0).is_encrypted());

  OpCounts c;
  const Tile pp = tile_mul(plain, plain, c);
  CHECK_FALSE(pp.is_encrypted());
  CHECK_FALSE(tile_add(pp, plain, c).is_encrypted());
  CHECK_FALSE(rotate_and_sum(pp, 0, c).is_encrypted());
  CHECK(c == OpCounts{});
  CHECK(pp.values() == tile_mul(enc, enc, c).values());

  c = OpCounts{};
  CHECK(tile_mul(plain, enc, c).is_encrypted());
  CHECK(tile_add(enc, plain, c).is_encrypted());
  CHECK(rotate(enc, 0, 1, c).is_encrypted());
  CHECK(c == OpCounts{1, 1, 1, 0});
}

TEST_CASE("flags stay sound: a flag always decodes to zeros") {
  Rng rng(8);
  const TileShape t{2, 4, 2};
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(16);
    for (double& x : v) x = rng.uniform() < 0.5 ? 0.0 : rng.uniform(-1, 1);
    const Tile a = Tile::dense(t, {2, 4, 2}, v);
    OpCounts c;
    const Tile r = tile_mul(a, Tile::zero_flag(t), c);
    CHECK(r.is_flag());
    CHECK(r.all_zero());
    CHECK(r.at(1, 3, 1) == 0.0);
  }
}

TEST_CASE("rotation is cyclic within one axis") {
  const TileShape t{2, 4, 1};
  const Tile a = Tile::dense(t, {2, 4, 1}, {0, 1, 2, 3, 4, 5, 6, 7});
  OpCounts c;
  const Tile r = rotate(a, 1, 1, c);
  CHECK(r.at(0, 0, 0) == 1.0);
  CHECK(r.at(0, 3, 0) == 0.0);
  CHECK(r.at(1, 3, 0) == 4.0);
  const Tile back = rotate(r, 1, -1, c);
  CHECK(back.values() == a.values());
  const Tile rows = rotate(a, 0, 1, c);
  CHECK(rows.at(0, 2, 0) == 6.0);
  CHECK(c.rot == 3);
  CHECK_THROWS_AS(rotate(a, 3, 1, c), std::invalid_argument);
}

TEST_CASE("rotate_and_sum") {
  SUBCASE("ones over a 4-wide axis sum to 4 in every slot with 2 rotations") {
    const TileShape t{1, 4, 1};
    OpCounts c;
    const Tile r = rotate_and_sum(Tile::dense(t, {1, 4, 1}, {1, 1, 1, 1}), 1, c);
    for (Eigen::Index j = 0; j < 4; ++j) CHECK(r.at(0, j, 0) == 4.0);
    CHECK(c == OpCounts{2, 0, 2, 0});
  }
  SUBCASE("matches a direct sum for every extent") {
    Rng rng(5);
    for (Eigen::Index e : {2, 4, 8, 16}) {
      for (int axis : {0, 1}) {
        const TileShape t = axis == 0 ? TileShape{e, 2, 3} : TileShape{2, e, 3};
        std::vector<double> v(static_cast<std::size_t>(t.slots()));
        for (double& x : v) x = rng.uniform(-1, 1);
        const Tile a = Tile::dense(t, {t.t1, t.t2, t.t3}, v);
        OpCounts c;
        const Tile r = rotate_and_sum(a, axis, c);
        int log2 = 0;
        while ((Eigen::Index{1} << log2) < e) ++log2;
        CHECK(c.rot == log2);
        CHECK(c.add == log2);
        for (Eigen::Index other = 0; other < 2; ++other) {
          for (Eigen::Index b = 0; b < 3; ++b) {
            double sum = 0.0;
            for (Eigen::Index p = 0; p < e; ++p) sum += axis == 0 ? a.at(p, other, b) : a.at(other, p, b);
            for (Eigen::Index p = 0; p < e; ++p) {
              const double got = axis == 0 ? r.at(p, other, b) : r.at(other, p, b);
              CHECK(got == doctest::Approx(sum).epsilon(1e-12));
            }
          }
        }
      }
    }
  }
  SUBCASE("extents must be powers of two") {
    OpCounts c;
    const TileShape t{3, 2, 1};
    CHECK_THROWS_AS(rotate_and_sum(Tile::dense(t, {3, 2, 1}, std::vector<double>(6, 1.0)), 0, c),
                    std::invalid_argument);
    CHECK_THROWS_AS(rotate_and_sum(Tile::zero_flag(TileShape{2, 2, 1}), 2, c), std::invalid_argument);
  }
}
