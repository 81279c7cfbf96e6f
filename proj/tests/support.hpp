#pragma once

#include <cstdlib>
#include <filesystem>
#include <string>

#include "hepex/data.hpp"
#include "hepex/nn.hpp"
#include "hepex/rng.hpp"
#include "hepex/tile_shape.hpp"

namespace hepex::test {

inline Mask random_mask(Rng& rng, Eigen::Index rows, Eigen::Index cols, double density) {
  Mask m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.uniform() < density ? 1 : 0;
  }
  return m;
}

/// Random network whose masks keep each weight with probability `density`.
inline Network random_pruned_network(std::span<const Eigen::Index> dims, std::uint64_t seed,
                                     double density) {
  Network net = build_network(dims, seed);
  Rng rng = Rng::derive(seed, 77);
  for (FCLayer& layer : net.layers) {
    layer.mask = random_mask(rng, layer.out_dim(), layer.in_dim(), density);
    layer.apply_mask();
  }
  return net;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("hepex-test-" + name);
  std::filesystem::create_directories(dir);
  return dir;
}

inline bool mnist_available() {
  const auto dir = mnist_dir();
  return std::filesystem::exists(dir / "train-images-idx3-ubyte") &&
         std::filesystem::exists(dir / "t10k-images-idx3-ubyte");
}

}  // namespace hepex::test
