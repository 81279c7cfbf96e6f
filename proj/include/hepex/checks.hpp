#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "hepex/nn.hpp"
#include "hepex/tile_shape.hpp"

namespace hepex {

/// 64-bit FNV-1a.
std::uint64_t fnv1a(std::string_view bytes);

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

/// Largest relative error between analytic weight/bias gradients and
/// central differences over `probes` randomly chosen active parameters.
double gradient_check(const Network& net, const Matrix& inputs, int probes, std::uint64_t seed,
                      double step = 1e-5);

/// Self-checks run by `verify`: gradients, reindexing equivalence under
/// random and searched permutations, tile pack/decode round-trips and the
/// simulator against plaintext inference.
std::vector<CheckResult> run_invariant_suite(const Network& net, std::uint64_t seed,
                                             const TileShape& tile);

}  // namespace hepex
