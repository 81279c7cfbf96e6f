#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "hepex/nn.hpp"
#include "hepex/tile_shape.hpp"

namespace hepex {

using Permutation = std::vector<Eigen::Index>;

/// One permutation per neuron boundary of a network, in gather form:
/// entry i names the original neuron placed at position i. boundaries[0]
/// permutes the network input (p_in) and boundaries.back() the output
/// (p_out).
struct LayerPermutations {
  std::vector<Permutation> boundaries;

  const Permutation& p_in() const { return boundaries.front(); }
  const Permutation& p_out() const { return boundaries.back(); }

  static LayerPermutations identity(const Network& net);
  LayerPermutations inverse() const;
  bool is_identity() const;

  /// Throws ShapeError unless every vector is a bijection sized to `net`.
  void validate(const Network& net) const;
};

bool is_permutation(const Permutation& perm);
Permutation invert(const Permutation& perm);

/// Reorders rows/columns of weights and masks and the biases of permuted
/// output neurons. Pure reindexing.
Network apply_permutations(const Network& net, const LayerPermutations& perms);

/// Client-side plaintext steps around a permuted network: gather the input
/// features by p_in, and scatter the outputs back by p_out.
Matrix permute_inputs(const Matrix& batch, const LayerPermutations& perms);
Matrix restore_outputs(const Matrix& output, const LayerPermutations& perms);

struct PermuteOptions {
  /// Clustering features per neuron.
  enum class Features {
    Cells,          // binarized weight-mask cells of the adjacent matrices
    TileOccupancy,  // one bit per tile of the other axis: any active cell
  };
  /// Centroid update for binary points.
  enum class Centroid {
    Mean,      // per-coordinate mean; distance is the expected Hamming distance
    Majority,  // per-coordinate mean thresholded at 0.5; exact Hamming distance
  };

  int max_sweeps = 32;
  int kmeans_iters = 20;
  /// Extra k-means runs per boundary from k-means++ seeded groupings.
  int restarts = 3;
  Features features = Features::Cells;
  Centroid centroid = Centroid::Majority;
};

/// Balanced k-means over binary points given as sorted active-coordinate
/// lists. Cluster c holds exactly `cluster_size` points except the last,
/// which takes the remainder. Starts from `initial`, or from the contiguous
/// grouping of the input order when it is empty, and returns one assignment
/// per iteration (the starting one first), so the caller can score each.
std::vector<std::vector<int>> balanced_kmeans_trace(
    const std::vector<std::vector<int>>& points, int dim, Eigen::Index cluster_size,
    int iterations, PermuteOptions::Centroid centroid, std::uint64_t seed,
    std::vector<int> initial = {});

/// Balanced grouping around k-means++ centres chosen by Hamming distance.
std::vector<int> seeded_assignment(const std::vector<std::vector<int>>& points,
                                   Eigen::Index cluster_size, std::uint64_t seed);

/// Row and column orders maximizing zero t1 x t2 tiles of a single mask
/// (rows clustered first, then columns, until a round brings no gain).
/// Never worse than the identity.
std::pair<Permutation, Permutation> permute_single(const Mask& mask, const TileShape& tile,
                                                   std::uint64_t seed, int max_iters = 32,
                                                   PermuteOptions options = {});

/// Tandem permutation of every neuron boundary of a network. Hidden
/// boundaries cluster the concatenation of the incoming mask rows and the
/// outgoing mask columns; odd boundaries are swept first, then even ones.
LayerPermutations permute_network(const Network& net, const TileShape& tile,
                                  std::uint64_t seed, int max_iters = 32,
                                  PermuteOptions options = {});

/// Exact maximum number of zero tiles over all row and column orders.
/// Test oracle only; rows and columns are limited to 8.
Eigen::Index brute_force_permute(const Mask& mask, const TileShape& tile);

}  // namespace hepex
