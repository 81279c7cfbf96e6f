#include "hepex/permute.hpp"

#include <algorithm>
#include <bit>
#include <numeric>
#include <stdexcept>
#include <tuple>

#include "hepex/rng.hpp"

namespace hepex {

namespace {

constexpr std::uint64_t kTieBreakStream = 4000;
constexpr std::uint64_t kSeedingStream = 4001;

using Bits = std::vector<std::uint64_t>;

struct BoundaryView {
  // Per neuron (current order): occupancy over the tiles of the other axis.
  std::vector<Bits> occupancy;
  int occupancy_bits = 0;
  // Per neuron: clustering features.
  std::vector<std::vector<int>> features;
  int feature_dim = 0;
};

Mask reorder_rows(const Mask& m, const Permutation& q) {
  Mask out(m.rows(), m.cols());
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.row(i) = m.row(q[static_cast<std::size_t>(i)]);
  return out;
}

Mask reorder_cols(const Mask& m, const Permutation& q) {
  Mask out(m.rows(), m.cols());
  for (Eigen::Index j = 0; j < m.cols(); ++j) out.col(j) = m.col(q[static_cast<std::size_t>(j)]);
  return out;
}

Eigen::Index boundary_size(const std::vector<Mask>& masks, std::size_t b) {
  return b == 0 ? masks.front().cols() : masks[b - 1].rows();
}

BoundaryView describe_boundary(const std::vector<Mask>& masks, const TileShape& tile,
                               std::size_t b, PermuteOptions::Features mode) {
  const std::size_t depth = masks.size();
  const Eigen::Index n = boundary_size(masks, b);
  BoundaryView view;

  // Incoming matrix: rows are the neurons; tiles along its columns.
  const Mask* in = b >= 1 ? &masks[b - 1] : nullptr;
  const Mask* out = b < depth ? &masks[b] : nullptr;
  const Eigen::Index in_blocks = in ? ceil_div(in->cols(), layer_tile(tile, b - 1).t2) : 0;
  const Eigen::Index in_block_w = in ? layer_tile(tile, b - 1).t2 : 1;
  const Eigen::Index out_blocks = out ? ceil_div(out->rows(), layer_tile(tile, b).t1) : 0;
  const Eigen::Index out_block_h = out ? layer_tile(tile, b).t1 : 1;

  view.occupancy_bits = static_cast<int>(in_blocks + out_blocks);
  const std::size_t words = static_cast<std::size_t>((view.occupancy_bits + 63) / 64);
  view.occupancy.assign(static_cast<std::size_t>(n), Bits(words, 0));
  view.features.resize(static_cast<std::size_t>(n));
  view.feature_dim = mode == PermuteOptions::Features::Cells
                         ? static_cast<int>((in ? in->cols() : 0) + (out ? out->rows() : 0))
                         : view.occupancy_bits;

  for (Eigen::Index i = 0; i < n; ++i) {
    Bits& occ = view.occupancy[static_cast<std::size_t>(i)];
    std::vector<int>& feat = view.features[static_cast<std::size_t>(i)];
    auto set_bit = [&occ](Eigen::Index bit) {
      occ[static_cast<std::size_t>(bit / 64)] |= std::uint64_t{1} << (bit % 64);
    };
    if (in) {
      for (Eigen::Index j = 0; j < in->cols(); ++j) {
        if ((*in)(i, j) == 0) continue;
        set_bit(j / in_block_w);
        if (mode == PermuteOptions::Features::Cells) feat.push_back(static_cast<int>(j));
      }
    }
    if (out) {
      const int offset = in ? static_cast<int>(in->cols()) : 0;
      for (Eigen::Index r = 0; r < out->rows(); ++r) {
        if ((*out)(r, i) == 0) continue;
        set_bit(in_blocks + r / out_block_h);
        if (mode == PermuteOptions::Features::Cells) feat.push_back(offset + static_cast<int>(r));
      }
    }
    if (mode == PermuteOptions::Features::TileOccupancy) {
      for (int bit = 0; bit < view.occupancy_bits; ++bit) {
        if ((occ[static_cast<std::size_t>(bit / 64)] >> (bit % 64)) & 1U) feat.push_back(bit);
      }
    }
  }
  return view;
}

// Quality of a grouping at one boundary: zero tiles in the two adjacent
// matrices first, then fewer distinct features per cluster. The second key
// lets a boundary settle into a structured grouping that only pays off once
// a neighbouring boundary is regrouped too.
struct GroupScore {
  Eigen::Index zero_tiles = 0;
  Eigen::Index feature_union = 0;

  bool better_than(const GroupScore& o) const {
    return zero_tiles > o.zero_tiles ||
           (zero_tiles == o.zero_tiles && feature_union < o.feature_union);
  }
};

GroupScore score_grouping(const BoundaryView& view, const std::vector<int>& assignment,
                          int clusters) {
  const std::size_t words = view.occupancy.empty() ? 0 : view.occupancy.front().size();
  const std::size_t feature_words = static_cast<std::size_t>((view.feature_dim + 63) / 64);
  std::vector<Bits> unions(static_cast<std::size_t>(clusters), Bits(words, 0));
  std::vector<Bits> features(static_cast<std::size_t>(clusters), Bits(feature_words, 0));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    const auto c = static_cast<std::size_t>(assignment[i]);
    Bits& u = unions[c];
    const Bits& occ = view.occupancy[i];
    for (std::size_t w = 0; w < words; ++w) u[w] |= occ[w];
    for (int f : view.features[i]) {
      features[c][static_cast<std::size_t>(f / 64)] |= std::uint64_t{1} << (f % 64);
    }
  }
  GroupScore score;
  for (std::size_t c = 0; c < unions.size(); ++c) {
    int ones = 0;
    for (std::uint64_t w : unions[c]) ones += std::popcount(w);
    score.zero_tiles += view.occupancy_bits - ones;
    for (std::uint64_t w : features[c]) score.feature_union += std::popcount(w);
  }
  return score;
}

Permutation order_from_assignment(const std::vector<int>& assignment, int clusters) {
  Permutation order;
  order.reserve(assignment.size());
  std::vector<std::vector<Eigen::Index>> members(static_cast<std::size_t>(clusters));
  for (std::size_t i = 0; i < assignment.size(); ++i) {
    members[static_cast<std::size_t>(assignment[i])].push_back(static_cast<Eigen::Index>(i));
  }
  for (const auto& m : members) order.insert(order.end(), m.begin(), m.end());
  return order;
}

struct SearchState {
  std::vector<Mask> masks;  // current (permuted) masks
  LayerPermutations perms;
  TileShape tile;

  Eigen::Index layer_zero(std::size_t k) const {
    return count_zero_tiles(masks[k], layer_tile(tile, k)).zero;
  }

  void apply(std::size_t b, const Permutation& q) {
    if (b >= 1) masks[b - 1] = reorder_rows(masks[b - 1], q);
    if (b < masks.size()) masks[b] = reorder_cols(masks[b], q);
    Permutation& p = perms.boundaries[b];
    Permutation composed(p.size());
    for (std::size_t i = 0; i < q.size(); ++i) composed[i] = p[static_cast<std::size_t>(q[i])];
    p = std::move(composed);
  }
};

// Best grouping found by balanced k-means at one boundary. Returns false when
// nothing beats the current layout.
bool improve_boundary(SearchState& state, std::size_t b, std::uint64_t seed,
                      const PermuteOptions& options) {
  const Eigen::Index n = boundary_size(state.masks, b);
  const Eigen::Index size = boundary_extent(state.tile, b);
  if (n <= size) return false;  // a single cluster: every order is equivalent

  const BoundaryView view = describe_boundary(state.masks, state.tile, b, options.features);
  const int clusters = static_cast<int>(ceil_div(n, size));

  std::vector<int> current(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) current[static_cast<std::size_t>(i)] = static_cast<int>(i / size);
  GroupScore best = score_grouping(view, current, clusters);

  std::vector<int> best_assignment;
  for (int start = 0; start <= options.restarts; ++start) {
    const std::uint64_t run_seed = splitmix64(seed + static_cast<std::uint64_t>(start));
    std::vector<int> initial;
    if (start > 0) initial = seeded_assignment(view.features, size, run_seed);
    const auto trace = balanced_kmeans_trace(view.features, view.feature_dim, size,
                                             options.kmeans_iters, options.centroid, run_seed,
                                             std::move(initial));
    for (const auto& assignment : trace) {
      const GroupScore score = score_grouping(view, assignment, clusters);
      if (score.better_than(best)) {
        best = score;
        best_assignment = assignment;
      }
    }
  }
  if (best_assignment.empty()) return false;
  state.apply(b, order_from_assignment(best_assignment, clusters));
  return true;
}

}  // namespace

bool is_permutation(const Permutation& perm) {
  std::vector<char> seen(perm.size(), 0);
  for (Eigen::Index v : perm) {
    if (v < 0 || static_cast<std::size_t>(v) >= perm.size() || seen[static_cast<std::size_t>(v)]) {
      return false;
    }
    seen[static_cast<std::size_t>(v)] = 1;
  }
  return true;
}

Permutation invert(const Permutation& perm) {
  Permutation inv(perm.size());
  for (std::size_t i = 0; i < perm.size(); ++i) inv[static_cast<std::size_t>(perm[i])] = static_cast<Eigen::Index>(i);
  return inv;
}

LayerPermutations LayerPermutations::identity(const Network& net) {
  LayerPermutations perms;
  auto iota = [](Eigen::Index n) {
    Permutation p(static_cast<std::size_t>(n));
    std::iota(p.begin(), p.end(), Eigen::Index{0});
    return p;
  };
  perms.boundaries.push_back(iota(net.input_dim()));
  for (const FCLayer& layer : net.layers) perms.boundaries.push_back(iota(layer.out_dim()));
  return perms;
}

LayerPermutations LayerPermutations::inverse() const {
  LayerPermutations inv;
  for (const Permutation& p : boundaries) inv.boundaries.push_back(invert(p));
  return inv;
}

bool LayerPermutations::is_identity() const {
  for (const Permutation& p : boundaries) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      if (p[i] != static_cast<Eigen::Index>(i)) return false;
    }
  }
  return true;
}

void LayerPermutations::validate(const Network& net) const {
  if (boundaries.size() != net.layers.size() + 1) {
    throw ShapeError("permutation count does not match the network's neuron boundaries");
  }
  for (std::size_t b = 0; b < boundaries.size(); ++b) {
    const Eigen::Index expected = b == 0 ? net.input_dim() : net.layers[b - 1].out_dim();
    if (static_cast<Eigen::Index>(boundaries[b].size()) != expected) {
      throw ShapeError("permutation for boundary " + std::to_string(b) + " has length " +
                       std::to_string(boundaries[b].size()) + ", expected " +
                       std::to_string(expected));
    }
    if (!is_permutation(boundaries[b])) {
      throw ShapeError("boundary " + std::to_string(b) + " vector is not a permutation");
    }
  }
}

Network apply_permutations(const Network& net, const LayerPermutations& perms) {
  perms.validate(net);
  Network out = net;
  for (std::size_t k = 0; k < net.layers.size(); ++k) {
    const Permutation& rows = perms.boundaries[k + 1];
    const Permutation& cols = perms.boundaries[k];
    const FCLayer& src = net.layers[k];
    FCLayer& dst = out.layers[k];
    for (Eigen::Index i = 0; i < src.out_dim(); ++i) {
      const Eigen::Index si = rows[static_cast<std::size_t>(i)];
      dst.bias[i] = src.bias[si];
      for (Eigen::Index j = 0; j < src.in_dim(); ++j) {
        const Eigen::Index sj = cols[static_cast<std::size_t>(j)];
        dst.weights(i, j) = src.weights(si, sj);
        dst.mask(i, j) = src.mask(si, sj);
      }
    }
  }
  return out;
}

Matrix permute_inputs(const Matrix& batch, const LayerPermutations& perms) {
  const Permutation& p = perms.p_in();
  if (batch.cols() != static_cast<Eigen::Index>(p.size())) {
    throw ShapeError("permute_inputs: feature dim does not match p_in");
  }
  Matrix out(batch.rows(), batch.cols());
  for (Eigen::Index j = 0; j < batch.cols(); ++j) out.col(j) = batch.col(p[static_cast<std::size_t>(j)]);
  return out;
}

Matrix restore_outputs(const Matrix& output, const LayerPermutations& perms) {
  const Permutation& p = perms.p_out();
  if (output.cols() != static_cast<Eigen::Index>(p.size())) {
    throw ShapeError("restore_outputs: output dim does not match p_out");
  }
  Matrix out(output.rows(), output.cols());
  for (Eigen::Index i = 0; i < output.cols(); ++i) out.col(p[static_cast<std::size_t>(i)]) = output.col(i);
  return out;
}

namespace {

struct Pair {
  double distance;
  std::uint32_t priority;
  int cluster;
  int point;
};

// Greedy balanced assignment: pairs in ascending (distance, priority,
// cluster) order claim a slot while the point is unplaced and the cluster has
// room.
std::vector<int> assign_balanced(std::vector<Pair>& pairs, const std::vector<Eigen::Index>& capacity,
                                 Eigen::Index n) {
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    return std::tie(a.distance, a.priority, a.cluster) < std::tie(b.distance, b.priority, b.cluster);
  });
  std::vector<int> next(static_cast<std::size_t>(n), -1);
  std::vector<Eigen::Index> room = capacity;
  Eigen::Index placed = 0;
  for (const Pair& p : pairs) {
    if (placed == n) break;
    int& slot = next[static_cast<std::size_t>(p.point)];
    if (slot >= 0 || room[static_cast<std::size_t>(p.cluster)] == 0) continue;
    slot = p.cluster;
    --room[static_cast<std::size_t>(p.cluster)];
    ++placed;
  }
  return next;
}

std::vector<Eigen::Index> cluster_capacity(Eigen::Index n, Eigen::Index cluster_size) {
  const auto clusters = static_cast<std::size_t>(ceil_div(std::max<Eigen::Index>(n, 1), cluster_size));
  std::vector<Eigen::Index> capacity(clusters, cluster_size);
  capacity.back() = n - static_cast<Eigen::Index>(clusters - 1) * cluster_size;
  return capacity;
}

std::vector<std::uint32_t> tie_priorities(Eigen::Index n, std::uint64_t seed) {
  std::vector<std::uint32_t> priority(static_cast<std::size_t>(n));
  std::iota(priority.begin(), priority.end(), 0U);
  Rng rng = Rng::derive(seed, kTieBreakStream);
  rng.shuffle(std::span<std::uint32_t>(priority));
  return priority;
}

// Hamming distance between sorted coordinate lists.
double hamming(const std::vector<int>& a, const std::vector<int>& b) {
  std::size_t i = 0;
  std::size_t j = 0;
  std::size_t common = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j]) {
      ++i;
    } else if (b[j] < a[i]) {
      ++j;
    } else {
      ++common;
      ++i;
      ++j;
    }
  }
  return static_cast<double>(a.size() + b.size() - 2 * common);
}

}  // namespace

std::vector<int> seeded_assignment(const std::vector<std::vector<int>>& points,
                                   Eigen::Index cluster_size, std::uint64_t seed) {
  if (cluster_size < 1) throw std::invalid_argument("balanced k-means: cluster size must be >= 1");
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n == 0) return {};
  const std::vector<Eigen::Index> capacity = cluster_capacity(n, cluster_size);
  const int clusters = static_cast<int>(capacity.size());
  Rng rng = Rng::derive(seed, kSeedingStream);

  // k-means++: each further centre drawn with probability proportional to
  // the squared distance to the nearest chosen one.
  std::vector<int> centres{static_cast<int>(rng.below(static_cast<std::uint64_t>(n)))};
  std::vector<double> nearest(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    nearest[static_cast<std::size_t>(i)] = hamming(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(centres[0])]);
  }
  while (static_cast<int>(centres.size()) < clusters) {
    double total = 0.0;
    for (double d : nearest) total += d * d;
    int pick = 0;
    if (total > 0.0) {
      double r = rng.uniform() * total;
      pick = static_cast<int>(n - 1);
      for (Eigen::Index i = 0; i < n; ++i) {
        r -= nearest[static_cast<std::size_t>(i)] * nearest[static_cast<std::size_t>(i)];
        if (r < 0.0) {
          pick = static_cast<int>(i);
          break;
        }
      }
    } else {
      pick = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
    }
    centres.push_back(pick);
    for (Eigen::Index i = 0; i < n; ++i) {
      double& d = nearest[static_cast<std::size_t>(i)];
      d = std::min(d, hamming(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(pick)]));
    }
  }

  const std::vector<std::uint32_t> priority = tie_priorities(n, seed);
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(clusters));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int c = 0; c < clusters; ++c) {
      pairs.push_back({hamming(points[static_cast<std::size_t>(i)], points[static_cast<std::size_t>(centres[static_cast<std::size_t>(c)])]),
                       priority[static_cast<std::size_t>(i)], c, static_cast<int>(i)});
    }
  }
  return assign_balanced(pairs, capacity, n);
}

std::vector<std::vector<int>> balanced_kmeans_trace(
    const std::vector<std::vector<int>>& points, int dim, Eigen::Index cluster_size,
    int iterations, PermuteOptions::Centroid centroid, std::uint64_t seed,
    std::vector<int> initial) {
  if (cluster_size < 1) throw std::invalid_argument("balanced k-means: cluster size must be >= 1");
  const auto n = static_cast<Eigen::Index>(points.size());
  const std::vector<Eigen::Index> capacity = cluster_capacity(n, cluster_size);
  const int clusters = static_cast<int>(capacity.size());

  std::vector<int> assignment = std::move(initial);
  if (assignment.empty()) {
    assignment.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) assignment[static_cast<std::size_t>(i)] = static_cast<int>(i / cluster_size);
  } else if (static_cast<Eigen::Index>(assignment.size()) != n) {
    throw std::invalid_argument("balanced k-means: initial assignment has the wrong length");
  }

  // Random priorities break distance ties between points.
  const std::vector<std::uint32_t> priority = tie_priorities(n, seed);

  std::vector<std::vector<int>> trace{assignment};
  std::vector<double> cent(static_cast<std::size_t>(clusters) * static_cast<std::size_t>(dim));
  std::vector<double> cent_sum(static_cast<std::size_t>(clusters));
  std::vector<Eigen::Index> members(static_cast<std::size_t>(clusters));
  std::vector<Pair> pairs;
  pairs.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(clusters));

  for (int it = 0; it < iterations; ++it) {
    std::fill(cent.begin(), cent.end(), 0.0);
    std::fill(members.begin(), members.end(), 0);
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(assignment[static_cast<std::size_t>(i)]);
      ++members[c];
      for (int f : points[static_cast<std::size_t>(i)]) cent[c * dim + static_cast<std::size_t>(f)] += 1.0;
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(clusters); ++c) {
      double sum = 0.0;
      for (int f = 0; f < dim; ++f) {
        double& v = cent[c * dim + static_cast<std::size_t>(f)];
        v = members[c] > 0 ? v / static_cast<double>(members[c]) : 0.0;
        if (centroid == PermuteOptions::Centroid::Majority) v = v >= 0.5 ? 1.0 : 0.0;
        sum += v;
      }
      cent_sum[c] = sum;
    }

    // Distance to a centroid: sum_f |x_f - c_f| for binary x.
    pairs.clear();
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto& pts = points[static_cast<std::size_t>(i)];
      for (int c = 0; c < clusters; ++c) {
        const double* row = cent.data() + static_cast<std::size_t>(c) * dim;
        double d = cent_sum[static_cast<std::size_t>(c)];
        for (int f : pts) d += 1.0 - 2.0 * row[f];
        pairs.push_back({d, priority[static_cast<std::size_t>(i)], c, static_cast<int>(i)});
      }
    }
    std::vector<int> next = assign_balanced(pairs, capacity, n);
    if (next == assignment) break;
    assignment = std::move(next);
    trace.push_back(assignment);
  }
  return trace;
}

LayerPermutations permute_network(const Network& net, const TileShape& tile, std::uint64_t seed,
                                  int max_iters, PermuteOptions options) {
  net.validate();
  tile.validate();
  SearchState state;
  state.tile = tile;
  state.perms = LayerPermutations::identity(net);
  for (const FCLayer& layer : net.layers) state.masks.push_back(layer.mask);

  const std::size_t boundaries = net.layers.size() + 1;
  for (int sweep = 0; sweep < max_iters; ++sweep) {
    bool gained = false;
    for (std::size_t parity : {std::size_t{1}, std::size_t{0}}) {
      for (std::size_t b = parity; b < boundaries; b += 2) {
        const std::uint64_t stream = splitmix64(seed ^ (static_cast<std::uint64_t>(sweep) << 32) ^ b);
        gained |= improve_boundary(state, b, stream, options);
      }
    }
    if (!gained) break;
  }
  return state.perms;
}

std::pair<Permutation, Permutation> permute_single(const Mask& mask, const TileShape& tile,
                                                   std::uint64_t seed, int max_iters,
                                                   PermuteOptions options) {
  if (mask.size() == 0) throw std::invalid_argument("permute_single: empty mask");
  Network net;
  FCLayer layer;
  layer.weights = Matrix::Zero(mask.rows(), mask.cols());
  layer.bias = Vector::Zero(mask.rows());
  layer.mask = mask;
  net.layers.push_back(std::move(layer));
  LayerPermutations perms = permute_network(net, tile, seed, max_iters, options);
  return {perms.boundaries[1], perms.boundaries[0]};
}

namespace {

// Orders whose every block of `extent` consecutive positions is increasing.
// Tile contents do not depend on the order inside a block, so these cover
// every distinct tiling.
std::vector<Permutation> block_canonical_orders(Eigen::Index n, Eigen::Index extent) {
  Permutation p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Eigen::Index{0});
  std::vector<Permutation> out;
  do {
    bool canonical = true;
    for (Eigen::Index i = 1; i < n && canonical; ++i) {
      if (i % extent != 0 && p[static_cast<std::size_t>(i)] < p[static_cast<std::size_t>(i - 1)]) {
        canonical = false;
      }
    }
    if (canonical) out.push_back(p);
  } while (std::next_permutation(p.begin(), p.end()));
  return out;
}

}  // namespace

Eigen::Index brute_force_permute(const Mask& mask, const TileShape& tile) {
  tile.validate();
  const Eigen::Index m = mask.rows();
  const Eigen::Index n = mask.cols();
  if (m > 8 || n > 8) {
    throw std::invalid_argument("brute_force_permute: matrices larger than 8x8 are not enumerable");
  }
  if (m == 0 || n == 0) return 0;
  const Eigen::Index row_groups = ceil_div(m, tile.t1);
  const Eigen::Index col_groups = ceil_div(n, tile.t2);

  // Column bitmask of the active cells in each row.
  std::vector<std::uint32_t> row_bits(static_cast<std::size_t>(m), 0);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < n; ++c) {
      if (mask(r, c) != 0) row_bits[static_cast<std::size_t>(r)] |= 1U << c;
    }
  }

  const auto row_orders = block_canonical_orders(m, tile.t1);
  const auto col_orders = block_canonical_orders(n, tile.t2);
  std::vector<std::uint32_t> col_group_bits(static_cast<std::size_t>(col_groups) * col_orders.size(), 0);
  for (std::size_t o = 0; o < col_orders.size(); ++o) {
    for (Eigen::Index pos = 0; pos < n; ++pos) {
      col_group_bits[o * static_cast<std::size_t>(col_groups) + static_cast<std::size_t>(pos / tile.t2)] |=
          1U << col_orders[o][static_cast<std::size_t>(pos)];
    }
  }

  Eigen::Index best = 0;
  std::vector<std::uint32_t> group_union(static_cast<std::size_t>(row_groups));
  for (const Permutation& rows : row_orders) {
    std::fill(group_union.begin(), group_union.end(), 0U);
    for (Eigen::Index pos = 0; pos < m; ++pos) {
      group_union[static_cast<std::size_t>(pos / tile.t1)] |= row_bits[static_cast<std::size_t>(rows[static_cast<std::size_t>(pos)])];
    }
    for (std::size_t o = 0; o < col_orders.size(); ++o) {
      Eigen::Index zero = 0;
      for (Eigen::Index g = 0; g < row_groups; ++g) {
        for (Eigen::Index h = 0; h < col_groups; ++h) {
          if ((group_union[static_cast<std::size_t>(g)] &
               col_group_bits[o * static_cast<std::size_t>(col_groups) + static_cast<std::size_t>(h)]) == 0) {
            ++zero;
          }
        }
      }
      best = std::max(best, zero);
    }
  }
  return best;
}

}  // namespace hepex
