#include "hepex/data.hpp"

#include <array>
#include <cstdlib>
#include <fstream>
#include <vector>

#include "hepex/rng.hpp"

namespace hepex {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset) {
  if (offset + 4 > bytes.size()) {
    throw FormatError("truncated IDX header", offset);
  }
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

}  // namespace

FormatError::FormatError(const std::string& what, std::uint64_t offset)
    : std::runtime_error(what + " at byte offset " + std::to_string(offset)), offset_(offset) {}

Dataset::Dataset(Matrix samples) : samples_(std::move(samples)) {
  if (samples_.size() > 0 && (samples_.minCoeff() < 0.0 || samples_.maxCoeff() > 1.0)) {
    throw std::invalid_argument("dataset values must lie in [0, 1]");
  }
}

Dataset Dataset::head(Eigen::Index n) const {
  if (n >= count()) return *this;
  return Dataset(samples_.topRows(n));
}

Dataset load_mnist_idx(const std::filesystem::path& images_path) {
  std::ifstream in(images_path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open IDX file " + images_path.string());
  }
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());

  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != kImageMagic) {
    throw FormatError("wrong IDX magic (expected 0x00000803)", 0);
  }
  const std::uint32_t count = read_be32(bytes, 4);
  const std::uint32_t rows = read_be32(bytes, 8);
  const std::uint32_t cols = read_be32(bytes, 12);
  if (rows != 28) throw FormatError("dimension mismatch: rows != 28", 8);
  if (cols != 28) throw FormatError("dimension mismatch: cols != 28", 12);

  const std::size_t dim = std::size_t{rows} * cols;
  const std::size_t payload = std::size_t{count} * dim;
  constexpr std::size_t kHeader = 16;
  if (bytes.size() < kHeader + payload) {
    throw FormatError("truncated IDX payload", bytes.size());
  }

  Matrix samples(count, static_cast<Eigen::Index>(dim));
  const unsigned char* px = bytes.data() + kHeader;
  for (std::size_t i = 0; i < payload; ++i) {
    samples.data()[i] = static_cast<double>(px[i]) / 255.0;
  }
  return Dataset(std::move(samples));
}

Dataset synthetic_dataset(std::uint64_t seed, Eigen::Index count, Eigen::Index dim,
                          double sparsity) {
  if (count < 0) throw std::invalid_argument("synthetic_dataset: count must be >= 0");
  if (dim < 1) throw std::invalid_argument("synthetic_dataset: dim must be >= 1");
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) {
    throw std::invalid_argument("synthetic_dataset: sparsity must lie in [0, 1]");
  }
  Rng rng(seed);
  Matrix samples(count, dim);
  for (Eigen::Index i = 0; i < samples.size(); ++i) {
    const double value = rng.uniform();
    const double drop = rng.uniform();
    samples.data()[i] = drop < sparsity ? 0.0 : value;
  }
  return Dataset(std::move(samples));
}

std::filesystem::path mnist_dir(const std::filesystem::path& fallback) {
  if (const char* env = std::getenv("HEPEX_MNIST_DIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fallback;
}

MnistSplit load_mnist(const std::filesystem::path& dir) {
  return {load_mnist_idx(dir / "train-images-idx3-ubyte"),
          load_mnist_idx(dir / "t10k-images-idx3-ubyte")};
}

}  // namespace hepex
