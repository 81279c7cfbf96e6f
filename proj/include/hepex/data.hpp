#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace hepex {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

/// Raised for malformed IDX payloads; the message names the byte offset.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::uint64_t offset);
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

/// Immutable set of samples, one row per sample, values in [0, 1].
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(Matrix samples);

  const Matrix& samples() const { return samples_; }
  Eigen::Index count() const { return samples_.rows(); }
  Eigen::Index dim() const { return samples_.cols(); }

  /// First n samples (or all when n exceeds the count).
  Dataset head(Eigen::Index n) const;

 private:
  Matrix samples_;
};

/// Reads an IDX3 unsigned-byte image file (magic 0x00000803) and scales
/// pixels by 1/255. Labels are never read.
Dataset load_mnist_idx(const std::filesystem::path& images_path);

/// Uniform [0,1] values, each zeroed with probability `sparsity`.
Dataset synthetic_dataset(std::uint64_t seed, Eigen::Index count, Eigen::Index dim,
                          double sparsity);

/// MNIST directory from $HEPEX_MNIST_DIR, falling back to `fallback`.
std::filesystem::path mnist_dir(const std::filesystem::path& fallback = "data/mnist");

struct MnistSplit {
  Dataset train;
  Dataset test;
};

/// Loads train-images-idx3-ubyte and t10k-images-idx3-ubyte from `dir`.
MnistSplit load_mnist(const std::filesystem::path& dir);

}  // namespace hepex
