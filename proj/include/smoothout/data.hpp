#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "smoothout/nn.hpp"

namespace smoothout {

enum class Split { train, test };

/// Per-feature affine map applied as (x - mean) * scale.
struct Normalization {
  Vector mean;
  Vector scale;
};

struct Dataset {
  Tensor inputs;  // [n, ...sample shape]
  std::vector<int> labels;
  int classes = 0;
  Split split = Split::train;
  Normalization normalization;

  Index count() const noexcept { return static_cast<Index>(labels.size()); }
  std::vector<Index> sample_shape() const;
  /// Samples [first, first + count) in storage order.
  Batch slice(Index first, Index count) const;
  Batch gather(std::span<const Index> indices) const;
  /// The whole split as consecutive batches of at most `batch_size`, unshuffled.
  std::vector<Batch> chunks(Index batch_size) const;
};

/// Reads an IDX image file (magic 0x00000803) and label file (0x00000801).
/// Pixels are scaled to [0, 1]; inputs have shape [n, 1, rows, cols].
Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       Split split = Split::train);

/// K isotropic unit-variance Gaussian clusters with centers `separation` apart.
/// Labels cycle 0..K-1 so every class has n/K (+1) samples.
Dataset synth_blobs(Index n, int classes, Index dim, double separation, std::uint64_t seed,
                    Split split = Split::train);

/// Fits per-feature standardization on `train` and applies it to both splits.
void standardize(Dataset& train, Dataset& test);

/// Epoch-wise shuffled mini-batches. The final short batch is kept.
class BatchStream {
 public:
  BatchStream(const Dataset& data, Index batch_size, std::uint64_t epoch_seed);

  std::size_t size() const noexcept { return batches_; }
  Batch operator[](std::size_t k) const;
  const std::vector<Index>& order() const noexcept { return order_; }

 private:
  const Dataset* data_;
  Index batch_size_;
  std::vector<Index> order_;
  std::size_t batches_;
};

BatchStream batches(const Dataset& data, Index batch_size, std::uint64_t epoch_seed);

}  // namespace smoothout
