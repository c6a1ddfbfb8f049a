#include "smoothout/data.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>

namespace smoothout {

std::vector<Index> Dataset::sample_shape() const {
  const auto& s = inputs.shape();
  return {s.begin() + 1, s.end()};
}

Batch Dataset::slice(Index first, Index n) const {
  require(first >= 0 && n >= 0 && first + n <= count(), ErrorKind::invalid_argument,
          "slice out of range");
  const Index features = count() == 0 ? 0 : inputs.size() / count();
  std::vector<Index> shape = inputs.shape();
  shape[0] = n;
  Batch b;
  b.inputs = Tensor(shape, inputs.data().segment(first * features, n * features));
  b.labels.assign(labels.begin() + first, labels.begin() + first + n);
  return b;
}

Batch Dataset::gather(std::span<const Index> indices) const {
  const auto n = static_cast<Index>(indices.size());
  std::vector<Index> shape = inputs.shape();
  shape[0] = n;
  Batch b;
  b.inputs = Tensor(shape);
  b.labels.resize(indices.size());
  const auto src = inputs.rows();
  auto dst = b.inputs.rows();
  for (Index i = 0; i < n; ++i) {
    const Index j = indices[static_cast<std::size_t>(i)];
    dst.row(i) = src.row(j);
    b.labels[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(j)];
  }
  return b;
}

std::vector<Batch> Dataset::chunks(Index batch_size) const {
  require(batch_size >= 1, ErrorKind::invalid_argument, "batch_size must be positive");
  std::vector<Batch> out;
  for (Index first = 0; first < count(); first += batch_size) {
    out.push_back(slice(first, std::min(batch_size, count() - first)));
  }
  return out;
}

namespace {

std::vector<unsigned char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t be32(const std::vector<unsigned char>& bytes, std::size_t at) {
  return (std::uint32_t{bytes[at]} << 24) | (std::uint32_t{bytes[at + 1]} << 16) |
         (std::uint32_t{bytes[at + 2]} << 8) | std::uint32_t{bytes[at + 3]};
}

}  // namespace

Dataset load_mnist_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                       Split split) {
  const auto img = read_all(images);
  const auto lab = read_all(labels);

  require(img.size() >= 4 && lab.size() >= 4, ErrorKind::truncated_file, "IDX header missing");
  require(be32(img, 0) == 0x00000803u, ErrorKind::bad_magic,
          images.string() + " is not an IDX image file");
  require(be32(lab, 0) == 0x00000801u, ErrorKind::bad_magic,
          labels.string() + " is not an IDX label file");
  require(img.size() >= 16, ErrorKind::truncated_file, "IDX image header truncated");
  require(lab.size() >= 8, ErrorKind::truncated_file, "IDX label header truncated");

  const std::size_t n = be32(img, 4);
  const std::size_t rows = be32(img, 8);
  const std::size_t cols = be32(img, 12);
  const std::size_t n_labels = be32(lab, 4);
  require(img.size() == 16 + n * rows * cols, ErrorKind::truncated_file,
          images.string() + " size does not match its header");
  require(lab.size() == 8 + n_labels, ErrorKind::truncated_file,
          labels.string() + " size does not match its header");
  require(n == n_labels, ErrorKind::count_mismatch, "image and label counts differ");

  Dataset d;
  d.split = split;
  d.classes = 10;
  const auto ni = static_cast<Index>(n);
  const auto features = static_cast<Index>(rows * cols);
  d.inputs = Tensor({ni, 1, static_cast<Index>(rows), static_cast<Index>(cols)});
  for (Index i = 0; i < ni * features; ++i) {
    d.inputs[i] = static_cast<double>(img[16 + static_cast<std::size_t>(i)]) / 255.0;
  }
  d.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = lab[8 + i];
    require(y < d.classes, ErrorKind::count_mismatch, "label outside 0..9");
    d.labels[i] = y;
  }
  d.normalization.mean = Vector::Zero(features);
  d.normalization.scale = Vector::Constant(features, 1.0 / 255.0);
  return d;
}

Dataset synth_blobs(Index n, int classes, Index dim, double separation, std::uint64_t seed,
                    Split split) {
  require(classes >= 2, ErrorKind::invalid_argument, "need at least two classes");
  require(n >= classes, ErrorKind::invalid_argument, "need n >= classes");
  require(dim >= 2 || classes == 2, ErrorKind::invalid_argument,
          "dim 1 only supports two classes");

  // Centers: scaled basis vectors when K <= dim (pairwise distance = separation),
  // otherwise a regular K-gon in the first two coordinates with side = separation.
  RowMatrix centers = RowMatrix::Zero(classes, dim);
  if (dim == 1) {
    centers(0, 0) = -separation / 2;
    centers(1, 0) = separation / 2;
  } else if (classes <= dim) {
    for (int k = 0; k < classes; ++k) centers(k, k) = separation / std::numbers::sqrt2;
  } else {
    const double radius = separation / (2.0 * std::sin(std::numbers::pi / classes));
    for (int k = 0; k < classes; ++k) {
      const double phi = 2.0 * std::numbers::pi * k / classes;
      centers(k, 0) = radius * std::cos(phi);
      centers(k, 1) = radius * std::sin(phi);
    }
  }

  Dataset d;
  d.split = split;
  d.classes = classes;
  d.inputs = Tensor({n, dim});
  d.labels.resize(static_cast<std::size_t>(n));
  Rng rng = Rng(seed).substream("blobs");
  auto x = d.inputs.rows();
  for (Index i = 0; i < n; ++i) {
    const int k = static_cast<int>(i % classes);
    d.labels[static_cast<std::size_t>(i)] = k;
    for (Index j = 0; j < dim; ++j) x(i, j) = centers(k, j) + rng.normal();
  }
  d.normalization.mean = Vector::Zero(dim);
  d.normalization.scale = Vector::Ones(dim);
  return d;
}

void standardize(Dataset& train, Dataset& test) {
  require(train.count() > 0, ErrorKind::invalid_argument, "empty training split");
  auto x = train.inputs.rows();
  const Vector mean = x.colwise().mean().transpose();
  Vector scale(mean.size());
  for (Index j = 0; j < mean.size(); ++j) {
    const double var = (x.col(j).array() - mean[j]).square().mean();
    scale[j] = var > 0.0 ? 1.0 / std::sqrt(var) : 1.0;
  }
  for (Dataset* d : {&train, &test}) {
    auto r = d->inputs.rows();
    r.rowwise() -= mean.transpose();
    r.array().rowwise() *= scale.transpose().array();
    d->normalization.mean = mean;
    d->normalization.scale = scale;
  }
}

BatchStream::BatchStream(const Dataset& data, Index batch_size, std::uint64_t epoch_seed)
    : data_(&data), batch_size_(batch_size) {
  require(batch_size >= 1, ErrorKind::invalid_argument, "batch_size must be positive");
  order_.resize(static_cast<std::size_t>(data.count()));
  std::iota(order_.begin(), order_.end(), Index{0});
  Rng rng = Rng(epoch_seed).substream("shuffle");
  for (std::size_t i = order_.size(); i > 1; --i) {
    std::swap(order_[i - 1], order_[rng.below(i)]);
  }
  batches_ = (order_.size() + static_cast<std::size_t>(batch_size) - 1) /
             static_cast<std::size_t>(batch_size);
}

Batch BatchStream::operator[](std::size_t k) const {
  const std::size_t first = k * static_cast<std::size_t>(batch_size_);
  const std::size_t last = std::min(order_.size(), first + static_cast<std::size_t>(batch_size_));
  return data_->gather(std::span<const Index>(order_.data() + first, last - first));
}

BatchStream batches(const Dataset& data, Index batch_size, std::uint64_t epoch_seed) {
  return BatchStream(data, batch_size, epoch_seed);
}

}  // namespace smoothout
