#pragma once

// Feed-forward networks with hand-written backprop: dense, 3x3 "same"
// convolution, ReLU and a mean softmax cross-entropy head.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smoothout/tensor.hpp"

namespace smoothout {

enum class ParamRole : std::uint8_t { weight = 0, bias = 1 };

struct Segment {
  std::uint32_t layer_id = 0;
  ParamRole role = ParamRole::weight;
  std::vector<std::uint32_t> shape;
  Index offset = 0;
  Index size = 0;
};

/// Contiguous slice of the flat parameter vector: one convolution filter, one
/// dense output neuron's incoming weights, or (for biases) a whole segment.
struct ParamGroup {
  Index offset = 0;
  Index size = 0;
  std::size_t segment = 0;
};

/// Flat view of every trainable parameter plus its layout.
///
/// Segments tile [0, m) in order. `filter_groups` holds one group per
/// convolution filter / dense neuron and always lies inside a weight segment;
/// `bias_groups` holds one group per bias segment.
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::vector<Segment> segments);
  ParamVector(std::vector<Segment> segments, Vector values);

  Vector values;

  Index size() const noexcept { return values.size(); }
  const std::vector<Segment>& segments() const noexcept { return segments_; }
  const std::vector<ParamGroup>& filter_groups() const noexcept { return filter_groups_; }
  const std::vector<ParamGroup>& bias_groups() const noexcept { return bias_groups_; }

  bool same_layout(const ParamVector& other) const;

 private:
  std::vector<Segment> segments_;
  std::vector<ParamGroup> filter_groups_;
  std::vector<ParamGroup> bias_groups_;
};

enum class LayerKind { dense, conv2d, relu };

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  Index in = 0;   // dense: input features; conv2d: input channels
  Index out = 0;  // dense: output features; conv2d: output channels
  Index height = 0;
  Index width = 0;

  static LayerSpec dense(Index in, Index out) { return {LayerKind::dense, in, out, 0, 0}; }
  static LayerSpec conv2d(Index in_channels, Index out_channels, Index height, Index width) {
    return {LayerKind::conv2d, in_channels, out_channels, height, width};
  }
  static LayerSpec relu() { return {}; }
};

struct Batch {
  Tensor inputs;  // [n, features] or [n, c, h, w]
  std::vector<int> labels;

  Index count() const noexcept { return static_cast<Index>(labels.size()); }
};

/// Gradients of a mean cross-entropy loss with respect to the flat parameters.
class Model {
 public:
  Model() = default;
  /// Builds the parameter layout and initializes weights fan-in-uniform,
  /// U(-1/sqrt(fan_in), 1/sqrt(fan_in)), and biases to zero.
  Model(std::vector<Index> input_shape, std::vector<LayerSpec> layers, int classes,
        std::uint64_t seed);

  const std::vector<Index>& input_shape() const noexcept { return input_shape_; }
  const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
  int classes() const noexcept { return classes_; }
  Index input_features() const;

  ParamVector& params() noexcept { return params_; }
  const ParamVector& params() const noexcept { return params_; }
  /// Replaces the parameters; layouts must match.
  void set_params(const ParamVector& params);

  /// Row-major logits [n, classes].
  RowMatrix logits(const Batch& batch) const;
  double loss(const Batch& batch) const;
  /// Loss plus its gradient, written into `grad` (resized to m).
  double loss_and_grad(const Batch& batch, Vector& grad) const;

 private:
  void check_batch(const Batch& batch) const;

  std::vector<Index> input_shape_;
  std::vector<LayerSpec> layers_;
  int classes_ = 0;
  ParamVector params_;
  std::vector<std::size_t> weight_segment_;  // per layer, index into segments (or npos)
};

/// Mean softmax cross-entropy (max-subtracted) of row-major logits.
double softmax_cross_entropy(const RowMatrix& logits, std::span<const int> labels,
                             RowMatrix* dlogits = nullptr);

double forward_loss(const Model& model, const Batch& batch);
double backward(const Model& model, const Batch& batch, Vector& grad);

/// Argmax prediction, ties broken by the lowest class index.
std::vector<int> predict(const Model& model, const Batch& batch);

struct EvalMetrics {
  double loss = 0.0;
  double accuracy = 0.0;
  Index samples = 0;
};

/// Sample-weighted mean loss and accuracy over a sequence of batches.
EvalMetrics evaluate(const Model& model, std::span<const Batch> batches);

double accuracy(const Model& model, std::span<const Batch> batches);

namespace presets {

/// 784-1024-512-10 ReLU MLP over 1x28x28 inputs.
Model mnist_mlp(std::uint64_t seed);
/// Dense ReLU MLP with the given hidden widths.
Model mlp(Index input_features, std::vector<Index> hidden, int classes, std::uint64_t seed);
/// conv(c->c1) relu conv(c1->c2) relu dense(c2*h*w -> classes).
Model small_conv(Index channels, Index height, Index width, Index c1, Index c2, int classes,
                 std::uint64_t seed);

Model by_name(const std::string& name, const std::vector<Index>& input_shape, int classes,
              std::uint64_t seed);

}  // namespace presets

}  // namespace smoothout
