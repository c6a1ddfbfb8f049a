#include "smoothout/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace smoothout {

namespace {

constexpr std::size_t kNoSegment = std::numeric_limits<std::size_t>::max();
constexpr Index kKernel = 3;

Index product(std::span<const std::uint32_t> dims) {
  Index n = 1;
  for (auto d : dims) n *= static_cast<Index>(d);
  return n;
}

// [in_c, h*w] sample -> [in_c*9, h*w] patch matrix for a 3x3 kernel, stride 1, pad 1.
void im2col(const double* x, Index channels, Index height, Index width, RowMatrix& cols) {
  cols.setZero(channels * kKernel * kKernel, height * width);
  for (Index c = 0; c < channels; ++c) {
    const double* plane = x + c * height * width;
    for (Index ky = 0; ky < kKernel; ++ky) {
      for (Index kx = 0; kx < kKernel; ++kx) {
        double* row = cols.row((c * kKernel + ky) * kKernel + kx).data();
        for (Index y = 0; y < height; ++y) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          for (Index xx = 0; xx < width; ++xx) {
            const Index sx = xx + kx - 1;
            if (sx < 0 || sx >= width) continue;
            row[y * width + xx] = plane[sy * width + sx];
          }
        }
      }
    }
  }
}

void col2im_add(const RowMatrix& cols, Index channels, Index height, Index width, double* dx) {
  for (Index c = 0; c < channels; ++c) {
    double* plane = dx + c * height * width;
    for (Index ky = 0; ky < kKernel; ++ky) {
      for (Index kx = 0; kx < kKernel; ++kx) {
        const double* row = cols.row((c * kKernel + ky) * kKernel + kx).data();
        for (Index y = 0; y < height; ++y) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= height) continue;
          for (Index xx = 0; xx < width; ++xx) {
            const Index sx = xx + kx - 1;
            if (sx < 0 || sx >= width) continue;
            plane[sy * width + sx] += row[y * width + xx];
          }
        }
      }
    }
  }
}

}  // namespace

ParamVector::ParamVector(std::vector<Segment> segments)
    : ParamVector(std::move(segments), Vector()) {}

ParamVector::ParamVector(std::vector<Segment> segments, Vector vals)
    : segments_(std::move(segments)) {
  Index offset = 0;
  for (std::size_t s = 0; s < segments_.size(); ++s) {
    Segment& seg = segments_[s];
    require(!seg.shape.empty(), ErrorKind::shape_mismatch, "segment with empty shape");
    seg.offset = offset;
    seg.size = product(seg.shape);
    if (seg.role == ParamRole::weight) {
      const Index rows = seg.shape.front();
      const Index per = rows == 0 ? 0 : seg.size / rows;
      for (Index r = 0; r < rows; ++r) filter_groups_.push_back({offset + r * per, per, s});
    } else {
      bias_groups_.push_back({offset, seg.size, s});
    }
    offset += seg.size;
  }
  if (vals.size() == 0) {
    values = Vector::Zero(offset);
  } else {
    require(vals.size() == offset, ErrorKind::length_mismatch,
            "parameter buffer does not match segment layout");
    values = std::move(vals);
  }
}

bool ParamVector::same_layout(const ParamVector& other) const {
  if (segments_.size() != other.segments_.size()) return false;
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    const auto& a = segments_[i];
    const auto& b = other.segments_[i];
    if (a.layer_id != b.layer_id || a.role != b.role || a.shape != b.shape) return false;
  }
  return values.size() == other.values.size();
}

Model::Model(std::vector<Index> input_shape, std::vector<LayerSpec> layers, int classes,
             std::uint64_t seed)
    : input_shape_(std::move(input_shape)), layers_(std::move(layers)), classes_(classes) {
  require(classes_ >= 2, ErrorKind::invalid_argument, "need at least two classes");
  require(!input_shape_.empty(), ErrorKind::shape_mismatch, "empty input shape");

  // Walk the layers tracking the activation shape (channels, h, w) or (features).
  Index features = Tensor::element_count(input_shape_);
  Index channels = input_shape_.size() == 3 ? input_shape_[0] : 0;
  bool spatial = input_shape_.size() == 3;

  std::vector<Segment> segments;
  weight_segment_.assign(layers_.size(), kNoSegment);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const LayerSpec& spec = layers_[l];
    const auto id = static_cast<std::uint32_t>(l);
    switch (spec.kind) {
      case LayerKind::dense:
        require(spec.in == features, ErrorKind::shape_mismatch,
                "dense layer " + std::to_string(l) + " input does not match previous output");
        weight_segment_[l] = segments.size();
        segments.push_back({id, ParamRole::weight,
                            {static_cast<std::uint32_t>(spec.out), static_cast<std::uint32_t>(spec.in)}});
        segments.push_back({id, ParamRole::bias, {static_cast<std::uint32_t>(spec.out)}});
        features = spec.out;
        spatial = false;
        break;
      case LayerKind::conv2d:
        require(spatial && spec.in == channels &&
                    spec.height == input_shape_[1] && spec.width == input_shape_[2],
                ErrorKind::shape_mismatch,
                "conv2d layer " + std::to_string(l) + " does not match its input feature map");
        weight_segment_[l] = segments.size();
        segments.push_back({id, ParamRole::weight,
                            {static_cast<std::uint32_t>(spec.out), static_cast<std::uint32_t>(spec.in),
                             static_cast<std::uint32_t>(kKernel), static_cast<std::uint32_t>(kKernel)}});
        segments.push_back({id, ParamRole::bias, {static_cast<std::uint32_t>(spec.out)}});
        channels = spec.out;
        features = spec.out * spec.height * spec.width;
        break;
      case LayerKind::relu:
        break;
    }
  }
  require(features == classes_, ErrorKind::shape_mismatch,
          "final layer width does not equal the class count");

  params_ = ParamVector(std::move(segments));
  Rng rng = Rng(seed).substream("init");
  for (const Segment& seg : params_.segments()) {
    if (seg.role != ParamRole::weight) continue;
    const Index fan_in = seg.size / seg.shape.front();
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (Index i = 0; i < seg.size; ++i) {
      params_.values[seg.offset + i] = -bound + 2.0 * bound * rng.uniform();
    }
  }
}

Index Model::input_features() const { return Tensor::element_count(input_shape_); }

void Model::set_params(const ParamVector& params) {
  require(params_.same_layout(params), ErrorKind::shape_mismatch,
          "parameter layout does not match model");
  params_.values = params.values;
}

void Model::check_batch(const Batch& batch) const {
  require(batch.count() >= 1, ErrorKind::shape_mismatch, "empty batch");
  require(batch.inputs.rank() >= 1 && batch.inputs.dim(0) == batch.count(),
          ErrorKind::shape_mismatch, "inputs and labels disagree on sample count");
  require(batch.inputs.size() == batch.count() * input_features(), ErrorKind::shape_mismatch,
          "batch feature size does not match model input");
  for (int y : batch.labels) {
    require(y >= 0 && y < classes_, ErrorKind::shape_mismatch, "label out of range");
  }
}

namespace {

struct Forward {
  std::vector<RowMatrix> acts;  // acts[l] is the input of layer l; acts.back() the logits
};

}  // namespace

static Forward run_forward(const Model& model, const std::vector<std::size_t>& weight_segment,
                           const Batch& batch) {
  const ParamVector& p = model.params();
  const auto& layers = model.layers();
  const Index n = batch.count();
  Forward f;
  f.acts.reserve(layers.size() + 1);
  f.acts.emplace_back(batch.inputs.rows());
  RowMatrix cols;
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerSpec& spec = layers[l];
    const RowMatrix& x = f.acts.back();
    RowMatrix y;
    if (spec.kind == LayerKind::relu) {
      y = x.cwiseMax(0.0);
    } else {
      const Segment& ws = p.segments()[weight_segment[l]];
      const Segment& bs = p.segments()[weight_segment[l] + 1];
      const Eigen::Map<const Vector> b(p.values.data() + bs.offset, bs.size);
      if (spec.kind == LayerKind::dense) {
        const Eigen::Map<const RowMatrix> w(p.values.data() + ws.offset, spec.out, spec.in);
        y.noalias() = x * w.transpose();
        y.rowwise() += b.transpose();
      } else {
        const Index hw = spec.height * spec.width;
        const Eigen::Map<const RowMatrix> w(p.values.data() + ws.offset, spec.out,
                                            spec.in * kKernel * kKernel);
        y.resize(n, spec.out * hw);
        for (Index s = 0; s < n; ++s) {
          im2col(x.row(s).data(), spec.in, spec.height, spec.width, cols);
          Eigen::Map<RowMatrix> ys(y.row(s).data(), spec.out, hw);
          ys.noalias() = w * cols;
          ys.colwise() += b;
        }
      }
    }
    f.acts.push_back(std::move(y));
  }
  return f;
}

RowMatrix Model::logits(const Batch& batch) const {
  check_batch(batch);
  return std::move(run_forward(*this, weight_segment_, batch).acts.back());
}

double Model::loss(const Batch& batch) const {
  const RowMatrix z = logits(batch);
  return softmax_cross_entropy(z, batch.labels);
}

double Model::loss_and_grad(const Batch& batch, Vector& grad) const {
  check_batch(batch);
  Forward f = run_forward(*this, weight_segment_, batch);
  RowMatrix delta;
  const double loss = softmax_cross_entropy(f.acts.back(), batch.labels, &delta);

  grad.setZero(params_.size());
  const Index n = batch.count();
  RowMatrix cols;
  RowMatrix dcols;
  for (std::size_t li = layers_.size(); li-- > 0;) {
    const LayerSpec& spec = layers_[li];
    const RowMatrix& x = f.acts[li];
    const bool need_input_grad = li > 0;
    if (spec.kind == LayerKind::relu) {
      delta = (x.array() > 0.0).select(delta, 0.0);
      continue;
    }
    const Segment& ws = params_.segments()[weight_segment_[li]];
    const Segment& bs = params_.segments()[weight_segment_[li] + 1];
    Eigen::Map<Vector> gb(grad.data() + bs.offset, bs.size);
    if (spec.kind == LayerKind::dense) {
      const Eigen::Map<const RowMatrix> w(params_.values.data() + ws.offset, spec.out, spec.in);
      Eigen::Map<RowMatrix> gw(grad.data() + ws.offset, spec.out, spec.in);
      gw.noalias() = delta.transpose() * x;
      gb = delta.colwise().sum().transpose();
      if (need_input_grad) {
        RowMatrix dx = delta * w;
        delta = std::move(dx);
      }
    } else {
      const Index hw = spec.height * spec.width;
      const Index patch = spec.in * kKernel * kKernel;
      const Eigen::Map<const RowMatrix> w(params_.values.data() + ws.offset, spec.out, patch);
      Eigen::Map<RowMatrix> gw(grad.data() + ws.offset, spec.out, patch);
      RowMatrix dx;
      if (need_input_grad) dx.setZero(n, spec.in * hw);
      for (Index s = 0; s < n; ++s) {
        const Eigen::Map<const RowMatrix> ds(delta.row(s).data(), spec.out, hw);
        im2col(x.row(s).data(), spec.in, spec.height, spec.width, cols);
        gw.noalias() += ds * cols.transpose();
        gb += ds.rowwise().sum();
        if (need_input_grad) {
          dcols.noalias() = w.transpose() * ds;
          col2im_add(dcols, spec.in, spec.height, spec.width, dx.row(s).data());
        }
      }
      if (need_input_grad) delta = std::move(dx);
    }
  }
  return loss;
}

double softmax_cross_entropy(const RowMatrix& logits, std::span<const int> labels,
                             RowMatrix* dlogits) {
  const Index n = logits.rows();
  require(n == static_cast<Index>(labels.size()) && n > 0, ErrorKind::shape_mismatch,
          "logits and labels disagree");
  if (dlogits) dlogits->resize(n, logits.cols());
  double total = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (Index i = 0; i < n; ++i) {
    const auto z = logits.row(i);
    const double zmax = z.maxCoeff();
    const double sum = (z.array() - zmax).exp().sum();
    const double lse = zmax + std::log(sum);
    const int y = labels[static_cast<std::size_t>(i)];
    total += lse - z[y];
    if (dlogits) {
      auto d = dlogits->row(i);
      d = ((z.array() - lse).exp() * inv_n).matrix();
      d[y] -= inv_n;
    }
  }
  return total / static_cast<double>(n);
}

double forward_loss(const Model& model, const Batch& batch) { return model.loss(batch); }

double backward(const Model& model, const Batch& batch, Vector& grad) {
  return model.loss_and_grad(batch, grad);
}

std::vector<int> predict(const Model& model, const Batch& batch) {
  const RowMatrix z = model.logits(batch);
  std::vector<int> out(static_cast<std::size_t>(z.rows()));
  for (Index i = 0; i < z.rows(); ++i) {
    Index best = 0;
    for (Index k = 1; k < z.cols(); ++k) {
      if (z(i, k) > z(i, best)) best = k;
    }
    out[static_cast<std::size_t>(i)] = static_cast<int>(best);
  }
  return out;
}

EvalMetrics evaluate(const Model& model, std::span<const Batch> batches) {
  EvalMetrics m;
  double loss_sum = 0.0;
  Index correct = 0;
  for (const Batch& b : batches) {
    const RowMatrix z = model.logits(b);
    loss_sum += softmax_cross_entropy(z, b.labels) * static_cast<double>(b.count());
    for (Index i = 0; i < z.rows(); ++i) {
      Index best = 0;
      for (Index k = 1; k < z.cols(); ++k) {
        if (z(i, k) > z(i, best)) best = k;
      }
      if (best == b.labels[static_cast<std::size_t>(i)]) ++correct;
    }
    m.samples += b.count();
  }
  if (m.samples > 0) {
    m.loss = loss_sum / static_cast<double>(m.samples);
    m.accuracy = static_cast<double>(correct) / static_cast<double>(m.samples);
  }
  return m;
}

double accuracy(const Model& model, std::span<const Batch> batches) {
  return evaluate(model, batches).accuracy;
}

namespace presets {

Model mnist_mlp(std::uint64_t seed) {
  return Model({1, 28, 28},
               {LayerSpec::dense(784, 1024), LayerSpec::relu(), LayerSpec::dense(1024, 512),
                LayerSpec::relu(), LayerSpec::dense(512, 10)},
               10, seed);
}

Model mlp(Index input_features, std::vector<Index> hidden, int classes, std::uint64_t seed) {
  std::vector<LayerSpec> layers;
  Index in = input_features;
  for (Index h : hidden) {
    layers.push_back(LayerSpec::dense(in, h));
    layers.push_back(LayerSpec::relu());
    in = h;
  }
  layers.push_back(LayerSpec::dense(in, classes));
  return Model({input_features}, std::move(layers), classes, seed);
}

Model small_conv(Index channels, Index height, Index width, Index c1, Index c2, int classes,
                 std::uint64_t seed) {
  return Model({channels, height, width},
               {LayerSpec::conv2d(channels, c1, height, width), LayerSpec::relu(),
                LayerSpec::conv2d(c1, c2, height, width), LayerSpec::relu(),
                LayerSpec::dense(c2 * height * width, classes)},
               classes, seed);
}

Model by_name(const std::string& name, const std::vector<Index>& input_shape, int classes,
              std::uint64_t seed) {
  const Index features = Tensor::element_count(input_shape);
  if (name == "mnist-mlp") {
    require(features == 784 && classes == 10, ErrorKind::config,
            "mnist-mlp expects 784 input features and 10 classes");
    return mnist_mlp(seed);
  }
  if (name == "mlp-small") return mlp(features, {64}, classes, seed);
  if (name == "small-conv") {
    require(input_shape.size() == 3, ErrorKind::config, "small-conv needs [c, h, w] inputs");
    return small_conv(input_shape[0], input_shape[1], input_shape[2], 4, 8, classes, seed);
  }
  throw Error(ErrorKind::config, "unknown model preset '" + name + "'");
}

}  // namespace presets

}  // namespace smoothout
