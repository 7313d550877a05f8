#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "periq/layers.hpp"
#include "periq/rng.hpp"
#include "periq/tensor.hpp"

namespace periq {

enum class SlabKind { conv_filter, dense_weight, dense_bias, bn_scale, bn_bias };

inline const char* to_string(SlabKind k) {
  switch (k) {
    case SlabKind::conv_filter: return "conv-filter";
    case SlabKind::dense_weight: return "dense-weight";
    case SlabKind::dense_bias: return "dense-bias";
    case SlabKind::bn_scale: return "bn-scale";
    case SlabKind::bn_bias: return "bn-bias";
  }
  return "?";
}

// Named parameter array with its gradient buffer.
struct WeightSlab {
  std::string name;
  SlabKind kind = SlabKind::dense_weight;
  Tensor tensor;
  Tensor grad;
};

enum class LayerKind { dense, conv2d, batchnorm, relu, maxpool2x2 };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::batchnorm: return "batchnorm";
    case LayerKind::relu: return "relu";
    case LayerKind::maxpool2x2: return "maxpool2x2";
  }
  return "?";
}

// One layer as configured; build() fills the derived input extents.
struct LayerSpec {
  LayerKind kind = LayerKind::dense;
  std::size_t out = 0;                    // dense: output features
  std::size_t in = 0;                     // dense: derived input features
  std::size_t kh = 0, kw = 0;             // conv2d: kernel extents
  std::size_t channels_out = 0;           // conv2d: output channels
  std::size_t channels_in = 0;            // conv2d: derived input channels
  int s1 = 1, s2 = 1;                     // conv2d strides
  std::size_t features = 0;               // batchnorm: derived feature count
  bool pure_centering = false;            // batchnorm: skip the variance stage
  float eps = 1e-5f;                      // batchnorm
};

struct ModelSpec {
  std::vector<std::size_t> input_shape;  // [n] for vectors, [h, w, c] for images
  std::vector<LayerSpec> layers;
};

namespace detail {

// Kaiming-uniform bound for ReLU fan-in.
inline void kaiming_uniform_fill(Tensor& t, std::size_t fan_in, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (float& v : t.values()) v = static_cast<float>(rng.uniform(-bound, bound));
}

}  // namespace detail

struct LayerCache {
  Tensor in_mat;                                   // matrix-section input
  std::vector<Tensor> in_samples;                  // image-section inputs, one per sample
  std::vector<BatchNormCache> bn;                  // single entry when the layer is batchnorm
  std::vector<std::vector<std::size_t>> pool_idx;  // per-sample argmax for maxpool
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

// A fixed sequence of layers over value-semantic weight slabs. Image layers
// (conv2d/maxpool2x2) form a prefix processed per sample; the activations are
// flattened into batch columns at the first dense or batchnorm layer.
class Model {
 public:
  Model() = default;

  // Zero-initialized skeleton; used by checkpoint loading.
  static Model skeleton(const ModelSpec& spec) {
    Model m;
    m.init(spec, nullptr);
    return m;
  }

  // Seeded Kaiming-uniform init for weights; biases zero, batchnorm scale one.
  static Model build(const ModelSpec& spec, Rng& rng) {
    Model m;
    m.init(spec, &rng);
    return m;
  }

  static Model build(const ModelSpec& spec, std::uint64_t seed) {
    Rng rng(seed);
    return build(spec, rng);
  }

  const ModelSpec& spec() const { return spec_; }
  const std::vector<LayerSpec>& layers() const { return spec_.layers; }
  std::vector<WeightSlab>& slabs() { return slabs_; }
  const std::vector<WeightSlab>& slabs() const { return slabs_; }
  std::size_t input_size() const { return shape_numel(spec_.input_shape); }
  std::size_t output_size() const { return output_size_; }

  WeightSlab* find_slab(const std::string& name) {
    for (auto& s : slabs_)
      if (s.name == name) return &s;
    return nullptr;
  }

  void zero_grads() {
    for (auto& s : slabs_) s.grad.zero();
  }

  // x: [input_size x r] batch columns; returns logits [output_size x r].
  Tensor forward(const Tensor& x, ForwardCache* cache = nullptr) const {
    require_rank(x, 2, "model forward x");
    if (x.extent(0) != input_size())
      throw shape_error("model forward: input rows " + std::to_string(x.extent(0)) +
                        " != model input size " + std::to_string(input_size()));
    const std::size_t r = x.extent(1);
    if (cache) cache->layers.assign(spec_.layers.size(), {});

    // image section
    std::vector<Tensor> samples;
    std::size_t layer = 0;
    bool in_image_section = image_section_len_ > 0;
    if (in_image_section) {
      samples.reserve(r);
      for (std::size_t j = 0; j < r; ++j) {
        Tensor s(spec_.input_shape);
        for (std::size_t i = 0; i < s.size(); ++i) s[i] = x(i, j);
        samples.push_back(std::move(s));
      }
      for (; layer < image_section_len_; ++layer) {
        const LayerSpec& ls = spec_.layers[layer];
        LayerCache* lc = cache ? &cache->layers[layer] : nullptr;
        if (lc) {
          lc->in_samples = samples;
          if (ls.kind == LayerKind::maxpool2x2) lc->pool_idx.resize(r);
        }
        for (std::size_t j = 0; j < r; ++j) {
          switch (ls.kind) {
            case LayerKind::conv2d:
              samples[j] = conv2d_forward(samples[j], slabs_[bindings_[layer].w].tensor, ls.s1,
                                          ls.s2);
              break;
            case LayerKind::relu:
              samples[j] = relu_forward(samples[j]);
              break;
            case LayerKind::maxpool2x2:
              samples[j] = maxpool2x2_forward(samples[j], lc ? &lc->pool_idx[j] : nullptr);
              break;
            default:
              throw shape_error("model: unexpected layer in image section");
          }
        }
      }
    }

    // flatten into the matrix section
    Tensor a;
    if (in_image_section) {
      const std::size_t n = samples.empty() ? flat_after_images_ : samples[0].size();
      a = Tensor({n, r});
      for (std::size_t j = 0; j < r; ++j)
        for (std::size_t i = 0; i < n; ++i) a(i, j) = samples[j][i];
    } else {
      a = x;
    }

    for (; layer < spec_.layers.size(); ++layer) {
      const LayerSpec& ls = spec_.layers[layer];
      LayerCache* lc = cache ? &cache->layers[layer] : nullptr;
      if (lc) lc->in_mat = a;
      switch (ls.kind) {
        case LayerKind::dense:
          a = dense_forward(a, slabs_[bindings_[layer].w].tensor,
                            slabs_[bindings_[layer].b].tensor);
          break;
        case LayerKind::relu:
          a = relu_forward(a);
          break;
        case LayerKind::batchnorm: {
          if (lc) lc->bn.resize(1);
          a = batchnorm_forward(a, slabs_[bindings_[layer].w].tensor,
                                slabs_[bindings_[layer].b].tensor, ls.eps, ls.pure_centering,
                                lc ? &lc->bn[0] : nullptr);
          break;
        }
        default:
          throw shape_error("model: image layer after matrix section");
      }
    }
    return a;
  }

  // Accumulates parameter gradients into slab grad buffers; returns grad wrt
  // the flattened input batch.
  Tensor backward(const Tensor& grad_logits, const ForwardCache& cache) {
    Tensor g = grad_logits;
    std::size_t layer = spec_.layers.size();
    while (layer > image_section_len_) {
      --layer;
      const LayerSpec& ls = spec_.layers[layer];
      const LayerCache& lc = cache.layers[layer];
      switch (ls.kind) {
        case LayerKind::dense: {
          DenseGrads dg = dense_backward(g, lc.in_mat, slabs_[bindings_[layer].w].tensor);
          add_into(slabs_[bindings_[layer].w].grad, dg.grad_w);
          add_into(slabs_[bindings_[layer].b].grad, dg.grad_b);
          g = std::move(dg.grad_x);
          break;
        }
        case LayerKind::relu:
          g = relu_backward(g, lc.in_mat);
          break;
        case LayerKind::batchnorm: {
          BatchNormGrads bg =
              batchnorm_backward(g, slabs_[bindings_[layer].w].tensor, lc.bn[0], ls.pure_centering);
          add_into(slabs_[bindings_[layer].w].grad, bg.grad_scale);
          add_into(slabs_[bindings_[layer].b].grad, bg.grad_bias);
          g = std::move(bg.grad_x);
          break;
        }
        default:
          throw shape_error("model backward: unexpected layer");
      }
    }
    if (image_section_len_ == 0) return g;

    // unflatten columns into per-sample grads and walk the image section
    const std::size_t r = g.extent(1);
    std::vector<Tensor> gs(r);
    for (std::size_t j = 0; j < r; ++j) {
      Tensor t(image_out_shape_);
      for (std::size_t i = 0; i < t.size(); ++i) t[i] = g(i, j);
      gs[j] = std::move(t);
    }
    while (layer > 0) {
      --layer;
      const LayerSpec& ls = spec_.layers[layer];
      const LayerCache& lc = cache.layers[layer];
      for (std::size_t j = 0; j < r; ++j) {
        switch (ls.kind) {
          case LayerKind::conv2d: {
            ConvGrads cg = conv2d_backward(gs[j], lc.in_samples[j],
                                           slabs_[bindings_[layer].w].tensor, ls.s1, ls.s2);
            add_into(slabs_[bindings_[layer].w].grad, cg.grad_filters);
            gs[j] = std::move(cg.grad_x);
            break;
          }
          case LayerKind::relu:
            gs[j] = relu_backward(gs[j], lc.in_samples[j]);
            break;
          case LayerKind::maxpool2x2:
            gs[j] = maxpool2x2_backward(gs[j], lc.in_samples[j], lc.pool_idx[j]);
            break;
          default:
            throw shape_error("model backward: unexpected image layer");
        }
      }
    }
    Tensor gx({input_size(), r});
    for (std::size_t j = 0; j < r; ++j)
      for (std::size_t i = 0; i < gx.extent(0); ++i) gx(i, j) = gs[j][i];
    return gx;
  }

  bool has_batchnorm() const {
    for (const auto& l : spec_.layers)
      if (l.kind == LayerKind::batchnorm) return true;
    return false;
  }

 private:
  struct Binding {
    int w = -1;
    int b = -1;
  };

  static void add_into(Tensor& dst, const Tensor& src) {
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
  }

  void init(const ModelSpec& spec, Rng* rng) {
    if (spec.input_shape.size() != 1 && spec.input_shape.size() != 3)
      throw config_error("model input shape must be [n] or [h, w, c]");
    if (spec.layers.empty()) throw config_error("model needs at least one layer");
    spec_ = spec;
    bindings_.assign(spec_.layers.size(), {});

    std::vector<std::size_t> shape = spec_.input_shape;  // running activation shape
    bool image_section = shape.size() == 3;
    image_section_len_ = 0;

    for (std::size_t li = 0; li < spec_.layers.size(); ++li) {
      LayerSpec& ls = spec_.layers[li];
      const std::string idx = std::to_string(li);
      switch (ls.kind) {
        case LayerKind::conv2d: {
          if (!image_section)
            throw config_error("conv2d layer " + idx + " requires image activations");
          if (ls.kh == 0 || ls.kw == 0 || ls.channels_out == 0)
            throw config_error("conv2d layer " + idx + ": kernel and channels must be set");
          if (ls.s1 < 1 || ls.s2 < 1) throw config_error("conv2d layer " + idx + ": strides >= 1");
          ls.channels_in = shape[2];
          if (ls.kh > shape[0] || ls.kw > shape[1] ||
              (shape[0] - ls.kh) % static_cast<std::size_t>(ls.s1) != 0 ||
              (shape[1] - ls.kw) % static_cast<std::size_t>(ls.s2) != 0)
            throw config_error("conv2d layer " + idx + ": extents do not divide");
          const std::size_t ho = (shape[0] - ls.kh) / static_cast<std::size_t>(ls.s1) + 1;
          const std::size_t wo = (shape[1] - ls.kw) / static_cast<std::size_t>(ls.s2) + 1;
          WeightSlab f{"conv" + idx + ".filters", SlabKind::conv_filter,
                       Tensor({ls.kh, ls.kw, ls.channels_in, ls.channels_out}), Tensor()};
          if (rng)
            detail::kaiming_uniform_fill(f.tensor, ls.kh * ls.kw * ls.channels_in, *rng);
          f.grad = Tensor::zeros_like(f.tensor);
          bindings_[li].w = static_cast<int>(slabs_.size());
          slabs_.push_back(std::move(f));
          shape = {ho, wo, ls.channels_out};
          image_section_len_ = li + 1;
          break;
        }
        case LayerKind::maxpool2x2: {
          if (!image_section)
            throw config_error("maxpool2x2 layer " + idx + " requires image activations");
          if (shape[0] % 2 != 0 || shape[1] % 2 != 0)
            throw config_error("maxpool2x2 layer " + idx + ": extents must be even");
          shape = {shape[0] / 2, shape[1] / 2, shape[2]};
          image_section_len_ = li + 1;
          break;
        }
        case LayerKind::relu:
          if (image_section) image_section_len_ = li + 1;
          break;
        case LayerKind::dense: {
          if (ls.out == 0) throw config_error("dense layer " + idx + ": out must be set");
          if (image_section) {
            image_out_shape_ = shape;
            flat_after_images_ = shape_numel(shape);
            shape = {flat_after_images_};
            image_section = false;
          }
          ls.in = shape[0];
          WeightSlab w{"dense" + idx + ".weight", SlabKind::dense_weight,
                       Tensor({ls.out, ls.in}), Tensor()};
          if (rng) detail::kaiming_uniform_fill(w.tensor, ls.in, *rng);
          w.grad = Tensor::zeros_like(w.tensor);
          WeightSlab b{"dense" + idx + ".bias", SlabKind::dense_bias, Tensor({ls.out}), Tensor()};
          b.grad = Tensor::zeros_like(b.tensor);
          bindings_[li].w = static_cast<int>(slabs_.size());
          slabs_.push_back(std::move(w));
          bindings_[li].b = static_cast<int>(slabs_.size());
          slabs_.push_back(std::move(b));
          shape = {ls.out};
          break;
        }
        case LayerKind::batchnorm: {
          if (image_section) {
            image_out_shape_ = shape;
            flat_after_images_ = shape_numel(shape);
            shape = {flat_after_images_};
            image_section = false;
          }
          ls.features = shape[0];
          WeightSlab s{"bn" + idx + ".scale", SlabKind::bn_scale, Tensor({ls.features}), Tensor()};
          s.tensor.fill(1.0f);
          s.grad = Tensor::zeros_like(s.tensor);
          WeightSlab b{"bn" + idx + ".bias", SlabKind::bn_bias, Tensor({ls.features}), Tensor()};
          b.grad = Tensor::zeros_like(b.tensor);
          bindings_[li].w = static_cast<int>(slabs_.size());
          slabs_.push_back(std::move(s));
          bindings_[li].b = static_cast<int>(slabs_.size());
          slabs_.push_back(std::move(b));
          break;
        }
      }
    }
    // a relu-only image tail never reaches a flatten point
    if (image_section) {
      image_out_shape_ = shape;
      flat_after_images_ = shape_numel(shape);
      shape = {flat_after_images_};
    }
    output_size_ = shape[0];
    if (image_section_len_ == spec_.layers.size() && spec_.input_shape.size() == 3)
      output_size_ = flat_after_images_;
  }

  ModelSpec spec_;
  std::vector<WeightSlab> slabs_;
  std::vector<Binding> bindings_;
  std::size_t image_section_len_ = 0;
  std::size_t flat_after_images_ = 0;
  std::vector<std::size_t> image_out_shape_;
  std::size_t output_size_ = 0;
};

}  // namespace periq
