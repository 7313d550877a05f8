#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "periq/tensor.hpp"

// Dense-tensor forward/backward kernels. Conventions used throughout:
//   - batches are column matrices: X is [features n x batch r]
//   - images are single-sample [h x w x c]; the model loops over the batch
//   - all inner products accumulate in double, results are stored as f32
namespace periq {

// Y[i,j] = sum_k W[i,k] * x[k,j] + b[i]
inline Tensor dense_forward(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_rank(x, 2, "dense_forward x");
  require_rank(w, 2, "dense_forward w");
  require_rank(b, 1, "dense_forward b");
  const std::size_t m = w.extent(0), n = w.extent(1), r = x.extent(1);
  if (x.extent(0) != n || b.extent(0) != m)
    throw shape_error("dense_forward: W" + shape_to_string(w.shape()) + " x" +
                      shape_to_string(x.shape()) + " b" + shape_to_string(b.shape()));
  if (r < 1) throw shape_error("dense_forward: batch must be >= 1");

  Tensor y({m, r});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < r; ++j) {
      double acc = static_cast<double>(b[i]);
      for (std::size_t k = 0; k < n; ++k)
        acc += static_cast<double>(w(i, k)) * static_cast<double>(x(k, j));
      y(i, j) = static_cast<float>(acc);
    }
  }
  return y;
}

struct DenseGrads {
  Tensor grad_x;  // [n x r]
  Tensor grad_w;  // [m x n]
  Tensor grad_b;  // [m]
};

// grad_w = grad_out * x^T; grad_x = W^T * grad_out; grad_b = row sums of grad_out
inline DenseGrads dense_backward(const Tensor& grad_out, const Tensor& x, const Tensor& w) {
  require_rank(grad_out, 2, "dense_backward grad_out");
  const std::size_t m = w.extent(0), n = w.extent(1), r = x.extent(1);
  if (grad_out.extent(0) != m || grad_out.extent(1) != r || x.extent(0) != n)
    throw shape_error("dense_backward: mismatched shapes");

  DenseGrads g{Tensor({n, r}), Tensor({m, n}), Tensor({m})};
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (std::size_t j = 0; j < r; ++j)
        acc += static_cast<double>(grad_out(i, j)) * static_cast<double>(x(k, j));
      g.grad_w(i, k) = static_cast<float>(acc);
    }
    double acc_b = 0.0;
    for (std::size_t j = 0; j < r; ++j) acc_b += static_cast<double>(grad_out(i, j));
    g.grad_b[i] = static_cast<float>(acc_b);
  }
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t j = 0; j < r; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < m; ++i)
        acc += static_cast<double>(w(i, k)) * static_cast<double>(grad_out(i, j));
      g.grad_x(k, j) = static_cast<float>(acc);
    }
  }
  return g;
}

inline void check_conv_shapes(const Tensor& x, const Tensor& filters, int s1, int s2,
                              std::size_t& h_out, std::size_t& w_out) {
  require_rank(x, 3, "conv2d x");
  require_rank(filters, 4, "conv2d filters");
  if (s1 < 1 || s2 < 1) throw shape_error("conv2d: strides must be >= 1");
  const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
  const std::size_t m = filters.extent(0), n = filters.extent(1);
  if (filters.extent(2) != c)
    throw shape_error("conv2d: filter channels " + std::to_string(filters.extent(2)) +
                      " != input channels " + std::to_string(c));
  if (m > h || n > w) throw shape_error("conv2d: filter larger than input");
  if ((h - m) % static_cast<std::size_t>(s1) != 0 || (w - n) % static_cast<std::size_t>(s2) != 0)
    throw shape_error("conv2d: (h-m), (w-n) must be divisible by the strides");
  h_out = (h - m) / static_cast<std::size_t>(s1) + 1;
  w_out = (w - n) / static_cast<std::size_t>(s2) + 1;
}

// Valid cross-correlation (no kernel flip, no padding).
// x: [h x w x c], filters: [m x n x c x c'], output: [h' x w' x c'].
// Per output element the sum runs channel-major, then filter row, then filter
// column, accumulating in double; tests rely on this exact order.
inline Tensor conv2d_forward(const Tensor& x, const Tensor& filters, int s1 = 1, int s2 = 1) {
  std::size_t h_out = 0, w_out = 0;
  check_conv_shapes(x, filters, s1, s2, h_out, w_out);
  const std::size_t c = x.extent(2);
  const std::size_t m = filters.extent(0), n = filters.extent(1), c_out = filters.extent(3);

  Tensor y({h_out, w_out, c_out});
  for (std::size_t oc = 0; oc < c_out; ++oc) {
    for (std::size_t oy = 0; oy < h_out; ++oy) {
      for (std::size_t ox = 0; ox < w_out; ++ox) {
        double acc = 0.0;
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j)
              acc += static_cast<double>(
                         x(oy * static_cast<std::size_t>(s1) + i,
                           ox * static_cast<std::size_t>(s2) + j, ch)) *
                     static_cast<double>(filters(i, j, ch, oc));
        y(oy, ox, oc) = static_cast<float>(acc);
      }
    }
  }
  return y;
}

struct ConvGrads {
  Tensor grad_x;        // [h x w x c]
  Tensor grad_filters;  // [m x n x c x c']
};

inline ConvGrads conv2d_backward(const Tensor& grad_out, const Tensor& x, const Tensor& filters,
                                 int s1 = 1, int s2 = 1) {
  std::size_t h_out = 0, w_out = 0;
  check_conv_shapes(x, filters, s1, s2, h_out, w_out);
  const std::size_t c = x.extent(2);
  const std::size_t m = filters.extent(0), n = filters.extent(1), c_out = filters.extent(3);
  if (grad_out.shape() != std::vector<std::size_t>{h_out, w_out, c_out})
    throw shape_error("conv2d_backward: grad_out shape mismatch");

  ConvGrads g{Tensor::zeros_like(x), Tensor::zeros_like(filters)};
  for (std::size_t oc = 0; oc < c_out; ++oc) {
    for (std::size_t oy = 0; oy < h_out; ++oy) {
      for (std::size_t ox = 0; ox < w_out; ++ox) {
        const float go = grad_out(oy, ox, oc);
        if (go == 0.0f) continue;
        for (std::size_t ch = 0; ch < c; ++ch) {
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
              const std::size_t iy = oy * static_cast<std::size_t>(s1) + i;
              const std::size_t ix = ox * static_cast<std::size_t>(s2) + j;
              g.grad_x(iy, ix, ch) += go * filters(i, j, ch, oc);
              g.grad_filters(i, j, ch, oc) += go * x(iy, ix, ch);
            }
          }
        }
      }
    }
  }
  return g;
}

struct BatchNormCache {
  Tensor centered;              // y = (x - mean)/sqrt(r), per feature row
  Tensor normalized;            // z = y / sqrt(var + eps); equals y on the pure path
  std::vector<double> inv_std;  // 1/sqrt(var + eps) per feature; 1.0 on the pure path
};

// Centers each feature over the batch and scales by 1/sqrt(r), then (unless
// pure_centering) divides by the per-feature batch std (with eps) before the
// diagonal affine transform. The pure path keeps only the centering stage.
inline Tensor batchnorm_forward(const Tensor& x, const Tensor& scale, const Tensor& bias,
                                float eps = 1e-5f, bool pure_centering = false,
                                BatchNormCache* cache = nullptr) {
  require_rank(x, 2, "batchnorm x");
  const std::size_t n = x.extent(0), r = x.extent(1);
  if (scale.shape() != std::vector<std::size_t>{n} || bias.shape() != std::vector<std::size_t>{n})
    throw shape_error("batchnorm: scale/bias must have one entry per feature");
  if (r < 2) throw shape_error("batchnorm: batch must be >= 2 in training mode");

  Tensor centered({n, r});
  Tensor normalized({n, r});
  std::vector<double> inv_std(n, 1.0);
  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(r));
  Tensor out({n, r});
  for (std::size_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (std::size_t j = 0; j < r; ++j) mean += static_cast<double>(x(i, j));
    mean /= static_cast<double>(r);
    double var = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      const double y = (static_cast<double>(x(i, j)) - mean) * inv_sqrt_r;
      centered(i, j) = static_cast<float>(y);
      var += y * y;
    }
    var /= static_cast<double>(r);
    const double is = pure_centering ? 1.0 : 1.0 / std::sqrt(var + static_cast<double>(eps));
    inv_std[i] = is;
    for (std::size_t j = 0; j < r; ++j) {
      const double z = static_cast<double>(centered(i, j)) * is;
      normalized(i, j) = static_cast<float>(z);
      out(i, j) = static_cast<float>(static_cast<double>(scale[i]) * z +
                                     static_cast<double>(bias[i]));
    }
  }
  if (cache) {
    cache->centered = std::move(centered);
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
  }
  return out;
}

struct BatchNormGrads {
  Tensor grad_x;
  Tensor grad_scale;
  Tensor grad_bias;
};

inline BatchNormGrads batchnorm_backward(const Tensor& grad_out, const Tensor& scale,
                                         const BatchNormCache& cache, bool pure_centering = false) {
  const std::size_t n = grad_out.extent(0), r = grad_out.extent(1);
  BatchNormGrads g{Tensor({n, r}), Tensor({n}), Tensor({n})};
  const double inv_sqrt_r = 1.0 / std::sqrt(static_cast<double>(r));
  for (std::size_t i = 0; i < n; ++i) {
    double gs = 0.0, gb = 0.0;
    for (std::size_t j = 0; j < r; ++j) {
      gs += static_cast<double>(grad_out(i, j)) * static_cast<double>(cache.normalized(i, j));
      gb += static_cast<double>(grad_out(i, j));
    }
    g.grad_scale[i] = static_cast<float>(gs);
    g.grad_bias[i] = static_cast<float>(gb);

    // dz = grad_out * scale; dy via the variance term unless pure
    const double is = cache.inv_std[i];
    std::vector<double> dy(r);
    if (pure_centering) {
      for (std::size_t j = 0; j < r; ++j)
        dy[j] = static_cast<double>(grad_out(i, j)) * static_cast<double>(scale[i]);
    } else {
      double dz_dot_y = 0.0;
      for (std::size_t j = 0; j < r; ++j)
        dz_dot_y += static_cast<double>(grad_out(i, j)) * static_cast<double>(scale[i]) *
                    static_cast<double>(cache.centered(i, j));
      const double k = is * is * is * dz_dot_y / static_cast<double>(r);
      for (std::size_t j = 0; j < r; ++j)
        dy[j] = static_cast<double>(grad_out(i, j)) * static_cast<double>(scale[i]) * is -
                static_cast<double>(cache.centered(i, j)) * k;
    }
    // y = (x - mean)/sqrt(r): dx_j = (dy_j - mean(dy)) / sqrt(r)
    double dy_mean = 0.0;
    for (std::size_t j = 0; j < r; ++j) dy_mean += dy[j];
    dy_mean /= static_cast<double>(r);
    for (std::size_t j = 0; j < r; ++j)
      g.grad_x(i, j) = static_cast<float>((dy[j] - dy_mean) * inv_sqrt_r);
  }
  return g;
}

inline Tensor relu_forward(const Tensor& x) {
  Tensor y = x;
  for (float& v : y.values()) v = v > 0.0f ? v : 0.0f;
  return y;
}

inline Tensor relu_backward(const Tensor& grad_out, const Tensor& x) {
  if (!grad_out.same_shape(x)) throw shape_error("relu_backward: shape mismatch");
  Tensor g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (x[i] <= 0.0f) g[i] = 0.0f;
  return g;
}

// Non-overlapping 2x2 max pool over [h x w x c]; h and w must be even.
// Ties pick the first element in row-major scan order.
inline Tensor maxpool2x2_forward(const Tensor& x, std::vector<std::size_t>* argmax = nullptr) {
  require_rank(x, 3, "maxpool2x2 x");
  const std::size_t h = x.extent(0), w = x.extent(1), c = x.extent(2);
  if (h % 2 != 0 || w % 2 != 0) throw shape_error("maxpool2x2: h and w must be even");
  Tensor y({h / 2, w / 2, c});
  if (argmax) argmax->assign(y.size(), 0);
  for (std::size_t oy = 0; oy < h / 2; ++oy) {
    for (std::size_t ox = 0; ox < w / 2; ++ox) {
      for (std::size_t ch = 0; ch < c; ++ch) {
        float best = x(2 * oy, 2 * ox, ch);
        std::size_t best_idx = ((2 * oy) * w + 2 * ox) * c + ch;
        for (std::size_t di = 0; di < 2; ++di) {
          for (std::size_t dj = 0; dj < 2; ++dj) {
            const float v = x(2 * oy + di, 2 * ox + dj, ch);
            if (v > best) {
              best = v;
              best_idx = ((2 * oy + di) * w + (2 * ox + dj)) * c + ch;
            }
          }
        }
        y(oy, ox, ch) = best;
        if (argmax) (*argmax)[(oy * (w / 2) + ox) * c + ch] = best_idx;
      }
    }
  }
  return y;
}

inline Tensor maxpool2x2_backward(const Tensor& grad_out, const Tensor& x,
                                  const std::vector<std::size_t>& argmax) {
  Tensor g = Tensor::zeros_like(x);
  for (std::size_t i = 0; i < grad_out.size(); ++i) g[argmax[i]] += grad_out[i];
  return g;
}

struct SoftmaxXent {
  double loss = 0.0;
  Tensor grad_logits;
};

// Mean cross-entropy over the batch; grad = (softmax - onehot)/r.
inline SoftmaxXent softmax_xent_loss(const Tensor& logits, std::span<const int> labels) {
  require_rank(logits, 2, "softmax_xent logits");
  const std::size_t k = logits.extent(0), r = logits.extent(1);
  if (labels.size() != r) throw shape_error("softmax_xent: one label per batch column required");

  SoftmaxXent out;
  out.grad_logits = Tensor({k, r});
  double total = 0.0;
  for (std::size_t j = 0; j < r; ++j) {
    const int label = labels[j];
    if (label < 0 || static_cast<std::size_t>(label) >= k)
      throw std::out_of_range("softmax_xent: label " + std::to_string(label) +
                              " out of range for " + std::to_string(k) + " classes");
    double mx = logits(0, j);
    for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(logits(i, j)));
    double denom = 0.0;
    for (std::size_t i = 0; i < k; ++i) denom += std::exp(static_cast<double>(logits(i, j)) - mx);
    const double log_denom = std::log(denom);
    total += -(static_cast<double>(logits(static_cast<std::size_t>(label), j)) - mx - log_denom);
    for (std::size_t i = 0; i < k; ++i) {
      const double p = std::exp(static_cast<double>(logits(i, j)) - mx) / denom;
      const double onehot = (static_cast<std::size_t>(label) == i) ? 1.0 : 0.0;
      out.grad_logits(i, j) = static_cast<float>((p - onehot) / static_cast<double>(r));
    }
  }
  out.loss = total / static_cast<double>(r);
  return out;
}

}  // namespace periq
