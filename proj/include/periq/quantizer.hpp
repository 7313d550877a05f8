#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "periq/model.hpp"
#include "periq/regularizer.hpp"

// Threshold and uniform quantizers plus the bit-width <-> frequency bridge.
// Symmetric quantization uses scale gamma = c/(2^(t-1)-1) on [-c, c];
// asymmetric adds bias s = (a+b)/2 and uses delta = d/(2^t-2) with
// d = (b-a)/2. Lattice quantization is the symmetric form with gamma = c/f.
namespace periq {

enum class QuantKind { binary, ternary, symmetric, asymmetric, lattice };

struct QuantScheme {
  QuantKind kind = QuantKind::symmetric;
  int t = 8;          // bit-width
  double eps1 = 0.0;  // binary/ternary thresholds
  double eps2 = 0.0;
};

enum class FrequencyKind { sine_or_hat, cosine };

inline FrequencyKind frequency_kind_for(RegKind kind) {
  return kind == RegKind::cosine ? FrequencyKind::cosine : FrequencyKind::sine_or_hat;
}

inline int bits_to_frequency(int t, FrequencyKind kind) {
  if (kind == FrequencyKind::sine_or_hat) {
    if (t < 2) throw std::invalid_argument("bits_to_frequency: sine/hat needs t >= 2");
    return (1 << (t - 1)) - 1;
  }
  if (t < 1) throw std::invalid_argument("bits_to_frequency: cosine needs t >= 1");
  return 1 << (t - 1);
}

// ceil(log2(n)) for n >= 1, computed in integer arithmetic
inline int ceil_log2(std::uint64_t n) {
  return n <= 1 ? 0 : std::bit_width(n - 1);
}

inline int frequency_to_bits(int f, FrequencyKind kind) {
  if (f < 1) throw std::invalid_argument("frequency_to_bits: f must be >= 1");
  if (kind == FrequencyKind::sine_or_hat)
    return ceil_log2(static_cast<std::uint64_t>(f) + 1) + 1;
  return ceil_log2(static_cast<std::uint64_t>(f)) + 1;
}

// Round half to even, independent of the ambient fenv rounding mode.
inline double round_half_even(double x) {
  const double fl = std::floor(x);
  const double frac = x - fl;
  if (frac < 0.5) return fl;
  if (frac > 0.5) return fl + 1.0;
  return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

inline double quantize_binary(double w, double eps) { return w < eps ? -1.0 : 1.0; }

inline double quantize_ternary(double w, double eps1, double eps2) {
  if (eps1 > eps2) throw std::invalid_argument("quantize_ternary: eps1 must be <= eps2");
  if (w < eps1) return -1.0;
  if (w > eps2) return 1.0;
  return 0.0;
}

// Integer codes with the affine map back to weights: value = code*scale + bias.
struct QuantizedSlab {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<std::int32_t> codes;
  double scale = 1.0;
  double bias = 0.0;
  int t = 0;          // bit-width
  int frequency = 0;  // lattice frequency; 0 when not derived from one
};

inline Tensor dequantize(const QuantizedSlab& q) {
  Tensor t(q.shape);
  for (std::size_t i = 0; i < q.codes.size(); ++i)
    t[i] = static_cast<float>(static_cast<double>(q.codes[i]) * q.scale + q.bias);
  return t;
}

namespace detail {

inline QuantizedSlab quantize_centered(const WeightSlab& slab, double scale, int t,
                                       int frequency, std::int32_t clamp_code) {
  QuantizedSlab q;
  q.name = slab.name;
  q.shape = slab.tensor.shape();
  q.scale = scale;
  q.bias = 0.0;
  q.t = t;
  q.frequency = frequency;
  q.codes.resize(slab.tensor.size());
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    double code = round_half_even(static_cast<double>(slab.tensor[i]) / scale);
    if (code > clamp_code) code = clamp_code;
    if (code < -clamp_code) code = -clamp_code;
    q.codes[i] = static_cast<std::int32_t>(code);
  }
  return q;
}

}  // namespace detail

inline QuantizedSlab quantize_symmetric(const WeightSlab& slab, int t) {
  if (t < 2) throw std::invalid_argument("quantize_symmetric: t must be >= 2");
  if (slab.tensor.empty()) throw std::invalid_argument("quantize_symmetric: empty slab");
  const std::int32_t levels = (1 << (t - 1)) - 1;
  double c = 0.0;
  for (float v : slab.tensor.values()) c = std::max(c, std::abs(static_cast<double>(v)));
  if (c == 0.0) {
    QuantizedSlab q = detail::quantize_centered(slab, 1.0, t, 0, levels);
    return q;  // all codes 0, scale substituted with 1
  }
  const double gamma = c / static_cast<double>(levels);
  return detail::quantize_centered(slab, gamma, t, 0, levels);
}

inline QuantizedSlab quantize_asymmetric(const WeightSlab& slab, int t) {
  if (t < 2) throw std::invalid_argument("quantize_asymmetric: t must be >= 2");
  if (slab.tensor.empty()) throw std::invalid_argument("quantize_asymmetric: empty slab");
  double a = slab.tensor[0], b = slab.tensor[0];
  for (float v : slab.tensor.values()) {
    a = std::min(a, static_cast<double>(v));
    b = std::max(b, static_cast<double>(v));
  }
  QuantizedSlab q;
  q.name = slab.name;
  q.shape = slab.tensor.shape();
  q.t = t;
  q.frequency = 0;
  if (a == b) {
    // degenerate range: single-level slab
    q.scale = 1.0;
    q.bias = a;
    q.codes.assign(slab.tensor.size(), 0);
    return q;
  }
  const double s = (a + b) / 2.0;
  const double d = (b - a) / 2.0;
  const double delta = d / static_cast<double>((1 << t) - 2);
  q.scale = delta;
  q.bias = s;
  q.codes.resize(slab.tensor.size());
  const std::int32_t clamp_code = (1 << t) - 2;
  for (std::size_t i = 0; i < q.codes.size(); ++i) {
    double code = round_half_even((static_cast<double>(slab.tensor[i]) - s) / delta);
    if (code > clamp_code) code = clamp_code;
    if (code < -clamp_code) code = -clamp_code;
    q.codes[i] = static_cast<std::int32_t>(code);
  }
  return q;
}

// The training-side quantizer: codes = round(w*f/c), scale = c/f. Equals the
// symmetric quantizer with gamma = c/f, so its fixed points are exactly the
// sine/hat regularizer zero set at the same frequency.
inline QuantizedSlab quantize_slab_lattice(const WeightSlab& slab, int frequency) {
  if (frequency < 1) throw std::invalid_argument("quantize_slab_lattice: frequency >= 1");
  if (slab.tensor.empty()) throw std::invalid_argument("quantize_slab_lattice: empty slab");
  const int t = frequency_to_bits(frequency, FrequencyKind::sine_or_hat);
  double c = 0.0;
  for (float v : slab.tensor.values()) c = std::max(c, std::abs(static_cast<double>(v)));
  if (c == 0.0) return detail::quantize_centered(slab, 1.0, t, frequency, frequency);
  return detail::quantize_centered(slab, c / static_cast<double>(frequency), t, frequency,
                                   frequency);
}

// Applies a scheme to one slab. Binary/ternary produce sign codes with unit
// scale; the other kinds dispatch to the uniform quantizers above.
inline QuantizedSlab quantize_slab(const WeightSlab& slab, const QuantScheme& scheme) {
  switch (scheme.kind) {
    case QuantKind::symmetric:
      return quantize_symmetric(slab, scheme.t);
    case QuantKind::asymmetric:
      return quantize_asymmetric(slab, scheme.t);
    case QuantKind::lattice:
      return quantize_slab_lattice(slab,
                                   bits_to_frequency(scheme.t, FrequencyKind::sine_or_hat));
    case QuantKind::binary:
    case QuantKind::ternary: {
      QuantizedSlab q;
      q.name = slab.name;
      q.shape = slab.tensor.shape();
      q.scale = 1.0;
      q.bias = 0.0;
      q.t = scheme.kind == QuantKind::binary ? 1 : 2;
      q.codes.resize(slab.tensor.size());
      for (std::size_t i = 0; i < q.codes.size(); ++i) {
        const double w = slab.tensor[i];
        q.codes[i] = static_cast<std::int32_t>(
            scheme.kind == QuantKind::binary
                ? quantize_binary(w, scheme.eps1)
                : quantize_ternary(w, scheme.eps1, scheme.eps2));
      }
      return q;
    }
  }
  throw std::invalid_argument("quantize_slab: unknown scheme kind");
}

inline std::map<std::string, QuantizedSlab> quantize_model_lattice(const Model& model,
                                                                   int frequency) {
  std::map<std::string, QuantizedSlab> out;
  for (const auto& slab : model.slabs()) {
    if (!penalized_slab(slab.kind)) continue;
    out[slab.name] = quantize_slab_lattice(slab, frequency);
  }
  return out;
}

// Replaces eligible weight slabs with their dequantized lattice values.
inline void apply_lattice_quantization(Model& model, int frequency) {
  for (auto& slab : model.slabs()) {
    if (!penalized_slab(slab.kind)) continue;
    slab.tensor = dequantize(quantize_slab_lattice(slab, frequency));
  }
}

}  // namespace periq
