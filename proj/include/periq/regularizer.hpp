#pragma once

#include <cmath>
#include <concepts>
#include <map>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "periq/model.hpp"

// Periodic penalties that pull weights onto the lattice {k*c/f}, where c is
// the slab's max absolute weight and f the configured frequency. Penalties and
// gradients are evaluated in f64; c is treated as a constant of the current
// step, so gradients do not flow through the max.
namespace periq {

enum class RegKind { sine, cosine, hat };

inline const char* to_string(RegKind k) {
  switch (k) {
    case RegKind::sine: return "sine";
    case RegKind::cosine: return "cosine";
    case RegKind::hat: return "hat";
  }
  return "?";
}

struct RegularizerConfig {
  RegKind kind = RegKind::sine;
  double amplitude = 0.0;  // >= 0
  int frequency = 1;       // >= 1
  bool normalize = false;  // scale each slab's penalty into [0, 1]
};

inline void validate(const RegularizerConfig& cfg) {
  if (cfg.frequency < 1) throw config_error("regularizer: frequency must be >= 1");
  if (!(cfg.amplitude >= 0.0)) throw config_error("regularizer: amplitude must be >= 0");
}

// Max absolute weight of the slab; an all-zero slab substitutes 1 so every
// weight already sits on the lattice and the penalty is 0.
template <std::floating_point T>
double slab_scale(std::span<const T> w) {
  double c = 0.0;
  for (T v : w) c = std::max(c, std::abs(static_cast<double>(v)));
  return c == 0.0 ? 1.0 : c;
}

inline double slab_scale(const WeightSlab& slab) {
  return slab_scale(std::span<const float>(slab.tensor.values()));
}

// mod(x, 1) = x - floor(x), in [0, 1)
inline double mod1(double x) { return x - std::floor(x); }

// One penalty term as a function of x = w/c.
inline double penalty_term(RegKind kind, double amplitude, int frequency, double x) {
  const double f = static_cast<double>(frequency);
  switch (kind) {
    case RegKind::sine: {
      const double s = std::sin(std::numbers::pi * f * x);
      return amplitude * s * s;
    }
    case RegKind::cosine: {
      const double s = std::cos(std::numbers::pi * f * x);
      return amplitude * s * s;
    }
    case RegKind::hat:
      return amplitude * std::abs(mod1(f * (x - 0.5)) * 2.0 - 1.0);
  }
  return 0.0;
}

// d(term)/dw at weight w with slab scale c held constant.
inline double penalty_term_grad(RegKind kind, double amplitude, int frequency, double c,
                                double w) {
  const double f = static_cast<double>(frequency);
  const double pi = std::numbers::pi;
  switch (kind) {
    case RegKind::sine:
      return amplitude * (pi * f / c) * std::sin(2.0 * pi * f * w / c);
    case RegKind::cosine:
      return -amplitude * (pi * f / c) * std::sin(2.0 * pi * f * w / c);
    case RegKind::hat: {
      const double inner = mod1(f * (w / c - 0.5)) * 2.0 - 1.0;
      // subgradient 0 at the kinks (minima at inner == 0, maxima at inner == -1)
      if (inner == 0.0 || inner == -1.0) return 0.0;
      return amplitude * (2.0 * f / c) * (inner > 0.0 ? 1.0 : -1.0);
    }
  }
  return 0.0;
}

// Slab penalty, summed in sequential index order.
template <std::floating_point T>
double penalty_sum(const RegularizerConfig& cfg, std::span<const T> w, double c) {
  double total = 0.0;
  for (T v : w) total += penalty_term(cfg.kind, cfg.amplitude, cfg.frequency,
                                      static_cast<double>(v) / c);
  return total;
}

template <std::floating_point T>
std::vector<double> penalty_grad(const RegularizerConfig& cfg, std::span<const T> w, double c) {
  std::vector<double> g(w.size());
  for (std::size_t i = 0; i < w.size(); ++i)
    g[i] = penalty_term_grad(cfg.kind, cfg.amplitude, cfg.frequency, c,
                             static_cast<double>(w[i]));
  return g;
}

inline double slab_penalty(const WeightSlab& slab, const RegularizerConfig& cfg) {
  validate(cfg);
  const double c = slab_scale(slab);
  return penalty_sum(cfg, std::span<const float>(slab.tensor.values()), c);
}

inline Tensor slab_penalty_grad(const WeightSlab& slab, const RegularizerConfig& cfg) {
  validate(cfg);
  const double c = slab_scale(slab);
  Tensor g = Tensor::zeros_like(slab.tensor);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = static_cast<float>(penalty_term_grad(cfg.kind, cfg.amplitude, cfg.frequency, c,
                                                static_cast<double>(slab.tensor[i])));
  return g;
}

struct NormalizationConstant {
  double value = 1.0;
  bool degenerate = false;  // amplitude was 0; value substituted with 1
};

// Each term peaks at amplitude, so amplitude*num_weights bounds the slab
// penalty and 1/(amplitude*num_weights) maps it into [0, 1].
inline NormalizationConstant normalization_constant(const RegularizerConfig& cfg,
                                                    std::size_t num_weights) {
  if (num_weights < 1) throw config_error("normalization_constant: num_weights must be >= 1");
  if (cfg.amplitude == 0.0) return {1.0, true};
  return {1.0 / (cfg.amplitude * static_cast<double>(num_weights)), false};
}

// Conv filters and dense weights carry the penalty; biases and batchnorm
// parameters do not.
inline bool penalized_slab(SlabKind kind) {
  return kind == SlabKind::conv_filter || kind == SlabKind::dense_weight;
}

struct PenaltyReport {
  struct SlabEntry {
    double penalty = 0.0;
    double scale_c = 1.0;
  };
  double total = 0.0;
  std::map<std::string, SlabEntry> per_slab;
  bool empty() const { return per_slab.empty(); }
};

inline PenaltyReport model_penalty(const Model& model, const RegularizerConfig& cfg) {
  validate(cfg);
  PenaltyReport report;
  for (const auto& slab : model.slabs()) {
    if (!penalized_slab(slab.kind)) continue;
    const double c = slab_scale(slab);
    double p = penalty_sum(cfg, std::span<const float>(slab.tensor.values()), c);
    if (cfg.normalize) p *= normalization_constant(cfg, slab.tensor.size()).value;
    report.per_slab[slab.name] = {p, c};
    report.total += p;
  }
  return report;
}

// Adds the penalty gradient (with the same normalization as model_penalty)
// into the grad buffers of eligible slabs.
inline void accumulate_penalty_gradients(Model& model, const RegularizerConfig& cfg) {
  validate(cfg);
  if (cfg.amplitude == 0.0) return;
  for (auto& slab : model.slabs()) {
    if (!penalized_slab(slab.kind)) continue;
    const double c = slab_scale(slab);
    const double norm =
        cfg.normalize ? normalization_constant(cfg, slab.tensor.size()).value : 1.0;
    for (std::size_t i = 0; i < slab.tensor.size(); ++i)
      slab.grad[i] += static_cast<float>(
          norm * penalty_term_grad(cfg.kind, cfg.amplitude, cfg.frequency, c,
                                   static_cast<double>(slab.tensor[i])));
  }
}

}  // namespace periq
