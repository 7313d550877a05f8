#pragma once

#include <cstdio>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "periq/evaluate.hpp"
#include "periq/quantizer.hpp"

namespace periq {

// Which periodic lattice distances are measured against: sine/hat minima sit
// at k*c/f, cosine minima at (2k+1)*c/(2f).
enum class LatticeKind { integer, half_offset };

// Mean |w - Q(w)| normalized by the cell width c/f, in [0, 0.5], with Q the
// lattice quantizer's dequantized value. A quantized slab measures exactly 0
// because re-quantizing is a bitwise fixed point. The half-offset variant
// measures against the cosine minima (2k+1)*c/(2f) instead.
inline double slab_lattice_distance(const WeightSlab& slab, int frequency,
                                    LatticeKind lattice = LatticeKind::integer) {
  if (frequency < 1) throw config_error("lattice_distance: frequency must be >= 1");
  if (slab.tensor.empty()) return 0.0;
  const double c = slab_scale(slab);
  const double cell = c / static_cast<double>(frequency);
  double sum = 0.0;
  if (lattice == LatticeKind::integer) {
    const Tensor q = dequantize(quantize_slab_lattice(slab, frequency));
    for (std::size_t i = 0; i < q.size(); ++i)
      sum += std::abs(static_cast<double>(slab.tensor[i]) - static_cast<double>(q[i])) / cell;
  } else {
    for (float v : slab.tensor.values()) {
      const double u = static_cast<double>(v) / cell;
      sum += std::abs(u - (round_half_even(u - 0.5) + 0.5));
    }
  }
  return sum / static_cast<double>(slab.tensor.size());
}

// Mean over eligible (conv-filter / dense-weight) slabs.
inline double lattice_distance(const Model& model, int frequency,
                               LatticeKind lattice = LatticeKind::integer) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& slab : model.slabs()) {
    if (!penalized_slab(slab.kind)) continue;
    sum += slab_lattice_distance(slab, frequency, lattice);
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

struct HistogramSpec {
  int bins = 32;  // >= 2, uniform over [-c, c]
};

// Bin counts over [-c, c]; counts sum to the slab size.
inline std::vector<std::pair<double, std::size_t>> weight_histogram(const WeightSlab& slab,
                                                                    const HistogramSpec& spec) {
  if (spec.bins < 2) throw config_error("weight_histogram: bins must be >= 2");
  const double c = slab_scale(slab);
  const double width = 2.0 * c / spec.bins;
  std::vector<std::pair<double, std::size_t>> hist(static_cast<std::size_t>(spec.bins));
  for (int b = 0; b < spec.bins; ++b)
    hist[static_cast<std::size_t>(b)] = {-c + (b + 0.5) * width, 0};
  for (float v : slab.tensor.values()) {
    int b = static_cast<int>(std::floor((static_cast<double>(v) + c) / width));
    b = std::clamp(b, 0, spec.bins - 1);
    ++hist[static_cast<std::size_t>(b)].second;
  }
  return hist;
}

inline std::string histogram_csv(const WeightSlab& slab, const HistogramSpec& spec) {
  std::string csv = "bin_center,count\n";
  char buf[64];
  for (const auto& [center, count] : weight_histogram(slab, spec)) {
    std::snprintf(buf, sizeof(buf), "%.10g,%zu\n", center, count);
    csv += buf;
  }
  return csv;
}

struct QuantReport {
  double baseline_error = 0.0;   // percent, unquantized model
  double quantized_error = 0.0;  // percent, after lattice quantization
  double drop = 0.0;             // quantized_error - baseline_error
  double baseline_loss = 0.0;
  double quantized_loss = 0.0;
  int t = 0;
  int frequency = 0;
  std::map<std::string, double> per_slab_distance;  // sine/hat lattice
  std::map<std::string, double> per_slab_cosine_distance;  // filled when kind == cosine
};

// Evaluates the model before and after lattice quantization at the frequency
// implied by (t, kind). Quantization runs on a copy; the input model is not
// mutated.
inline QuantReport quantization_report(const Model& model, const Dataset& test_set, int t,
                                       RegKind kind) {
  QuantReport report;
  report.t = t;
  report.frequency = bits_to_frequency(t, frequency_kind_for(kind));

  const EvalResult base = evaluate(model, test_set);
  report.baseline_error = base.top1_error;
  report.baseline_loss = base.loss;

  for (const auto& slab : model.slabs()) {
    if (!penalized_slab(slab.kind)) continue;
    report.per_slab_distance[slab.name] =
        slab_lattice_distance(slab, report.frequency, LatticeKind::integer);
    if (kind == RegKind::cosine)
      report.per_slab_cosine_distance[slab.name] =
          slab_lattice_distance(slab, report.frequency, LatticeKind::half_offset);
  }

  Model quantized = model;
  apply_lattice_quantization(quantized, report.frequency);
  const EvalResult quant = evaluate(quantized, test_set);
  report.quantized_error = quant.top1_error;
  report.quantized_loss = quant.loss;
  report.drop = report.quantized_error - report.baseline_error;
  return report;
}

}  // namespace periq
