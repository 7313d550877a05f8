#pragma once

#include <algorithm>
#include <span>

#include "periq/dataset.hpp"
#include "periq/model.hpp"

namespace periq {

struct EvalResult {
  double top1_error = 0.0;  // percent
  double loss = 0.0;        // mean cross-entropy
};

// Assembles dataset rows [first, last) into batch columns.
inline Tensor batch_columns(const Dataset& ds, std::span<const std::size_t> indices) {
  const std::size_t n = ds.feature_dim();
  Tensor x({n, indices.size()});
  for (std::size_t j = 0; j < indices.size(); ++j)
    for (std::size_t i = 0; i < n; ++i) x(i, j) = ds.features(indices[j], i);
  return x;
}

// Deterministic evaluation in dataset order. Per-sample losses are accumulated
// in dataset order, so the result does not depend on the batch partition for
// models without cross-batch coupling. Argmax ties resolve to the lowest
// class index.
inline EvalResult evaluate(const Model& model, const Dataset& ds, std::size_t batch_size = 256) {
  if (ds.size() == 0) throw config_error("evaluate: dataset is empty");
  batch_size = std::max<std::size_t>(1, std::min(batch_size, ds.size()));

  std::size_t correct = 0;
  double loss_sum = 0.0;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += batch_size) {
    const std::size_t end = std::min(ds.size(), start + batch_size);
    idx.resize(end - start);
    for (std::size_t j = 0; j < idx.size(); ++j) idx[j] = start + j;
    const Tensor logits = model.forward(batch_columns(ds, idx));
    const std::size_t k = logits.extent(0);
    for (std::size_t j = 0; j < idx.size(); ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < k; ++i)
        if (logits(i, j) > logits(best, j)) best = i;
      if (static_cast<int>(best) == ds.labels[idx[j]]) ++correct;

      double mx = logits(0, j);
      for (std::size_t i = 1; i < k; ++i) mx = std::max(mx, static_cast<double>(logits(i, j)));
      double denom = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        denom += std::exp(static_cast<double>(logits(i, j)) - mx);
      loss_sum -= static_cast<double>(logits(static_cast<std::size_t>(ds.labels[idx[j]]), j)) -
                  mx - std::log(denom);
    }
  }
  EvalResult r;
  r.top1_error =
      100.0 * (1.0 - static_cast<double>(correct) / static_cast<double>(ds.size()));
  r.loss = loss_sum / static_cast<double>(ds.size());
  return r;
}

}  // namespace periq
