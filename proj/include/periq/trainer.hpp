#pragma once

#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "periq/dataset.hpp"
#include "periq/evaluate.hpp"
#include "periq/metrics.hpp"
#include "periq/model.hpp"
#include "periq/regularizer.hpp"
#include "periq/schedule.hpp"
#include "periq/sgd.hpp"

namespace periq {

struct TrainConfig {
  int epochs = 100;
  int batch_size = 64;
  double learning_rate = 0.1;
  double momentum = 0.9;
  std::uint64_t seed = 1;
  RegularizerConfig regularizer;  // amplitude comes from the schedule during training
  AmplitudeSchedule schedule;
  DatasetSpec dataset;
  ModelSpec model;
};

struct ValidationResult {
  std::vector<std::string> warnings;
};

inline ValidationResult validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw config_error("train: epochs must be >= 1");
  if (cfg.batch_size < 1) throw config_error("train: batch_size must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw config_error("train: learning_rate must be > 0");
  if (!(cfg.momentum >= 0.0 && cfg.momentum < 1.0))
    throw config_error("train: momentum must be in [0, 1)");
  validate(cfg.regularizer);
  validate(cfg.schedule);

  ValidationResult r;
  const double final_amp = amplitude_at(cfg.schedule, cfg.epochs - 1);
  if (final_amp > 0.0 && (final_amp < 1e-3 || final_amp > 1e-2)) {
    char buf[128];
    std::snprintf(buf, sizeof(buf),
                  "final amplitude %g is outside the recommended range [0.001, 0.01]",
                  final_amp);
    r.warnings.emplace_back(buf);
  }
  return r;
}

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;  // mean data loss over the epoch + end-of-epoch penalty
  double penalty = 0.0;     // model_penalty at the epoch's amplitude, end-of-epoch weights
  double amplitude = 0.0;   // amplitude_at(schedule, epoch)
  double test_error = 0.0;  // percent
  double lattice_distance = 0.0;  // at the regularizer frequency
};

struct TrainResult {
  Model model;
  std::vector<EpochRecord> records;
  bool diverged = false;
  std::string diagnostic;
};

// Deterministic contract: one Rng seeded with cfg.seed initializes the model
// and then drives the per-epoch shuffles, so (config, seed) fully determines
// the trajectory. The regularizer gradient is added to every eligible slab on
// every step; no layer or epoch is treated specially.
inline TrainResult train(const TrainConfig& cfg, const Dataset& train_set,
                         const Dataset& test_set) {
  validate(cfg);
  if (train_set.size() == 0) throw config_error("train: empty training set");

  Rng rng(cfg.seed);
  TrainResult result;
  result.model = Model::build(cfg.model, rng);
  Model& model = result.model;
  SgdOptimizer opt(static_cast<float>(cfg.learning_rate), static_cast<float>(cfg.momentum));
  const bool skip_singleton_batches = model.has_batchnorm();

  std::vector<std::size_t> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<std::size_t> batch_idx;
  std::vector<int> batch_labels;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double amplitude = amplitude_at(cfg.schedule, epoch);
    RegularizerConfig reg = cfg.regularizer;
    reg.amplitude = amplitude;

    rng.shuffle(order.begin(), order.end());
    double data_loss_sum = 0.0;
    std::size_t steps = 0;

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end =
          std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const std::size_t r = end - start;
      if (r < 2 && skip_singleton_batches) continue;
      batch_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(start),
                       order.begin() + static_cast<std::ptrdiff_t>(end));
      batch_labels.resize(r);
      for (std::size_t j = 0; j < r; ++j) batch_labels[j] = train_set.labels[batch_idx[j]];

      ForwardCache cache;
      const Tensor logits = model.forward(batch_columns(train_set, batch_idx), &cache);
      SoftmaxXent sx = softmax_xent_loss(logits, batch_labels);
      if (!std::isfinite(sx.loss)) {
        result.diverged = true;
        result.diagnostic = "loss is not finite at epoch " + std::to_string(epoch) +
                            ", step " + std::to_string(steps);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = sx.loss;
        rec.amplitude = amplitude;
        result.records.push_back(rec);
        return result;
      }
      data_loss_sum += sx.loss;
      ++steps;

      model.backward(sx.grad_logits, cache);
      if (amplitude > 0.0) accumulate_penalty_gradients(model, reg);
      opt.step(model.slabs());
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.amplitude = amplitude;
    rec.penalty = model_penalty(model, reg).total;
    rec.train_loss = (steps ? data_loss_sum / static_cast<double>(steps) : 0.0) + rec.penalty;
    rec.test_error = evaluate(model, test_set).top1_error;
    rec.lattice_distance = lattice_distance(model, cfg.regularizer.frequency);
    result.records.push_back(rec);
  }
  return result;
}

inline TrainResult train(const TrainConfig& cfg) {
  auto [train_set, test_set] = make_dataset(cfg.dataset);
  return train(cfg, train_set, test_set);
}

}  // namespace periq
