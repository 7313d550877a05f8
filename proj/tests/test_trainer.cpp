#include <catch_amalgamated.hpp>

#include <numbers>

#include "periq/trainer.hpp"

using namespace periq;
using Catch::Approx;

namespace {

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.epochs = 5;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.1;
  cfg.momentum = 0.9;
  cfg.seed = 3;
  cfg.regularizer = {RegKind::sine, 0.0, 7, false};
  cfg.schedule = {1e-3, 10.0, 2, ScheduleMode::dynamic};
  cfg.dataset = {"blobs", 120, 3, 0.3, 5, "", "", "", ""};
  cfg.model.input_shape = {2};
  cfg.model.layers = {{.kind = LayerKind::dense, .out = 8},
                      {.kind = LayerKind::relu},
                      {.kind = LayerKind::dense, .out = 3}};
  return cfg;
}

}  // namespace

TEST_CASE("identical config and seed give identical records", "[trainer]") {
  const TrainConfig cfg = tiny_config();
  const TrainResult a = train(cfg);
  const TrainResult b = train(cfg);
  REQUIRE(a.records.size() == b.records.size());
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].train_loss == b.records[i].train_loss);
    REQUIRE(a.records[i].penalty == b.records[i].penalty);
    REQUIRE(a.records[i].test_error == b.records[i].test_error);
    REQUIRE(a.records[i].lattice_distance == b.records[i].lattice_distance);
  }
  for (std::size_t s = 0; s < a.model.slabs().size(); ++s)
    REQUIRE(a.model.slabs()[s].tensor == b.model.slabs()[s].tensor);
}

TEST_CASE("amplitude zero trains exactly like any other disabled regularizer", "[trainer]") {
  TrainConfig sine_cfg = tiny_config();
  sine_cfg.schedule = {0.0, 10.0, 30, ScheduleMode::fixed};
  TrainConfig hat_cfg = sine_cfg;
  hat_cfg.regularizer.kind = RegKind::hat;

  const TrainResult a = train(sine_cfg);
  const TrainResult b = train(hat_cfg);
  for (std::size_t s = 0; s < a.model.slabs().size(); ++s)
    REQUIRE(a.model.slabs()[s].tensor == b.model.slabs()[s].tensor);
  for (std::size_t i = 0; i < a.records.size(); ++i) {
    REQUIRE(a.records[i].train_loss == b.records[i].train_loss);
    REQUIRE(a.records[i].penalty == 0.0);
  }
}

TEST_CASE("one step matches a hand-stepped oracle to f32 exactness", "[trainer]") {
  // dense 2 -> 2, one sample, one epoch, plain SGD, fixed sine penalty
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.batch_size = 1;
  cfg.learning_rate = 0.5;
  cfg.momentum = 0.0;
  cfg.seed = 41;
  cfg.regularizer = {RegKind::sine, 0.0, 1, false};
  cfg.schedule = {0.3, 10.0, 30, ScheduleMode::fixed};
  cfg.model.input_shape = {2};
  cfg.model.layers = {{.kind = LayerKind::dense, .out = 2}};

  Dataset data;
  data.split = "train";
  data.class_count = 2;
  data.features = Tensor({1, 2}, {0.2f, -0.4f});
  data.labels = {1};

  const TrainResult result = train(cfg, data, data);

  // oracle: replicate the arithmetic with explicit f32 stores
  Rng rng(cfg.seed);
  Model m = Model::build(cfg.model, rng);  // same init stream as train()
  float w[2][2] = {{m.slabs()[0].tensor(0, 0), m.slabs()[0].tensor(0, 1)},
                   {m.slabs()[0].tensor(1, 0), m.slabs()[0].tensor(1, 1)}};
  float b[2] = {0.0f, 0.0f};
  const float x[2] = {0.2f, -0.4f};

  // forward in double, stored f32
  float logits[2];
  for (int i = 0; i < 2; ++i)
    logits[i] = static_cast<float>(static_cast<double>(b[i]) +
                                   static_cast<double>(w[i][0]) * x[0] +
                                   static_cast<double>(w[i][1]) * x[1]);
  const double mx = std::max(static_cast<double>(logits[0]), static_cast<double>(logits[1]));
  const double denom = std::exp(logits[0] - mx) + std::exp(logits[1] - mx);
  float gl[2];
  for (int i = 0; i < 2; ++i) {
    const double p = std::exp(logits[i] - mx) / denom;
    gl[i] = static_cast<float>(p - (i == 1 ? 1.0 : 0.0));
  }
  // dense backward: grad_w = gl x^T, grad_b = gl
  float gw[2][2], gb[2];
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k)
      gw[i][k] = static_cast<float>(static_cast<double>(gl[i]) * x[k]);
    gb[i] = static_cast<float>(static_cast<double>(gl[i]));
  }
  // sine penalty gradient at fixed amplitude, c = max |w|
  double c = 0.0;
  for (auto& row : w)
    for (float v : row) c = std::max(c, std::abs(static_cast<double>(v)));
  for (int i = 0; i < 2; ++i)
    for (int k = 0; k < 2; ++k)
      gw[i][k] += static_cast<float>(0.3 * (std::numbers::pi * 1.0 / c) *
                                     std::sin(2.0 * std::numbers::pi * w[i][k] / c));
  // plain SGD step: v = g, w -= lr*v, all f32
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) w[i][k] -= 0.5f * gw[i][k];
    b[i] -= 0.5f * gb[i];
  }

  const Tensor& tw = result.model.slabs()[0].tensor;
  const Tensor& tb = result.model.slabs()[1].tensor;
  for (int i = 0; i < 2; ++i) {
    for (int k = 0; k < 2; ++k) REQUIRE(tw(static_cast<std::size_t>(i),
                                           static_cast<std::size_t>(k)) == w[i][k]);
    REQUIRE(tb[static_cast<std::size_t>(i)] == b[i]);
  }
}

TEST_CASE("records expose the schedule and decompose the loss", "[trainer]") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 6;
  const TrainResult result = train(cfg);
  REQUIRE(result.records.size() == 6);
  for (const auto& rec : result.records) {
    REQUIRE(rec.amplitude == amplitude_at(cfg.schedule, rec.epoch));
    REQUIRE(rec.penalty >= 0.0);
    REQUIRE(std::isfinite(rec.train_loss));
  }
  // penalty of the final record equals model_penalty recomputed on the weights
  RegularizerConfig reg = cfg.regularizer;
  reg.amplitude = amplitude_at(cfg.schedule, cfg.epochs - 1);
  const double recomputed = model_penalty(result.model, reg).total;
  REQUIRE(result.records.back().penalty == Approx(recomputed).epsilon(1e-9));
  REQUIRE(result.records.back().train_loss - result.records.back().penalty >= 0.0);
}

TEST_CASE("divergence aborts with a diagnostic record", "[trainer]") {
  TrainConfig cfg = tiny_config();
  cfg.learning_rate = 1e30;
  cfg.epochs = 10;
  const TrainResult result = train(cfg);
  REQUIRE(result.diverged);
  REQUIRE(!result.diagnostic.empty());
  REQUIRE(result.records.size() <= 10);
  REQUIRE(!std::isfinite(result.records.back().train_loss));
}

TEST_CASE("dynamic schedule pulls weights toward the lattice", "[trainer]") {
  // median final lattice distance over 3 seeds: regularized < amplitude-0
  std::vector<double> reg_dist, base_dist;
  std::vector<double> pre_mass, post_mass;
  for (std::uint64_t seed : {1, 2, 3}) {
    TrainConfig cfg = tiny_config();
    cfg.seed = seed;
    cfg.epochs = 30;
    cfg.learning_rate = 0.05;
    cfg.regularizer = {RegKind::sine, 0.0, 7, false};
    cfg.schedule = {1e-3, 10.0, 10, ScheduleMode::dynamic};  // 1e-3 -> 1e-1

    const Model fresh = Model::build(cfg.model, cfg.seed);
    const TrainResult reg_run = train(cfg);
    TrainConfig baseline = cfg;
    baseline.schedule = {0.0, 10.0, 10, ScheduleMode::fixed};
    const TrainResult base_run = train(baseline);
    reg_dist.push_back(reg_run.records.back().lattice_distance);
    base_dist.push_back(base_run.records.back().lattice_distance);
    REQUIRE(reg_run.records.back().lattice_distance < lattice_distance(fresh, 7));

    // histogram mass within gamma/4 of the lattice, before vs after training
    auto near_lattice_mass = [](const Model& m) {
      double mass = 0.0;
      std::size_t count = 0, total = 0;
      for (const auto& s : m.slabs()) {
        if (!penalized_slab(s.kind)) continue;
        const double cell = slab_scale(s) / 7.0;
        for (float v : s.tensor.values()) {
          const double d = std::abs(v / cell - round_half_even(v / cell)) * cell;
          if (d <= cell / 4.0) ++count;
          ++total;
        }
      }
      mass += static_cast<double>(count) / static_cast<double>(total);
      return mass;
    };
    pre_mass.push_back(near_lattice_mass(fresh));
    post_mass.push_back(near_lattice_mass(reg_run.model));
  }
  std::sort(reg_dist.begin(), reg_dist.end());
  std::sort(base_dist.begin(), base_dist.end());
  REQUIRE(reg_dist[1] < base_dist[1]);

  std::sort(pre_mass.begin(), pre_mass.end());
  std::sort(post_mass.begin(), post_mass.end());
  REQUIRE(post_mass[1] > pre_mass[1]);
}

TEST_CASE("config validation catches bad fields and warns on final amplitude", "[trainer]") {
  TrainConfig cfg = tiny_config();
  cfg.epochs = 0;
  REQUIRE_THROWS_AS(validate(cfg), config_error);
  cfg = tiny_config();
  cfg.momentum = 1.0;
  REQUIRE_THROWS_AS(validate(cfg), config_error);
  cfg = tiny_config();
  cfg.learning_rate = 0.0;
  REQUIRE_THROWS_AS(validate(cfg), config_error);

  cfg = tiny_config();
  cfg.schedule = {1e-4, 10.0, 30, ScheduleMode::fixed};  // final 1e-4: out of range
  REQUIRE_FALSE(validate(cfg).warnings.empty());
  cfg.schedule = {1e-3, 10.0, 30, ScheduleMode::fixed};
  REQUIRE(validate(cfg).warnings.empty());
  cfg.schedule = {0.0, 10.0, 30, ScheduleMode::fixed};  // baselines do not warn
  REQUIRE(validate(cfg).warnings.empty());
}

TEST_CASE("training works on a batchnorm model", "[trainer]") {
  TrainConfig cfg = tiny_config();
  cfg.model.layers = {{.kind = LayerKind::dense, .out = 8},
                      {.kind = LayerKind::batchnorm},
                      {.kind = LayerKind::relu},
                      {.kind = LayerKind::dense, .out = 3}};
  cfg.epochs = 3;
  const TrainResult result = train(cfg);
  REQUIRE(result.records.size() == 3);
  REQUIRE(!result.diverged);
  REQUIRE(result.model.slabs().size() == 6);
}

TEST_CASE("a small convnet trains on image data", "[trainer]") {
  // 6x6 single-channel images: class 0 lights the top half, class 1 the bottom
  Rng rng(31);
  Dataset train_set, test_set;
  for (Dataset* ds : {&train_set, &test_set}) {
    const std::size_t n = ds == &train_set ? 80 : 40;
    ds->class_count = 2;
    ds->split = ds == &train_set ? "train" : "test";
    ds->features = Tensor({n, 36});
    ds->labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(i % 2);
      ds->labels[i] = label;
      for (std::size_t row = 0; row < 6; ++row)
        for (std::size_t col = 0; col < 6; ++col) {
          const bool lit = label == 0 ? row < 3 : row >= 3;
          ds->features(i, row * 6 + col) =
              static_cast<float>((lit ? 1.0 : 0.0) + 0.1 * rng.normal());
        }
    }
  }

  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.05;
  cfg.momentum = 0.9;
  cfg.seed = 4;
  cfg.regularizer = {RegKind::sine, 0.0, 7, false};
  cfg.schedule = {1e-4, 10.0, 5, ScheduleMode::dynamic};
  cfg.model.input_shape = {6, 6, 1};
  LayerSpec conv;
  conv.kind = LayerKind::conv2d;
  conv.kh = conv.kw = 3;
  conv.channels_out = 4;
  cfg.model.layers = {conv,
                      {.kind = LayerKind::relu},
                      {.kind = LayerKind::maxpool2x2},
                      {.kind = LayerKind::dense, .out = 2}};

  const TrainResult result = train(cfg, train_set, test_set);
  REQUIRE_FALSE(result.diverged);
  REQUIRE(result.records.back().test_error < 10.0);
  REQUIRE(result.records.back().train_loss < result.records.front().train_loss);
  // the conv filter slab carries the penalty
  RegularizerConfig reg = cfg.regularizer;
  reg.amplitude = 1.0;
  REQUIRE(model_penalty(result.model, reg).per_slab.contains("conv0.filters"));
}
