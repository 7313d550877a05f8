#pragma once

#include <filesystem>
#include <fstream>
#include <set>
#include <string>

#include <json.hpp>

#include "periq/trainer.hpp"

// JSON config file <-> TrainConfig. Parsing is strict: unknown keys are
// rejected so a manifest echo always round-trips to the exact same run.
namespace periq {

using json = nlohmann::json;

namespace detail {

inline void reject_unknown_keys(const json& j, const std::set<std::string>& known,
                                const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.contains(it.key()))
      throw config_error("unknown key \"" + it.key() + "\" in " + where);
}

}  // namespace detail

inline RegKind reg_kind_from_string(const std::string& s) {
  if (s == "sine") return RegKind::sine;
  if (s == "cosine") return RegKind::cosine;
  if (s == "hat") return RegKind::hat;
  throw config_error("regularizer kind must be sine, cosine or hat: " + s);
}

inline json to_json(const RegularizerConfig& cfg) {
  return json{{"kind", to_string(cfg.kind)},
              {"amplitude", cfg.amplitude},
              {"frequency", cfg.frequency},
              {"normalize", cfg.normalize}};
}

inline RegularizerConfig regularizer_from_json(const json& j) {
  detail::reject_unknown_keys(j, {"kind", "amplitude", "frequency", "normalize"}, "regularizer");
  RegularizerConfig cfg;
  cfg.kind = reg_kind_from_string(j.value("kind", "sine"));
  cfg.amplitude = j.value("amplitude", 0.0);
  cfg.frequency = j.value("frequency", 1);
  cfg.normalize = j.value("normalize", false);
  validate(cfg);
  return cfg;
}

inline json to_json(const AmplitudeSchedule& s) {
  return json{{"mode", to_string(s.mode)},
              {"start_amplitude", s.start_amplitude},
              {"step_factor", s.step_factor},
              {"step_period_epochs", s.step_period_epochs}};
}

inline AmplitudeSchedule schedule_from_json(const json& j) {
  detail::reject_unknown_keys(j, {"mode", "start_amplitude", "step_factor", "step_period_epochs"},
                              "schedule");
  AmplitudeSchedule s;
  const std::string mode = j.value("mode", "fixed");
  if (mode == "fixed")
    s.mode = ScheduleMode::fixed;
  else if (mode == "dynamic")
    s.mode = ScheduleMode::dynamic;
  else
    throw config_error("schedule mode must be fixed or dynamic: " + mode);
  s.start_amplitude = j.value("start_amplitude", 1e-4);
  s.step_factor = j.value("step_factor", 10.0);
  s.step_period_epochs = j.value("step_period_epochs", 30);
  validate(s);
  return s;
}

inline json to_json(const DatasetSpec& d) {
  json j{{"kind", d.kind},
         {"samples", d.samples},
         {"classes", d.classes},
         {"noise", d.noise},
         {"seed", d.seed}};
  if (d.kind == "idx") {
    j["train_images"] = d.train_images;
    j["train_labels"] = d.train_labels;
    j["test_images"] = d.test_images;
    j["test_labels"] = d.test_labels;
  }
  return j;
}

inline DatasetSpec dataset_from_json(const json& j) {
  detail::reject_unknown_keys(j,
                              {"kind", "samples", "classes", "noise", "seed", "train_images",
                               "train_labels", "test_images", "test_labels"},
                              "dataset");
  DatasetSpec d;
  d.kind = j.value("kind", "spirals");
  d.samples = j.value("samples", std::size_t{1500});
  d.classes = j.value("classes", 3);
  d.noise = j.value("noise", 0.1);
  d.seed = j.value("seed", std::uint64_t{7});
  d.train_images = j.value("train_images", "");
  d.train_labels = j.value("train_labels", "");
  d.test_images = j.value("test_images", "");
  d.test_labels = j.value("test_labels", "");
  return d;
}

inline json to_json(const LayerSpec& l) {
  json j{{"kind", to_string(l.kind)}};
  switch (l.kind) {
    case LayerKind::dense:
      j["out"] = l.out;
      break;
    case LayerKind::conv2d:
      j["kernel"] = {l.kh, l.kw};
      j["channels_out"] = l.channels_out;
      j["strides"] = {l.s1, l.s2};
      break;
    case LayerKind::batchnorm:
      j["pure_centering"] = l.pure_centering;
      j["eps"] = l.eps;
      break;
    default:
      break;
  }
  return j;
}

inline LayerSpec layer_from_json(const json& j) {
  LayerSpec l;
  const std::string kind = j.value("kind", "");
  if (kind == "dense") {
    detail::reject_unknown_keys(j, {"kind", "out"}, "dense layer");
    l.kind = LayerKind::dense;
    l.out = j.value("out", std::size_t{0});
  } else if (kind == "conv2d") {
    detail::reject_unknown_keys(j, {"kind", "kernel", "channels_out", "strides"}, "conv2d layer");
    l.kind = LayerKind::conv2d;
    const auto kernel = j.value("kernel", std::vector<std::size_t>{});
    if (kernel.size() != 2) throw config_error("conv2d layer: kernel must be [kh, kw]");
    l.kh = kernel[0];
    l.kw = kernel[1];
    l.channels_out = j.value("channels_out", std::size_t{0});
    const auto strides = j.value("strides", std::vector<int>{1, 1});
    if (strides.size() != 2) throw config_error("conv2d layer: strides must be [s1, s2]");
    l.s1 = strides[0];
    l.s2 = strides[1];
  } else if (kind == "batchnorm") {
    detail::reject_unknown_keys(j, {"kind", "pure_centering", "eps"}, "batchnorm layer");
    l.kind = LayerKind::batchnorm;
    l.pure_centering = j.value("pure_centering", false);
    l.eps = j.value("eps", 1e-5f);
  } else if (kind == "relu") {
    detail::reject_unknown_keys(j, {"kind"}, "relu layer");
    l.kind = LayerKind::relu;
  } else if (kind == "maxpool2x2") {
    detail::reject_unknown_keys(j, {"kind"}, "maxpool2x2 layer");
    l.kind = LayerKind::maxpool2x2;
  } else {
    throw config_error("layer kind must be dense, conv2d, batchnorm, relu or maxpool2x2: " +
                       kind);
  }
  return l;
}

inline json to_json(const ModelSpec& m) {
  json layers = json::array();
  for (const auto& l : m.layers) layers.push_back(to_json(l));
  return json{{"input", m.input_shape}, {"layers", layers}};
}

inline ModelSpec model_from_json(const json& j) {
  detail::reject_unknown_keys(j, {"input", "layers"}, "model");
  ModelSpec m;
  m.input_shape = j.value("input", std::vector<std::size_t>{});
  if (!j.contains("layers") || !j["layers"].is_array())
    throw config_error("model: layers array required");
  for (const auto& lj : j["layers"]) m.layers.push_back(layer_from_json(lj));
  return m;
}

inline json to_json(const TrainConfig& cfg) {
  return json{{"epochs", cfg.epochs},
              {"batch_size", cfg.batch_size},
              {"learning_rate", cfg.learning_rate},
              {"momentum", cfg.momentum},
              {"seed", cfg.seed},
              {"regularizer", to_json(cfg.regularizer)},
              {"schedule", to_json(cfg.schedule)},
              {"dataset", to_json(cfg.dataset)},
              {"model", to_json(cfg.model)}};
}

inline TrainConfig train_config_from_json(const json& j) {
  detail::reject_unknown_keys(j,
                              {"epochs", "batch_size", "learning_rate", "momentum", "seed",
                               "regularizer", "schedule", "dataset", "model"},
                              "config");
  TrainConfig cfg;
  cfg.epochs = j.value("epochs", 100);
  cfg.batch_size = j.value("batch_size", 64);
  cfg.learning_rate = j.value("learning_rate", 0.1);
  cfg.momentum = j.value("momentum", 0.9);
  cfg.seed = j.value("seed", std::uint64_t{1});
  if (j.contains("regularizer")) cfg.regularizer = regularizer_from_json(j["regularizer"]);
  if (j.contains("schedule")) cfg.schedule = schedule_from_json(j["schedule"]);
  if (j.contains("dataset")) cfg.dataset = dataset_from_json(j["dataset"]);
  if (!j.contains("model")) throw config_error("config: model section required");
  cfg.model = model_from_json(j["model"]);
  return cfg;
}

// Accepts either a plain config file or a manifest written by a previous run
// (in which case the embedded "config" object is used).
inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw config_error("config parse error in " + path.string() + ": " + e.what());
  }
  if (j.contains("config")) return train_config_from_json(j["config"]);
  return train_config_from_json(j);
}

}  // namespace periq
