#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "periq/checkpoint.hpp"
#include "periq/config.hpp"
#include "periq/metrics.hpp"
#include "periq/trainer.hpp"

// Command implementations behind the CLI. Each run writes a manifest (config
// echo + seed + tool version) next to its outputs; a train manifest is itself
// a valid --config input and reproduces the run byte for byte.
namespace periq {

namespace detail {

inline std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

inline void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error(io_errc::bad_header, "cannot open for write: " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
}

inline json base_manifest(const std::string& command) {
  return json{{"tool", "periq"}, {"version", kVersion}, {"command", command}};
}

}  // namespace detail

inline std::string epoch_records_csv(const std::vector<EpochRecord>& records) {
  std::string csv = "epoch,train_loss,penalty,amplitude,test_error,lattice_distance\n";
  for (const auto& r : records) {
    csv += std::to_string(r.epoch);
    csv += ',';
    csv += detail::fmt_double(r.train_loss);
    csv += ',';
    csv += detail::fmt_double(r.penalty);
    csv += ',';
    csv += detail::fmt_double(r.amplitude);
    csv += ',';
    csv += detail::fmt_double(r.test_error);
    csv += ',';
    csv += detail::fmt_double(r.lattice_distance);
    csv += '\n';
  }
  return csv;
}

// Runs one training job and writes checkpoint.pqc, epochs.csv and
// manifest.json into out_dir. Returns the result for callers that keep going.
inline TrainResult run_training_to_dir(const TrainConfig& cfg,
                                       const std::filesystem::path& out_dir, std::ostream& log) {
  std::filesystem::create_directories(out_dir);
  for (const auto& w : validate(cfg).warnings) log << "warning: " << w << "\n";

  TrainResult result = train(cfg);

  json manifest = detail::base_manifest("train");
  manifest["seed"] = cfg.seed;
  manifest["config"] = to_json(cfg);
  detail::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  detail::write_text_file(out_dir / "epochs.csv", epoch_records_csv(result.records));
  save_checkpoint(result.model, out_dir / "checkpoint.pqc");

  if (result.diverged)
    throw std::runtime_error("training diverged: " + result.diagnostic +
                             " (partial records written to " +
                             (out_dir / "epochs.csv").string() + ")");
  return result;
}

inline void cmd_train(const std::filesystem::path& config_path,
                      const std::filesystem::path& out_dir, std::ostream& log) {
  const TrainConfig cfg = load_train_config(config_path);
  TrainResult result = run_training_to_dir(cfg, out_dir, log);
  const EpochRecord& last = result.records.back();
  log << "trained " << cfg.epochs << " epochs; final test error "
      << detail::fmt_double(last.test_error) << "%, lattice distance "
      << detail::fmt_double(last.lattice_distance) << "\n";
  log << "wrote " << (out_dir / "checkpoint.pqc").string() << "\n";
}

// Resolves the (bits, frequency) pair; exactly one must be provided.
inline std::pair<int, int> resolve_bits_frequency(std::optional<int> bits,
                                                  std::optional<int> frequency, RegKind kind) {
  if (bits.has_value() == frequency.has_value())
    throw config_error("exactly one of --bits and --frequency is required");
  const FrequencyKind fk = frequency_kind_for(kind);
  if (bits) return {*bits, bits_to_frequency(*bits, fk)};
  return {frequency_to_bits(*frequency, fk), *frequency};
}

inline void cmd_quantize(const std::filesystem::path& checkpoint_path, std::optional<int> bits,
                         std::optional<int> frequency, RegKind kind,
                         const std::filesystem::path& out_path, std::ostream& log) {
  const auto [t, f] = resolve_bits_frequency(bits, frequency, kind);
  const Model model = load_checkpoint(checkpoint_path);
  export_quantized(model, t, kind, out_path);

  log << "bits " << t << ", frequency " << f << "\n";
  for (const auto& slab : model.slabs()) {
    if (!penalized_slab(slab.kind)) continue;
    const QuantizedSlab q = quantize_slab_lattice(slab, f);
    std::set<std::int32_t> distinct(q.codes.begin(), q.codes.end());
    log << slab.name << ": " << distinct.size() << " levels\n";
  }
  const double ratio = static_cast<double>(quant_export_payload_size(model, f)) /
                       static_cast<double>(checkpoint_payload_size(model));
  log << "payload size ratio vs f32 checkpoint: " << detail::fmt_double(ratio) << "\n";

  json manifest = detail::base_manifest("quantize");
  manifest["input"] = checkpoint_path.string();
  manifest["bits"] = t;
  manifest["frequency"] = f;
  manifest["kind"] = to_string(kind);
  detail::write_text_file(out_path.string() + ".manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << out_path.string() << "\n";
}

inline json quant_report_to_json(const QuantReport& r) {
  json per_slab = json::object();
  for (const auto& [name, d] : r.per_slab_distance) per_slab[name] = d;
  json j{{"schema_version", kReportSchemaVersion},
         {"type", "quant_report"},
         {"baseline_error", r.baseline_error},
         {"quantized_error", r.quantized_error},
         {"drop", r.drop},
         {"baseline_loss", r.baseline_loss},
         {"quantized_loss", r.quantized_loss},
         {"bits", r.t},
         {"frequency", r.frequency},
         {"per_slab_lattice_distance", per_slab}};
  if (!r.per_slab_cosine_distance.empty()) {
    json cos = json::object();
    for (const auto& [name, d] : r.per_slab_cosine_distance) cos[name] = d;
    j["per_slab_cosine_lattice_distance"] = cos;
  }
  return j;
}

// Prints a JSON report: a full QuantReport for a checkpoint (quantization on
// an in-memory copy), or a plain evaluation for a quantized export.
inline void cmd_eval(const std::filesystem::path& model_path,
                     const std::filesystem::path& config_path, int bits, RegKind kind,
                     std::ostream& out) {
  const TrainConfig cfg = load_train_config(config_path);
  auto [train_set, test_set] = make_dataset(cfg.dataset);

  json manifest = detail::base_manifest("eval");
  manifest["input"] = model_path.string();
  manifest["config"] = to_json(cfg);
  manifest["bits"] = bits;
  manifest["kind"] = to_string(kind);

  json j;
  if (is_quant_export(model_path)) {
    const Model model = import_quantized(model_path);
    const EvalResult r = evaluate(model, test_set);
    j = json{{"schema_version", kReportSchemaVersion},
             {"type", "eval"},
             {"error", r.top1_error},
             {"loss", r.loss}};
  } else {
    const Model model = load_checkpoint(model_path);
    j = quant_report_to_json(quantization_report(model, test_set, bits, kind));
  }
  j["manifest"] = manifest;
  out << j.dump(2) << "\n";
}

// For each amplitude (interpreted as the run's final amplitude) trains once
// with the dynamic schedule and once fixed, quantizes at the configured
// regularizer frequency and reports quantized test errors.
inline void cmd_sweep(const std::filesystem::path& config_path,
                      const std::vector<double>& amplitudes,
                      const std::filesystem::path& out_dir, std::ostream& log) {
  if (amplitudes.empty()) throw config_error("sweep: at least one amplitude required");
  const TrainConfig base = load_train_config(config_path);
  std::filesystem::create_directories(out_dir);

  const int steps = (base.epochs - 1) / base.schedule.step_period_epochs;
  const int t = frequency_to_bits(base.regularizer.frequency,
                                  frequency_kind_for(base.regularizer.kind));

  std::string csv =
      "amplitude,test_error_dyn,quantized_error_dyn,test_error_fixed,quantized_error_fixed\n";
  for (std::size_t i = 0; i < amplitudes.size(); ++i) {
    const double amplitude = amplitudes[i];
    TrainConfig dyn = base;
    dyn.schedule.mode = ScheduleMode::dynamic;
    dyn.schedule.start_amplitude = amplitude / std::pow(dyn.schedule.step_factor, steps);
    TrainConfig fixed = base;
    fixed.schedule.mode = ScheduleMode::fixed;
    fixed.schedule.start_amplitude = amplitude;

    auto [train_set, test_set] = make_dataset(base.dataset);
    double err[2], qerr[2];
    const TrainConfig* cfgs[2] = {&dyn, &fixed};
    const char* tag[2] = {"dyn", "fixed"};
    for (int v = 0; v < 2; ++v) {
      const std::filesystem::path run_dir =
          out_dir / "runs" / ("amp" + std::to_string(i) + "_" + tag[v]);
      log << "sweep: amplitude " << detail::fmt_double(amplitude) << " (" << tag[v] << ")\n";
      TrainResult res = run_training_to_dir(*cfgs[v], run_dir, log);
      const QuantReport report =
          quantization_report(res.model, test_set, t, base.regularizer.kind);
      err[v] = report.baseline_error;
      qerr[v] = report.quantized_error;
    }
    csv += detail::fmt_double(amplitude);
    csv += ',';
    csv += detail::fmt_double(err[0]);
    csv += ',';
    csv += detail::fmt_double(qerr[0]);
    csv += ',';
    csv += detail::fmt_double(err[1]);
    csv += ',';
    csv += detail::fmt_double(qerr[1]);
    csv += '\n';
  }
  detail::write_text_file(out_dir / "sweep.csv", csv);

  json manifest = detail::base_manifest("sweep");
  manifest["amplitudes"] = amplitudes;
  manifest["config"] = to_json(base);
  detail::write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << (out_dir / "sweep.csv").string() << "\n";
}

// Samples the penalty over w/c in [-1, 1]; regenerates the landscape figures.
inline void cmd_landscape(RegKind kind, int frequency, double amplitude, int samples,
                          const std::filesystem::path& out_csv, std::ostream& log) {
  if (samples < 2) throw config_error("landscape: samples must be >= 2");
  if (frequency < 1) throw config_error("landscape: frequency must be >= 1");
  std::string csv = "w_over_c,penalty\n";
  for (int i = 0; i < samples; ++i) {
    const double x = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(samples - 1);
    csv += detail::fmt_double(x);
    csv += ',';
    csv += detail::fmt_double(penalty_term(kind, amplitude, frequency, x));
    csv += '\n';
  }
  detail::write_text_file(out_csv, csv);

  json manifest = detail::base_manifest("landscape");
  manifest["kind"] = to_string(kind);
  manifest["frequency"] = frequency;
  manifest["amplitude"] = amplitude;
  manifest["samples"] = samples;
  detail::write_text_file(out_csv.string() + ".manifest.json", manifest.dump(2) + "\n");
  log << "wrote " << out_csv.string() << "\n";
}

}  // namespace periq
