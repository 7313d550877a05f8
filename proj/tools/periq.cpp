// periq command line: train, quantize, eval, sweep and landscape subcommands
// over the periodic-regularization quantization pipeline.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "periq/commands.hpp"

namespace {

periq::RegKind parse_kind(const std::string& s) { return periq::reg_kind_from_string(s); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"quantization-aware training with periodic regularizers"};
  app.require_subcommand(1);

  std::string config_path, out_path, model_path, kind_str = "sine";
  std::optional<int> bits, frequency;
  int samples = 1001;
  double amplitude = 1.0;
  std::vector<double> amplitudes;

  auto* train = app.add_subcommand("train", "train a model from a config file");
  train->add_option("--config", config_path, "config or manifest JSON")->required();
  train->add_option("--out", out_path, "output directory")->required();

  auto* quantize = app.add_subcommand("quantize", "quantize a checkpoint to integer codes");
  quantize->add_option("--checkpoint", model_path, "checkpoint file")->required();
  auto* qb = quantize->add_option("--bits", bits, "target bit-width");
  auto* qf = quantize->add_option("--frequency", frequency, "lattice frequency");
  qb->excludes(qf);
  qf->excludes(qb);
  quantize->add_option("--kind", kind_str, "sine | cosine | hat")->capture_default_str();
  quantize->add_option("--out", out_path, "output export file")->required();

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint or quantized export");
  eval->add_option("--model", model_path, "checkpoint or quantized export")->required();
  eval->add_option("--config", config_path, "config providing the dataset")->required();
  eval->add_option("--bits", bits, "bit-width for the quantization report");
  eval->add_option("--kind", kind_str, "sine | cosine | hat")->capture_default_str();

  auto* sweep = app.add_subcommand("sweep", "train across final amplitudes, dynamic vs fixed");
  sweep->add_option("--config", config_path, "base config JSON")->required();
  sweep->add_option("--amplitudes", amplitudes, "final amplitudes")->required()->delimiter(',');
  sweep->add_option("--out", out_path, "output directory")->required();

  auto* landscape = app.add_subcommand("landscape", "sample a penalty over w/c in [-1, 1]");
  landscape->add_option("--kind", kind_str, "sine | cosine | hat")->capture_default_str();
  auto* lf = landscape->add_option("--frequency", frequency, "lattice frequency");
  auto* lb = landscape->add_option("--bits", bits, "bit-width (converted to a frequency)");
  lf->excludes(lb);
  lb->excludes(lf);
  landscape->add_option("--amplitude", amplitude, "penalty amplitude")->capture_default_str();
  landscape->add_option("--samples", samples, "sample count")->capture_default_str();
  landscape->add_option("--out", out_path, "output CSV")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      periq::cmd_train(config_path, out_path, std::cout);
    } else if (quantize->parsed()) {
      periq::cmd_quantize(model_path, bits, frequency, parse_kind(kind_str), out_path,
                          std::cout);
    } else if (eval->parsed()) {
      periq::cmd_eval(model_path, config_path, bits.value_or(8), parse_kind(kind_str),
                      std::cout);
    } else if (sweep->parsed()) {
      periq::cmd_sweep(config_path, amplitudes, out_path, std::cout);
    } else if (landscape->parsed()) {
      const periq::RegKind kind = parse_kind(kind_str);
      int f = 1;
      if (frequency)
        f = *frequency;
      else if (bits)
        f = periq::bits_to_frequency(*bits, periq::frequency_kind_for(kind));
      else
        throw periq::config_error("landscape: one of --frequency or --bits is required");
      periq::cmd_landscape(kind, f, amplitude, samples, out_path, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
