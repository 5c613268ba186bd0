// Batch driver for the graph-time experiments: dataset generation, model
// training, stability sweeps and spectral response dumps, all config-driven.

#include <cstdio>
#include <exception>
#include <string>

#include <CLI11.hpp>

#include "gtcnn/experiments.hpp"

namespace {

struct CommonOpts {
  std::string config_path;
  std::string out_dir;
  std::int64_t seed = -1;
  int threads = 1;
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
  cmd->add_option("--config", opts.config_path, "experiment config JSON")->required();
  cmd->add_option("--out", opts.out_dir, "output directory")->required();
  cmd->add_option("--seed", opts.seed, "override the config seed");
  cmd->add_option("--threads", opts.threads, "worker threads (runs are currently serial)")
      ->check(CLI::PositiveNumber);
}

gtcnn::ExperimentConfig load(const CommonOpts& opts, const std::string& expected_task) {
  gtcnn::ExperimentConfig cfg = gtcnn::load_config(opts.config_path);
  if (opts.seed >= 0) cfg.seed = static_cast<std::uint64_t>(opts.seed);
  if (cfg.task != expected_task)
    throw gtcnn::ConfigError("config task is '" + cfg.task + "' but this subcommand expects '" +
                             expected_task + "'");
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graph-time convolutional network toolkit"};
  app.require_subcommand(1);

  CommonOpts gen_opts, train_opts, stab_opts, spec_opts;
  std::string stab_checkpoint, spec_checkpoint;
  CLI::App* gen = app.add_subcommand("gen", "generate a source-localization dataset");
  add_common(gen, gen_opts);
  CLI::App* train = app.add_subcommand("train", "train all configured model variants");
  add_common(train, train_opts);
  CLI::App* stability = app.add_subcommand("stability", "perturbation sweep of a trained model");
  add_common(stability, stab_opts);
  stability->add_option("--checkpoint", stab_checkpoint, "override the config checkpoint path");
  CLI::App* spectral = app.add_subcommand("spectral", "frequency-response grid of a trained model");
  add_common(spectral, spec_opts);
  spectral->add_option("--checkpoint", spec_checkpoint, "override the config checkpoint path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      gtcnn::write_dataset_files(load(gen_opts, "source_localization"), gen_opts.out_dir);
      std::printf("dataset written to %s\n", gen_opts.out_dir.c_str());
    } else if (train->parsed()) {
      const auto result =
          gtcnn::run_source_localization(load(train_opts, "source_localization"), train_opts.out_dir);
      for (const auto& m : result.models)
        std::printf("%-12s mean accuracy %.4f (std %.4f, failed %d/%zu)\n", m.name.c_str(),
                    m.mean_accuracy, m.std_accuracy, m.failed, m.runs.size());
      std::printf("results written to %s\n", train_opts.out_dir.c_str());
    } else if (stability->parsed()) {
      gtcnn::ExperimentConfig cfg = load(stab_opts, "stability_sweep");
      if (!stab_checkpoint.empty()) cfg.stability.checkpoint = stab_checkpoint;
      const auto result = gtcnn::run_stability_sweep(cfg, stab_opts.out_dir);
      std::printf("unperturbed accuracy %.4f, %zu trials written to %s\n",
                  result.unperturbed_accuracy, result.rows.size(), stab_opts.out_dir.c_str());
    } else if (spectral->parsed()) {
      gtcnn::ExperimentConfig cfg = load(spec_opts, "spectral_dump");
      if (!spec_checkpoint.empty()) cfg.spectral.checkpoint = spec_checkpoint;
      const auto result = gtcnn::run_spectral_dump(cfg, spec_opts.out_dir);
      for (const auto& [layer, filter] : result.degenerate)
        std::fprintf(stderr, "warning: layer %d filter %d has an identically zero response\n",
                     layer, filter);
      std::printf("%zu grid rows written to %s\n", result.rows.size(), spec_opts.out_dir.c_str());
    }
  } catch (const std::exception& ex) {
    std::fprintf(stderr, "error: %s\n", ex.what());
    return 1;
  }
  return 0;
}
