#include "cdil/cli.hpp"

#include "cdil/errors.hpp"
#include "cdil/io.hpp"
#include "cdil/log.hpp"
#include "cdil/pipeline.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;

namespace cdil {

namespace {

struct RunOptions {
  std::string config;
  std::optional<std::string> protocol;
  std::optional<int> k;
  std::optional<std::string> learner;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::optional<std::string> out;
  bool dump_heads = false;
  bool quiet = false;
  bool verbose = false;
};

int do_run(const RunOptions& o) {
  auto cfg = load_config(o.config);
  if (o.protocol) cfg.protocol = parse_protocol(*o.protocol);
  if (o.k) cfg.k = *o.k;
  if (o.learner) cfg.learner = parse_learner_kind(*o.learner);
  if (o.seed) cfg.seed = *o.seed;
  if (o.deterministic) cfg.deterministic = true;
  if (o.out) cfg.output_dir = *o.out;
  if (o.verbose) cfg.verbose = true;
  cfg.validate();
  if (cfg.output_dir.empty()) throw ConfigError("no output directory (set 'output' or --out)");
  if (cfg.verbose) log::set_level(log::Level::info);
  if (o.quiet) log::set_level(log::Level::quiet);

  const fs::path out(cfg.output_dir);
  fs::create_directories(out);
  const auto seq = load_sequence(cfg);
  const auto echo = config_to_json(cfg);
  log::info("running " + std::string(to_string(cfg.learner)) + " under " +
            std::string(to_string(cfg.protocol)) + ", k=" + std::to_string(cfg.k) + ", " +
            std::to_string(seq.size()) + " sessions, " +
            std::to_string(effective_threads(cfg)) + " thread(s)");

  const auto report = run_experiment(
      cfg, seq, {}, [&](const TrialResult& trial, const Learner& learner) {
        write_trial(trial, echo, out);
        if (o.dump_heads) {
          std::ofstream f(out / ("heads_trial_" + std::to_string(trial.trial_index) + ".csv"));
          learner.head().write_csv(f, seq.registry());
        }
      });
  write_report(report, out);
  if (log::level() != log::Level::quiet)
    std::cerr << format_report_table(report, method_label(echo));
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Composite class-domain incremental learning benchmark"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a fold-bound incremental experiment");
  run_cmd->add_option("--config", run.config, "Experiment config (JSON)")->required();
  run_cmd->add_option("--protocol", run.protocol, "slcv or ilcv");
  run_cmd->add_option("--k", run.k, "Number of folds / trials");
  run_cmd->add_option("--learner", run.learner, "finetune or prototype");
  run_cmd->add_option("--seed", run.seed, "Experiment seed");
  run_cmd->add_flag("--deterministic", run.deterministic, "Sequential, bit-reproducible trials");
  run_cmd->add_option("--out", run.out, "Output directory");
  run_cmd->add_flag("--dump-heads", run.dump_heads, "Write each trial's head groups as CSV");
  run_cmd->add_flag("-q,--quiet", run.quiet, "No progress or summary output");
  run_cmd->add_flag("-v,--verbose", run.verbose, "Per-session progress lines");

  std::string spec_path, synth_out;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic session stream");
  synth_cmd->add_option("--spec", spec_path, "Synthetic spec (JSON)")->required();
  synth_cmd->add_option("--out", synth_out, "Output directory")->required();

  std::string split_config, split_out;
  auto* split_cmd = app.add_subcommand("split", "Write fold assignments as CSV");
  split_cmd->add_option("--config", split_config, "Experiment config (JSON)")->required();
  split_cmd->add_option("--out", split_out, "Output CSV file")->required();

  std::string report_in;
  auto* report_cmd = app.add_subcommand("report", "Re-aggregate per-trial results");
  report_cmd->add_option("--in", report_in, "Directory holding trial_<n>.json")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run_cmd) return do_run(run);
    if (*synth_cmd) {
      const auto spec = load_synth_spec(spec_path);
      const auto path = write_stream(generate_stream(spec), synth_out, "synthetic");
      std::cout << path.string() << '\n';
      return 0;
    }
    if (*split_cmd) {
      const auto cfg = load_config(split_config);
      const auto seq = load_sequence(cfg);
      write_split_csv(seq, partition_sequence(seq, cfg.protocol, cfg.k, cfg.seed), split_out);
      return 0;
    }
    if (*report_cmd) {
      const auto report = reaggregate_trials(report_in);
      write_report(report, report_in);
      std::cout << format_report_table(report, method_label(report.config));
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "cdil: error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace cdil
