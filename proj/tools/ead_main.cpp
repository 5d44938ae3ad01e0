#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "ead/cli.hpp"

namespace {

// Shared --set key=value overrides plus the common config knobs. Precedence:
// explicit flags > --set pairs > config file > defaults.
struct ConfigArgs {
  std::string config_path;
  std::vector<std::string> overrides;

  ead::RunConfig build() const {
    ead::RunConfig cfg = config_path.empty()
                             ? ead::RunConfig{}
                             : ead::RunConfig::load(config_path);
    for (const std::string& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw ead::ConfigError("--set expects key=value, got " + kv);
      cfg.apply(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

void add_config_options(CLI::App* app, ConfigArgs& args) {
  app->add_option("--config", args.config_path, "Run configuration file");
  app->add_option("--set", args.overrides,
                  "Override a config key, e.g. --set lr=1e-3");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Asynchronous equivariant diffusion for small 3D molecules"};
  app.require_subcommand(1);

  // train
  ConfigArgs train_cfg;
  std::string train_out = "runs/latest";
  std::string resume;
  bool toy = false;
  long steps_override = -1;
  long seed_override = -1;
  auto* train = app.add_subcommand("train", "Train a model (writes checkpoints + CSV log)");
  add_config_options(train, train_cfg);
  train->add_option("--out", train_out, "Run directory");
  train->add_option("--resume", resume, "Checkpoint to resume from");
  train->add_flag("--toy", toy, "Use the bundled toy dataset");
  train->add_option("--steps", steps_override, "Number of optimizer steps");
  train->add_option("--seed", seed_override, "Master seed");

  // sample
  ConfigArgs sample_cfg;
  std::string ckpt_path, sample_out = "samples.xyz", traj_prefix;
  std::string mode;
  long sample_n = -1;
  double lambda_override = -1.0;
  long window_override = -1, u_override = -1, sample_seed = -1;
  bool raw_params = false;
  auto* sample = app.add_subcommand("sample", "Generate molecules from a checkpoint");
  add_config_options(sample, sample_cfg);
  sample->add_option("--checkpoint", ckpt_path, "Trained checkpoint")->required();
  sample->add_option("--out", sample_out, "Output multi-frame XYZ path");
  sample->add_option("--n", sample_n, "Number of molecules");
  sample->add_option("--mode", mode, "Schedule: adaptive | sync | manual");
  sample->add_option("--lambda", lambda_override, "Asynchronous ratio");
  sample->add_option("--window", window_override, "Velocity history window");
  sample->add_option("--u", u_override, "Manual schedule window size");
  sample->add_option("--seed", sample_seed, "Sampling seed");
  sample->add_option("--traj", traj_prefix, "Per-chain trajectory CSV prefix");
  sample->add_flag("--raw-params", raw_params, "Sample with raw (non-EMA) weights");

  // eval
  std::string eval_in, eval_json = "report.json", eval_csv, eval_data = "data";
  auto* eval = app.add_subcommand("eval", "Score generated molecules");
  eval->add_option("input", eval_in, "Multi-frame XYZ file")->required();
  eval->add_option("--out", eval_json, "Report JSON path");
  eval->add_option("--csv", eval_csv, "Per-molecule diagnostics CSV");
  eval->add_option("--data-dir", eval_data, "Directory with elements.txt/bonds.txt");

  // schedule-dump
  long sd_T = 1000;
  double sd_precision = 1e-5;
  std::string sd_out;
  auto* sdump = app.add_subcommand("schedule-dump", "Print the noise schedule as CSV");
  sdump->add_option("--T", sd_T, "Diffusion horizon");
  sdump->add_option("--precision", sd_precision, "Schedule precision");
  sdump->add_option("--out", sd_out, "Output path (default stdout)");

  // pyramid-dump
  long pd_T = 10, pd_M = 4, pd_u = 1;
  std::string pd_out;
  auto* pdump = app.add_subcommand("pyramid-dump", "Print the staircase schedule matrix");
  pdump->add_option("--T", pd_T, "Diffusion horizon");
  pdump->add_option("--M", pd_M, "Atom count");
  pdump->add_option("--u", pd_u, "Window size");
  pdump->add_option("--out", pd_out, "Output path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : ead::kExitUsage;
  }

  try {
    if (train->parsed()) {
      ead::RunConfig cfg = train_cfg.build();
      if (toy) cfg.dataset = "toy";
      if (steps_override >= 0) cfg.steps = static_cast<int>(steps_override);
      if (seed_override >= 0) cfg.seed = static_cast<std::uint64_t>(seed_override);
      return ead::cmd_train(std::move(cfg), train_out, resume);
    }
    if (sample->parsed()) {
      ead::RunConfig cfg = sample_cfg.build();
      if (sample_n >= 0) cfg.sample_n = static_cast<int>(sample_n);
      if (!mode.empty()) cfg.sample_mode = mode;
      if (lambda_override >= 0.0) cfg.lambda = lambda_override;
      if (window_override >= 0) cfg.window = static_cast<int>(window_override);
      if (u_override >= 0) cfg.manual_u = static_cast<int>(u_override);
      if (sample_seed >= 0) cfg.seed = static_cast<std::uint64_t>(sample_seed);
      return ead::cmd_sample(cfg, ckpt_path, sample_out, traj_prefix, raw_params);
    }
    if (eval->parsed())
      return ead::cmd_eval(eval_in, eval_json, eval_csv, eval_data);
    if (sdump->parsed())
      return ead::cmd_schedule_dump(static_cast<int>(sd_T), sd_precision, sd_out);
    if (pdump->parsed())
      return ead::cmd_pyramid_dump(static_cast<int>(pd_T), static_cast<int>(pd_M),
                                   static_cast<int>(pd_u), pd_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ead::kExitUsage;
  }
  return ead::kExitUsage;
}
