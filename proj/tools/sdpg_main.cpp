// Command-line front end: train / eval / verify / plot.

#include <cstdio>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sdpg/checkpoint.hpp"
#include "sdpg/config.hpp"
#include "sdpg/oracle.hpp"
#include "sdpg/plot.hpp"
#include "sdpg/trainer.hpp"

namespace {

int cmd_train(const std::string& config_path, long seed_override, const std::string& out_override,
              int workers) {
  sdpg::TrainConfig cfg;
  try {
    cfg = sdpg::parse_config_file(config_path);
  } catch (const sdpg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }
  if (seed_override >= 0) cfg.seed = static_cast<uint64_t>(seed_override);
  if (!out_override.empty()) cfg.out_dir = out_override;
  try {
    sdpg::train::Trainer trainer(cfg, workers);
    trainer.run();
  } catch (const std::exception& e) {
    std::cerr << "train failed: " << e.what() << "\n";
    return 1;
  }
  std::cout << "training complete; artifacts in " << cfg.out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt_path, const std::string& env_name, int episodes, long seed,
             const std::string& out_csv) {
  sdpg::ckpt::Checkpoint c;
  try {
    c = sdpg::ckpt::load_checkpoint(ckpt_path);
  } catch (const std::exception& e) {
    std::cerr << "eval failed: " << e.what() << "\n";
    return 2;
  }
  if (!env_name.empty()) {
    try {
      if (sdpg::envs::env_from_name(env_name) != c.env_id) {
        std::cerr << "eval failed: checkpoint was trained on " << sdpg::envs::env_name(c.env_id)
                  << ", not " << env_name << "\n";
        return 2;
      }
    } catch (const std::exception& e) {
      std::cerr << "eval failed: " << e.what() << "\n";
      return 2;
    }
  }
  try {
    const auto result =
        sdpg::train::evaluate_policy(c, episodes, static_cast<uint64_t>(seed < 0 ? 0 : seed));
    sdpg::train::write_eval_csv(result, out_csv);
    std::printf("episodes          %zu\n", result.returns.size());
    std::printf("mean return       %.6f\n", result.mean_return);
    std::printf("std return        %.6f\n", result.std_return);
    std::printf("success rate      %.3f\n", result.success_rate);
  } catch (const std::exception& e) {
    std::cerr << "eval failed: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

int cmd_verify(long seed, const std::string& out_csv) {
  const auto report = sdpg::oracle::run_verification(static_cast<uint64_t>(seed < 0 ? 0 : seed));
  sdpg::oracle::print_report(report, std::cout);
  try {
    sdpg::oracle::write_report_csv(report, out_csv);
  } catch (const std::exception& e) {
    std::cerr << "verify: " << e.what() << "\n";
    return 1;
  }
  return sdpg::oracle::all_passed(report) ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& csv_paths, const std::string& out_svg) {
  std::vector<sdpg::plot::Curve> curves;
  try {
    for (const auto& path : csv_paths) curves.push_back(sdpg::plot::read_metrics_curve(path));
    sdpg::plot::write_learning_curves(curves, out_svg);
  } catch (const std::exception& e) {
    std::cerr << "plot failed: " << e.what() << "\n";
    return 1;
  }
  std::cout << "wrote " << out_svg << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SDPG trainer: zeroth-order smoothed policy gradients on toy control tasks"};
  app.require_subcommand(1);

  auto* train = app.add_subcommand("train", "run the training loop from a config file");
  std::string config_path, train_out;
  long train_seed = -1;
  int workers = 1;
  train->add_option("--config", config_path, "config file path")->required();
  train->add_option("--seed", train_seed, "override the config seed");
  train->add_option("--out", train_out, "override the output directory");
  train->add_option("--workers", workers, "internal worker threads (results are identical for any count)");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint with mean actions");
  std::string ckpt_path, eval_env, eval_csv = "eval.csv";
  int episodes = 10;
  long eval_seed = 0;
  eval->add_option("--ckpt", ckpt_path, "checkpoint path")->required();
  eval->add_option("--env", eval_env, "environment id the checkpoint must match");
  eval->add_option("--episodes", episodes, "number of evaluation episodes");
  eval->add_option("--seed", eval_seed, "evaluation seed");
  eval->add_option("--out", eval_csv, "per-episode CSV output path");

  auto* verify = app.add_subcommand("verify", "run the numerical equivalence checks");
  long verify_seed = 0;
  std::string verify_csv = "verify_report.csv";
  verify->add_option("--seed", verify_seed, "check seed");
  verify->add_option("--out", verify_csv, "report CSV output path");

  auto* plot = app.add_subcommand("plot", "render learning curves from metrics.csv files");
  std::vector<std::string> plot_inputs;
  std::string plot_out;
  plot->add_option("csv", plot_inputs, "metrics.csv paths")->required()->expected(-1);
  plot->add_option("--out", plot_out, "output SVG path")->required();

  CLI11_PARSE(app, argc, argv);

  if (train->parsed()) return cmd_train(config_path, train_seed, train_out, workers);
  if (eval->parsed()) return cmd_eval(ckpt_path, eval_env, episodes, eval_seed, eval_csv);
  if (verify->parsed()) return cmd_verify(verify_seed, verify_csv);
  if (plot->parsed()) return cmd_plot(plot_inputs, plot_out);
  return 1;
}
