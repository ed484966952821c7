// Command-line entry point. Subcommands:
//   train            run one training config, writing metrics/checkpoints
//   eval             evaluate a checkpoint on a config's evaluation set
//   compare          run two configs side by side into one CSV + verdict
//   report tokens    rank token ids by mean emission entropy from a log
//   report accuracy  problem x checkpoint success-rate matrix

#include <cstdio>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "fr3e/config.hpp"
#include "fr3e/harness.hpp"
#include "fr3e/kernels.hpp"
#include "fr3e/metrics.hpp"

namespace {

int cmd_train(const std::string& config_path, const std::string& out_dir,
              bool log_trajectories) {
  const fr3e::TrainConfig cfg = fr3e::load_config(config_path);
  fr3e::Trainer trainer(cfg);
  trainer.set_output(out_dir, log_trajectories);
  trainer.run();
  const auto& history = trainer.history();
  std::cout << "algorithm " << fr3e::algorithm_name(cfg.train.algorithm)
            << ", " << history.size() << " steps\n";
  if (!history.empty()) {
    std::cout << "final eval_success_rate "
              << fr3e::format_double(history.back().eval_success_rate) << "\n";
  }
  std::cout << "outputs in " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path,
             const std::string& config_path) {
  const fr3e::TrainConfig cfg = fr3e::load_config(config_path);
  auto [policy, step] = fr3e::load_checkpoint(checkpoint_path);
  const fr3e::EvalResult res = fr3e::evaluate(
      policy, cfg.env, cfg.train.eval_prompts, cfg.train.eval_rollouts);
  std::cout << "checkpoint step " << step << "\n";
  std::cout << "success_rate " << fr3e::format_double(res.success_rate) << "\n";
  for (std::size_t i = 0; i < res.per_prompt.size(); ++i) {
    std::cout << "prompt " << i << " "
              << fr3e::format_double(res.per_prompt[i]) << "\n";
  }
  return 0;
}

int cmd_compare(const std::string& config_a, const std::string& config_b,
                const std::string& out_dir) {
  fr3e::compare_runs(fr3e::load_config(config_a), fr3e::load_config(config_b),
                     out_dir);
  std::cout << "wrote " << out_dir << "/compare.csv and verdict.txt\n";
  return 0;
}

int cmd_report_tokens(const std::string& log_path, int top_n,
                      std::size_t min_count) {
  const auto rows = fr3e::entropy_token_report(log_path, top_n, min_count);
  std::cout << "token,count,mean_entropy\n";
  for (const auto& r : rows) {
    std::cout << r.token << "," << r.count << ","
              << fr3e::format_double(r.mean_entropy) << "\n";
  }
  return 0;
}

int cmd_report_accuracy(const std::string& checkpoints_dir,
                        const std::string& config_path,
                        const std::string& out_csv) {
  const fr3e::TrainConfig cfg = fr3e::load_config(config_path);
  const std::string out =
      out_csv.empty() ? checkpoints_dir + "/accuracy_matrix.csv" : out_csv;
  fr3e::write_accuracy_matrix(checkpoints_dir, cfg, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"FR3E structured-exploration RL on synthetic token tasks"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path;
  std::string config_a, config_b;
  std::string log_path, checkpoints_dir, out_csv;
  bool log_trajectories = false;
  int top_n = 20;
  std::size_t min_count = 1;

  CLI::App* train = app.add_subcommand("train", "run a training config");
  train->add_option("--config", config_path, "config file")->required();
  train->add_option("--out", out_dir, "output directory")->required();
  train->add_flag("--log-trajectories", log_trajectories,
                  "also write trajectories.jsonl");

  CLI::App* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  eval->add_option("--config", config_path, "config file")->required();

  CLI::App* compare =
      app.add_subcommand("compare", "run two configs side by side");
  compare->add_option("--config-a", config_a, "first config")->required();
  compare->add_option("--config-b", config_b, "second config")->required();
  compare->add_option("--out", out_dir, "output directory")->required();

  CLI::App* report = app.add_subcommand("report", "log/checkpoint reports");
  report->require_subcommand(1);
  CLI::App* tokens =
      report->add_subcommand("tokens", "token ids ranked by mean entropy");
  tokens->add_option("--log", log_path, "trajectories.jsonl path")->required();
  tokens->add_option("--top", top_n, "rows to print");
  tokens->add_option("--min-count", min_count, "minimum emission count");
  CLI::App* accuracy =
      report->add_subcommand("accuracy", "success-rate matrix over checkpoints");
  accuracy->add_option("--checkpoints", checkpoints_dir, "checkpoint directory")
      ->required();
  accuracy->add_option("--config", config_path, "config file")->required();
  accuracy->add_option("--out", out_csv, "output CSV path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed())
      return cmd_train(config_path, out_dir, log_trajectories);
    if (eval->parsed()) return cmd_eval(checkpoint_path, config_path);
    if (compare->parsed()) return cmd_compare(config_a, config_b, out_dir);
    if (report->parsed()) {
      if (tokens->parsed())
        return cmd_report_tokens(log_path, top_n, min_count);
      if (accuracy->parsed())
        return cmd_report_accuracy(checkpoints_dir, config_path, out_csv);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
