// Training orchestration: the two-stage FR3E loop and the GRPO++ baseline
// (same loop minus segmentation/exploration), deterministic evaluation,
// side-by-side comparison, and the log/checkpoint reports.
//
// Everything is a pure function of the config: prompts, rollouts, shuffles
// and evaluation all draw from streams derived via rng::derive, so repeat
// runs produce byte-identical outputs.

#pragma once

#include <filesystem>
#include <fstream>
#include <memory>
#include <vector>

#include "fr3e/config.hpp"
#include "fr3e/explore.hpp"
#include "fr3e/learner.hpp"
#include "fr3e/metrics.hpp"
#include "fr3e/policy.hpp"

namespace fr3e {

struct EvalResult {
  double success_rate = 0.0;        // mean reward over all rollouts
  std::vector<double> per_prompt;   // success rate per evaluation prompt
};

// Evaluate on the fixed prompt set derived from env.seed (independent of
// training progress): n_prompts prompts, rollouts_per_prompt samples each.
EvalResult evaluate(const Policy& policy, const EnvConfig& env, int n_prompts,
                    int rollouts_per_prompt);

class Trainer {
 public:
  explicit Trainer(const TrainConfig& config);

  // Enables file outputs under dir: metrics.csv, checkpoints (step 0, every
  // train.checkpoint_every steps, and the final step), and optionally
  // trajectories.jsonl. Creates the directory. Call before run_step.
  void set_output(const std::filesystem::path& dir, bool log_trajectories);

  // One full training step: generation waves -> rejection -> batch release
  // -> (FR3E only) segmentation + partial rollouts -> surrogate update(s)
  // -> evaluation. Returns the step's metrics.
  StepMetrics run_step();

  // Runs the configured number of steps.
  void run();

  const Policy& policy() const { return policy_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<StepMetrics>& history() const { return history_; }
  std::int64_t steps_done() const { return step_; }

 private:
  void write_checkpoint_if_due(bool final_step);
  void log_record(const Trajectory& traj);

  TrainConfig config_;
  Policy policy_;
  OptimState optim_;
  BatchAccumulator accum_;
  std::vector<StepMetrics> history_;
  std::int64_t step_ = 0;            // completed steps
  std::int64_t next_prompt_id_ = 0;  // global training prompt counter
  std::filesystem::path out_dir_;
  bool write_files_ = false;
  std::ofstream metrics_out_;
  std::unique_ptr<std::ofstream> traj_out_;
};

// Runs both configs (which must share env and policy sections) and writes
// compare.csv plus verdict.txt under out_dir.
void compare_runs(const TrainConfig& config_a, const TrainConfig& config_b,
                  const std::filesystem::path& out_dir);

struct TokenReportRow {
  TokenId token = 0;
  std::size_t count = 0;
  double mean_entropy = 0.0;
};

// Ranks token ids by mean recorded entropy at their emission positions over
// a trajectory log; tokens seen fewer than min_count times are dropped.
std::vector<TokenReportRow> entropy_token_report(
    const std::filesystem::path& log_path, int top_n, std::size_t min_count);

// Evaluates every checkpoint_*.txt under checkpoints_dir on the config's
// evaluation set and writes a problem x step success-rate CSV.
void write_accuracy_matrix(const std::filesystem::path& checkpoints_dir,
                           const TrainConfig& config,
                           const std::filesystem::path& out_csv);

}  // namespace fr3e
