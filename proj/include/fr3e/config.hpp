// Flat key-value training configuration:
//
//   # comment
//   env.family = parity_sum
//   train.steps = 200
//
// Unknown keys are rejected; env.family and env.prompt_len are mandatory,
// everything else has documented defaults (see docs/FORMATS.md).

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "fr3e/envs.hpp"
#include "fr3e/learner.hpp"
#include "fr3e/policy.hpp"

namespace fr3e {

enum class Algorithm { fr3e, grpo_pp };

Algorithm parse_algorithm(const std::string& name);
const char* algorithm_name(Algorithm alg);

struct TrainSection {
  Algorithm algorithm = Algorithm::fr3e;
  int steps = 100;
  std::uint64_t seed = 0;
  Optimizer optimizer = Optimizer::sgd;
  double lr = 0.05;  // defaults to 0.05 for sgd, 0.005 for adam when unset
  int batch_groups = 64;
  int group_size = 8;
  double eps_low = 0.22;
  double eps_high = 0.28;
  int mini_epochs = 1;
  int minibatch_groups = 0;  // 0 = whole batch per update
  bool normalize_std = false;
  int max_waves_per_step = 10;
  int eval_prompts = 32;
  int eval_rollouts = 8;
  int checkpoint_every = 10;  // 0 = only the final checkpoint
};

struct Fr3eSection {
  int top_k = 3;
  int rollouts_per_state = 4;
  bool include_base_loss = true;
};

struct TrainConfig {
  EnvConfig env;
  PolicyConfig policy;  // vocab_size is copied from env
  TrainSection train;
  Fr3eSection fr3e;
};

// Both throw std::invalid_argument with the offending key/line on unknown
// keys, bad values, missing mandatory keys, or out-of-range settings.
TrainConfig parse_config_text(const std::string& text);
TrainConfig load_config(const std::filesystem::path& path);

}  // namespace fr3e
