// FR3E stage 2 ("entropy-eliciting explore"): launch M partial rollouts from
// each intermediate state, score them with the verifier, estimate V(S_j) as
// the empirical mean reward, classify reward groups, and filter degenerate
// prompt groups (rejection sampling on stage-1 rewards).

#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "fr3e/core.hpp"
#include "fr3e/envs.hpp"
#include "fr3e/first_return.hpp"
#include "fr3e/policy.hpp"
#include "fr3e/rng.hpp"

namespace fr3e {

// M rollouts continuing from one intermediate state. Each rollout's response
// is the full sequence: the base-trajectory prefix (k_j tokens, with its
// recorded per-token values) followed by freshly sampled continuation tokens.
struct RolloutGroup {
  std::size_t state_index = 0;  // j >= 1
  std::size_t prefix_len = 0;   // response tokens inherited from the base
  std::vector<Trajectory> rollouts;
  std::vector<int> rewards;
  double value = 0.0;  // mean reward, exactly
};

enum class GroupClass { all_right, all_wrong, mixed };

// Exact arithmetic mean of a nonempty binary reward list.
double empirical_value(std::span<const int> rewards);

GroupClass classify_group(std::span<const int> rewards);

// Sample M continuations of base from state (which must hold base's first
// prefix_len response tokens), verify the full responses, and fill rewards
// and value. Deterministic given the stream. M >= 1.
RolloutGroup partial_rollouts(const Policy& policy, const Prompt& prompt,
                              const IntermediateState& state,
                              const Trajectory& base, int m_rollouts,
                              const EnvConfig& env, rng::Stream& stream);

// Keep only prompt groups whose stage-1 rewards contain both a 0 and a 1,
// preserving order; the second element counts the dropped (all-0 or all-1)
// groups. Every group needs >= 2 trajectories.
std::pair<std::vector<PromptGroup>, std::size_t> rejection_filter(
    std::vector<PromptGroup> groups);

}  // namespace fr3e
