#include "fr3e/explore.hpp"

#include <algorithm>
#include <stdexcept>

namespace fr3e {

double empirical_value(std::span<const int> rewards) {
  if (rewards.empty())
    throw std::invalid_argument("empirical_value: empty reward list");
  long sum = 0;
  for (const int r : rewards) sum += r;
  return static_cast<double>(sum) / static_cast<double>(rewards.size());
}

GroupClass classify_group(std::span<const int> rewards) {
  if (rewards.empty())
    throw std::invalid_argument("classify_group: empty reward list");
  const auto [lo, hi] = std::minmax_element(rewards.begin(), rewards.end());
  if (*lo == 1) return GroupClass::all_right;
  if (*hi == 0) return GroupClass::all_wrong;
  return GroupClass::mixed;
}

RolloutGroup partial_rollouts(const Policy& policy, const Prompt& prompt,
                              const IntermediateState& state,
                              const Trajectory& base, int m_rollouts,
                              const EnvConfig& env, rng::Stream& stream) {
  if (m_rollouts < 1)
    throw std::invalid_argument("partial_rollouts: M must be >= 1");
  const std::size_t pre = state.prefix_len;
  if (pre > base.response.size() ||
      state.tokens.size() != prompt.tokens.size() + pre)
    throw std::invalid_argument("partial_rollouts: state does not match base");

  RolloutGroup group;
  group.state_index = state.j;
  group.prefix_len = pre;
  group.rollouts.reserve(static_cast<std::size_t>(m_rollouts));
  group.rewards.reserve(static_cast<std::size_t>(m_rollouts));

  for (int m = 0; m < m_rollouts; ++m) {
    Trajectory roll;
    roll.prompt_id = prompt.id;
    roll.response.assign(base.response.begin(),
                         base.response.begin() + static_cast<std::ptrdiff_t>(pre));
    roll.logprobs.assign(base.logprobs.begin(),
                         base.logprobs.begin() + static_cast<std::ptrdiff_t>(pre));
    roll.entropies.assign(base.entropies.begin(),
                          base.entropies.begin() + static_cast<std::ptrdiff_t>(pre));
    std::vector<TokenId> ctx = state.tokens;
    while (!is_terminal(env, roll.response)) {
      double logp = 0.0;
      double ent = 0.0;
      const TokenId tok = policy.sample_token(ctx, stream, &logp, &ent);
      ctx.push_back(tok);
      roll.response.push_back(tok);
      roll.logprobs.push_back(logp);
      roll.entropies.push_back(ent);
    }
    roll.truncated =
        roll.response.size() < static_cast<std::size_t>(env.prompt_len);
    roll.reward = verify(env, prompt, roll.response);
    group.rewards.push_back(roll.reward);
    group.rollouts.push_back(std::move(roll));
  }
  group.value = empirical_value(group.rewards);
  return group;
}

std::pair<std::vector<PromptGroup>, std::size_t> rejection_filter(
    std::vector<PromptGroup> groups) {
  std::vector<PromptGroup> kept;
  kept.reserve(groups.size());
  std::size_t rejected = 0;
  for (PromptGroup& g : groups) {
    if (g.trajectories.size() < 2)
      throw std::invalid_argument(
          "rejection_filter: training groups need >= 2 trajectories");
    bool any0 = false;
    bool any1 = false;
    for (const Trajectory& t : g.trajectories) {
      (t.reward == 0 ? any0 : any1) = true;
    }
    if (any0 && any1) {
      kept.push_back(std::move(g));
    } else {
      ++rejected;
    }
  }
  return {std::move(kept), rejected};
}

}  // namespace fr3e
