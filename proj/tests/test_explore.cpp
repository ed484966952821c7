#include <algorithm>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fr3e/explore.hpp"

using namespace fr3e;

namespace {

PolicyConfig test_policy_cfg() {
  PolicyConfig cfg;
  cfg.arch = PolicyArch::tabular_softmax;
  cfg.vocab_size = 2;
  cfg.context_window = 4;
  cfg.table_rows = 1024;
  cfg.init_scale = 0.4;
  return cfg;
}

EnvConfig parity6() {
  EnvConfig env;
  env.family = EnvFamily::parity_sum;
  env.prompt_len = 6;
  env.max_response_len = 6;
  return env;
}

PromptGroup group_with_rewards(std::initializer_list<int> rewards) {
  PromptGroup g;
  for (const int r : rewards) {
    Trajectory t;
    t.response = {0};
    t.logprobs = {-0.1};
    t.entropies = {0.0};
    t.reward = r;
    g.trajectories.push_back(std::move(t));
  }
  return g;
}

}  // namespace

TEST_CASE("empirical_value is the exact mean of binary rewards") {
  CHECK(empirical_value(std::vector<int>{1, 1, 1}) == 1.0);
  CHECK(empirical_value(std::vector<int>{0, 0}) == 0.0);
  CHECK(empirical_value(std::vector<int>{1, 0, 0, 0}) == 0.25);
  CHECK(empirical_value(std::vector<int>{1, 0, 1}) == 2.0 / 3.0);
  CHECK_THROWS_AS(empirical_value(std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("classify_group distinguishes all-right, all-wrong, mixed") {
  CHECK(classify_group(std::vector<int>{1, 1}) == GroupClass::all_right);
  CHECK(classify_group(std::vector<int>{0, 0, 0}) == GroupClass::all_wrong);
  CHECK(classify_group(std::vector<int>{0, 1}) == GroupClass::mixed);
  CHECK(classify_group(std::vector<int>{1}) == GroupClass::all_right);
  CHECK_THROWS_AS(classify_group(std::vector<int>{}), std::invalid_argument);
}

TEST_CASE("partial_rollouts preserves the prefix and samples the rest") {
  Policy p(test_policy_cfg());
  rng::Stream init(31);
  p.init_params(init);
  const EnvConfig env = parity6();
  rng::Stream ps(90, rng::Tag::env_prompt, {0});
  const Prompt prompt = sample_prompt(env, 0, ps);
  rng::Stream bs(90, rng::Tag::base_rollout, {0, 0});
  const Trajectory base = generate(p, prompt, env, bs, true);
  REQUIRE(base.response.size() == 6);

  IntermediateState state;
  state.j = 1;
  state.prefix_len = 3;
  state.tokens = prompt.tokens;
  state.tokens.insert(state.tokens.end(), base.response.begin(),
                      base.response.begin() + 3);

  rng::Stream es(90, rng::Tag::explore_rollout, {0, 1});
  const RolloutGroup g = partial_rollouts(p, prompt, state, base, 5, env, es);
  CHECK(g.state_index == 1);
  CHECK(g.prefix_len == 3);
  REQUIRE(g.rollouts.size() == 5);
  REQUIRE(g.rewards.size() == 5);
  for (std::size_t m = 0; m < 5; ++m) {
    const Trajectory& t = g.rollouts[m];
    REQUIRE(t.response.size() == 6);  // prefix + continuation to terminal
    // The inherited prefix is byte-identical to the base, values included.
    for (std::size_t i = 0; i < 3; ++i) {
      CHECK(t.response[i] == base.response[i]);
      CHECK(t.logprobs[i] == base.logprobs[i]);
      CHECK(t.entropies[i] == base.entropies[i]);
    }
    CHECK(t.reward == verify(env, prompt, t.response));
    CHECK(t.reward == g.rewards[m]);
    CHECK(t.logprobs.size() == t.response.size());
    CHECK(t.entropies.size() == t.response.size());
  }
  CHECK(g.value == empirical_value(g.rewards));

  // Deterministic given the stream.
  rng::Stream es2(90, rng::Tag::explore_rollout, {0, 1});
  const RolloutGroup g2 = partial_rollouts(p, prompt, state, base, 5, env, es2);
  for (std::size_t m = 0; m < 5; ++m) CHECK(g.rollouts[m] == g2.rollouts[m]);
}

TEST_CASE("partial_rollouts at a terminal-length state copies the base") {
  Policy p(test_policy_cfg());
  rng::Stream init(32);
  p.init_params(init);
  const EnvConfig env = parity6();
  rng::Stream ps(91, rng::Tag::env_prompt, {0});
  const Prompt prompt = sample_prompt(env, 0, ps);
  rng::Stream bs(91, rng::Tag::base_rollout, {0, 0});
  const Trajectory base = generate(p, prompt, env, bs, true);

  IntermediateState state;
  state.j = 2;
  state.prefix_len = base.response.size();  // nothing left to sample
  state.tokens = prompt.tokens;
  state.tokens.insert(state.tokens.end(), base.response.begin(),
                      base.response.end());

  rng::Stream es(91, rng::Tag::explore_rollout, {0, 2});
  const RolloutGroup g = partial_rollouts(p, prompt, state, base, 3, env, es);
  for (const Trajectory& t : g.rollouts) {
    CHECK(t.response == base.response);
    CHECK(t.reward == base.reward);
  }
  CHECK(g.value == static_cast<double>(base.reward));
}

TEST_CASE("partial_rollouts validates arguments") {
  Policy p(test_policy_cfg());
  const EnvConfig env = parity6();
  Prompt prompt;
  prompt.tokens = {0, 1, 0, 1, 0, 1};
  Trajectory base;
  base.response = {0, 0, 0, 0, 0, 0};
  base.logprobs.assign(6, -0.7);
  base.entropies.assign(6, 0.6);
  IntermediateState state;
  state.j = 1;
  state.prefix_len = 2;
  state.tokens = prompt.tokens;
  state.tokens.insert(state.tokens.end(), base.response.begin(),
                      base.response.begin() + 2);
  rng::Stream s(1);
  CHECK_THROWS_AS(partial_rollouts(p, prompt, state, base, 0, env, s),
                  std::invalid_argument);
  IntermediateState bad = state;
  bad.tokens.pop_back();  // state no longer holds prompt + prefix
  CHECK_THROWS_AS(partial_rollouts(p, prompt, bad, base, 2, env, s),
                  std::invalid_argument);
}

TEST_CASE("mixed-reward states yield values strictly inside (0, 1)") {
  // A near-uniform policy on parity almost surely mixes within 32 rollouts.
  Policy p(test_policy_cfg());
  rng::Stream init(33);
  p.init_params(init);
  const EnvConfig env = parity6();
  rng::Stream ps(92, rng::Tag::env_prompt, {0});
  const Prompt prompt = sample_prompt(env, 0, ps);
  Trajectory base;
  base.response = {0, 0, 0, 0, 0, 0};
  base.logprobs.assign(6, -0.7);
  base.entropies.assign(6, 0.69);
  base.reward = verify(env, prompt, base.response);
  IntermediateState state;
  state.j = 1;
  state.prefix_len = 1;
  state.tokens = prompt.tokens;
  state.tokens.push_back(0);
  rng::Stream es(92, rng::Tag::explore_rollout, {0, 1});
  const RolloutGroup g = partial_rollouts(p, prompt, state, base, 32, env, es);
  REQUIRE(classify_group(g.rewards) == GroupClass::mixed);
  CHECK(g.value > 0.0);
  CHECK(g.value < 1.0);
  CHECK(g.value == empirical_value(g.rewards));
}

TEST_CASE("rejection_filter keeps mixed groups in order and counts drops") {
  std::vector<PromptGroup> groups;
  groups.push_back(group_with_rewards({1, 1, 1}));  // dropped: all right
  groups.push_back(group_with_rewards({0, 1, 0}));  // kept
  groups.push_back(group_with_rewards({0, 0, 0}));  // dropped: all wrong
  groups.push_back(group_with_rewards({1, 0, 1}));  // kept
  groups[1].prompt.id = 101;
  groups[3].prompt.id = 103;
  const auto [kept, dropped] = rejection_filter(std::move(groups));
  CHECK(dropped == 2);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0].prompt.id == 101);
  CHECK(kept[1].prompt.id == 103);
  // Every surviving group has reward variance > 0 by construction.
  for (const PromptGroup& g : kept) {
    std::vector<int> rewards;
    for (const Trajectory& t : g.trajectories) rewards.push_back(t.reward);
    CHECK(classify_group(rewards) == GroupClass::mixed);
  }
}

TEST_CASE("rejection_filter handles empty input and rejects tiny groups") {
  const auto [kept, dropped] = rejection_filter({});
  CHECK(kept.empty());
  CHECK(dropped == 0);
  std::vector<PromptGroup> tiny;
  tiny.push_back(group_with_rewards({1}));
  CHECK_THROWS_AS(rejection_filter(std::move(tiny)), std::invalid_argument);
}
