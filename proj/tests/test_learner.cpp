#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "doctest.h"
#include "fr3e/learner.hpp"

using namespace fr3e;

namespace {

Trajectory make_traj(std::vector<TokenId> resp, double behavior_logprob,
                     int reward = 1) {
  Trajectory t;
  t.response = std::move(resp);
  t.logprobs.assign(t.response.size(), behavior_logprob);
  t.entropies.assign(t.response.size(), 0.0);
  t.reward = reward;
  return t;
}

PolicyConfig uniform_cfg() {
  PolicyConfig cfg;
  cfg.arch = PolicyArch::tabular_softmax;
  cfg.vocab_size = 2;
  cfg.context_window = 2;
  cfg.table_rows = 16;
  return cfg;
}

}  // namespace

TEST_CASE("group_advantage centers rewards exactly") {
  const std::vector<double> a = group_advantage(std::vector<int>{1, 0}, false);
  CHECK(a == std::vector<double>{0.5, -0.5});
  const std::vector<double> b =
      group_advantage(std::vector<int>{1, 1, 1, 0}, false);
  CHECK(b == std::vector<double>{0.25, 0.25, 0.25, -0.75});
  const std::vector<double> c = group_advantage(std::vector<int>{1, 1}, false);
  CHECK(c == std::vector<double>{0.0, 0.0});
  CHECK_THROWS_AS(group_advantage(std::vector<int>{1}, false),
                  std::invalid_argument);
}

TEST_CASE("group_advantage std-normalization uses the sample deviation") {
  // {1,0}: deviations +-0.5, sample variance 0.5 -> advantages +-1/sqrt(2).
  const std::vector<double> a = group_advantage(std::vector<int>{1, 0}, true);
  CHECK(a[0] == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(1e-15));
  CHECK(a[1] == doctest::Approx(-1.0 / std::sqrt(2.0)).epsilon(1e-15));
  // {1,1,0,0}: deviations +-0.5, sample variance 1/3 -> +-sqrt(3)/2.
  const std::vector<double> b =
      group_advantage(std::vector<int>{1, 1, 0, 0}, true);
  CHECK(b[0] == doctest::Approx(std::sqrt(3.0) / 2.0).epsilon(1e-15));
  CHECK(b[3] == doctest::Approx(-std::sqrt(3.0) / 2.0).epsilon(1e-15));
  CHECK_THROWS_AS(group_advantage(std::vector<int>{1, 1}, true),
                  std::invalid_argument);
  CHECK_THROWS_AS(group_advantage(std::vector<int>{0, 0, 0}, true),
                  std::invalid_argument);
}

TEST_CASE("group advantages always sum to zero") {
  rng::Stream s(515);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + s.next_below(15);
    std::vector<int> rewards(n);
    for (int& r : rewards) r = static_cast<int>(s.next_below(2));
    const bool mixed =
        std::count(rewards.begin(), rewards.end(), 1) != 0 &&
        std::count(rewards.begin(), rewards.end(), 0) != 0;
    const std::vector<double> adv = group_advantage(rewards, false);
    CHECK(std::abs(std::accumulate(adv.begin(), adv.end(), 0.0)) < 1e-12);
    if (mixed) {
      const std::vector<double> norm = group_advantage(rewards, true);
      CHECK(std::abs(std::accumulate(norm.begin(), norm.end(), 0.0)) < 1e-12);
    }
  }
}

TEST_CASE("modulation_factor is exp of the negated value delta") {
  const ModulationFactor up = modulation_factor(1, 1.0, 0.0);
  CHECK(up.alpha == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(up.delta_v == 1.0);
  const ModulationFactor down = modulation_factor(2, 0.0, 1.0);
  CHECK(down.alpha == doctest::Approx(std::exp(1.0)).epsilon(1e-15));
  const ModulationFactor flat = modulation_factor(3, 0.4, 0.4);
  CHECK(flat.alpha == 1.0);
  // Bounds over a value grid: alpha stays within [1/e, e].
  for (int a = 0; a <= 10; ++a) {
    for (int b = 0; b <= 10; ++b) {
      const ModulationFactor f =
          modulation_factor(1, a / 10.0, b / 10.0);
      CHECK(f.alpha >= std::exp(-1.0));
      CHECK(f.alpha <= std::exp(1.0));
      CHECK(f.alpha == std::exp(-(a / 10.0 - b / 10.0)));
    }
  }
  CHECK_THROWS_AS(modulation_factor(1, 1.2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(modulation_factor(1, 0.5, -0.1), std::invalid_argument);
}

TEST_CASE("fr3e_advantages modulates continuation tokens per state") {
  Prompt prompt;
  prompt.id = 7;
  prompt.tokens = {0, 1};

  RolloutGroup g1;
  g1.state_index = 1;
  g1.prefix_len = 2;
  g1.rollouts.push_back(make_traj({0, 0, 1, 1}, -0.5, 1));
  g1.rollouts.push_back(make_traj({0, 0, 0, 0}, -0.5, 0));
  g1.rewards = {1, 0};
  g1.value = 0.5;

  RolloutGroup g2;
  g2.state_index = 2;
  g2.prefix_len = 3;
  g2.rollouts.push_back(make_traj({0, 0, 1, 1}, -0.5, 1));
  g2.rollouts.push_back(make_traj({0, 0, 1, 0}, -0.5, 1));
  g2.rollouts.push_back(make_traj({0, 0, 1, 1}, -0.5, 1));
  g2.rollouts.push_back(make_traj({0, 0, 1, 0}, -0.5, 0));
  g2.rewards = {1, 1, 1, 0};
  g2.value = 0.75;

  const std::vector<RolloutGroup> groups{g1, g2};
  AdvantageBatch batch;
  const double v0 = 0.25;
  fr3e_advantages(prompt, groups, v0, batch);
  REQUIRE(batch.items.size() == 6);

  const double a1 = std::exp(-(0.5 - 0.25));   // alpha for state 1
  const double a2 = std::exp(-(0.75 - 0.5));   // alpha for state 2
  CHECK(batch.items[0].advantage == doctest::Approx(a1 * 0.5).epsilon(1e-15));
  CHECK(batch.items[1].advantage == doctest::Approx(-a1 * 0.5).epsilon(1e-15));
  CHECK(batch.items[2].advantage == doctest::Approx(a2 * 0.25).epsilon(1e-15));
  CHECK(batch.items[5].advantage == doctest::Approx(-a2 * 0.75).epsilon(1e-15));
  for (int i = 0; i < 2; ++i) CHECK(batch.items[i].token_begin == 2);
  for (int i = 2; i < 6; ++i)
    CHECK(batch.items[static_cast<std::size_t>(i)].token_begin == 3);
  for (const BatchItem& it : batch.items) CHECK(it.prompt == &prompt);
}

TEST_CASE("fr3e_advantages with flat values reduces to plain centering") {
  Prompt prompt;
  prompt.tokens = {1};
  RolloutGroup g;
  g.state_index = 1;
  g.prefix_len = 1;
  g.rollouts.push_back(make_traj({1, 1}, -0.2, 1));
  g.rollouts.push_back(make_traj({1, 0}, -0.2, 0));
  g.rewards = {1, 0};
  g.value = 0.5;
  AdvantageBatch batch;
  fr3e_advantages(prompt, std::vector<RolloutGroup>{g}, 0.5, batch);
  CHECK(batch.items[0].advantage == 0.5);  // alpha = exp(0) = 1 exactly
  CHECK(batch.items[1].advantage == -0.5);
}

TEST_CASE("fr3e_advantages rejects misaligned rollout groups") {
  Prompt prompt;
  RolloutGroup g;
  g.state_index = 2;  // missing state 1
  g.rollouts.push_back(make_traj({1}, -0.1, 1));
  g.rewards = {1};
  g.value = 1.0;
  AdvantageBatch batch;
  CHECK_THROWS_AS(
      fr3e_advantages(prompt, std::vector<RolloutGroup>{g}, 0.5, batch),
      std::invalid_argument);
}

TEST_CASE("advantage_stats weights items by their token counts") {
  Prompt prompt;
  prompt.tokens = {0};
  const Trajectory t1 = make_traj({0, 1, 0}, -0.5);  // 2 tokens from begin 1
  const Trajectory t2 = make_traj({1, 1}, -0.5);     // 2 tokens from begin 0
  AdvantageBatch batch;
  batch.items.push_back({&prompt, &t1, 0.5, 1});
  batch.items.push_back({&prompt, &t2, -0.25, 0});
  CHECK(batch.token_count() == 4);
  const auto [mean, sd] = batch.advantage_stats();
  CHECK(mean == doctest::Approx(0.125).epsilon(1e-15));
  // Deviations +-0.375 on 4 tokens: ss = 0.5625, sample sd = sqrt(0.1875).
  CHECK(sd == doctest::Approx(std::sqrt(0.1875)).epsilon(1e-14));
  const AdvantageBatch empty;
  CHECK(empty.token_count() == 0);
  CHECK(empty.advantage_stats() == std::pair<double, double>{0.0, 0.0});
}

TEST_CASE("clip_higher_loss at ratio 1 is plain policy gradient") {
  Policy p(uniform_cfg());  // uniform: log pi = -ln 2 everywhere
  Prompt prompt;
  prompt.tokens = {0};
  const double lp = -std::log(2.0);
  const Trajectory t = make_traj({1, 0}, lp, 1);
  AdvantageBatch batch;
  batch.items.push_back({&prompt, &t, 1.0, 0});
  const LossResult res = clip_higher_loss(p, batch, 0.22, 0.28);
  // min(1*A, clip(1)*A) = A per token; loss = -(1/2)(1 + 1) = -1.
  CHECK(res.loss == doctest::Approx(-1.0).epsilon(1e-14));
  // Exact gradient: -(1/2) * sum grad log pi with A = 1, rho = 1.
  std::vector<double> want(p.param_count(), 0.0);
  p.accumulate_grad_log_prob(std::vector<TokenId>{0}, 1, -0.5, want);
  p.accumulate_grad_log_prob(std::vector<TokenId>{0, 1}, 0, -0.5, want);
  REQUIRE(res.grad.size() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    CHECK(res.grad[i] == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("clip-higher asymmetry: the min rule and the flat branch") {
  Policy p(uniform_cfg());
  Prompt prompt;
  prompt.tokens = {0};
  const double lp_now = -std::log(2.0);

  // rho = 1.5, A = +1: clipped at 1.28, surrogate flat -> zero gradient.
  {
    const Trajectory t = make_traj({1}, lp_now - std::log(1.5), 1);
    AdvantageBatch batch;
    batch.items.push_back({&prompt, &t, 1.0, 0});
    const LossResult res = clip_higher_loss(p, batch, 0.22, 0.28);
    CHECK(res.loss == doctest::Approx(-1.28).epsilon(1e-12));
    for (const double g : res.grad) CHECK(g == 0.0);
  }
  // rho = 1.5, A = -1: unclipped -1.5 attains the min -> gradient flows.
  {
    const Trajectory t = make_traj({1}, lp_now - std::log(1.5), 0);
    AdvantageBatch batch;
    batch.items.push_back({&prompt, &t, -1.0, 0});
    const LossResult res = clip_higher_loss(p, batch, 0.22, 0.28);
    CHECK(res.loss == doctest::Approx(1.5).epsilon(1e-12));
    // scale = -(1/1) * rho * A = 1.5 on grad log pi(1 | {0}) = (-0.5, 0.5).
    bool any = false;
    for (const double g : res.grad) any = any || g != 0.0;
    CHECK(any);
    std::vector<double> want(p.param_count(), 0.0);
    p.accumulate_grad_log_prob(std::vector<TokenId>{0}, 1, 1.5, want);
    for (std::size_t i = 0; i < want.size(); ++i)
      CHECK(res.grad[i] == doctest::Approx(want[i]).epsilon(1e-12));
  }
  // rho = 0.5, A = -1: clipped -(1-0.22) = -0.78 attains the min -> flat.
  {
    const Trajectory t = make_traj({1}, lp_now + std::log(2.0), 0);
    AdvantageBatch batch;
    batch.items.push_back({&prompt, &t, -1.0, 0});
    const LossResult res = clip_higher_loss(p, batch, 0.22, 0.28);
    CHECK(res.loss == doctest::Approx(0.78).epsilon(1e-12));
    for (const double g : res.grad) CHECK(g == 0.0);
  }
  // rho = 1.25, A = +1: inside the raised ceiling, still unclipped.
  {
    const Trajectory t = make_traj({1}, lp_now - std::log(1.25), 1);
    AdvantageBatch batch;
    batch.items.push_back({&prompt, &t, 1.0, 0});
    const LossResult res = clip_higher_loss(p, batch, 0.22, 0.28);
    CHECK(res.loss == doctest::Approx(-1.25).epsilon(1e-12));
    bool any = false;
    for (const double g : res.grad) any = any || g != 0.0;
    CHECK(any);  // a symmetric 0.22 band would have flattened this token
  }
}

TEST_CASE("clip_higher_loss rejects empty batches and non-finite ratios") {
  Policy p(uniform_cfg());
  const AdvantageBatch empty;
  CHECK_THROWS_AS(clip_higher_loss(p, empty, 0.22, 0.28),
                  std::invalid_argument);
  Prompt prompt;
  prompt.tokens = {0};
  const Trajectory t = make_traj({1}, -2000.0, 1);  // rho = exp(+huge) = inf
  AdvantageBatch batch;
  batch.items.push_back({&prompt, &t, 1.0, 0});
  CHECK_THROWS_AS(clip_higher_loss(p, batch, 0.22, 0.28),
                  std::invalid_argument);
}

TEST_CASE("clip_higher_loss gradient matches central differences") {
  PolicyConfig cfg = uniform_cfg();
  cfg.init_scale = 0.5;
  Policy p(cfg);
  rng::Stream init(606);
  p.init_params(init);

  EnvConfig env;
  env.family = EnvFamily::parity_sum;
  env.prompt_len = 4;
  env.max_response_len = 4;
  std::vector<Prompt> prompts;
  std::vector<Trajectory> trajs;
  for (int i = 0; i < 3; ++i) {
    rng::Stream ps(21, rng::Tag::env_prompt, {static_cast<std::uint64_t>(i)});
    prompts.push_back(sample_prompt(env, i, ps));
    rng::Stream rs(21, rng::Tag::base_rollout,
                   {static_cast<std::uint64_t>(i), 0});
    trajs.push_back(generate(p, prompts.back(), env, rs, false));
  }
  // Shift one behavior log-prob so a non-unit ratio path is exercised too.
  for (double& lp : trajs[1].logprobs) lp -= 0.1;

  AdvantageBatch batch;
  batch.items.push_back({&prompts[0], &trajs[0], 0.7, 0});
  batch.items.push_back({&prompts[1], &trajs[1], -0.4, 0});
  batch.items.push_back({&prompts[2], &trajs[2], 0.3, 2});  // partial rollout
  const LossResult res = clip_higher_loss(p, batch, 0.22, 0.28);

  const double h = 1e-5;
  Policy probe = p;
  std::span<double> theta = probe.params();
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double hi = clip_higher_loss(probe, batch, 0.22, 0.28).loss;
    theta[i] = saved - h;
    const double lo = clip_higher_loss(probe, batch, 0.22, 0.28).loss;
    theta[i] = saved;
    const double fd = (hi - lo) / (2.0 * h);
    CHECK(std::abs(res.grad[i] - fd) <= 1e-6 + 1e-4 * std::abs(fd));
  }
}

TEST_CASE("apply_update: SGD follows the textbook rule") {
  std::vector<double> params{1.0, 2.0, -3.0};
  const std::vector<double> grad{0.5, -1.0, 0.0};
  OptimState opt;
  opt.optimizer = Optimizer::sgd;
  opt.lr = 0.1;
  apply_update(params, grad, opt);
  CHECK(params[0] == doctest::Approx(0.95).epsilon(1e-15));
  CHECK(params[1] == doctest::Approx(2.1).epsilon(1e-15));
  CHECK(params[2] == -3.0);
  CHECK(opt.steps == 1);
}

TEST_CASE("apply_update: zero gradient is a no-op for both optimizers") {
  for (const Optimizer o : {Optimizer::sgd, Optimizer::adam}) {
    std::vector<double> params{0.25, -0.75};
    const std::vector<double> zero{0.0, 0.0};
    OptimState opt;
    opt.optimizer = o;
    opt.lr = 0.05;
    apply_update(params, zero, opt);
    CHECK(params[0] == 0.25);
    CHECK(params[1] == -0.75);
  }
}

TEST_CASE("apply_update: first Adam step approaches lr * sign(grad)") {
  std::vector<double> params{0.0};
  const std::vector<double> grad{0.5};
  OptimState opt;
  opt.optimizer = Optimizer::adam;
  opt.lr = 0.01;
  apply_update(params, grad, opt);
  // mhat = g, vhat = g^2 after bias correction -> step = lr*g/(|g|+eps).
  CHECK(params[0] == doctest::Approx(-0.01 * 0.5 / (0.5 + 1e-8))
                         .epsilon(1e-12));
  CHECK(opt.m.size() == 1);
  CHECK(opt.steps == 1);
}

TEST_CASE("apply_update validates inputs") {
  std::vector<double> params{1.0, 1.0};
  OptimState opt;
  CHECK_THROWS_AS(apply_update(params, std::vector<double>{1.0}, opt),
                  std::invalid_argument);
  try {
    const std::vector<double> bad{0.0, std::nan("")};
    apply_update(params, bad, opt);
    FAIL("expected a throw");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("index 1") != std::string::npos);
  }
}

TEST_CASE("apply_update is deterministic") {
  auto run = [] {
    std::vector<double> params{0.1, -0.2, 0.3};
    OptimState opt;
    opt.optimizer = Optimizer::adam;
    opt.lr = 0.004;
    for (int s = 0; s < 25; ++s) {
      const std::vector<double> grad{0.01 * s, -0.02, 0.5 / (s + 1)};
      apply_update(params, grad, opt);
    }
    return params;
  };
  const std::vector<double> a = run();
  const std::vector<double> b = run();
  CHECK(a == b);
}

TEST_CASE("batch accumulator is FIFO across waves") {
  auto group_with_id = [](int id) {
    PromptGroup g;
    g.prompt.id = id;
    return g;
  };
  BatchAccumulator acc;
  CHECK(!acc.ready(4));
  std::vector<PromptGroup> wave1;
  for (int i = 0; i < 3; ++i) wave1.push_back(group_with_id(i));
  acc.add(std::move(wave1));
  CHECK(acc.buffered() == 3);
  CHECK(!acc.ready(4));
  std::vector<PromptGroup> wave2;
  for (int i = 3; i < 6; ++i) wave2.push_back(group_with_id(i));
  acc.add(std::move(wave2));
  CHECK(acc.ready(4));
  const std::vector<PromptGroup> batch = acc.take(4);
  REQUIRE(batch.size() == 4);
  for (int i = 0; i < 4; ++i) CHECK(batch[static_cast<std::size_t>(i)].prompt.id == i);
  CHECK(acc.buffered() == 2);
  // Short take drains what is there.
  const std::vector<PromptGroup> rest = acc.take(10);
  REQUIRE(rest.size() == 2);
  CHECK(rest[0].prompt.id == 4);
  CHECK(rest[1].prompt.id == 5);
  CHECK(acc.buffered() == 0);
  CHECK(acc.take(3).empty());
}
