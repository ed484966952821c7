#include "fr3e/learner.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "fr3e/kernels.hpp"

namespace fr3e {

std::size_t AdvantageBatch::token_count() const {
  std::size_t n = 0;
  for (const BatchItem& it : items)
    n += it.traj->response.size() - it.token_begin;
  return n;
}

std::pair<double, double> AdvantageBatch::advantage_stats() const {
  const std::size_t n = token_count();
  if (n == 0) return {0.0, 0.0};
  double sum = 0.0;
  for (const BatchItem& it : items)
    sum += it.advantage *
           static_cast<double>(it.traj->response.size() - it.token_begin);
  const double mean = sum / static_cast<double>(n);
  if (n < 2) return {mean, 0.0};
  double ss = 0.0;
  for (const BatchItem& it : items) {
    const double d = it.advantage - mean;
    ss += d * d * static_cast<double>(it.traj->response.size() - it.token_begin);
  }
  return {mean, std::sqrt(ss / static_cast<double>(n - 1))};
}

std::vector<double> group_advantage(std::span<const int> rewards,
                                    bool normalize_std) {
  if (rewards.size() < 2)
    throw std::invalid_argument("group_advantage: need >= 2 rewards");
  const double mean = empirical_value(rewards);
  std::vector<double> adv(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i)
    adv[i] = static_cast<double>(rewards[i]) - mean;
  if (normalize_std) {
    double ss = 0.0;
    for (const double a : adv) ss += a * a;
    const double sd = std::sqrt(ss / static_cast<double>(adv.size() - 1));
    if (!(sd > 0.0))
      throw std::invalid_argument(
          "group_advantage: degenerate group with normalize_std set");
    for (double& a : adv) a /= sd;
  }
  return adv;
}

ModulationFactor modulation_factor(std::size_t j, double v_j, double v_prev) {
  if (!(v_j >= 0.0 && v_j <= 1.0) || !(v_prev >= 0.0 && v_prev <= 1.0))
    throw std::invalid_argument("modulation_factor: values must be in [0, 1]");
  ModulationFactor f;
  f.j = j;
  f.delta_v = v_j - v_prev;
  f.alpha = std::exp(-f.delta_v);
  return f;
}

void fr3e_advantages(const Prompt& prompt,
                     std::span<const RolloutGroup> groups, double v0,
                     AdvantageBatch& batch) {
  double v_prev = v0;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const RolloutGroup& g = groups[i];
    if (g.state_index != i + 1)
      throw std::invalid_argument(
          "fr3e_advantages: rollout groups misaligned with states");
    const ModulationFactor f =
        modulation_factor(g.state_index, g.value, v_prev);
    v_prev = g.value;
    for (std::size_t m = 0; m < g.rollouts.size(); ++m) {
      BatchItem item;
      item.prompt = &prompt;
      item.traj = &g.rollouts[m];
      item.advantage =
          f.alpha * (static_cast<double>(g.rewards[m]) - g.value);
      item.token_begin = g.prefix_len;
      batch.items.push_back(item);
    }
  }
}

LossResult clip_higher_loss(const Policy& policy, const AdvantageBatch& batch,
                            double eps_low, double eps_high) {
  const std::size_t n_tok = batch.token_count();
  if (n_tok == 0) throw std::invalid_argument("clip_higher_loss: empty batch");
  const double inv_n = 1.0 / static_cast<double>(n_tok);
  const double lo = 1.0 - eps_low;
  const double hi = 1.0 + eps_high;

  LossResult res;
  res.grad.assign(policy.param_count(), 0.0);
  std::vector<TokenId> ctx;
  for (const BatchItem& it : batch.items) {
    const std::vector<TokenId>& prompt = it.prompt->tokens;
    const std::vector<TokenId>& resp = it.traj->response;
    ctx.assign(prompt.begin(), prompt.end());
    ctx.insert(ctx.end(), resp.begin(), resp.end());
    for (std::size_t t = it.token_begin; t < resp.size(); ++t) {
      const std::span<const TokenId> view(ctx.data(), prompt.size() + t);
      const double lp_now = policy.log_prob(view, resp[t]);
      const double rho = std::exp(lp_now - it.traj->logprobs[t]);
      if (!std::isfinite(rho))
        throw std::invalid_argument(
            "clip_higher_loss: non-finite probability ratio");
      const double a = it.advantage;
      const double unclipped = rho * a;
      const double clipped = std::clamp(rho, lo, hi) * a;
      res.loss -= inv_n * std::min(unclipped, clipped);
      // Flat (zero-gradient) when the clipped constant alone attains the min.
      if (unclipped <= clipped) {
        policy.accumulate_grad_log_prob(view, resp[t], -inv_n * unclipped,
                                        res.grad);
      }
    }
  }
  return res;
}

Optimizer parse_optimizer(const std::string& name) {
  if (name == "sgd") return Optimizer::sgd;
  if (name == "adam") return Optimizer::adam;
  throw std::invalid_argument("unknown optimizer: " + name);
}

const char* optimizer_name(Optimizer opt) {
  return opt == Optimizer::sgd ? "sgd" : "adam";
}

void apply_update(std::span<double> params, std::span<const double> grad,
                  OptimState& optim) {
  if (grad.size() != params.size())
    throw std::invalid_argument("apply_update: gradient dimension mismatch");
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (!std::isfinite(grad[i]))
      throw std::invalid_argument("apply_update: non-finite gradient at index " +
                                  std::to_string(i));
  }
  if (optim.optimizer == Optimizer::sgd) {
    kernels::sgd_step(params, grad, optim.lr);
    ++optim.steps;
    return;
  }
  if (optim.m.size() != params.size()) {
    optim.m.assign(params.size(), 0.0);
    optim.v.assign(params.size(), 0.0);
  }
  ++optim.steps;
  kernels::adam_step(params, grad, optim.m, optim.v, optim.steps, optim.lr,
                     optim.beta1, optim.beta2, optim.eps);
}

void BatchAccumulator::add(std::vector<PromptGroup> groups) {
  for (PromptGroup& g : groups) buffer_.push_back(std::move(g));
}

std::vector<PromptGroup> BatchAccumulator::take(std::size_t target) {
  const std::size_t n = std::min(target, buffer_.size());
  std::vector<PromptGroup> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.push_back(std::move(buffer_.front()));
    buffer_.pop_front();
  }
  return out;
}

}  // namespace fr3e
