// Advantage construction (group-relative and alpha-modulated), the
// clip-higher surrogate loss with its exact gradient, parameter updates
// (SGD / Adam), and FIFO batch accumulation across generation waves.

#pragma once

#include <cstdint>
#include <deque>
#include <span>
#include <vector>

#include "fr3e/core.hpp"
#include "fr3e/explore.hpp"
#include "fr3e/first_return.hpp"
#include "fr3e/policy.hpp"

namespace fr3e {

// One rollout's learning signal: a constant outcome-level advantage applied
// to its tokens from token_begin (0 for full trajectories, the state prefix
// length for partial rollouts — prefix tokens get no gradient from stage 2).
// Pointees must outlive the batch.
struct BatchItem {
  const Prompt* prompt = nullptr;
  const Trajectory* traj = nullptr;
  double advantage = 0.0;
  std::size_t token_begin = 0;
};

struct AdvantageBatch {
  std::vector<BatchItem> items;

  std::size_t token_count() const;
  // Mean and sample standard deviation over token-level advantage entries.
  std::pair<double, double> advantage_stats() const;
};

struct ModulationFactor {
  std::size_t j = 0;
  double delta_v = 0.0;  // V(S_j) - V(S_{j-1})
  double alpha = 1.0;    // exp(-delta_v), in [e^-1, e]
};

// A_i = r_i - mean(r); with normalize_std also divided by the sample
// standard deviation (throws on degenerate groups, which the rejection
// filter removes). Output sums to zero.
std::vector<double> group_advantage(std::span<const int> rewards,
                                    bool normalize_std);

// alpha_j = exp(-(v_j - v_prev)); both inputs must lie in [0, 1], so
// alpha is in [e^-1, e]. alpha < 1 damps states whose value improved,
// alpha > 1 amplifies stagnant or degraded ones.
ModulationFactor modulation_factor(std::size_t j, double v_j, double v_prev);

// Stage-2 advantages: every continuation token of rollout m from state j
// gets alpha_j * (r_{j,m} - V(S_j)), with alpha_1 referenced against v0
// (the stage-1 group mean). groups must be the rollout groups for states
// S_1..S_K in order. Items are appended to batch.
void fr3e_advantages(const Prompt& prompt,
                     std::span<const RolloutGroup> groups, double v0,
                     AdvantageBatch& batch);

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // d loss / d params
};

// Clipped-surrogate loss over the batch:
//   rho = exp(logprob_now - logprob_behavior) per token
//   loss = -(1/N_tok) * sum min(rho*A, clip(rho, 1-eps_low, 1+eps_high)*A)
// Gradient: a token contributes rho*A*grad_log_prob when the unclipped term
// attains the min (ties included), and nothing when the clipped constant
// does — the surrogate is flat there. Throws on an empty batch or a
// non-finite ratio.
LossResult clip_higher_loss(const Policy& policy, const AdvantageBatch& batch,
                            double eps_low, double eps_high);

enum class Optimizer { sgd, adam };

Optimizer parse_optimizer(const std::string& name);
const char* optimizer_name(Optimizer opt);

struct OptimState {
  Optimizer optimizer = Optimizer::sgd;
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t steps = 0;     // Adam bias-correction counter
  std::vector<double> m, v;   // Adam moments, sized lazily
};

// One descent step on the loss gradient. Rejects non-finite gradient
// entries with an index diagnostic.
void apply_update(std::span<double> params, std::span<const double> grad,
                  OptimState& optim);

// FIFO buffer of post-rejection prompt groups across generation waves.
class BatchAccumulator {
 public:
  void add(std::vector<PromptGroup> groups);
  std::size_t buffered() const { return buffer_.size(); }
  bool ready(std::size_t target) const { return buffer_.size() >= target; }
  // Pops up to `target` groups in arrival order.
  std::vector<PromptGroup> take(std::size_t target);

 private:
  std::deque<PromptGroup> buffer_;
};

}  // namespace fr3e
