// Autoregressive token policies over a bounded context window, with exact
// analytic log-probability gradients and an independent finite-difference
// oracle. Two architectures share one flat parameter vector interface:
//
//   tabular_softmax  logits are a learned table row keyed by the integer
//                    encoding of the last c context tokens; out-of-table
//                    keys fall back to shared row 0
//   mlp              logits = W2 . relu(W1 . onehot(last c tokens) + b1) + b2
//
// MLP parameter layout (flat, in order):
//   W1: c*V rows of h   (input-column major: param[col*h + i])
//   b1: h
//   W2: V rows of h     (param[w2 + v*h + i])
//   b2: V
// Onehot slot 0 is the most recent context token, slot s the token s steps
// back; missing slots (context shorter than c) stay zero.

#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "fr3e/core.hpp"
#include "fr3e/envs.hpp"
#include "fr3e/rng.hpp"

namespace fr3e {

enum class PolicyArch { tabular_softmax, mlp };

const char* arch_name(PolicyArch arch);
PolicyArch parse_arch(const std::string& name);

struct PolicyConfig {
  PolicyArch arch = PolicyArch::tabular_softmax;
  int vocab_size = 2;
  int context_window = 8;    // c >= 1
  int hidden_width = 32;     // mlp only
  int table_rows = 16384;    // tabular only; row 0 is the shared fallback
  double init_scale = 0.1;   // params ~ N(0, init_scale^2); 0 = all-zero
  std::uint64_t seed = 0;
};

struct TokenDistribution {
  std::vector<double> probs;  // length |V|, entries >= 0, sums to 1
};

class Policy {
 public:
  // Throws std::invalid_argument on bad config (vocab_size < 2,
  // context_window < 1, non-positive widths). Parameters start at zero;
  // call init_params for the seeded random init.
  explicit Policy(const PolicyConfig& config);

  const PolicyConfig& config() const { return config_; }
  std::size_t param_count() const { return params_.size(); }
  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  // iid N(0, init_scale^2) draws in parameter order.
  void init_params(rng::Stream& stream);

  // Next-token distribution given the full context (prompt then response so
  // far); only the last context_window tokens influence the result.
  TokenDistribution distribution(std::span<const TokenId> ctx) const;

  // log pi(token | ctx), evaluated in log-space (max-subtracted log-sum-exp);
  // always <= 0.
  double log_prob(std::span<const TokenId> ctx, TokenId token) const;

  // Dense gradient of log_prob with respect to every parameter.
  void grad_log_prob(std::span<const TokenId> ctx, TokenId token,
                     std::span<double> grad_out) const;

  // acc += scale * grad log pi(token | ctx). Touches only the parameters the
  // context activates, which is what batch gradient assembly uses.
  void accumulate_grad_log_prob(std::span<const TokenId> ctx, TokenId token,
                                double scale, std::span<double> acc) const;

  // One sampling step: inverse-CDF over the distribution in ascending token
  // id order, consuming exactly one uniform draw. Fills the sampled token's
  // log-prob and the distribution's entropy (nats).
  TokenId sample_token(std::span<const TokenId> ctx, rng::Stream& stream,
                       double* logprob, double* entropy) const;

 private:
  void logits(std::span<const TokenId> ctx, std::span<double> out) const;
  std::size_t table_row(std::span<const TokenId> ctx) const;

  PolicyConfig config_;
  std::vector<double> params_;
};

// Central differences (f(t+h) - f(t-h)) / 2h through log_prob, per
// coordinate. Independent oracle for grad_log_prob; h > 0 required.
std::vector<double> finite_diff_grad(const Policy& policy,
                                     std::span<const TokenId> ctx,
                                     TokenId token, double h);

// Sample one full episode: autoregressive sampling from the prompt until the
// environment is terminal, then verify. Per-token log-probs are always
// recorded; entropies are recorded when record_entropy is set (zeros
// otherwise, keeping the per-token arrays aligned).
Trajectory generate(const Policy& policy, const Prompt& prompt,
                    const EnvConfig& env, rng::Stream& stream,
                    bool record_entropy);

// Text checkpoint: arch header plus one parameter per line, shortest
// round-trip decimals. load returns the policy and the training step stored
// in the header. Throws std::runtime_error on I/O or format errors.
void save_checkpoint(const std::filesystem::path& path, const Policy& policy,
                     std::int64_t step);
std::pair<Policy, std::int64_t> load_checkpoint(
    const std::filesystem::path& path);

}  // namespace fr3e
