#include "fr3e/policy.hpp"

#include <algorithm>
#include <cassert>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "fr3e/kernels.hpp"

namespace fr3e {

namespace {

std::size_t mlp_param_count(const PolicyConfig& c) {
  const std::size_t in = static_cast<std::size_t>(c.context_window) *
                         static_cast<std::size_t>(c.vocab_size);
  const std::size_t h = static_cast<std::size_t>(c.hidden_width);
  const std::size_t v = static_cast<std::size_t>(c.vocab_size);
  return in * h + h + v * h + v;
}

std::size_t arch_param_count(const PolicyConfig& c) {
  if (c.arch == PolicyArch::tabular_softmax)
    return static_cast<std::size_t>(c.table_rows) *
           static_cast<std::size_t>(c.vocab_size);
  return mlp_param_count(c);
}

}  // namespace

const char* arch_name(PolicyArch arch) {
  switch (arch) {
    case PolicyArch::tabular_softmax:
      return "tabular_softmax";
    case PolicyArch::mlp:
      return "mlp";
  }
  return "?";
}

PolicyArch parse_arch(const std::string& name) {
  if (name == "tabular_softmax") return PolicyArch::tabular_softmax;
  if (name == "mlp") return PolicyArch::mlp;
  throw std::invalid_argument("unknown policy arch: " + name);
}

Policy::Policy(const PolicyConfig& config) : config_(config) {
  if (config.vocab_size < 2)
    throw std::invalid_argument("policy vocab_size must be >= 2");
  if (config.context_window < 1)
    throw std::invalid_argument("policy.context_window must be >= 1");
  if (config.arch == PolicyArch::mlp && config.hidden_width < 1)
    throw std::invalid_argument("policy.hidden_width must be >= 1");
  if (config.arch == PolicyArch::tabular_softmax && config.table_rows < 1)
    throw std::invalid_argument("policy.table_rows must be >= 1");
  if (!(config.init_scale >= 0.0))
    throw std::invalid_argument("policy.init_scale must be >= 0");
  params_.assign(arch_param_count(config), 0.0);
}

void Policy::init_params(rng::Stream& stream) {
  for (double& p : params_) p = config_.init_scale * stream.next_normal();
}

std::size_t Policy::table_row(std::span<const TokenId> ctx) const {
  // Key over the last min(c, len) tokens, oldest to newest:
  //   key = sum over recency i of (token_i + 1) * (V+1)^i
  // The +1 keeps "slot absent" (short context) distinct from token 0, and
  // key 0 is unreachable, so row 0 serves purely as the fallback row.
  const std::size_t len = ctx.size();
  const std::size_t n =
      std::min(len, static_cast<std::size_t>(config_.context_window));
  const std::uint64_t base = static_cast<std::uint64_t>(config_.vocab_size) + 1;
  const std::uint64_t cap = ~std::uint64_t{0} / base - base;
  std::uint64_t key = 0;
  for (std::size_t i = n; i-- > 0;) {
    if (key > cap) return 0;  // saturate oversized keys into the fallback row
    key = key * base + static_cast<std::uint64_t>(ctx[len - 1 - i]) + 1;
  }
  if (key < static_cast<std::uint64_t>(config_.table_rows))
    return static_cast<std::size_t>(key);
  return 0;
}

void Policy::logits(std::span<const TokenId> ctx, std::span<double> out) const {
  const std::size_t v = static_cast<std::size_t>(config_.vocab_size);
  assert(out.size() == v);
  if (config_.arch == PolicyArch::tabular_softmax) {
    const std::size_t row = table_row(ctx);
    const double* src = params_.data() + row * v;
    std::copy(src, src + v, out.begin());
    return;
  }
  const std::size_t h = static_cast<std::size_t>(config_.hidden_width);
  const std::size_t c = static_cast<std::size_t>(config_.context_window);
  const std::size_t w2 = c * v * h + h;  // offset of W2 in the flat vector
  const std::span<const double> p = params_;

  std::vector<double> a(p.begin() + static_cast<std::ptrdiff_t>(c * v * h),
                        p.begin() + static_cast<std::ptrdiff_t>(w2));  // b1
  const std::size_t n = std::min(ctx.size(), c);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t col =
        s * v + static_cast<std::size_t>(ctx[ctx.size() - 1 - s]);
    kernels::axpy(1.0, p.subspan(col * h, h), a);
  }
  kernels::relu(a, a);
  for (std::size_t tok = 0; tok < v; ++tok) {
    out[tok] = kernels::dot(p.subspan(w2 + tok * h, h), a) +
               p[w2 + v * h + tok];  // + b2
  }
}

TokenDistribution Policy::distribution(std::span<const TokenId> ctx) const {
  const std::size_t v = static_cast<std::size_t>(config_.vocab_size);
  std::vector<double> z(v);
  logits(ctx, z);
  const double m = kernels::reduce_max(z);
  TokenDistribution d;
  d.probs.resize(v);
  const double sum = kernels::exp_shift_sum(z, m, d.probs);
  kernels::normalize(d.probs, sum, d.probs);
  return d;
}

double Policy::log_prob(std::span<const TokenId> ctx, TokenId token) const {
  const std::size_t v = static_cast<std::size_t>(config_.vocab_size);
  if (token < 0 || static_cast<std::size_t>(token) >= v)
    throw std::invalid_argument("log_prob: token outside vocabulary");
  std::vector<double> z(v);
  logits(ctx, z);
  const double m = kernels::reduce_max(z);
  std::vector<double> e(v);
  const double sum = kernels::exp_shift_sum(z, m, e);
  // z[token] - m <= 0 and sum >= 1 exactly, so the result is never positive.
  return (z[static_cast<std::size_t>(token)] - m) - std::log(sum);
}

void Policy::grad_log_prob(std::span<const TokenId> ctx, TokenId token,
                           std::span<double> grad_out) const {
  assert(grad_out.size() == params_.size());
  std::fill(grad_out.begin(), grad_out.end(), 0.0);
  accumulate_grad_log_prob(ctx, token, 1.0, grad_out);
}

void Policy::accumulate_grad_log_prob(std::span<const TokenId> ctx,
                                      TokenId token, double scale,
                                      std::span<double> acc) const {
  const std::size_t v = static_cast<std::size_t>(config_.vocab_size);
  if (token < 0 || static_cast<std::size_t>(token) >= v)
    throw std::invalid_argument("grad_log_prob: token outside vocabulary");
  assert(acc.size() == params_.size());

  if (config_.arch == PolicyArch::tabular_softmax) {
    const TokenDistribution d = distribution(ctx);
    // d log pi / d z_v over the active row: 1[v = token] - p_v; all other
    // rows have zero gradient.
    const std::size_t row = table_row(ctx);
    double* out = acc.data() + row * v;
    for (std::size_t tok = 0; tok < v; ++tok) {
      const double ind = tok == static_cast<std::size_t>(token) ? 1.0 : 0.0;
      out[tok] += scale * (ind - d.probs[tok]);
    }
    return;
  }

  // MLP: rerun the forward pass keeping pre-activations, then backprop
  // through logits -> W2/b2 -> relu -> W1/b1. Only the onehot-active W1
  // columns receive gradient.
  const std::size_t h = static_cast<std::size_t>(config_.hidden_width);
  const std::size_t c = static_cast<std::size_t>(config_.context_window);
  const std::size_t w2 = c * v * h + h;
  const std::span<const double> p = params_;

  std::vector<double> pre(p.begin() + static_cast<std::ptrdiff_t>(c * v * h),
                          p.begin() + static_cast<std::ptrdiff_t>(w2));
  const std::size_t n = std::min(ctx.size(), c);
  std::vector<std::size_t> cols(n);
  for (std::size_t s = 0; s < n; ++s) {
    cols[s] = s * v + static_cast<std::size_t>(ctx[ctx.size() - 1 - s]);
    kernels::axpy(1.0, p.subspan(cols[s] * h, h), pre);
  }
  std::vector<double> hid(h);
  kernels::relu(pre, hid);
  std::vector<double> z(v);
  for (std::size_t tok = 0; tok < v; ++tok)
    z[tok] = kernels::dot(p.subspan(w2 + tok * h, h), hid) + p[w2 + v * h + tok];
  const double m = kernels::reduce_max(z);
  std::vector<double> probs(v);
  const double sum = kernels::exp_shift_sum(z, m, probs);
  kernels::normalize(probs, sum, probs);

  std::vector<double> dh(h, 0.0);
  for (std::size_t tok = 0; tok < v; ++tok) {
    const double ind = tok == static_cast<std::size_t>(token) ? 1.0 : 0.0;
    const double g = ind - probs[tok];  // d log pi / d z_tok
    acc[w2 + v * h + tok] += scale * g;
    kernels::axpy(scale * g, hid, acc.subspan(w2 + tok * h, h));
    kernels::axpy(g, p.subspan(w2 + tok * h, h), dh);
  }
  // relu'(x) = 1 for x > 0, 0 otherwise (0 at the kink).
  for (std::size_t i = 0; i < h; ++i) {
    if (!(pre[i] > 0.0)) dh[i] = 0.0;
  }
  kernels::axpy(scale, dh, acc.subspan(c * v * h, h));  // b1
  for (std::size_t s = 0; s < n; ++s)
    kernels::axpy(scale, dh, acc.subspan(cols[s] * h, h));
}

TokenId Policy::sample_token(std::span<const TokenId> ctx, rng::Stream& stream,
                             double* logprob, double* entropy) const {
  const std::size_t v = static_cast<std::size_t>(config_.vocab_size);
  std::vector<double> z(v);
  logits(ctx, z);
  const double m = kernels::reduce_max(z);
  std::vector<double> probs(v);
  const double sum = kernels::exp_shift_sum(z, m, probs);
  kernels::normalize(probs, sum, probs);

  const double u = stream.next_unit();
  std::size_t tok = v - 1;  // rounding gap above the final cumsum lands here
  double cum = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    cum += probs[i];
    if (u < cum) {
      tok = i;
      break;
    }
  }
  if (logprob != nullptr) *logprob = (z[tok] - m) - std::log(sum);
  if (entropy != nullptr) *entropy = kernels::entropy(probs);
  return static_cast<TokenId>(tok);
}

std::vector<double> finite_diff_grad(const Policy& policy,
                                     std::span<const TokenId> ctx,
                                     TokenId token, double h) {
  if (!(h > 0.0)) throw std::invalid_argument("finite_diff_grad: h must be > 0");
  Policy probe = policy;
  std::span<double> theta = probe.params();
  std::vector<double> grad(theta.size());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + h;
    const double hi = probe.log_prob(ctx, token);
    theta[i] = saved - h;
    const double lo = probe.log_prob(ctx, token);
    theta[i] = saved;
    grad[i] = (hi - lo) / (2.0 * h);
  }
  return grad;
}

Trajectory generate(const Policy& policy, const Prompt& prompt,
                    const EnvConfig& env, rng::Stream& stream,
                    bool record_entropy) {
  Trajectory traj;
  traj.prompt_id = prompt.id;
  std::vector<TokenId> ctx = prompt.tokens;
  while (!is_terminal(env, traj.response)) {
    double logp = 0.0;
    double ent = 0.0;
    const TokenId tok =
        policy.sample_token(ctx, stream, &logp, record_entropy ? &ent : nullptr);
    ctx.push_back(tok);
    traj.response.push_back(tok);
    traj.logprobs.push_back(logp);
    traj.entropies.push_back(ent);
  }
  traj.truncated =
      traj.response.size() < static_cast<std::size_t>(env.prompt_len);
  traj.reward = verify(env, prompt, traj.response);
  return traj;
}

void save_checkpoint(const std::filesystem::path& path, const Policy& policy,
                     std::int64_t step) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open checkpoint for writing: " +
                                     path.string());
  const PolicyConfig& c = policy.config();
  out << "fr3e_checkpoint 1\n";
  out << "arch " << arch_name(c.arch) << "\n";
  out << "vocab_size " << c.vocab_size << "\n";
  out << "context_window " << c.context_window << "\n";
  out << "hidden_width " << c.hidden_width << "\n";
  out << "table_rows " << c.table_rows << "\n";
  out << "step " << step << "\n";
  out << "param_count " << policy.param_count() << "\n";
  char buf[64];
  for (const double p : policy.params()) {
    const auto res = std::to_chars(buf, buf + sizeof(buf), p);
    out.write(buf, res.ptr - buf);
    out.put('\n');
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " +
                                     path.string());
}

namespace {

std::string expect_key(std::istream& in, const std::string& key) {
  std::string k, val;
  if (!(in >> k >> val) || k != key)
    throw std::runtime_error("checkpoint header: expected '" + key + "'");
  return val;
}

}  // namespace

std::pair<Policy, std::int64_t> load_checkpoint(
    const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path.string());
  std::string magic, version;
  if (!(in >> magic >> version) || magic != "fr3e_checkpoint" || version != "1")
    throw std::runtime_error("not a checkpoint file: " + path.string());
  PolicyConfig cfg;
  cfg.arch = parse_arch(expect_key(in, "arch"));
  cfg.vocab_size = std::stoi(expect_key(in, "vocab_size"));
  cfg.context_window = std::stoi(expect_key(in, "context_window"));
  cfg.hidden_width = std::stoi(expect_key(in, "hidden_width"));
  cfg.table_rows = std::stoi(expect_key(in, "table_rows"));
  const std::int64_t step = std::stoll(expect_key(in, "step"));
  const std::size_t count = std::stoull(expect_key(in, "param_count"));

  Policy policy(cfg);
  if (policy.param_count() != count)
    throw std::runtime_error("checkpoint param_count mismatch");
  std::span<double> theta = policy.params();
  std::string tok;
  for (std::size_t i = 0; i < count; ++i) {
    if (!(in >> tok))
      throw std::runtime_error("checkpoint truncated at parameter " +
                               std::to_string(i));
    double val = 0.0;
    const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), val);
    if (res.ec != std::errc{} || res.ptr != tok.data() + tok.size())
      throw std::runtime_error("bad parameter value in checkpoint: " + tok);
    theta[i] = val;
  }
  return {std::move(policy), step};
}

}  // namespace fr3e
