#include "fr3e/first_return.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "fr3e/kernels.hpp"

namespace fr3e {

double token_entropy(const TokenDistribution& dist) {
  return kernels::entropy(dist.probs);
}

std::vector<double> entropy_profile(const Policy& policy, const Prompt& prompt,
                                    const Trajectory& traj) {
  std::vector<TokenId> ctx = prompt.tokens;
  ctx.reserve(prompt.tokens.size() + traj.response.size());
  std::vector<double> profile;
  profile.reserve(traj.response.size());
  for (const TokenId tok : traj.response) {
    profile.push_back(token_entropy(policy.distribution(ctx)));
    ctx.push_back(tok);
  }
  return profile;
}

std::vector<std::size_t> topk_positions(std::span<const double> profile,
                                        int top_k) {
  const std::size_t len = profile.size();
  if (len == 0) throw std::invalid_argument("topk_positions: empty profile");
  if (top_k < 1) throw std::invalid_argument("topk_positions: K must be >= 1");
  if (len == 1) return {1};

  // Eligible positions are 1..L-1; K clamps to that count.
  const std::size_t eligible = len - 1;
  const std::size_t k_eff = std::min(static_cast<std::size_t>(top_k), eligible);
  std::vector<std::size_t> order(eligible);
  std::iota(order.begin(), order.end(), std::size_t{1});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ha = profile[a - 1];
    const double hb = profile[b - 1];
    if (ha != hb) return ha > hb;
    return a < b;  // ties to the smallest index
  });
  order.resize(k_eff);
  std::sort(order.begin(), order.end());
  return order;
}

Segmentation segment(const Trajectory& traj,
                     std::span<const std::size_t> positions) {
  const std::size_t len = traj.response.size();
  if (len == 0) throw std::invalid_argument("segment: empty response");
  std::size_t prev = 0;
  for (const std::size_t k : positions) {
    if (k <= prev) throw std::invalid_argument(
        "segment: positions must be strictly ascending and >= 1");
    if (k > len) throw std::invalid_argument("segment: position beyond response");
    prev = k;
  }
  if (!positions.empty() && positions.back() == len && len > 1)
    throw std::invalid_argument(
        "segment: position L only allowed for single-token responses");

  Segmentation seg;
  seg.positions.assign(positions.begin(), positions.end());
  seg.blocks.reserve(positions.size() + 1);
  std::size_t begin = 0;
  for (const std::size_t k : positions) {
    seg.blocks.emplace_back(begin, k);
    begin = k;
  }
  seg.blocks.emplace_back(begin, len);
  return seg;
}

std::vector<IntermediateState> build_states(const Prompt& prompt,
                                            const Trajectory& traj,
                                            const Segmentation& seg) {
  std::vector<IntermediateState> states;
  states.reserve(seg.positions.size() + 1);
  IntermediateState s0;
  s0.j = 0;
  s0.tokens = prompt.tokens;
  s0.prefix_len = 0;
  states.push_back(std::move(s0));
  for (std::size_t j = 1; j <= seg.positions.size(); ++j) {
    const std::size_t k = seg.positions[j - 1];
    IntermediateState s;
    s.j = j;
    s.prefix_len = k;
    s.tokens = prompt.tokens;
    s.tokens.insert(s.tokens.end(), traj.response.begin(),
                    traj.response.begin() + static_cast<std::ptrdiff_t>(k));
    states.push_back(std::move(s));
  }
  return states;
}

std::size_t select_base_trajectory(const PromptGroup& group) {
  std::size_t best = group.trajectories.size();
  for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
    const Trajectory& t = group.trajectories[i];
    if (t.reward != 1) continue;
    if (best == group.trajectories.size() ||
        t.response.size() < group.trajectories[best].response.size()) {
      best = i;
    }
  }
  if (best == group.trajectories.size())
    throw std::invalid_argument(
        "select_base_trajectory: group has no correct trajectory");
  return best;
}

}  // namespace fr3e
