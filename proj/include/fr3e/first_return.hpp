// FR3E stage 1 ("first return"): profile token-wise entropy along a base
// trajectory, pick the Top-K entropy-sensitive positions, cut the response
// into blocks at those positions, and build the intermediate states that
// stage 2 explores from.
//
// Positions are 1-based response indices (position k means "after emitting
// the k-th response token"), matching the block notation B_n = (t_{k_{n-1}+1}
// .. t_{k_n}) with sentinels k_0 = 0 and k_{K+1} = L.

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "fr3e/core.hpp"
#include "fr3e/policy.hpp"

namespace fr3e {

struct Segmentation {
  std::vector<std::size_t> positions;  // k_1 < ... < k_K, 1-based
  // Half-open 0-based response ranges; blocks.size() == positions.size() + 1
  // and concatenating them reproduces the response. The final block is empty
  // only in the L = 1 degenerate case where k_K = L.
  std::vector<std::pair<std::size_t, std::size_t>> blocks;
};

struct IntermediateState {
  std::size_t j = 0;            // block count included; 0 = prompt only
  std::vector<TokenId> tokens;  // prompt followed by blocks B_1..B_j
  std::size_t prefix_len = 0;   // response tokens included (= k_j)
};

// H = -sum p ln p in nats, 0 * ln 0 = 0; result in [0, ln |V|].
double token_entropy(const TokenDistribution& dist);

// Recompute the per-position next-token entropy of traj's response under the
// given policy (context = prompt then response tokens before the position).
// With the generating policy this reproduces traj.entropies exactly.
std::vector<double> entropy_profile(const Policy& policy, const Prompt& prompt,
                                    const Trajectory& traj);

// Positions of the K largest profile values, ties to the smallest index,
// sorted ascending. Position L is ineligible (an empty final block would
// make exploration from S_K vacuous), so K is clamped to L-1 when needed;
// the single exception is L = 1, where {1} is returned so there is always at
// least one position. K >= 1 and a nonempty profile are required.
std::vector<std::size_t> topk_positions(std::span<const double> profile,
                                        int top_k);

// Cut traj.response at the given positions (sorted, unique, each in [1, L];
// L only as the degenerate single-token case). Throws std::invalid_argument
// otherwise.
Segmentation segment(const Trajectory& traj,
                     std::span<const std::size_t> positions);

// States S_0..S_K: S_0 is the prompt, S_j appends blocks B_1..B_j. Each is a
// strict prefix of the next (except a degenerate empty final block).
std::vector<IntermediateState> build_states(const Prompt& prompt,
                                            const Trajectory& traj,
                                            const Segmentation& seg);

// Index of the stage-2 base trajectory: the shortest reward-1 response,
// ties to the lowest index. Throws std::invalid_argument when the group has
// no correct trajectory (callers filter for mixed rewards first).
std::size_t select_base_trajectory(const PromptGroup& group);

}  // namespace fr3e
