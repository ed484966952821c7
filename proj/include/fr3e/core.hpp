// Shared domain types: prompts, trajectories, groups, and the line-record
// serialization used by the trajectory log. Token ids are opaque dense
// integers in [0, vocab_size); there is no tokenizer anywhere.

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace fr3e {

using TokenId = std::int32_t;

struct Prompt {
  std::int64_t id = 0;
  std::vector<TokenId> tokens;  // nonempty
  std::string env_tag;
};

// One sampled response. logprobs/entropies are per response token, recorded
// under the generating policy; entropies are in nats. reward is the binary
// terminal verifier output.
struct Trajectory {
  std::int64_t prompt_id = 0;
  std::vector<TokenId> response;
  std::vector<double> logprobs;
  std::vector<double> entropies;
  int reward = 0;
  bool truncated = false;

  bool operator==(const Trajectory&) const = default;
};

// G independent samples for the same prompt.
struct PromptGroup {
  Prompt prompt;
  std::vector<Trajectory> trajectories;
};

// Log entry: a trajectory plus when and under which policy snapshot it was
// generated. snapshot equals the training step of the generating parameters.
struct TrajectoryRecord {
  std::int64_t step = 0;
  std::int64_t snapshot = 0;
  Trajectory traj;

  bool operator==(const TrajectoryRecord&) const = default;
};

// Returns nullopt when all Trajectory invariants hold, otherwise a short
// description of the first violated one. Violations are returned, not thrown.
std::optional<std::string> validate_trajectory(const Trajectory& traj);

// One self-delimiting JSON line per record. Floating-point fields use
// shortest round-trip decimals, so decode(encode(r)) == r exactly and
// encode(decode(line)) reproduces the line byte-for-byte.
// encode_record throws std::invalid_argument when the trajectory is invalid;
// decode_record throws std::invalid_argument on malformed input.
std::string encode_record(const TrajectoryRecord& record);
TrajectoryRecord decode_record(const std::string& line);

}  // namespace fr3e
