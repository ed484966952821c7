#include "fr3e/core.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"

namespace fr3e {

std::optional<std::string> validate_trajectory(const Trajectory& traj) {
  if (traj.response.empty()) return "empty response";
  if (traj.logprobs.size() != traj.response.size())
    return "logprobs length mismatch";
  if (traj.entropies.size() != traj.response.size())
    return "entropies length mismatch";
  for (const double lp : traj.logprobs) {
    if (!(lp <= 0.0)) return "logprob not <= 0";
  }
  for (const double h : traj.entropies) {
    if (!(h >= 0.0)) return "entropy negative";
  }
  if (traj.reward != 0 && traj.reward != 1) return "reward not binary";
  return std::nullopt;
}

std::string encode_record(const TrajectoryRecord& record) {
  if (const auto violation = validate_trajectory(record.traj)) {
    throw std::invalid_argument("cannot encode invalid trajectory: " +
                                *violation);
  }
  // nlohmann::json emits doubles with shortest round-trip decimals and keeps
  // object keys sorted, so the encoding is canonical.
  nlohmann::json j;
  j["step"] = record.step;
  j["snapshot"] = record.snapshot;
  j["prompt_id"] = record.traj.prompt_id;
  j["response"] = record.traj.response;
  j["logprobs"] = record.traj.logprobs;
  j["entropies"] = record.traj.entropies;
  j["reward"] = record.traj.reward;
  j["truncated"] = record.traj.truncated;
  return j.dump();
}

TrajectoryRecord decode_record(const std::string& line) {
  TrajectoryRecord r;
  try {
    const nlohmann::json j = nlohmann::json::parse(line);
    r.step = j.at("step").get<std::int64_t>();
    r.snapshot = j.at("snapshot").get<std::int64_t>();
    r.traj.prompt_id = j.at("prompt_id").get<std::int64_t>();
    r.traj.response = j.at("response").get<std::vector<TokenId>>();
    r.traj.logprobs = j.at("logprobs").get<std::vector<double>>();
    r.traj.entropies = j.at("entropies").get<std::vector<double>>();
    r.traj.reward = j.at("reward").get<int>();
    r.traj.truncated = j.at("truncated").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed trajectory record: ") +
                                e.what());
  }
  return r;
}

}  // namespace fr3e
