// Per-step training metrics and their CSV encoding. Column names and order
// are frozen in docs/FORMATS.md; doubles are rendered with shortest
// round-trip decimals so repeat runs produce byte-identical files.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fr3e {

struct StepMetrics {
  std::int64_t step = 0;          // 1-based training step
  int groups_generated = 0;       // stage-1 groups sampled this step
  int stage1_all_right = 0;
  int stage1_all_wrong = 0;
  int stage1_mixed = 0;
  int rejected_prompts = 0;       // = stage1_all_right + stage1_all_wrong
  int stage2_all_right = 0;
  int stage2_all_wrong = 0;
  int stage2_mixed = 0;
  double mean_token_entropy = 0.0;   // over all stage-1 responses this step
  double mean_response_length = 0.0;
  double adv_mean = 0.0;             // token-level, over the trained batch
  double adv_std = 0.0;
  std::int64_t generated_tokens = 0;  // response tokens sampled this step
  double eval_success_rate = 0.0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const StepMetrics& m);

// Round-trip-shortest decimal for doubles (std::to_chars), used by every
// CSV emitter so numeric formatting is uniform and locale-free.
std::string format_double(double v);

}  // namespace fr3e
