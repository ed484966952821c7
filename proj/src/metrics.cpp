#include "fr3e/metrics.hpp"

#include <charconv>

namespace fr3e {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string metrics_csv_header() {
  return "step,groups_generated,stage1_all_right,stage1_all_wrong,"
         "stage1_mixed,rejected_prompts,stage2_all_right,stage2_all_wrong,"
         "stage2_mixed,mean_token_entropy,mean_response_length,adv_mean,"
         "adv_std,generated_tokens,eval_success_rate";
}

std::string metrics_csv_row(const StepMetrics& m) {
  std::string row;
  row += std::to_string(m.step);
  row += ',';
  row += std::to_string(m.groups_generated);
  row += ',';
  row += std::to_string(m.stage1_all_right);
  row += ',';
  row += std::to_string(m.stage1_all_wrong);
  row += ',';
  row += std::to_string(m.stage1_mixed);
  row += ',';
  row += std::to_string(m.rejected_prompts);
  row += ',';
  row += std::to_string(m.stage2_all_right);
  row += ',';
  row += std::to_string(m.stage2_all_wrong);
  row += ',';
  row += std::to_string(m.stage2_mixed);
  row += ',';
  row += format_double(m.mean_token_entropy);
  row += ',';
  row += format_double(m.mean_response_length);
  row += ',';
  row += format_double(m.adv_mean);
  row += ',';
  row += format_double(m.adv_std);
  row += ',';
  row += std::to_string(m.generated_tokens);
  row += ',';
  row += format_double(m.eval_success_rate);
  return row;
}

}  // namespace fr3e
