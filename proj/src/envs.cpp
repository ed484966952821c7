#include "fr3e/envs.hpp"

#include <algorithm>
#include <stdexcept>

namespace fr3e {

const char* family_name(EnvFamily family) {
  switch (family) {
    case EnvFamily::copy_seq:
      return "copy_seq";
    case EnvFamily::parity_sum:
      return "parity_sum";
  }
  return "?";
}

EnvFamily parse_family(const std::string& name) {
  if (name == "copy_seq") return EnvFamily::copy_seq;
  if (name == "parity_sum") return EnvFamily::parity_sum;
  throw std::invalid_argument("unknown env family: " + name);
}

void validate(const EnvConfig& config) {
  if (config.vocab_size < 2)
    throw std::invalid_argument("env.vocab_size must be >= 2");
  if (config.prompt_len < 1)
    throw std::invalid_argument("env.prompt_len must be >= 1");
  if (config.max_response_len < 1)
    throw std::invalid_argument("env.max_response_len must be >= 1");
  if (config.family == EnvFamily::copy_seq &&
      config.max_response_len < config.prompt_len)
    throw std::invalid_argument(
        "copy_seq needs env.max_response_len >= env.prompt_len");
}

Prompt sample_prompt(const EnvConfig& config, std::int64_t prompt_id,
                     rng::Stream& stream) {
  const int alphabet =
      config.family == EnvFamily::parity_sum ? 2 : config.vocab_size;
  Prompt p;
  p.id = prompt_id;
  p.env_tag = family_name(config.family);
  p.tokens.reserve(static_cast<std::size_t>(config.prompt_len));
  for (int i = 0; i < config.prompt_len; ++i) {
    p.tokens.push_back(static_cast<TokenId>(
        stream.next_below(static_cast<std::uint64_t>(alphabet))));
  }
  return p;
}

int verify(const EnvConfig& config, const Prompt& prompt,
           std::span<const TokenId> response) {
  switch (config.family) {
    case EnvFamily::copy_seq:
      return response.size() == prompt.tokens.size() &&
                     std::equal(response.begin(), response.end(),
                                prompt.tokens.begin())
                 ? 1
                 : 0;
    case EnvFamily::parity_sum: {
      if (response.size() != static_cast<std::size_t>(config.prompt_len))
        return 0;
      int parity = 0;
      for (const TokenId t : response) {
        if (t != 0 && t != 1) return 0;
        parity ^= static_cast<int>(t);
      }
      int want = 0;
      for (const TokenId t : prompt.tokens) want ^= static_cast<int>(t) & 1;
      return parity == want ? 1 : 0;
    }
  }
  return 0;
}

bool is_terminal(const EnvConfig& config, std::span<const TokenId> response) {
  const auto len = response.size();
  return len >= static_cast<std::size_t>(config.prompt_len) ||
         len >= static_cast<std::size_t>(config.max_response_len);
}

}  // namespace fr3e
