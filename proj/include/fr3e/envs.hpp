// Synthetic autoregressive environments with deterministic verifiers and a
// binary terminal reward. Episodes are fixed-length: both families emit a
// response of exactly prompt_len tokens (unless truncated by
// max_response_len), which keeps exact brute-force value computations cheap.

#pragma once

#include <cstdint>
#include <span>
#include <string>

#include "fr3e/core.hpp"
#include "fr3e/rng.hpp"

namespace fr3e {

enum class EnvFamily { copy_seq, parity_sum };

struct EnvConfig {
  EnvFamily family = EnvFamily::copy_seq;
  int vocab_size = 2;
  int prompt_len = 0;
  int max_response_len = 0;
  std::uint64_t seed = 0;
};

const char* family_name(EnvFamily family);
EnvFamily parse_family(const std::string& name);

// Throws std::invalid_argument on out-of-range fields (vocab_size < 2,
// prompt_len < 1, max_response_len < 1, or copy_seq with
// max_response_len < prompt_len).
void validate(const EnvConfig& config);

// Prompt tokens are uniform over the family's prompt alphabet: the full
// vocabulary for copy_seq, {0,1} for parity_sum (its verifier is defined on
// prompt bits). Deterministic given the stream.
Prompt sample_prompt(const EnvConfig& config, std::int64_t prompt_id,
                     rng::Stream& stream);

// Binary reward. copy_seq: response equals the prompt token sequence exactly.
// parity_sum: response has length prompt_len, every token is a bit, and the
// XOR-parity of response bits equals that of the prompt bits. Total on any
// token sequence; never throws.
int verify(const EnvConfig& config, const Prompt& prompt,
           std::span<const TokenId> response);

// Episodes end at prompt_len tokens (the fixed answer length) or at
// max_response_len, whichever comes first.
bool is_terminal(const EnvConfig& config, std::span<const TokenId> response);

}  // namespace fr3e
