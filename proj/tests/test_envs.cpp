#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fr3e/envs.hpp"

using namespace fr3e;

namespace {

EnvConfig parity_env(int d) {
  EnvConfig e;
  e.family = EnvFamily::parity_sum;
  e.vocab_size = 2;
  e.prompt_len = d;
  e.max_response_len = d;
  return e;
}

EnvConfig copy_env(int d, int vocab = 2) {
  EnvConfig e;
  e.family = EnvFamily::copy_seq;
  e.vocab_size = vocab;
  e.prompt_len = d;
  e.max_response_len = d;
  return e;
}

// Brute-force count of length-d binary responses the verifier accepts.
std::size_t parity_accept_count(const EnvConfig& env, const Prompt& prompt,
                                int d) {
  std::size_t hits = 0;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask) {
    std::vector<TokenId> resp(static_cast<std::size_t>(d));
    for (int b = 0; b < d; ++b)
      resp[static_cast<std::size_t>(b)] =
          static_cast<TokenId>((mask >> b) & 1u);
    hits += static_cast<std::size_t>(verify(env, prompt, resp));
  }
  return hits;
}

}  // namespace

TEST_CASE("config validation rejects out-of-range fields") {
  EnvConfig e = copy_env(3);
  CHECK_NOTHROW(validate(e));
  e.vocab_size = 1;
  CHECK_THROWS_AS(validate(e), std::invalid_argument);
  e = copy_env(3);
  e.max_response_len = 2;  // copy_seq needs room for the full answer
  CHECK_THROWS_AS(validate(e), std::invalid_argument);
  e = parity_env(4);
  e.max_response_len = 2;  // parity_sum allows truncating configs
  CHECK_NOTHROW(validate(e));
}

TEST_CASE("family names round-trip") {
  CHECK(parse_family("copy_seq") == EnvFamily::copy_seq);
  CHECK(parse_family(family_name(EnvFamily::parity_sum)) ==
        EnvFamily::parity_sum);
  CHECK_THROWS_AS(parse_family("nope"), std::invalid_argument);
}

TEST_CASE("sample_prompt is deterministic and stays in the alphabet") {
  const EnvConfig cenv = copy_env(5, 7);
  rng::Stream s1(0, rng::Tag::env_prompt, {42});
  rng::Stream s2(0, rng::Tag::env_prompt, {42});
  const Prompt a = sample_prompt(cenv, 42, s1);
  const Prompt b = sample_prompt(cenv, 42, s2);
  CHECK(a.tokens == b.tokens);
  CHECK(a.id == 42);
  CHECK(a.tokens.size() == 5);
  CHECK(a.env_tag == "copy_seq");
  for (const TokenId t : a.tokens) {
    CHECK(t >= 0);
    CHECK(t < 7);
  }
  const EnvConfig penv = parity_env(6);
  rng::Stream s3(9, rng::Tag::env_prompt, {1});
  const Prompt p = sample_prompt(penv, 1, s3);
  for (const TokenId t : p.tokens) CHECK((t == 0 || t == 1));
}

TEST_CASE("copy_seq verifier wants the exact prompt back") {
  const EnvConfig env = copy_env(3);
  Prompt p;
  p.tokens = {1, 0, 1};
  CHECK(verify(env, p, std::vector<TokenId>{1, 0, 1}) == 1);
  CHECK(verify(env, p, std::vector<TokenId>{1, 0}) == 0);
  CHECK(verify(env, p, std::vector<TokenId>{1, 0, 0}) == 0);
  CHECK(verify(env, p, std::vector<TokenId>{1, 0, 1, 0}) == 0);
}

TEST_CASE("parity_sum verifier checks length, bits, and parity") {
  const EnvConfig env = parity_env(4);
  Prompt p;
  p.tokens = {1, 1, 0, 0};  // parity 0
  CHECK(verify(env, p, std::vector<TokenId>{0, 0, 0, 0}) == 1);
  CHECK(verify(env, p, std::vector<TokenId>{1, 1, 1, 1}) == 1);
  CHECK(verify(env, p, std::vector<TokenId>{1, 0, 0, 0}) == 0);
  CHECK(verify(env, p, std::vector<TokenId>{0, 0, 0}) == 0);
  CHECK(verify(env, p, std::vector<TokenId>{2, 0, 0, 0}) == 0);  // non-bit
}

TEST_CASE("parity_sum accepts exactly half of all length-D responses") {
  for (int d = 1; d <= 12; ++d) {
    const EnvConfig env = parity_env(d);
    rng::Stream s(7, rng::Tag::env_prompt, {static_cast<std::uint64_t>(d)});
    const Prompt p = sample_prompt(env, d, s);
    CHECK(parity_accept_count(env, p, d) == (std::size_t{1} << (d - 1)));
  }
}

TEST_CASE("uniform random responses hit the analytic success rates") {
  // parity_sum: expected reward exactly 0.5 for random length-D bitstrings.
  {
    const int d = 4;
    const EnvConfig env = parity_env(d);
    rng::Stream ps(3, rng::Tag::env_prompt, {0});
    const Prompt p = sample_prompt(env, 0, ps);
    rng::Stream s(1234);
    const int n = 20000;
    int wins = 0;
    for (int i = 0; i < n; ++i) {
      std::vector<TokenId> resp(static_cast<std::size_t>(d));
      for (TokenId& t : resp) t = static_cast<TokenId>(s.next_below(2));
      wins += verify(env, p, resp);
    }
    const double rate = static_cast<double>(wins) / n;
    const double sigma = std::sqrt(0.25 / n);
    CHECK(std::abs(rate - 0.5) < 3.0 * sigma);
  }
  // copy_seq: expected reward 2^-D on binary vocab.
  {
    const int d = 3;
    const EnvConfig env = copy_env(d);
    rng::Stream ps(3, rng::Tag::env_prompt, {1});
    const Prompt p = sample_prompt(env, 1, ps);
    rng::Stream s(987);
    const int n = 40000;
    int wins = 0;
    for (int i = 0; i < n; ++i) {
      std::vector<TokenId> resp(static_cast<std::size_t>(d));
      for (TokenId& t : resp) t = static_cast<TokenId>(s.next_below(2));
      wins += verify(env, p, resp);
    }
    const double want = 1.0 / 8.0;
    const double rate = static_cast<double>(wins) / n;
    const double sigma = std::sqrt(want * (1.0 - want) / n);
    CHECK(std::abs(rate - want) < 3.0 * sigma);
  }
}

TEST_CASE("episodes terminate at the answer length or the cap") {
  const EnvConfig env = parity_env(4);
  const std::vector<TokenId> short2{0, 1};
  const std::vector<TokenId> full4{0, 1, 0, 1};
  CHECK(!is_terminal(env, short2));
  CHECK(is_terminal(env, full4));
  EnvConfig capped = parity_env(4);
  capped.max_response_len = 2;
  CHECK(is_terminal(capped, short2));
}
