#include "fr3e/config.hpp"

#include <charconv>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace fr3e {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

class KeyMap {
 public:
  explicit KeyMap(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      const auto eq = t.find('=');
      if (eq == std::string::npos)
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": expected key = value");
      const std::string key = trim(t.substr(0, eq));
      const std::string val = trim(t.substr(eq + 1));
      if (key.empty() || val.empty())
        throw std::invalid_argument("config line " + std::to_string(lineno) +
                                    ": empty key or value");
      if (!values_.emplace(key, val).second)
        throw std::invalid_argument("config: duplicate key " + key);
    }
  }

  bool has(const std::string& key) const { return values_.count(key) != 0; }

  std::string str(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    seen_.insert(it->first);
    return it->second;
  }

  std::string require(const std::string& key) {
    const auto it = values_.find(key);
    if (it == values_.end())
      throw std::invalid_argument("config: missing mandatory key " + key);
    seen_.insert(it->first);
    return it->second;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    seen_.insert(it->first);
    std::int64_t v = 0;
    const std::string& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw std::invalid_argument("config: " + key + " is not an integer: " + s);
    return v;
  }

  double real(const std::string& key, double fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    seen_.insert(it->first);
    double v = 0.0;
    const std::string& s = it->second;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
      throw std::invalid_argument("config: " + key + " is not a number: " + s);
    return v;
  }

  bool boolean(const std::string& key, bool fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    seen_.insert(it->first);
    if (it->second == "true") return true;
    if (it->second == "false") return false;
    throw std::invalid_argument("config: " + key + " must be true or false");
  }

  void reject_unknown() const {
    for (const auto& [key, value] : values_) {
      if (seen_.count(key) == 0)
        throw std::invalid_argument("config: unknown key " + key);
    }
  }

 private:
  std::map<std::string, std::string> values_;
  std::set<std::string> seen_;
};

int bounded(std::int64_t v, std::int64_t lo, std::int64_t hi,
            const std::string& key) {
  if (v < lo || v > hi)
    throw std::invalid_argument("config: " + key + " out of range [" +
                                std::to_string(lo) + ", " + std::to_string(hi) +
                                "]");
  return static_cast<int>(v);
}

}  // namespace

Algorithm parse_algorithm(const std::string& name) {
  if (name == "fr3e") return Algorithm::fr3e;
  if (name == "grpo_pp") return Algorithm::grpo_pp;
  throw std::invalid_argument("unknown algorithm: " + name);
}

const char* algorithm_name(Algorithm alg) {
  return alg == Algorithm::fr3e ? "fr3e" : "grpo_pp";
}

TrainConfig parse_config_text(const std::string& text) {
  KeyMap keys(text);
  TrainConfig cfg;

  cfg.env.family = parse_family(keys.require("env.family"));
  if (!keys.has("env.prompt_len"))
    throw std::invalid_argument("config: missing mandatory key env.prompt_len");
  cfg.env.prompt_len =
      bounded(keys.integer("env.prompt_len", 0), 1, 4096, "env.prompt_len");
  cfg.env.vocab_size =
      bounded(keys.integer("env.vocab_size", 2), 2, 1 << 20, "env.vocab_size");
  cfg.env.max_response_len =
      bounded(keys.integer("env.max_response_len", cfg.env.prompt_len), 1,
              1 << 20, "env.max_response_len");
  cfg.env.seed = static_cast<std::uint64_t>(keys.integer("env.seed", 0));
  validate(cfg.env);

  cfg.policy.arch = parse_arch(keys.str("policy.arch", "tabular_softmax"));
  cfg.policy.vocab_size = cfg.env.vocab_size;
  cfg.policy.context_window = bounded(keys.integer("policy.context_window", 8),
                                      1, 64, "policy.context_window");
  cfg.policy.hidden_width = bounded(keys.integer("policy.hidden_width", 32), 1,
                                    1 << 16, "policy.hidden_width");
  cfg.policy.table_rows = bounded(keys.integer("policy.table_rows", 16384), 1,
                                  1 << 26, "policy.table_rows");
  cfg.policy.init_scale = keys.real("policy.init_scale", 0.1);
  if (!(cfg.policy.init_scale >= 0.0))
    throw std::invalid_argument("config: policy.init_scale must be >= 0");
  cfg.policy.seed = static_cast<std::uint64_t>(keys.integer("policy.seed", 0));

  TrainSection& tr = cfg.train;
  tr.algorithm = parse_algorithm(keys.str("train.algorithm", "fr3e"));
  tr.steps = bounded(keys.integer("train.steps", 100), 0, 1 << 24,
                     "train.steps");
  tr.seed = static_cast<std::uint64_t>(keys.integer("train.seed", 0));
  tr.optimizer = parse_optimizer(keys.str("train.optimizer", "sgd"));
  tr.lr = keys.real("train.lr",
                    tr.optimizer == Optimizer::sgd ? 0.05 : 0.005);
  if (!(tr.lr > 0.0))
    throw std::invalid_argument("config: train.lr must be > 0");
  tr.batch_groups = bounded(keys.integer("train.batch_groups", 64), 1, 1 << 20,
                            "train.batch_groups");
  tr.group_size = bounded(keys.integer("train.group_size", 8), 2, 1 << 16,
                          "train.group_size");
  tr.eps_low = keys.real("train.eps_low", 0.22);
  tr.eps_high = keys.real("train.eps_high", 0.28);
  if (!(tr.eps_low >= 0.0 && tr.eps_low < 1.0))
    throw std::invalid_argument("config: train.eps_low must be in [0, 1)");
  if (!(tr.eps_high >= 0.0))
    throw std::invalid_argument("config: train.eps_high must be >= 0");
  tr.mini_epochs = bounded(keys.integer("train.mini_epochs", 1), 1, 1 << 10,
                           "train.mini_epochs");
  tr.minibatch_groups = bounded(keys.integer("train.minibatch_groups", 0), 0,
                                1 << 20, "train.minibatch_groups");
  tr.normalize_std = keys.boolean("train.normalize_std", false);
  tr.max_waves_per_step =
      bounded(keys.integer("train.max_waves_per_step", 10), 1, 1 << 16,
              "train.max_waves_per_step");
  tr.eval_prompts = bounded(keys.integer("train.eval_prompts", 32), 1, 1 << 16,
                            "train.eval_prompts");
  tr.eval_rollouts = bounded(keys.integer("train.eval_rollouts", 8), 1,
                             1 << 16, "train.eval_rollouts");
  tr.checkpoint_every = bounded(keys.integer("train.checkpoint_every", 10), 0,
                                1 << 24, "train.checkpoint_every");

  cfg.fr3e.top_k = bounded(keys.integer("fr3e.top_k", 3), 0, 1 << 16,
                           "fr3e.top_k");
  cfg.fr3e.rollouts_per_state =
      bounded(keys.integer("fr3e.rollouts_per_state", 4), 0, 1 << 16,
              "fr3e.rollouts_per_state");
  cfg.fr3e.include_base_loss = keys.boolean("fr3e.include_base_loss", true);

  keys.reject_unknown();
  return cfg;
}

TrainConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in)
    throw std::invalid_argument("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

}  // namespace fr3e
