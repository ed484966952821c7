#include "fr3e/harness.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "fr3e/first_return.hpp"

namespace fr3e {

namespace {

std::uint64_t u64(std::int64_t v) { return static_cast<std::uint64_t>(v); }

void count_class(GroupClass c, int& all_right, int& all_wrong, int& mixed) {
  switch (c) {
    case GroupClass::all_right:
      ++all_right;
      break;
    case GroupClass::all_wrong:
      ++all_wrong;
      break;
    case GroupClass::mixed:
      ++mixed;
      break;
  }
}

std::vector<int> group_rewards(const PromptGroup& g) {
  std::vector<int> r;
  r.reserve(g.trajectories.size());
  for (const Trajectory& t : g.trajectories) r.push_back(t.reward);
  return r;
}

}  // namespace

EvalResult evaluate(const Policy& policy, const EnvConfig& env, int n_prompts,
                    int rollouts_per_prompt) {
  if (n_prompts < 1 || rollouts_per_prompt < 1)
    throw std::invalid_argument("evaluate: need >= 1 prompts and rollouts");
  EvalResult res;
  res.per_prompt.reserve(static_cast<std::size_t>(n_prompts));
  long total_wins = 0;
  for (int i = 0; i < n_prompts; ++i) {
    rng::Stream pstream(env.seed, rng::Tag::eval_prompt, {u64(i)});
    const Prompt prompt = sample_prompt(env, i, pstream);
    int wins = 0;
    for (int r = 0; r < rollouts_per_prompt; ++r) {
      rng::Stream rstream(env.seed, rng::Tag::eval_rollout, {u64(i), u64(r)});
      wins += generate(policy, prompt, env, rstream, false).reward;
    }
    total_wins += wins;
    res.per_prompt.push_back(static_cast<double>(wins) /
                             static_cast<double>(rollouts_per_prompt));
  }
  res.success_rate =
      static_cast<double>(total_wins) /
      static_cast<double>(static_cast<long>(n_prompts) * rollouts_per_prompt);
  return res;
}

Trainer::Trainer(const TrainConfig& config)
    : config_(config), policy_(config.policy) {
  validate(config_.env);
  rng::Stream init(config_.policy.seed, rng::Tag::policy_init, {});
  policy_.init_params(init);
  optim_.optimizer = config_.train.optimizer;
  optim_.lr = config_.train.lr;
}

void Trainer::set_output(const std::filesystem::path& dir,
                         bool log_trajectories) {
  std::filesystem::create_directories(dir);
  out_dir_ = dir;
  write_files_ = true;
  metrics_out_.open(dir / "metrics.csv");
  if (!metrics_out_)
    throw std::runtime_error("cannot open " + (dir / "metrics.csv").string());
  metrics_out_ << metrics_csv_header() << "\n";
  metrics_out_.flush();
  if (log_trajectories) {
    traj_out_ = std::make_unique<std::ofstream>(dir / "trajectories.jsonl");
    if (!*traj_out_)
      throw std::runtime_error("cannot open " +
                               (dir / "trajectories.jsonl").string());
  }
  write_checkpoint_if_due(config_.train.steps == 0);
}

void Trainer::write_checkpoint_if_due(bool final_step) {
  if (!write_files_) return;
  const int every = config_.train.checkpoint_every;
  const bool due = step_ == 0 || final_step ||
                   (every > 0 && step_ % every == 0);
  if (!due) return;
  char name[32];
  std::snprintf(name, sizeof(name), "checkpoint_%06lld.txt",
                static_cast<long long>(step_));
  save_checkpoint(out_dir_ / name, policy_, step_);
}

void Trainer::log_record(const Trajectory& traj) {
  if (!traj_out_) return;
  TrajectoryRecord rec;
  rec.step = step_ + 1;
  rec.snapshot = step_;
  rec.traj = traj;
  *traj_out_ << encode_record(rec) << "\n";
}

StepMetrics Trainer::run_step() {
  const TrainSection& tr = config_.train;
  const EnvConfig& env = config_.env;
  StepMetrics m;
  m.step = step_ + 1;

  double entropy_sum = 0.0;
  std::int64_t entropy_tokens = 0;
  std::int64_t response_tokens = 0;
  std::int64_t responses = 0;

  // Generation waves until enough mixed groups are buffered (or the wave cap
  // hits; a short or empty batch is then released so the step always ends).
  const std::size_t target = static_cast<std::size_t>(tr.batch_groups);
  for (int wave = 0; wave < tr.max_waves_per_step && !accum_.ready(target);
       ++wave) {
    std::vector<PromptGroup> generated;
    generated.reserve(target);
    for (int i = 0; i < tr.batch_groups; ++i) {
      const std::int64_t pid = next_prompt_id_++;
      rng::Stream pstream(env.seed, rng::Tag::env_prompt, {u64(pid)});
      PromptGroup group;
      group.prompt = sample_prompt(env, pid, pstream);
      group.trajectories.reserve(static_cast<std::size_t>(tr.group_size));
      for (int g = 0; g < tr.group_size; ++g) {
        rng::Stream rstream(tr.seed, rng::Tag::base_rollout,
                            {u64(pid), u64(g)});
        Trajectory t = generate(policy_, group.prompt, env, rstream, true);
        for (const double h : t.entropies) entropy_sum += h;
        entropy_tokens += static_cast<std::int64_t>(t.entropies.size());
        response_tokens += static_cast<std::int64_t>(t.response.size());
        ++responses;
        log_record(t);
        group.trajectories.push_back(std::move(t));
      }
      ++m.groups_generated;
      count_class(classify_group(group_rewards(group)), m.stage1_all_right,
                  m.stage1_all_wrong, m.stage1_mixed);
      generated.push_back(std::move(group));
    }
    auto [kept, rejected] = rejection_filter(std::move(generated));
    m.rejected_prompts += static_cast<int>(rejected);
    accum_.add(std::move(kept));
  }
  m.generated_tokens += response_tokens;
  m.mean_token_entropy =
      entropy_tokens > 0
          ? entropy_sum / static_cast<double>(entropy_tokens)
          : 0.0;
  m.mean_response_length =
      responses > 0
          ? static_cast<double>(response_tokens) / static_cast<double>(responses)
          : 0.0;

  const std::vector<PromptGroup> batch_groups = accum_.take(target);

  // Per-group learning signals. Stage-2 rollout groups live in stage2_store
  // so batch items can point into them.
  const bool stage2_enabled = tr.algorithm == Algorithm::fr3e &&
                              config_.fr3e.top_k >= 1 &&
                              config_.fr3e.rollouts_per_state >= 1;
  const bool stage1_in_loss = tr.algorithm == Algorithm::grpo_pp ||
                              config_.fr3e.include_base_loss;
  std::vector<std::vector<RolloutGroup>> stage2_store;
  stage2_store.reserve(batch_groups.size());
  std::vector<AdvantageBatch> per_group(batch_groups.size());

  for (std::size_t gi = 0; gi < batch_groups.size(); ++gi) {
    const PromptGroup& group = batch_groups[gi];
    try {
      const std::vector<int> rewards = group_rewards(group);
      const std::vector<double> advs =
          group_advantage(rewards, tr.normalize_std);
      if (stage1_in_loss) {
        for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
          per_group[gi].items.push_back(
              {&group.prompt, &group.trajectories[i], advs[i], 0});
        }
      }
      if (stage2_enabled) {
        const Trajectory& base =
            group.trajectories[select_base_trajectory(group)];
        const std::vector<double> profile =
            entropy_profile(policy_, group.prompt, base);
        const std::vector<std::size_t> positions =
            topk_positions(profile, config_.fr3e.top_k);
        const Segmentation seg = segment(base, positions);
        const std::vector<IntermediateState> states =
            build_states(group.prompt, base, seg);

        std::vector<RolloutGroup> sgroups;
        sgroups.reserve(states.size() - 1);
        for (std::size_t j = 1; j < states.size(); ++j) {
          rng::Stream estream(tr.seed, rng::Tag::explore_rollout,
                              {u64(group.prompt.id), u64(j)});
          RolloutGroup rg = partial_rollouts(
              policy_, group.prompt, states[j], base,
              config_.fr3e.rollouts_per_state, env, estream);
          count_class(classify_group(rg.rewards), m.stage2_all_right,
                      m.stage2_all_wrong, m.stage2_mixed);
          for (const Trajectory& roll : rg.rollouts) {
            m.generated_tokens += static_cast<std::int64_t>(
                roll.response.size() - rg.prefix_len);
            log_record(roll);
          }
          sgroups.push_back(std::move(rg));
        }
        fr3e_advantages(group.prompt, sgroups, empirical_value(rewards),
                        per_group[gi]);
        stage2_store.push_back(std::move(sgroups));
      }
    } catch (const std::exception& e) {
      throw std::runtime_error("step " + std::to_string(m.step) + ", prompt " +
                               std::to_string(group.prompt.id) + ": " +
                               e.what());
    }
  }

  AdvantageBatch full;
  for (const AdvantageBatch& g : per_group)
    full.items.insert(full.items.end(), g.items.begin(), g.items.end());
  std::tie(m.adv_mean, m.adv_std) = full.advantage_stats();

  if (!full.items.empty()) {
    for (int epoch = 0; epoch < tr.mini_epochs; ++epoch) {
      std::vector<std::size_t> order(per_group.size());
      std::iota(order.begin(), order.end(), std::size_t{0});
      const std::size_t chunk =
          tr.minibatch_groups > 0 ? static_cast<std::size_t>(tr.minibatch_groups)
                                  : order.size();
      if (tr.minibatch_groups > 0) {
        rng::Stream shuffle(tr.seed, rng::Tag::minibatch_shuffle,
                            {u64(m.step), u64(epoch)});
        shuffle.shuffle(std::span<std::size_t>(order));
      }
      for (std::size_t begin = 0; begin < order.size(); begin += chunk) {
        AdvantageBatch mb;
        const std::size_t end = std::min(begin + chunk, order.size());
        for (std::size_t i = begin; i < end; ++i) {
          const AdvantageBatch& g = per_group[order[i]];
          mb.items.insert(mb.items.end(), g.items.begin(), g.items.end());
        }
        if (mb.items.empty()) continue;
        const LossResult res =
            clip_higher_loss(policy_, mb, tr.eps_low, tr.eps_high);
        apply_update(policy_.params(), res.grad, optim_);
      }
    }
  }

  m.eval_success_rate =
      evaluate(policy_, env, tr.eval_prompts, tr.eval_rollouts).success_rate;

  ++step_;
  history_.push_back(m);
  if (write_files_) {
    metrics_out_ << metrics_csv_row(m) << "\n";
    metrics_out_.flush();
    if (traj_out_) traj_out_->flush();
  }
  write_checkpoint_if_due(step_ == config_.train.steps);
  return m;
}

void Trainer::run() {
  for (int s = 0; s < config_.train.steps; ++s) run_step();
}

namespace {

bool same_env(const EnvConfig& a, const EnvConfig& b) {
  return a.family == b.family && a.vocab_size == b.vocab_size &&
         a.prompt_len == b.prompt_len &&
         a.max_response_len == b.max_response_len && a.seed == b.seed;
}

bool same_policy(const PolicyConfig& a, const PolicyConfig& b) {
  return a.arch == b.arch && a.vocab_size == b.vocab_size &&
         a.context_window == b.context_window &&
         a.hidden_width == b.hidden_width && a.table_rows == b.table_rows &&
         a.init_scale == b.init_scale && a.seed == b.seed;
}

void append_metric_cells(std::string& row, const StepMetrics* m,
                         std::int64_t cum_tokens) {
  if (m == nullptr) {
    row.append(15, ',');  // 14 metric cells plus cum_tokens, all empty
    return;
  }
  const std::string full = metrics_csv_row(*m);
  row += ',';
  row += full.substr(full.find(',') + 1);  // drop the step column
  row += ',';
  row += std::to_string(cum_tokens);
}

}  // namespace

void compare_runs(const TrainConfig& config_a, const TrainConfig& config_b,
                  const std::filesystem::path& out_dir) {
  if (!same_env(config_a.env, config_b.env))
    throw std::invalid_argument("compare: env sections differ");
  if (!same_policy(config_a.policy, config_b.policy))
    throw std::invalid_argument("compare: policy sections differ");
  std::filesystem::create_directories(out_dir);

  Trainer ta(config_a);
  ta.run();
  Trainer tb(config_b);
  tb.run();
  const std::vector<StepMetrics>& ha = ta.history();
  const std::vector<StepMetrics>& hb = tb.history();

  std::ofstream csv(out_dir / "compare.csv");
  if (!csv)
    throw std::runtime_error("cannot open " + (out_dir / "compare.csv").string());
  const std::string base = metrics_csv_header();
  const std::string cols = base.substr(base.find(',') + 1);
  std::string header = "step";
  std::istringstream split_a(cols);
  for (std::string c; std::getline(split_a, c, ',');) header += ",a_" + c;
  header += ",a_cum_tokens";
  std::istringstream split_b(cols);
  for (std::string c; std::getline(split_b, c, ',');) header += ",b_" + c;
  header += ",b_cum_tokens";
  csv << header << "\n";

  std::int64_t cum_a = 0;
  std::int64_t cum_b = 0;
  const std::size_t rows = std::max(ha.size(), hb.size());
  for (std::size_t i = 0; i < rows; ++i) {
    std::string row = std::to_string(i + 1);
    const StepMetrics* ma = i < ha.size() ? &ha[i] : nullptr;
    const StepMetrics* mb = i < hb.size() ? &hb[i] : nullptr;
    if (ma != nullptr) cum_a += ma->generated_tokens;
    if (mb != nullptr) cum_b += mb->generated_tokens;
    append_metric_cells(row, ma, cum_a);
    append_metric_cells(row, mb, cum_b);
    csv << row << "\n";
  }

  std::ofstream verdict(out_dir / "verdict.txt");
  if (!verdict)
    throw std::runtime_error("cannot open " +
                             (out_dir / "verdict.txt").string());
  const auto last = [](const std::vector<StepMetrics>& h) {
    return h.empty() ? StepMetrics{} : h.back();
  };
  const auto first = [](const std::vector<StepMetrics>& h) {
    return h.empty() ? StepMetrics{} : h.front();
  };
  const StepMetrics la = last(ha);
  const StepMetrics lb = last(hb);
  verdict << "run_a " << algorithm_name(config_a.train.algorithm) << " ("
          << ha.size() << " steps, " << cum_a << " generated tokens)\n";
  verdict << "run_b " << algorithm_name(config_b.train.algorithm) << " ("
          << hb.size() << " steps, " << cum_b << " generated tokens)\n";
  verdict << "final_eval_success_rate a=" << format_double(la.eval_success_rate)
          << " b=" << format_double(lb.eval_success_rate) << " -> "
          << (la.eval_success_rate > lb.eval_success_rate
                  ? "a"
                  : (lb.eval_success_rate > la.eval_success_rate ? "b" : "tie"))
          << "\n";
  verdict << "final_mean_token_entropy a="
          << format_double(la.mean_token_entropy)
          << " b=" << format_double(lb.mean_token_entropy) << " -> "
          << (la.mean_token_entropy > lb.mean_token_entropy
                  ? "a"
                  : (lb.mean_token_entropy > la.mean_token_entropy ? "b"
                                                                   : "tie"))
          << "\n";
  verdict << "stage2_all_right first->last a: " << first(ha).stage2_all_right
          << "->" << la.stage2_all_right << " b: " << first(hb).stage2_all_right
          << "->" << lb.stage2_all_right << "\n";
  verdict << "stage2_all_wrong first->last a: " << first(ha).stage2_all_wrong
          << "->" << la.stage2_all_wrong << " b: " << first(hb).stage2_all_wrong
          << "->" << lb.stage2_all_wrong << "\n";
}

std::vector<TokenReportRow> entropy_token_report(
    const std::filesystem::path& log_path, int top_n, std::size_t min_count) {
  std::ifstream in(log_path);
  if (!in)
    throw std::invalid_argument("cannot open trajectory log: " +
                                log_path.string());
  struct Acc {
    std::size_t count = 0;
    double sum = 0.0;
  };
  std::map<TokenId, Acc> acc;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const TrajectoryRecord rec = decode_record(line);
    for (std::size_t t = 0; t < rec.traj.response.size(); ++t) {
      Acc& a = acc[rec.traj.response[t]];
      ++a.count;
      a.sum += rec.traj.entropies[t];
    }
  }
  std::vector<TokenReportRow> rows;
  for (const auto& [token, a] : acc) {
    if (a.count < min_count) continue;
    rows.push_back({token, a.count, a.sum / static_cast<double>(a.count)});
  }
  std::sort(rows.begin(), rows.end(),
            [](const TokenReportRow& a, const TokenReportRow& b) {
              if (a.mean_entropy != b.mean_entropy)
                return a.mean_entropy > b.mean_entropy;
              return a.token < b.token;
            });
  if (top_n >= 0 && rows.size() > static_cast<std::size_t>(top_n))
    rows.resize(static_cast<std::size_t>(top_n));
  return rows;
}

void write_accuracy_matrix(const std::filesystem::path& checkpoints_dir,
                           const TrainConfig& config,
                           const std::filesystem::path& out_csv) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry :
       std::filesystem::directory_iterator(checkpoints_dir)) {
    const std::string name = entry.path().filename().string();
    if (entry.is_regular_file() && name.rfind("checkpoint_", 0) == 0 &&
        name.size() > 4 && name.substr(name.size() - 4) == ".txt")
      files.push_back(entry.path());
  }
  if (files.empty())
    throw std::invalid_argument("no checkpoint_*.txt files under " +
                                checkpoints_dir.string());

  struct Column {
    std::int64_t step;
    std::vector<double> per_prompt;
  };
  std::vector<Column> columns;
  for (const std::filesystem::path& f : files) {
    auto [policy, step] = load_checkpoint(f);
    if (policy.config().vocab_size != config.env.vocab_size)
      throw std::invalid_argument("checkpoint vocab does not match config: " +
                                  f.string());
    const EvalResult ev = evaluate(policy, config.env, config.train.eval_prompts,
                                   config.train.eval_rollouts);
    columns.push_back({step, ev.per_prompt});
  }
  std::sort(columns.begin(), columns.end(),
            [](const Column& a, const Column& b) { return a.step < b.step; });

  std::ofstream out(out_csv);
  if (!out) throw std::runtime_error("cannot open " + out_csv.string());
  out << "problem_id";
  for (const Column& c : columns) out << ",step_" << c.step;
  out << "\n";
  for (int p = 0; p < config.train.eval_prompts; ++p) {
    out << p;
    for (const Column& c : columns)
      out << ',' << format_double(c.per_prompt[static_cast<std::size_t>(p)]);
    out << "\n";
  }
}

}  // namespace fr3e
