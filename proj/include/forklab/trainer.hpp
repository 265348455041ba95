#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file trainer.hpp
 * @brief Rollout generation, dynamic sampling, the mini-batch optimization
 * loop, and per-step telemetry for all objective modes.
 *
 * One train_step: snapshot the policy, roll out G trajectories for each of
 * queries_per_step queries against the snapshot, drop zero-variance groups,
 * shape advantages per mode, split retained trajectories into mini-batches
 * of whole trajectories, and apply one exact-gradient update per mini-batch.
 *
 * Determinism contract: every random draw comes from a substream keyed by
 * (seed, step, query), all accumulation orders are fixed, and every emitted
 * file renders floats at 17 significant digits. (config, seed) therefore
 * fully determines every artifact byte except timing.csv, which is the one
 * deliberately nondeterministic output.
 *
 * Telemetry conventions (also recorded in run_metadata.json):
 * - solve_rate and mean_entropy average over ALL sampled trajectories;
 *   mean_entropy is the mean over trajectories of the per-trajectory mean
 *   token entropy.
 * - quadrant shares, per-quadrant losses, and the proxy MI use retained
 *   (post-filter) tokens with group-scoped entropy stats, matching the
 *   rollout dumps token for token.
 * - loss columns are the mean over the step's mini-batches.
 */

#include <array>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <forklab/config.hpp>
#include <forklab/credit.hpp>
#include <forklab/env.hpp>
#include <forklab/evaluation.hpp>
#include <forklab/infotheory.hpp>
#include <forklab/io.hpp>
#include <forklab/logio.hpp>
#include <forklab/objective.hpp>
#include <forklab/policy.hpp>
#include <forklab/rng.hpp>
#include <forklab/version.hpp>

namespace forklab::trainer {

struct TokenSample {
  std::size_t state = 0;
  std::size_t token = 0;
  /// ln pi_old(token | state) at the rollout temperature, full softmax.
  double logp_old = 0.0;
  /// Shannon entropy of pi_old(. | state) at the rollout temperature.
  double entropy = 0.0;
};

struct Trajectory {
  std::vector<TokenSample> tokens;
  int reward = 0;
};

struct Group {
  std::size_t query_index = 0;
  std::size_t task_index = 0;
  std::vector<Trajectory> trajectories;
};

struct MetricsRow {
  std::size_t step = 0;
  double solve_rate = 0.0;
  double mean_entropy = 0.0;
  /// Retained-token shares indexed by credit::Quadrant; sum to 1.
  std::array<double, 4> shares{0.0, 0.0, 0.0, 0.0};
  double loss_total = 0.0;
  std::array<double, 4> losses{0.0, 0.0, 0.0, 0.0};
  double proxy_cmi = 0.0;
  double filtered_fraction = 0.0;
  /// Excluded from metrics.csv; written to timing.csv instead.
  double wall_time = 0.0;
};

/// G trajectories sampled from the snapshot for one query.
inline Group rollout_group(const policy::PolicySnapshot& snapshot,
                           const env::Task& task, std::size_t group_size,
                           double temperature, double top_p, rng::Rng& rng) {
  const std::size_t horizon = env::task_horizon(task);
  Group group;
  group.trajectories.resize(group_size);
  std::vector<std::size_t> tokens(horizon);
  for (std::size_t g = 0; g < group_size; ++g) {
    Trajectory& traj = group.trajectories[g];
    traj.tokens.resize(horizon);
    env::EpisodeState state = env::reset(task);
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::size_t sid = env::family_state_id(task, state);
      const auto dist = policy::distribution(snapshot, sid, temperature);
      const std::size_t tok = policy::sample(dist, top_p, rng);
      traj.tokens[t] = {sid, tok, std::log(dist[tok]),
                        policy::token_entropy(dist)};
      tokens[t] = tok;
      state = env::step(task, state, tok);
    }
    traj.reward = env::verify(task, tokens);
  }
  return group;
}

struct FilterResult {
  std::vector<Group> retained;
  double filtered_fraction = 0.0;
};

/// Drop groups whose rewards have zero variance (std < 1e-8, which for +/-1
/// rewards means all equal). All groups dropped raises StarvedBatchError.
inline FilterResult dynamic_sampling_filter(std::vector<Group> groups) {
  FilterResult result;
  const std::size_t input_count = groups.size();
  std::size_t removed = 0;
  for (auto& group : groups) {
    const int first = group.trajectories.front().reward;
    bool degenerate = true;
    for (const auto& traj : group.trajectories) {
      if (traj.reward != first) {
        degenerate = false;
        break;
      }
    }
    if (degenerate) removed += 1;
    else result.retained.push_back(std::move(group));
  }
  result.filtered_fraction =
      static_cast<double>(removed) / static_cast<double>(input_count);
  if (result.retained.empty()) {
    throw StarvedBatchError("every group in the step has zero reward variance");
  }
  return result;
}

struct StepResult {
  policy::PolicyParams params;
  MetricsRow row;
  /// Retained rollouts and their shaping records, for dumps and analysis.
  std::vector<logio::RolloutLogRecord> rollout_records;
  std::vector<logio::ShapedDumpRecord> shaped_records;
  /// Tokens with importance ratio outside [0.8, 1.28] across mini-batches.
  std::size_t ratio_band_violations = 0;
};

namespace detail {

/// Group-scoped shaping inputs for every retained token, in the fixed
/// (group, trajectory, t) order shared by dumps and mini-batches.
struct StepTokens {
  std::vector<objective::BatchToken> tokens;
  std::vector<double> entropies;
  std::vector<int> rewards;
  std::vector<credit::Quadrant> quadrants;
  /// Mini-batch boundaries as [begin, end) token index pairs.
  std::vector<std::pair<std::size_t, std::size_t>> mini_batches;
};

}  // namespace detail

/**
 * One optimization step. Starved batches (every group zero-variance) throw
 * StarvedBatchError before any mutation, so the caller's params stay valid.
 */
inline StepResult train_step(const policy::PolicyParams& params,
                             const config::TrainConfig& cfg,
                             const std::vector<env::Task>& train_tasks,
                             std::size_t step_index) {
  const auto t_start = std::chrono::steady_clock::now();
  const policy::PolicySnapshot snapshot = params;

  // Rollout phase: queries cycle round-robin over the task pool; each query
  // draws from its own (seed, step, query) substream.
  std::vector<Group> groups;
  groups.reserve(cfg.queries_per_step);
  double solve_sum = 0.0;
  double entropy_sum = 0.0;
  for (std::size_t q = 0; q < cfg.queries_per_step; ++q) {
    const std::size_t task_index =
        (step_index * cfg.queries_per_step + q) % train_tasks.size();
    rng::Rng rng(rng::substream_seed(cfg.seed, step_index, q, 0));
    Group group = rollout_group(snapshot, train_tasks[task_index],
                                cfg.group_size, cfg.temperature, cfg.top_p, rng);
    group.query_index = q;
    group.task_index = task_index;
    for (const auto& traj : group.trajectories) {
      solve_sum += traj.reward > 0 ? 1.0 : 0.0;
      double h = 0.0;
      for (const auto& tok : traj.tokens) h += tok.entropy;
      entropy_sum += h / static_cast<double>(traj.tokens.size());
    }
    groups.push_back(std::move(group));
  }
  const auto total_trajs =
      static_cast<double>(cfg.queries_per_step * cfg.group_size);

  auto filtered = dynamic_sampling_filter(std::move(groups));

  // Shaping phase: group advantages, group entropy stats, quadrant labels,
  // and mode-specific advantage shaping over the whole retained step batch.
  detail::StepTokens step_tokens;
  std::vector<credit::TokenRecord> shaping_inputs;
  StepResult result{params, {}, {}, {}, 0};
  for (const auto& group : filtered.retained) {
    std::vector<int> rewards;
    rewards.reserve(group.trajectories.size());
    for (const auto& traj : group.trajectories) rewards.push_back(traj.reward);
    const auto advantages = credit::group_advantage(rewards);

    std::vector<double> group_entropies;
    for (const auto& traj : group.trajectories) {
      for (const auto& tok : traj.tokens) group_entropies.push_back(tok.entropy);
    }
    const auto stats = credit::entropy_stats(group_entropies);

    for (std::size_t g = 0; g < group.trajectories.size(); ++g) {
      const auto& traj = group.trajectories[g];
      for (std::size_t t = 0; t < traj.tokens.size(); ++t) {
        const auto& tok = traj.tokens[t];
        const auto quadrant =
            credit::quadrant_label(tok.entropy, stats.mu, traj.reward);
        step_tokens.tokens.push_back({tok.state, tok.token, tok.logp_old,
                                      advantages[g], quadrant, true});
        step_tokens.entropies.push_back(tok.entropy);
        step_tokens.rewards.push_back(traj.reward);
        step_tokens.quadrants.push_back(quadrant);
        shaping_inputs.push_back({tok.entropy, advantages[g], traj.reward, stats});

        result.rollout_records.push_back({std::to_string(group.query_index), g,
                                          t, tok.entropy, traj.reward, true,
                                          tok.logp_old});
        result.shaped_records.push_back(
            {std::to_string(group.query_index), g, t, tok.entropy,
             credit::shaped_advantage(tok.entropy, stats, advantages[g],
                                      cfg.alpha, cfg.phi, traj.reward)});
      }
    }
  }

  const auto shaping = credit::baseline_shaping(cfg.mode, shaping_inputs,
                                                cfg.alpha, cfg.phi,
                                                cfg.entropy_reg_coef);
  for (std::size_t i = 0; i < step_tokens.tokens.size(); ++i) {
    step_tokens.tokens[i].adv = shaping.advantages[i];
    step_tokens.tokens[i].selected = shaping.mask[i];
  }

  // Mini-batch boundaries over whole trajectories, in retained order.
  {
    std::size_t begin = 0;
    std::size_t trajs_in_batch = 0;
    std::size_t cursor = 0;
    for (const auto& group : filtered.retained) {
      for (const auto& traj : group.trajectories) {
        cursor += traj.tokens.size();
        trajs_in_batch += 1;
        if (trajs_in_batch == cfg.ppo_mini_batch) {
          step_tokens.mini_batches.emplace_back(begin, cursor);
          begin = cursor;
          trajs_in_batch = 0;
        }
      }
    }
    if (cursor > begin) step_tokens.mini_batches.emplace_back(begin, cursor);
  }

  // Optimization phase: loss telemetry and one exact-gradient update per
  // mini-batch, against logp_old from the step's snapshot.
  const auto clip = cfg.clip();
  const double entropy_coef =
      cfg.mode == credit::Mode::entroreg ? shaping.entropy_coef : 0.0;
  MetricsRow& row = result.row;
  for (const auto& [begin, end] : step_tokens.mini_batches) {
    const std::vector<objective::BatchToken> mini(
        step_tokens.tokens.begin() + static_cast<std::ptrdiff_t>(begin),
        step_tokens.tokens.begin() + static_cast<std::ptrdiff_t>(end));
    for (const auto& tok : mini) {
      const auto dist =
          policy::distribution(result.params, tok.state, cfg.temperature);
      const double rho = std::exp(std::log(dist[tok.token]) - tok.logp_old);
      if (rho < 0.8 || rho > 1.28) result.ratio_band_violations += 1;
    }
    const auto breakdown = objective::batch_loss(
        result.params, mini, clip, cfg.quadrants, cfg.temperature, entropy_coef);
    row.loss_total += breakdown.total;
    for (std::size_t qd = 0; qd < 4; ++qd) row.losses[qd] += breakdown.per_quadrant[qd];
    const auto grads = objective::analytic_gradients(
        result.params, mini, clip, cfg.quadrants, cfg.temperature, entropy_coef);
    result.params = policy::apply_update(result.params, grads, cfg.lr);
  }
  const auto n_minibatches = static_cast<double>(step_tokens.mini_batches.size());
  row.loss_total /= n_minibatches;
  for (std::size_t qd = 0; qd < 4; ++qd) row.losses[qd] /= n_minibatches;

  // Telemetry.
  row.step = step_index;
  row.solve_rate = solve_sum / total_trajs;
  row.mean_entropy = entropy_sum / total_trajs;
  row.filtered_fraction = filtered.filtered_fraction;
  std::array<std::size_t, 4> counts{0, 0, 0, 0};
  for (const auto quadrant : step_tokens.quadrants) {
    counts[static_cast<std::size_t>(quadrant)] += 1;
  }
  for (std::size_t qd = 0; qd < 4; ++qd) {
    row.shares[qd] = static_cast<double>(counts[qd]) /
                     static_cast<double>(step_tokens.quadrants.size());
  }
  const double h_max =
      std::log(static_cast<double>(env::task_vocab_size(train_tasks.front())));
  row.proxy_cmi = infotheory::proxy_cmi(step_tokens.entropies,
                                        step_tokens.rewards, cfg.proxy_bins,
                                        h_max);
  row.wall_time = std::chrono::duration<double>(
                      std::chrono::steady_clock::now() - t_start)
                      .count();
  return result;
}

// ============================================================================
// Run loop and persistence
// ============================================================================

inline constexpr const char* kMetricsHeader =
    "step,solve_rate,mean_entropy,share_phr,share_plr,share_nlr,share_nhr,"
    "loss_total,loss_phr,loss_plr,loss_nlr,loss_nhr,proxy_cmi,"
    "filtered_fraction\n";

inline std::string metrics_row_to_csv(const MetricsRow& row) {
  return io::csv_row({std::to_string(row.step), io::fmt_double(row.solve_rate),
                      io::fmt_double(row.mean_entropy),
                      io::fmt_double(row.shares[0]), io::fmt_double(row.shares[1]),
                      io::fmt_double(row.shares[2]), io::fmt_double(row.shares[3]),
                      io::fmt_double(row.loss_total), io::fmt_double(row.losses[0]),
                      io::fmt_double(row.losses[1]), io::fmt_double(row.losses[2]),
                      io::fmt_double(row.losses[3]), io::fmt_double(row.proxy_cmi),
                      io::fmt_double(row.filtered_fraction)});
}

struct RunResult {
  policy::PolicyParams params;
  std::vector<MetricsRow> metrics;
  std::vector<std::size_t> skipped_steps;
  std::vector<env::Task> train_tasks;
  std::vector<env::Task> eval_tasks;
  std::filesystem::path run_dir;
};

/// Seeded task pools: train tasks from substream tag 1, eval tasks from tag
/// 2 with duplicates (against both pools) rejected.
inline std::pair<std::vector<env::Task>, std::vector<env::Task>>
generate_task_pools(const config::TrainConfig& cfg) {
  const auto& family = cfg.task_family;
  const auto vocab = env::default_op_vocab();
  std::vector<env::Task> train_tasks;
  rng::Rng rng_train(rng::substream_seed(cfg.seed, 0, 0, 1));
  for (std::size_t i = 0; i < family.train_tasks; ++i) {
    train_tasks.emplace_back(env::sample_fork_arith(
        family.modulus, family.horizon, vocab, family.min_success,
        family.max_success, rng_train));
  }
  std::vector<env::Task> eval_tasks;
  rng::Rng rng_eval(rng::substream_seed(cfg.seed, 0, 0, 2));
  std::size_t attempts = 0;
  while (eval_tasks.size() < family.eval_tasks) {
    if (++attempts > 1000 * (family.eval_tasks + 1)) {
      throw BudgetError("could not draw distinct eval tasks");
    }
    env::Task candidate = env::sample_fork_arith(
        family.modulus, family.horizon, vocab, family.min_success,
        family.max_success, rng_eval);
    bool duplicate = false;
    for (const auto& t : train_tasks) duplicate = duplicate || t == candidate;
    for (const auto& t : eval_tasks) duplicate = duplicate || t == candidate;
    if (!duplicate) eval_tasks.push_back(std::move(candidate));
  }
  return {std::move(train_tasks), std::move(eval_tasks)};
}

/**
 * Execute total_steps optimization steps and persist every artifact into
 * run_dir: resolved config, task pools, metrics and timing CSVs, rollout and
 * shaped-advantage dumps, checkpoints, evaluation reports on both pools, run
 * metadata, and a manifest with content hashes of every emitted file.
 */
inline RunResult run(const config::TrainConfig& cfg,
                     const std::filesystem::path& run_dir) {
  if (run_dir.empty()) throw ConfigError("output directory must be set");
  std::error_code ec;
  std::filesystem::create_directories(run_dir, ec);
  if (ec) throw IoError("cannot create run directory: " + run_dir.string());

  auto [train_tasks, eval_tasks] = generate_task_pools(cfg);

  auto pool_json = [](const std::vector<env::Task>& tasks) {
    auto arr = nlohmann::json::array();
    for (const auto& task : tasks) arr.push_back(env::task_to_json(task));
    return arr.dump(2) + "\n";
  };
  io::write_file_atomic(run_dir / "tasks_train.json", pool_json(train_tasks));
  io::write_file_atomic(run_dir / "tasks_eval.json", pool_json(eval_tasks));
  io::write_file_atomic(run_dir / "resolved_config.json",
                        config::config_to_json(cfg).dump(2) + "\n");

  policy::PolicyParams params(env::family_state_count(train_tasks.front()),
                              env::task_vocab_size(train_tasks.front()));

  RunResult result{params, {}, {}, train_tasks, eval_tasks, run_dir};
  std::string metrics_csv = kMetricsHeader;
  std::string timing_csv = "step,wall_time_seconds\n";
  std::size_t ratio_band_violations = 0;
  double filtered_fraction_sum = 0.0;

  auto dump_step = [&](const StepResult& step, std::size_t step_index) {
    std::string rollouts;
    for (const auto& rec : step.rollout_records) {
      rollouts += logio::record_to_jsonl(rec);
    }
    std::string shaped;
    for (const auto& rec : step.shaped_records) {
      shaped += logio::shaped_record_to_jsonl(rec);
    }
    const std::string suffix = "_step" + std::to_string(step_index) + ".jsonl";
    io::write_file_atomic(run_dir / ("rollouts" + suffix), rollouts);
    io::write_file_atomic(run_dir / ("shaped_advantages" + suffix), shaped);
  };

  for (std::size_t step_index = 0; step_index < cfg.total_steps; ++step_index) {
    try {
      StepResult step = train_step(result.params, cfg, train_tasks, step_index);
      result.params = std::move(step.params);
      result.metrics.push_back(step.row);
      metrics_csv += metrics_row_to_csv(step.row);
      timing_csv += io::csv_row({std::to_string(step_index),
                                 io::fmt_double(step.row.wall_time)});
      ratio_band_violations += step.ratio_band_violations;
      filtered_fraction_sum += step.row.filtered_fraction;

      const bool last = step_index + 1 == cfg.total_steps;
      const bool interval_hit =
          cfg.dump_interval > 0 && (step_index + 1) % cfg.dump_interval == 0;
      if (last || interval_hit) dump_step(step, step_index);
      if (cfg.checkpoint_interval > 0 &&
          (step_index + 1) % cfg.checkpoint_interval == 0 && !last) {
        io::write_file_atomic(
            run_dir / ("checkpoint_step" + std::to_string(step_index) + ".json"),
            policy::save_checkpoint_text(result.params));
      }
    } catch (const StarvedBatchError&) {
      result.skipped_steps.push_back(step_index);
    }
  }

  io::write_file_atomic(run_dir / "metrics.csv", metrics_csv);
  io::write_file_atomic(run_dir / "timing.csv", timing_csv);
  io::write_file_atomic(run_dir / "checkpoint_final.json",
                        policy::save_checkpoint_text(result.params));

  // Evaluation reports on both pools (train pool mirrors training-
  // distribution performance; eval pool is held out).
  const evaluation::DecodingConfig decoding{};
  const std::vector<std::size_t> ks{1, 2, 4, 8, 16};
  const auto train_report =
      evaluation::evaluate(result.params, train_tasks, 32, ks, decoding,
                           rng::substream_seed(cfg.seed, 0, 0, 4));
  const auto eval_report =
      evaluation::evaluate(result.params, eval_tasks, 32, ks, decoding,
                           rng::substream_seed(cfg.seed, 0, 0, 5));
  nlohmann::json eval_doc;
  eval_doc["train_pool"] = evaluation::report_to_json(train_report);
  eval_doc["eval_pool"] = evaluation::report_to_json(eval_report);
  io::write_file_atomic(run_dir / "eval_report.json", eval_doc.dump(2) + "\n");
  const std::string eval_rows = evaluation::report_to_csv(eval_report, "eval_pool");
  io::write_file_atomic(run_dir / "pass_curve.csv",
                        evaluation::report_to_csv(train_report, "train_pool") +
                            eval_rows.substr(eval_rows.find('\n') + 1));

  nlohmann::json meta;
  meta["library_version"] = kVersion;
  meta["git_hash"] =
#ifdef FORKLAB_GIT_HASH
      FORKLAB_GIT_HASH;
#else
      "";
#endif
  meta["skipped_steps"] = result.skipped_steps;
  meta["ratio_band_violations"] = ratio_band_violations;
  meta["mean_filtered_fraction"] =
      result.metrics.empty()
          ? 0.0
          : filtered_fraction_sum / static_cast<double>(result.metrics.size());
  meta["loss_normalizer"] = "per_mini_batch_token_count";
  meta["entropy_telemetry"] = "trajectory_mean";
  meta["share_convention"] = "retained_tokens_group_scoped_stats";
  meta["wall_time_location"] = "timing.csv";
  io::write_file_atomic(run_dir / "run_metadata.json", meta.dump(2) + "\n");

  io::write_manifest(run_dir);
  return result;
}

}  // namespace forklab::trainer
