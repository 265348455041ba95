#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file evaluation.hpp
 * @brief Unbiased Pass@k and Avg@k estimation with k-sweeps.
 *
 * Pass@k = 1 - C(n-c, k)/C(n, k), evaluated as a telescoping log-space
 * product so n in the hundreds stays exact to 1e-12. k = 1 returns c/n
 * directly, which makes avg_at_k = pass_at_k(n, c, 1) an exact identity
 * rather than a rounding coincidence.
 *
 * evaluate() samples n trajectories per task from fixed per-task seed
 * substreams, so reports are deterministic and tasks can be processed in
 * any order.
 */

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include <forklab/env.hpp>
#include <forklab/errors.hpp>
#include <forklab/io.hpp>
#include <forklab/policy.hpp>
#include <forklab/rng.hpp>

namespace forklab::evaluation {

/// Unbiased estimator of P(at least one of k drawn samples is correct).
inline double pass_at_k(std::size_t n, std::size_t c, std::size_t k) {
  if (k < 1 || k > n) throw RangeError("k must lie in [1, n]");
  if (c > n) throw RangeError("c must lie in [0, n]");
  if (c == 0) return 0.0;
  if (k == 1) return static_cast<double>(c) / static_cast<double>(n);
  if (k > n - c) return 1.0;
  // C(n-c, k)/C(n, k) = prod_{j=0}^{k-1} (n-c-j)/(n-j), in log space.
  double log_miss = 0.0;
  for (std::size_t j = 0; j < k; ++j) {
    log_miss += std::log(static_cast<double>(n - c - j)) -
                std::log(static_cast<double>(n - j));
  }
  return 1.0 - std::exp(log_miss);
}

/// Mean per-sample correctness; equals pass_at_k(n, c, 1) exactly.
inline double avg_at_k(std::size_t n, std::size_t c) {
  if (n < 1) throw RangeError("n must be >= 1");
  if (c > n) throw RangeError("c must lie in [0, n]");
  return static_cast<double>(c) / static_cast<double>(n);
}

struct DecodingConfig {
  double temperature = 0.6;
  double top_p = 0.95;
};

struct TaskResult {
  std::size_t n = 0;
  std::size_t c = 0;
};

struct EvalReport {
  std::vector<TaskResult> per_task;
  std::vector<std::size_t> ks;
  /// pass_at_k averaged over tasks, aligned with ks.
  std::vector<double> pass_at_ks;
  /// Mean per-sample correctness over tasks (the Pass@1 estimator).
  double avg = 0.0;
  DecodingConfig decoding;
  std::size_t samples_per_task = 0;
};

/**
 * Sample n trajectories per task from params, verify each, and aggregate
 * per-k means across tasks. Policy rows are addressed through the family
 * state encoding, so the checkpoint must match the tasks' family geometry.
 * Never mutates params. Task i draws from the substream (seed, i, 3), so
 * adding tasks does not disturb earlier ones.
 */
inline EvalReport evaluate(const policy::PolicyParams& params,
                           const std::vector<env::Task>& tasks, std::size_t n,
                           const std::vector<std::size_t>& ks,
                           const DecodingConfig& decoding, std::uint64_t seed) {
  if (tasks.empty()) throw EmptyInputError("empty task set");
  if (n < 1) throw ConfigError("n must be >= 1");
  for (std::size_t k : ks) {
    if (k < 1 || k > n) throw RangeError("every k must lie in [1, n]");
  }
  for (const auto& task : tasks) {
    if (env::family_state_count(task) != params.state_count() ||
        env::task_vocab_size(task) != params.vocab_size()) {
      throw ShapeError("task family geometry does not match the checkpoint");
    }
  }

  EvalReport report;
  report.ks = ks;
  report.decoding = decoding;
  report.samples_per_task = n;

  for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
    const auto& task = tasks[ti];
    const std::size_t horizon = env::task_horizon(task);
    rng::Rng rng(rng::substream_seed(seed, ti, 0, 3));
    std::size_t correct = 0;
    std::vector<std::size_t> tokens(horizon);
    for (std::size_t s = 0; s < n; ++s) {
      env::EpisodeState state = env::reset(task);
      for (std::size_t t = 0; t < horizon; ++t) {
        const auto dist = policy::distribution(
            params, env::family_state_id(task, state), decoding.temperature);
        tokens[t] = policy::sample(dist, decoding.top_p, rng);
        state = env::step(task, state, tokens[t]);
      }
      if (env::verify(task, tokens) > 0) correct += 1;
    }
    report.per_task.push_back({n, correct});
  }

  report.pass_at_ks.resize(ks.size(), 0.0);
  for (std::size_t ki = 0; ki < ks.size(); ++ki) {
    double total = 0.0;
    for (const auto& tr : report.per_task) total += pass_at_k(tr.n, tr.c, ks[ki]);
    report.pass_at_ks[ki] = total / static_cast<double>(report.per_task.size());
  }
  double avg_total = 0.0;
  for (const auto& tr : report.per_task) avg_total += avg_at_k(tr.n, tr.c);
  report.avg = avg_total / static_cast<double>(report.per_task.size());
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json doc;
  doc["samples_per_task"] = report.samples_per_task;
  doc["decoding"] = {{"temperature", report.decoding.temperature},
                     {"top_p", report.decoding.top_p}};
  auto per_task = nlohmann::json::array();
  for (const auto& tr : report.per_task) {
    per_task.push_back({{"n", tr.n}, {"c", tr.c}});
  }
  doc["per_task"] = per_task;
  auto curve = nlohmann::json::array();
  for (std::size_t ki = 0; ki < report.ks.size(); ++ki) {
    curve.push_back({{"k", report.ks[ki]}, {"pass_at_k", report.pass_at_ks[ki]}});
  }
  doc["pass_at_k"] = curve;
  doc["avg_at_k"] = report.avg;
  return doc;
}

/// CSV rows (task_set, k, pass_at_k, avg_at_k), one row per requested k.
inline std::string report_to_csv(const EvalReport& report,
                                 const std::string& task_set) {
  std::string out = "task_set,k,pass_at_k,avg_at_k\n";
  for (std::size_t ki = 0; ki < report.ks.size(); ++ki) {
    out += io::csv_row({task_set, std::to_string(report.ks[ki]),
                        io::fmt_double(report.pass_at_ks[ki]),
                        io::fmt_double(report.avg)});
  }
  return out;
}

}  // namespace forklab::evaluation
