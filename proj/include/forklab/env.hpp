#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file env.hpp
 * @brief Synthetic verifiable tasks with terminal +/-1 rewards, a Markov
 * state encoding, and a brute-force solution enumerator used as the
 * exactness oracle.
 *
 * Two task kinds:
 * - ForkArithTask: start value walks through modular arithmetic ops for T
 *   steps; reward +1 iff the final value hits the target. State id encodes
 *   (step, value) bijectively, so the tabular policy sees a true MDP.
 * - ConstantTask: exactly one rewarded token sequence; state id is the step.
 *
 * enumerate_solutions() walks every op sequence (budget-capped) and also
 * returns the per-(state, token) count of succeeding completions, the
 * ground-truth fork structure. A backward dynamic program cross-checks the
 * exhaustive walk internally.
 */

#include <cstddef>
#include <cstdint>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include <forklab/errors.hpp>
#include <forklab/rng.hpp>

namespace forklab::env {

enum class OpKind { add, mul, noop };

struct Op {
  OpKind kind = OpKind::noop;
  std::int64_t c = 0;

  bool operator==(const Op&) const = default;
};

inline std::int64_t apply_op(const Op& op, std::int64_t value, std::int64_t modulus) {
  switch (op.kind) {
    case OpKind::add: return ((value + op.c) % modulus + modulus) % modulus;
    case OpKind::mul: return ((value * op.c) % modulus + modulus) % modulus;
    case OpKind::noop: return value;
  }
  return value;
}

struct ForkArithTask {
  std::int64_t start = 0;
  std::int64_t target = 0;
  std::int64_t modulus = 2;
  std::size_t horizon = 1;
  std::vector<Op> op_vocab;

  std::size_t vocab_size() const { return op_vocab.size(); }
  std::size_t state_count() const {
    return (horizon + 1) * static_cast<std::size_t>(modulus);
  }

  bool operator==(const ForkArithTask&) const = default;
};

struct ConstantTask {
  std::vector<std::size_t> required_sequence;
  std::size_t vocab_size_value = 2;

  std::size_t horizon() const { return required_sequence.size(); }
  std::size_t vocab_size() const { return vocab_size_value; }
  std::size_t state_count() const { return required_sequence.size() + 1; }

  bool operator==(const ConstantTask&) const = default;
};

using Task = std::variant<ForkArithTask, ConstantTask>;

struct EpisodeState {
  std::size_t step = 0;
  std::int64_t value = 0;

  bool operator==(const EpisodeState&) const = default;
};

// ============================================================================
// Task accessors over the variant
// ============================================================================

inline std::size_t task_horizon(const Task& task) {
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) return fa->horizon;
  return std::get<ConstantTask>(task).horizon();
}

inline std::size_t task_vocab_size(const Task& task) {
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) return fa->vocab_size();
  return std::get<ConstantTask>(task).vocab_size();
}

inline std::size_t task_state_count(const Task& task) {
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) return fa->state_count();
  return std::get<ConstantTask>(task).state_count();
}

// ============================================================================
// Episode dynamics
// ============================================================================

inline EpisodeState reset(const Task& task) {
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    return EpisodeState{0, fa->start};
  }
  return EpisodeState{0, 0};
}

inline EpisodeState step(const Task& task, const EpisodeState& state,
                         std::size_t token) {
  if (state.step >= task_horizon(task)) {
    throw EpisodeDoneError("episode already terminal");
  }
  if (token >= task_vocab_size(task)) throw IndexError("token out of range");
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    return EpisodeState{state.step + 1,
                        apply_op(fa->op_vocab[token], state.value, fa->modulus)};
  }
  return EpisodeState{state.step + 1, 0};
}

/// Bijective Markov state id: step*m + value (ForkArith) or step (Constant).
inline std::size_t state_id(const Task& task, const EpisodeState& state) {
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    return state.step * static_cast<std::size_t>(fa->modulus) +
           static_cast<std::size_t>(state.value);
  }
  return state.step;
}

// ============================================================================
// Family state space (query-conditioned policy rows)
// ============================================================================
//
// A ForkArith family shares (modulus, horizon, op_vocab) across instances
// that differ in (start, target). The target plays the role of the query:
// prepending it to the per-task state makes one policy table serve every
// instance of the family, and lets held-out (start, target) pairs reuse the
// rows their target has already trained. ConstantTask is its own family.

inline std::size_t family_state_count(const Task& task) {
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    return static_cast<std::size_t>(fa->modulus) * fa->state_count();
  }
  return task_state_count(task);
}

/// target * (T+1) * m + state_id for ForkArith; plain state_id otherwise.
inline std::size_t family_state_id(const Task& task, const EpisodeState& state) {
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    return static_cast<std::size_t>(fa->target) * fa->state_count() +
           state_id(task, state);
  }
  return state_id(task, state);
}

/// Terminal reward: +1 iff the sequence solves the task, else -1.
inline int verify(const Task& task, const std::vector<std::size_t>& tokens) {
  if (tokens.size() != task_horizon(task)) {
    throw LengthError("token sequence length must equal the horizon");
  }
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    EpisodeState s = reset(task);
    for (std::size_t tok : tokens) s = step(task, s, tok);
    return s.value == fa->target ? +1 : -1;
  }
  const auto& ct = std::get<ConstantTask>(task);
  return tokens == ct.required_sequence ? +1 : -1;
}

// ============================================================================
// Exhaustive solution enumeration (the exactness oracle)
// ============================================================================

struct SolutionTable {
  std::uint64_t total_sequences = 0;
  std::uint64_t correct_count = 0;
  /// success_counts[state_id * vocab + token] = number of full sequences that
  /// pass through (state, token) and end correct.
  std::vector<std::uint64_t> success_counts;

  double success_fraction() const {
    return total_sequences == 0
               ? 0.0
               : static_cast<double>(correct_count) / static_cast<double>(total_sequences);
  }
};

namespace detail {

struct DpResult {
  /// counts[state_id * vocab + token] = succeeding completions after taking
  /// token in state. For ConstantTask the state is the step alone, so the
  /// value is I(token == required_sequence[step]) by convention.
  std::vector<std::uint64_t> counts;
  /// Succeeding completions from the reset state.
  std::uint64_t wins_from_start = 0;
};

/// Backward DP over the Markov state graph.
inline DpResult success_dp(const Task& task) {
  const std::size_t horizon = task_horizon(task);
  const std::size_t vocab = task_vocab_size(task);
  const std::size_t states = task_state_count(task);

  std::vector<std::uint64_t> wins(states, 0);
  DpResult result;
  result.counts.assign(states * vocab, 0);

  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    const auto m = static_cast<std::size_t>(fa->modulus);
    wins[horizon * m + static_cast<std::size_t>(fa->target)] = 1;
    for (std::size_t stp = horizon; stp-- > 0;) {
      for (std::size_t val = 0; val < m; ++val) {
        const EpisodeState here{stp, static_cast<std::int64_t>(val)};
        const std::size_t sid = state_id(task, here);
        std::uint64_t total = 0;
        for (std::size_t tok = 0; tok < vocab; ++tok) {
          const EpisodeState next = step(task, here, tok);
          const std::uint64_t w = wins[state_id(task, next)];
          result.counts[sid * vocab + tok] = w;
          total += w;
        }
        wins[sid] = total;
      }
    }
    result.wins_from_start = wins[state_id(task, reset(task))];
    return result;
  }

  const auto& ct = std::get<ConstantTask>(task);
  wins[horizon] = 1;
  for (std::size_t stp = horizon; stp-- > 0;) {
    for (std::size_t tok = 0; tok < vocab; ++tok) {
      result.counts[stp * vocab + tok] =
          (tok == ct.required_sequence[stp]) ? wins[stp + 1] : 0;
    }
    wins[stp] = wins[stp + 1];
  }
  result.wins_from_start = wins[0];
  return result;
}

}  // namespace detail

/**
 * Evaluate every token sequence of length T (capped at vocab^T <= 1e7;
 * larger spaces raise BudgetError). total/correct come from the exhaustive
 * walk; the per-(state, token) completion counts come from a backward DP.
 * The DP's succeeding-completion count at the reset state must equal the
 * walk's correct_count; disagreement indicates a dynamics bug and throws.
 */
inline SolutionTable enumerate_solutions(const Task& task) {
  const std::size_t horizon = task_horizon(task);
  const std::size_t vocab = task_vocab_size(task);

  double space = 1.0;
  for (std::size_t i = 0; i < horizon; ++i) space *= static_cast<double>(vocab);
  if (space > 1e7) throw BudgetError("op_vocab^T exceeds 1e7 sequences");

  SolutionTable table;
  std::vector<std::size_t> tokens(horizon, 0);
  bool done = false;
  while (!done) {
    table.total_sequences += 1;
    if (verify(task, tokens) > 0) table.correct_count += 1;
    // Odometer increment over token ids.
    done = true;
    for (std::size_t t = horizon; t-- > 0;) {
      if (++tokens[t] < vocab) {
        done = false;
        break;
      }
      tokens[t] = 0;
    }
  }

  auto dp = detail::success_dp(task);
  if (dp.wins_from_start != table.correct_count) {
    throw NumericsError("enumeration walk and DP disagree on correct count");
  }
  table.success_counts = std::move(dp.counts);
  return table;
}

// ============================================================================
// Default benchmark family
// ============================================================================

/// Vocabulary for the default family: add1, add2, add5, mul2, mul3, noop.
inline std::vector<Op> default_op_vocab() {
  return {{OpKind::add, 1}, {OpKind::add, 2}, {OpKind::add, 5},
          {OpKind::mul, 2}, {OpKind::mul, 3}, {OpKind::noop, 0}};
}

/**
 * Draw one ForkArith instance with success fraction inside
 * [min_fraction, max_fraction], by rejection over (start, target).
 * The acceptance window keeps instances solvable but non-trivial.
 */
inline ForkArithTask sample_fork_arith(std::int64_t modulus, std::size_t horizon,
                                       const std::vector<Op>& op_vocab,
                                       double min_fraction, double max_fraction,
                                       rng::Rng& rng, std::size_t max_tries = 10000) {
  for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
    ForkArithTask task;
    task.modulus = modulus;
    task.horizon = horizon;
    task.op_vocab = op_vocab;
    task.start = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(modulus)));
    task.target = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(modulus)));
    const auto table = enumerate_solutions(Task{task});
    const double frac = table.success_fraction();
    if (frac >= min_fraction && frac <= max_fraction) return task;
  }
  throw BudgetError("no task instance found inside the success-fraction window");
}

// ============================================================================
// Task file serialization: {"kind","start","target","modulus","horizon","ops"}
// ============================================================================

inline std::string op_name(OpKind kind) {
  switch (kind) {
    case OpKind::add: return "add";
    case OpKind::mul: return "mul";
    case OpKind::noop: return "noop";
  }
  return "noop";
}

inline nlohmann::json task_to_json(const Task& task) {
  nlohmann::json doc;
  if (const auto* fa = std::get_if<ForkArithTask>(&task)) {
    doc["kind"] = "fork_arith";
    doc["start"] = fa->start;
    doc["target"] = fa->target;
    doc["modulus"] = fa->modulus;
    doc["horizon"] = fa->horizon;
    auto ops = nlohmann::json::array();
    for (const auto& op : fa->op_vocab) {
      ops.push_back({{"op", op_name(op.kind)}, {"c", op.c}});
    }
    doc["ops"] = ops;
    return doc;
  }
  const auto& ct = std::get<ConstantTask>(task);
  doc["kind"] = "constant";
  doc["horizon"] = ct.horizon();
  doc["vocab_size"] = ct.vocab_size_value;
  doc["required_sequence"] = ct.required_sequence;
  return doc;
}

inline Task task_from_json(const nlohmann::json& doc) {
  if (!doc.is_object() || !doc.contains("kind")) {
    throw ParseError("task JSON must be an object with a \"kind\"");
  }
  const auto kind = doc.at("kind").get<std::string>();
  if (kind == "fork_arith") {
    ForkArithTask task;
    task.start = doc.at("start").get<std::int64_t>();
    task.target = doc.at("target").get<std::int64_t>();
    task.modulus = doc.at("modulus").get<std::int64_t>();
    task.horizon = doc.at("horizon").get<std::size_t>();
    for (const auto& entry : doc.at("ops")) {
      const auto name = entry.at("op").get<std::string>();
      Op op;
      if (name == "add") op.kind = OpKind::add;
      else if (name == "mul") op.kind = OpKind::mul;
      else if (name == "noop") op.kind = OpKind::noop;
      else throw ParseError("unknown op name: " + name);
      op.c = entry.value("c", std::int64_t{0});
      task.op_vocab.push_back(op);
    }
    if (task.modulus < 2) throw ParseError("modulus must be >= 2");
    if (task.horizon < 1) throw ParseError("horizon must be >= 1");
    if (task.op_vocab.empty()) throw ParseError("ops must be non-empty");
    if (task.start < 0 || task.start >= task.modulus ||
        task.target < 0 || task.target >= task.modulus) {
      throw ParseError("start and target must lie in [0, modulus)");
    }
    return Task{task};
  }
  if (kind == "constant") {
    ConstantTask task;
    task.vocab_size_value = doc.at("vocab_size").get<std::size_t>();
    task.required_sequence = doc.at("required_sequence").get<std::vector<std::size_t>>();
    if (task.required_sequence.empty()) throw ParseError("required_sequence must be non-empty");
    for (std::size_t tok : task.required_sequence) {
      if (tok >= task.vocab_size_value) throw ParseError("required_sequence token out of range");
    }
    return Task{task};
  }
  throw ParseError("unknown task kind: " + kind);
}

}  // namespace forklab::env
