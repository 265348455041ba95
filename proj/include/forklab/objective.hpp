#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file objective.hpp
 * @brief Clipped group-relative surrogate loss (full and quadrant-restricted),
 * exact analytic logit gradients, the ratio-1 simplified gradient diagnostic,
 * and a finite-difference verifier.
 *
 * Loss over a batch of tokens:
 *   L = -(1/N) * sum_tokens [mask] * ( min(rho*A, clip(rho, 1-eps_low,
 *       1+eps_high)*A) + c * H(pi(s_t)) )
 * where N counts ALL tokens in the batch regardless of mask (the global
 * normalizer stays inside each quadrant-restricted loss, which makes the
 * full loss equal the sum of the four quadrant losses exactly), rho =
 * exp(logp_new - logp_old), A is a constant under differentiation, and c is
 * the optional differentiable entropy-bonus coefficient.
 *
 * Subgradient convention: the gradient flows through whichever min branch
 * attains the value; exact ties route through the unclipped branch. A
 * selected clipped branch is always saturated (otherwise it ties), so its
 * gradient is zero.
 */

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include <forklab/credit.hpp>
#include <forklab/errors.hpp>
#include <forklab/policy.hpp>
#include <forklab/rng.hpp>

namespace forklab::objective {

using credit::Quadrant;

struct ClipConfig {
  double eps_low = 0.20;
  double eps_high = 0.28;
};

using QuadrantMask = std::array<bool, 4>;

inline constexpr QuadrantMask kAllQuadrants{true, true, true, true};

inline QuadrantMask single_quadrant(Quadrant q) {
  QuadrantMask mask{false, false, false, false};
  mask[static_cast<std::size_t>(q)] = true;
  return mask;
}

/// One rollout token as the loss sees it. The advantage is already shaped
/// and is a constant under differentiation. Unselected tokens (the forking
/// baseline masks all but the top-entropy ones) stay in the normalizer but
/// contribute no loss or gradient.
struct BatchToken {
  std::size_t state = 0;
  std::size_t token = 0;
  double logp_old = 0.0;
  double adv = 0.0;
  Quadrant quadrant = Quadrant::PHR;
  bool selected = true;
};

struct LossBreakdown {
  double total = 0.0;
  std::array<double, 4> per_quadrant{0.0, 0.0, 0.0, 0.0};
  /// Tokens selected by the quadrant mask.
  std::size_t token_count = 0;
  /// All tokens in the batch; the loss normalizer.
  std::size_t normalizer = 0;
};

/// exp(logp_new - logp_old); throws once the ratio leaves [0, 1e6] or an
/// input is non-finite.
inline double importance_ratio(double logp_new, double logp_old) {
  if (!std::isfinite(logp_new) || !std::isfinite(logp_old)) {
    throw NumericsError("log-probabilities must be finite");
  }
  const double rho = std::exp(logp_new - logp_old);
  if (!std::isfinite(rho) || rho > 1e6) {
    throw NumericsError("importance ratio exceeds 1e6");
  }
  return rho;
}

/// min(rho*A, clip(rho, 1-eps_low, 1+eps_high)*A).
inline double surrogate_term(double rho, double adv, const ClipConfig& clip) {
  const double clipped_rho =
      std::clamp(rho, 1.0 - clip.eps_low, 1.0 + clip.eps_high);
  return std::min(rho * adv, clipped_rho * adv);
}

namespace detail {

/// Min-branch signature per token: 0 unclipped (including ties), 1 clipped at
/// the low edge, 2 clipped at the high edge.
enum class Branch : std::int8_t { unclipped = 0, clipped_low = 1, clipped_high = 2 };

inline Branch branch_of(double rho, double adv, const ClipConfig& clip) {
  const double lo = 1.0 - clip.eps_low;
  const double hi = 1.0 + clip.eps_high;
  const double clipped_rho = std::clamp(rho, lo, hi);
  const double unclipped = rho * adv;
  const double clipped = clipped_rho * adv;
  if (clipped < unclipped) {
    return rho < lo ? Branch::clipped_low : Branch::clipped_high;
  }
  return Branch::unclipped;
}

struct LossEval {
  LossBreakdown breakdown;
  std::vector<Branch> branches;
};

inline LossEval eval_loss(const policy::PolicyParams& params,
                          const std::vector<BatchToken>& batch,
                          const ClipConfig& clip, const QuadrantMask& mask,
                          double temperature, double entropy_coef) {
  if (batch.empty()) throw EmptyInputError("empty token batch");
  LossEval eval;
  eval.breakdown.normalizer = batch.size();
  eval.branches.resize(batch.size());
  const double inv_n = 1.0 / static_cast<double>(batch.size());

  for (std::size_t i = 0; i < batch.size(); ++i) {
    const auto& tok = batch[i];
    if (tok.state >= params.state_count() || tok.token >= params.vocab_size()) {
      throw ShapeError("batch token indices exceed params shape");
    }
    // Non-contributing tokens get a fixed branch tag so fd_check signatures
    // only reflect tokens the loss actually depends on.
    eval.branches[i] = Branch::unclipped;
    if (!tok.selected || !mask[static_cast<std::size_t>(tok.quadrant)]) continue;
    // logp_new comes from the same softmax pass the gradient and rollout
    // paths use, so rho is exactly 1 when params equal the snapshot.
    const auto dist = policy::distribution(params, tok.state, temperature);
    const double rho = importance_ratio(std::log(dist[tok.token]), tok.logp_old);
    eval.branches[i] = branch_of(rho, tok.adv, clip);
    eval.breakdown.token_count += 1;

    double contribution = -surrogate_term(rho, tok.adv, clip) * inv_n;
    if (entropy_coef != 0.0) {
      contribution -= entropy_coef * policy::token_entropy(dist) * inv_n;
    }
    eval.breakdown.total += contribution;
    eval.breakdown.per_quadrant[static_cast<std::size_t>(tok.quadrant)] +=
        contribution;
  }
  return eval;
}

}  // namespace detail

/**
 * Quadrant-restricted batch loss. The normalizer is the size of the whole
 * batch, so summing the four single-quadrant losses reproduces the full loss
 * exactly.
 */
inline LossBreakdown batch_loss(const policy::PolicyParams& params,
                                const std::vector<BatchToken>& batch,
                                const ClipConfig& clip,
                                const QuadrantMask& mask = kAllQuadrants,
                                double temperature = 1.0,
                                double entropy_coef = 0.0) {
  return detail::eval_loss(params, batch, clip, mask, temperature, entropy_coef)
      .breakdown;
}

/**
 * Exact gradient of batch_loss with respect to the current logits, as a
 * row-major state_count x vocab_size matrix. Accumulation follows batch
 * order, which the trainer fixes as (query id, trajectory, t).
 *
 * Per token, with pi = softmax(z[state]/tau) and o the sampled token:
 *   unclipped branch:  dL/dz_v += -(1/N) * A * rho * (delta_vo - pi_v) / tau
 *   clipped branch:    zero (selected implies saturated)
 *   entropy bonus:     dL/dz_v += (c/N) * pi_v * (ln pi_v + H(pi)) / tau
 */
inline std::vector<double> analytic_gradients(
    const policy::PolicyParams& params, const std::vector<BatchToken>& batch,
    const ClipConfig& clip, const QuadrantMask& mask = kAllQuadrants,
    double temperature = 1.0, double entropy_coef = 0.0) {
  if (batch.empty()) throw EmptyInputError("empty token batch");
  std::vector<double> grads(params.state_count() * params.vocab_size(), 0.0);
  const double inv_n = 1.0 / static_cast<double>(batch.size());
  const std::size_t vocab = params.vocab_size();

  for (const auto& tok : batch) {
    if (tok.state >= params.state_count() || tok.token >= vocab) {
      throw ShapeError("batch token indices exceed params shape");
    }
    if (!tok.selected || !mask[static_cast<std::size_t>(tok.quadrant)]) continue;
    const auto pi = policy::distribution(params, tok.state, temperature);
    const double logp_new = std::log(pi[tok.token]);
    const double rho = importance_ratio(logp_new, tok.logp_old);
    double* row = grads.data() + tok.state * vocab;

    if (detail::branch_of(rho, tok.adv, clip) == detail::Branch::unclipped) {
      const double scale = -inv_n * tok.adv * rho / temperature;
      for (std::size_t v = 0; v < vocab; ++v) {
        const double delta = v == tok.token ? 1.0 : 0.0;
        row[v] += scale * (delta - pi[v]);
      }
    }
    if (entropy_coef != 0.0) {
      const double h = policy::token_entropy(pi);
      const double scale = entropy_coef * inv_n / temperature;
      for (std::size_t v = 0; v < vocab; ++v) {
        if (pi[v] > 0.0) row[v] += scale * pi[v] * (std::log(pi[v]) + h);
      }
    }
  }
  return grads;
}

/**
 * The ratio-1 approximation of the per-token DESCENT direction -dL/dz over
 * one state row, unnormalized: A*(1 - pi_o) at the sampled token and
 * -A*pi_v elsewhere. Diagnostic against analytic_gradients when params equal
 * the snapshot and clipping is inactive.
 */
inline std::vector<double> simplified_gradient(
    const policy::TokenDistribution& pi, std::size_t sampled, double adv) {
  if (sampled >= pi.size()) throw IndexError("sampled token out of range");
  std::vector<double> descent(pi.size());
  for (std::size_t v = 0; v < pi.size(); ++v) {
    descent[v] = v == sampled ? adv * (1.0 - pi[v]) : -adv * pi[v];
  }
  return descent;
}

struct FdCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  /// Coordinates skipped because a token's min branch switched inside the
  /// +/-h stencil (the loss is non-differentiable there).
  std::size_t excluded = 0;
};

/**
 * Central finite differences of batch_loss over a random subset of logit
 * coordinates drawn from rows the batch visits. Relative error per
 * coordinate is |analytic - fd| / max(|fd|, 1e-8).
 */
inline FdCheckResult fd_check(const policy::PolicyParams& params,
                              const std::vector<BatchToken>& batch,
                              const ClipConfig& clip, double h, rng::Rng& rng,
                              std::size_t n_coords = 200,
                              const QuadrantMask& mask = kAllQuadrants,
                              double temperature = 1.0,
                              double entropy_coef = 0.0) {
  if (!(h >= 1e-7 && h <= 1e-3)) throw ConfigError("h must lie in [1e-7, 1e-3]");
  const auto analytic =
      analytic_gradients(params, batch, clip, mask, temperature, entropy_coef);
  const auto base =
      detail::eval_loss(params, batch, clip, mask, temperature, entropy_coef);

  std::vector<std::size_t> visited_states;
  {
    std::vector<bool> seen(params.state_count(), false);
    for (const auto& tok : batch) seen[tok.state] = true;
    for (std::size_t s = 0; s < seen.size(); ++s) {
      if (seen[s]) visited_states.push_back(s);
    }
  }

  FdCheckResult result;
  const std::size_t vocab = params.vocab_size();
  for (std::size_t i = 0; i < n_coords; ++i) {
    const std::size_t state = visited_states[rng.below(visited_states.size())];
    const std::size_t token = rng.below(vocab);

    policy::PolicyParams plus = params;
    plus.set_logit(state, token, params.logit(state, token) + h);
    policy::PolicyParams minus = params;
    minus.set_logit(state, token, params.logit(state, token) - h);

    const auto eval_plus =
        detail::eval_loss(plus, batch, clip, mask, temperature, entropy_coef);
    const auto eval_minus =
        detail::eval_loss(minus, batch, clip, mask, temperature, entropy_coef);

    if (eval_plus.branches != base.branches ||
        eval_minus.branches != base.branches) {
      result.excluded += 1;
      continue;
    }
    const double fd =
        (eval_plus.breakdown.total - eval_minus.breakdown.total) / (2.0 * h);
    const double a = analytic[state * vocab + token];
    const double rel = std::abs(a - fd) / std::max(std::abs(fd), 1e-8);
    result.max_rel_error = std::max(result.max_rel_error, rel);
    result.checked += 1;
  }
  return result;
}

}  // namespace forklab::objective
