#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file credit.hpp
 * @brief Group-relative advantages, entropy statistics, quadrant labeling,
 * entropy-aware advantage shaping, and baseline shaping variants.
 *
 * Shaping contract: credit = clip((H - mu)/sigma, +/-|base|/phi), so
 * |credit| <= |base|/phi always, and shaped = base + alpha*sign(base)*credit
 * preserves sign(base) for alpha <= 1 and phi >= 1. sigma = 0 yields credit
 * 0, and sign(0) := 0, so shaping degrades exactly to the unshaped advantage.
 * The credit term is a constant under differentiation (detached); only the
 * importance ratio carries gradient.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include <forklab/errors.hpp>

namespace forklab::credit {

enum class Quadrant : int { PHR = 0, PLR = 1, NLR = 2, NHR = 3 };

inline const char* quadrant_name(Quadrant q) {
  switch (q) {
    case Quadrant::PHR: return "PHR";
    case Quadrant::PLR: return "PLR";
    case Quadrant::NLR: return "NLR";
    case Quadrant::NHR: return "NHR";
  }
  return "PHR";
}

inline Quadrant quadrant_from_name(const std::string& name) {
  if (name == "PHR") return Quadrant::PHR;
  if (name == "PLR") return Quadrant::PLR;
  if (name == "NLR") return Quadrant::NLR;
  if (name == "NHR") return Quadrant::NHR;
  throw ConfigError("unknown quadrant: " + name);
}

struct EntropyStats {
  double mu = 0.0;
  double sigma = 0.0;
};

struct ShapedAdvantage {
  double base = 0.0;
  double credit = 0.0;
  double shaped = 0.0;
  Quadrant quadrant = Quadrant::PHR;
};

/**
 * Group-standardized advantages: (r - mean)/std with the population standard
 * deviation. Output has mean 0 and std 1 within 1e-9 whenever defined.
 * Degenerate groups (std < 1e-8) raise ZeroVarianceGroup; callers drop them
 * (dynamic sampling) rather than smoothing the denominator.
 */
inline std::vector<double> group_advantage(const std::vector<int>& rewards) {
  if (rewards.size() < 2) throw ConfigError("group size must be >= 2");
  const auto g = static_cast<double>(rewards.size());
  double mean = 0.0;
  for (int r : rewards) mean += r;
  mean /= g;
  double var = 0.0;
  for (int r : rewards) var += (r - mean) * (r - mean);
  var /= g;
  const double sd = std::sqrt(var);
  if (sd < 1e-8) throw ZeroVarianceGroup("group rewards have zero variance");
  std::vector<double> advantages(rewards.size());
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    advantages[i] = (rewards[i] - mean) / sd;
  }
  return advantages;
}

/// Population mean and std over the flattened token entropies of a group.
inline EntropyStats entropy_stats(const std::vector<double>& entropies) {
  if (entropies.empty()) throw EmptyInputError("no token entropies");
  const auto n = static_cast<double>(entropies.size());
  EntropyStats stats;
  for (double h : entropies) stats.mu += h;
  stats.mu /= n;
  double var = 0.0;
  for (double h : entropies) var += (h - stats.mu) * (h - stats.mu);
  stats.sigma = std::sqrt(var / n);
  return stats;
}

/**
 * Entropy credit: clip((H - mu)/sigma, -|base|/phi, +|base|/phi).
 * sigma = 0 means no entropy differentiation exists within the group, so the
 * credit is 0 and shaping degrades to the unshaped advantage.
 */
inline double credit_score(double h, const EntropyStats& stats, double base_adv,
                           double phi) {
  if (!(phi > 0.0)) throw ConfigError("phi must be positive");
  if (stats.sigma == 0.0) return 0.0;
  const double z = (h - stats.mu) / stats.sigma;
  const double bound = std::abs(base_adv) / phi;
  return std::clamp(z, -bound, bound);
}

/**
 * shaped = base + alpha * sign(base) * credit, with sign(0) := 0. The credit
 * term is treated as a constant during differentiation.
 */
inline double shape_advantage(double base, double credit, double alpha) {
  const double sign = base > 0.0 ? 1.0 : (base < 0.0 ? -1.0 : 0.0);
  return base + alpha * sign * credit;
}

/// Token partition by polarity and entropy side; the boundary H == mu_H is
/// high-entropy.
inline Quadrant quadrant_label(double h, double mu_h, int reward) {
  if (reward >= 0) return h >= mu_h ? Quadrant::PHR : Quadrant::PLR;
  return h >= mu_h ? Quadrant::NHR : Quadrant::NLR;
}

// ============================================================================
// Shaping modes
// ============================================================================

enum class Mode { grpo, wreinf, forking, entroadv, entroreg, eapo };

inline const char* mode_name(Mode mode) {
  switch (mode) {
    case Mode::grpo: return "grpo";
    case Mode::wreinf: return "wreinf";
    case Mode::forking: return "forking";
    case Mode::entroadv: return "entroadv";
    case Mode::entroreg: return "entroreg";
    case Mode::eapo: return "eapo";
  }
  return "grpo";
}

inline Mode mode_from_name(const std::string& name) {
  if (name == "grpo") return Mode::grpo;
  if (name == "wreinf") return Mode::wreinf;
  if (name == "forking") return Mode::forking;
  if (name == "entroadv") return Mode::entroadv;
  if (name == "entroreg") return Mode::entroreg;
  if (name == "eapo") return Mode::eapo;
  throw ConfigError("unknown mode: " + name);
}

/// One token's inputs to baseline shaping.
struct TokenRecord {
  double entropy = 0.0;
  double base_adv = 0.0;
  int reward = 0;
  /// Group-scoped entropy stats shared by the token's group.
  EntropyStats stats;
};

/// One token's shaping outcome: loss advantage, inclusion mask, and the
/// entropy-bonus coefficient (nonzero only in entroreg mode).
struct ShapingResult {
  std::vector<double> advantages;
  std::vector<bool> mask;
  double entropy_coef = 0.0;
};

/**
 * Apply one baseline or shaping mode to a step batch of tokens:
 * - grpo: advantages unchanged.
 * - wreinf: positive advantages scaled by 0.1.
 * - forking: only the top ceil(0.2*N) entropy tokens keep their advantage
 *   (ties broken by earlier position); the rest are masked out.
 * - entroadv: base + alpha * max(credit, 0), no sign term.
 * - entroreg: advantages unchanged, entropy_coef = entropy_reg_coef for a
 *   differentiable -c*H(pi) loss bonus.
 * - eapo: credit_score + shape_advantage composition.
 */
inline ShapingResult baseline_shaping(Mode mode,
                                      const std::vector<TokenRecord>& tokens,
                                      double alpha, double phi,
                                      double entropy_reg_coef = 0.001) {
  ShapingResult result;
  result.advantages.resize(tokens.size());
  result.mask.assign(tokens.size(), true);

  switch (mode) {
    case Mode::grpo:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        result.advantages[i] = tokens[i].base_adv;
      }
      break;
    case Mode::wreinf:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const double a = tokens[i].base_adv;
        result.advantages[i] = a > 0.0 ? 0.1 * a : a;
      }
      break;
    case Mode::forking: {
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        result.advantages[i] = tokens[i].base_adv;
      }
      const std::size_t keep = tokens.empty()
          ? 0
          : static_cast<std::size_t>(
                std::ceil(0.2 * static_cast<double>(tokens.size())));
      std::vector<std::size_t> order(tokens.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) {
                         return tokens[a].entropy > tokens[b].entropy;
                       });
      result.mask.assign(tokens.size(), false);
      for (std::size_t i = 0; i < keep; ++i) result.mask[order[i]] = true;
      break;
    }
    case Mode::entroadv:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& tok = tokens[i];
        const double c = credit_score(tok.entropy, tok.stats, tok.base_adv, phi);
        result.advantages[i] = tok.base_adv + alpha * std::max(c, 0.0);
      }
      break;
    case Mode::entroreg:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        result.advantages[i] = tokens[i].base_adv;
      }
      result.entropy_coef = entropy_reg_coef;
      break;
    case Mode::eapo:
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        const auto& tok = tokens[i];
        const double c = credit_score(tok.entropy, tok.stats, tok.base_adv, phi);
        result.advantages[i] = shape_advantage(tok.base_adv, c, alpha);
      }
      break;
  }
  return result;
}

/// Full shaping record for one token under the entropy-aware objective.
inline ShapedAdvantage shaped_advantage(double h, const EntropyStats& stats,
                                        double base, double alpha, double phi,
                                        int reward) {
  ShapedAdvantage out;
  out.base = base;
  out.credit = credit_score(h, stats, base, phi);
  out.shaped = shape_advantage(base, out.credit, alpha);
  out.quadrant = quadrant_label(h, stats.mu, reward);
  return out;
}

}  // namespace forklab::credit
