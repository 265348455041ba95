#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file infotheory.hpp
 * @brief Exact discrete information-theoretic oracles and the binned proxy
 * mutual-information estimator.
 *
 * Four entry points:
 * - cmi_direct: I(A; R) = H(A) - H(A|R) on an explicit joint.
 * - credit_bound_holds: the entropy bound I <= H(A), with slack H(A|R).
 * - hindsight_cmi: the same information via Bayes posteriors,
 *   I = E_r KL(pi_hs(.|r) || pi) with pi_hs(a|r) proportional to pi(a) p(r|a).
 * - proxy_cmi: plug-in MI between equal-width-binned token entropies and the
 *   binary reward, over the analytic range [0, h_max].
 *
 * All logarithms are natural; 0*ln(0) := 0 everywhere.
 */

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include <forklab/errors.hpp>

namespace forklab::infotheory {

/// Joint over (token choice, binary reward): p[a*2 + r] with r in {0:neg, 1:pos}.
struct DiscreteJoint {
  std::size_t a_count = 0;
  std::vector<double> p;

  double at(std::size_t a, std::size_t r) const { return p[a * 2 + r]; }
};

namespace detail {

inline double plogp(double p) { return p > 0.0 ? p * std::log(p) : 0.0; }

inline double entropy(const std::vector<double>& dist) {
  double h = 0.0;
  for (double p : dist) h -= plogp(p);
  return h;
}

inline void validate_joint(const DiscreteJoint& joint) {
  if (joint.a_count == 0 || joint.p.size() != joint.a_count * 2) {
    throw DistributionError("joint must be |A| x 2");
  }
  double total = 0.0;
  for (double v : joint.p) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw DistributionError("joint entries must be finite and non-negative");
    }
    total += v;
  }
  if (std::abs(total - 1.0) > 1e-12) {
    throw DistributionError("joint must sum to 1 within 1e-12");
  }
}

}  // namespace detail

/// I(A; R) = H(A) - sum_r p(r) H(A|r), in nats. Non-negative up to rounding.
inline double cmi_direct(const DiscreteJoint& joint) {
  detail::validate_joint(joint);
  const std::size_t n = joint.a_count;

  std::vector<double> marg_a(n, 0.0);
  double marg_r[2] = {0.0, 0.0};
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t r = 0; r < 2; ++r) {
      marg_a[a] += joint.at(a, r);
      marg_r[r] += joint.at(a, r);
    }
  }

  double h_a = detail::entropy(marg_a);
  double h_a_given_r = 0.0;
  for (std::size_t r = 0; r < 2; ++r) {
    if (marg_r[r] <= 0.0) continue;
    double h = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      h -= detail::plogp(joint.at(a, r) / marg_r[r]);
    }
    h_a_given_r += marg_r[r] * h;
  }
  return h_a - h_a_given_r;
}

struct CreditBoundResult {
  bool holds = false;
  /// Slack H(A|R) = H(A) - I, always >= 0 up to rounding.
  double slack = 0.0;
  double information = 0.0;
  double entropy = 0.0;
};

/// The entropy credit bound: I(A;R) <= H(A) + 1e-9, with slack H(A|R).
inline CreditBoundResult credit_bound_holds(const DiscreteJoint& joint) {
  detail::validate_joint(joint);
  CreditBoundResult result;
  result.information = cmi_direct(joint);

  std::vector<double> marg_a(joint.a_count, 0.0);
  for (std::size_t a = 0; a < joint.a_count; ++a) {
    marg_a[a] = joint.at(a, 0) + joint.at(a, 1);
  }
  result.entropy = detail::entropy(marg_a);
  result.slack = result.entropy - result.information;
  result.holds = result.information <= result.entropy + 1e-9;
  return result;
}

/**
 * I(A; R) via the hindsight route: form the Bayes posterior
 * pi_hs(a|r) proportional to prior(a) * likelihood[a][r], then return
 * sum_r p(r) KL(pi_hs(.|r) || prior). A reward outcome with zero marginal
 * probability contributes 0.
 *
 * likelihood[a] = {p(r=neg|a), p(r=pos|a)}, each row a valid conditional.
 */
inline double hindsight_cmi(const std::vector<double>& prior,
                            const std::vector<std::array<double, 2>>& likelihood) {
  if (prior.empty() || prior.size() != likelihood.size()) {
    throw ShapeError("prior and likelihood must have equal non-zero length");
  }
  double prior_total = 0.0;
  for (double p : prior) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw DistributionError("invalid prior entry");
    prior_total += p;
  }
  if (std::abs(prior_total - 1.0) > 1e-12) throw DistributionError("prior must sum to 1");
  for (const auto& row : likelihood) {
    if (!(row[0] >= 0.0) || !(row[1] >= 0.0) ||
        std::abs(row[0] + row[1] - 1.0) > 1e-12) {
      throw DistributionError("likelihood rows must be conditional distributions");
    }
  }

  const std::size_t n = prior.size();
  double total = 0.0;
  for (std::size_t r = 0; r < 2; ++r) {
    double p_r = 0.0;
    for (std::size_t a = 0; a < n; ++a) p_r += prior[a] * likelihood[a][r];
    if (p_r <= 0.0) continue;
    double kl = 0.0;
    for (std::size_t a = 0; a < n; ++a) {
      const double post = prior[a] * likelihood[a][r] / p_r;
      if (post > 0.0) kl += post * std::log(post / prior[a]);
    }
    total += p_r * kl;
  }
  return total;
}

/// The joint p(a, r) = prior(a) * likelihood[a][r] induced by a hindsight pair.
inline DiscreteJoint induced_joint(const std::vector<double>& prior,
                                   const std::vector<std::array<double, 2>>& likelihood) {
  DiscreteJoint joint;
  joint.a_count = prior.size();
  joint.p.resize(prior.size() * 2);
  for (std::size_t a = 0; a < prior.size(); ++a) {
    joint.p[a * 2 + 0] = prior[a] * likelihood[a][0];
    joint.p[a * 2 + 1] = prior[a] * likelihood[a][1];
  }
  return joint;
}

// ============================================================================
// Binned proxy estimator and polarity histograms
// ============================================================================

namespace detail {

/// Equal-width bin index over [0, h_max]; values at or beyond h_max go to the
/// last bin, values below 0 to the first.
inline std::size_t bin_of(double h, double h_max, std::size_t n_bins) {
  if (h <= 0.0) return 0;
  if (h >= h_max) return n_bins - 1;
  auto b = static_cast<std::size_t>(h / h_max * static_cast<double>(n_bins));
  return b >= n_bins ? n_bins - 1 : b;
}

}  // namespace detail

/**
 * Plug-in mutual information between binned entropies and the binary reward:
 * H(bin) - sum_r p(r) H(bin | r). Returns 0 when either polarity class is
 * empty. h_max sets the binning range; pass ln(vocab_size) for policy
 * entropies.
 */
inline double proxy_cmi(const std::vector<double>& entropies,
                        const std::vector<int>& rewards, std::size_t n_bins,
                        double h_max) {
  if (entropies.size() != rewards.size()) {
    throw ShapeError("entropies and rewards must have equal length");
  }
  if (entropies.empty()) throw EmptyInputError("no tokens");
  if (n_bins < 2) throw ConfigError("n_bins must be >= 2");
  if (!(h_max > 0.0)) throw ConfigError("h_max must be positive");

  std::vector<double> joint(n_bins * 2, 0.0);
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < entropies.size(); ++i) {
    const std::size_t r = rewards[i] >= 0 ? 1 : 0;
    (r == 1 ? pos : neg) += 1;
    joint[detail::bin_of(entropies[i], h_max, n_bins) * 2 + r] += 1.0;
  }
  if (pos == 0 || neg == 0) return 0.0;

  const auto total = static_cast<double>(entropies.size());
  for (double& v : joint) v /= total;
  DiscreteJoint dj{n_bins, std::move(joint)};
  return cmi_direct(dj);
}

struct EntropyHistogram {
  std::vector<double> bin_edges;
  std::vector<std::uint64_t> counts_pos;
  std::vector<std::uint64_t> counts_neg;
  /// Fraction of ingested tokens with entropy >= the global mean entropy.
  double frac_above_mean = 0.0;
};

/**
 * Polarity-split histogram of token entropies over [0, h_max] with n_bins
 * equal-width bins. Counts conserve the input: counts_pos sums to the number
 * of positive tokens, counts_neg to the negatives.
 */
inline EntropyHistogram entropy_histograms(
    const std::vector<std::pair<double, int>>& tokens, std::size_t n_bins,
    double h_max) {
  if (tokens.empty()) throw EmptyInputError("no tokens");
  if (n_bins < 2) throw ConfigError("n_bins must be >= 2");
  if (!(h_max > 0.0)) throw ConfigError("h_max must be positive");

  EntropyHistogram hist;
  hist.bin_edges.resize(n_bins + 1);
  for (std::size_t i = 0; i <= n_bins; ++i) {
    hist.bin_edges[i] = h_max * static_cast<double>(i) / static_cast<double>(n_bins);
  }
  hist.counts_pos.assign(n_bins, 0);
  hist.counts_neg.assign(n_bins, 0);

  double mean = 0.0;
  for (const auto& [h, r] : tokens) mean += h;
  mean /= static_cast<double>(tokens.size());

  std::size_t above = 0;
  for (const auto& [h, r] : tokens) {
    const std::size_t b = detail::bin_of(h, h_max, n_bins);
    if (r >= 0) hist.counts_pos[b] += 1;
    else hist.counts_neg[b] += 1;
    if (h >= mean) above += 1;
  }
  hist.frac_above_mean =
      static_cast<double>(above) / static_cast<double>(tokens.size());
  return hist;
}

}  // namespace forklab::infotheory
