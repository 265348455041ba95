#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file policy.hpp
 * @brief Tabular softmax policy: logit storage, temperature/top-p sampling,
 * per-token entropy and log-probability, and plain gradient updates.
 *
 * The policy is a dense state_count x vocab_size logit table. All probability
 * math is 64-bit with max-subtraction stabilization. Entropy and log_prob are
 * always computed from the full softmax; top-p truncation affects sampling
 * only.
 *
 * Checkpoint format: JSON {"state_count", "vocab_size", "logits": row-major
 * array of arrays}, floats at 17 significant digits so round-trips are
 * lossless.
 */

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include <forklab/errors.hpp>
#include <forklab/io.hpp>
#include <forklab/rng.hpp>

namespace forklab::policy {

using TokenDistribution = std::vector<double>;

class PolicyParams {
 public:
  /// Zero-initialized logits: the uniform (maximum-entropy) policy.
  PolicyParams(std::size_t state_count, std::size_t vocab_size)
      : state_count_(state_count), vocab_size_(vocab_size),
        logits_(state_count * vocab_size, 0.0) {
    if (state_count_ == 0) throw ConfigError("state_count must be positive");
    if (vocab_size_ < 2) throw ConfigError("vocab_size must be >= 2");
  }

  std::size_t state_count() const noexcept { return state_count_; }
  std::size_t vocab_size() const noexcept { return vocab_size_; }

  double logit(std::size_t state, std::size_t token) const {
    check_indices(state, token);
    return logits_[state * vocab_size_ + token];
  }

  void set_logit(std::size_t state, std::size_t token, double value) {
    check_indices(state, token);
    if (!std::isfinite(value)) throw NumericsError("logit must be finite");
    logits_[state * vocab_size_ + token] = value;
  }

  const std::vector<double>& raw() const noexcept { return logits_; }

  /// Row view start for a state; callers index [0, vocab_size).
  const double* row(std::size_t state) const {
    if (state >= state_count_) throw IndexError("state out of range");
    return logits_.data() + state * vocab_size_;
  }

  bool operator==(const PolicyParams& other) const = default;

 private:
  void check_indices(std::size_t state, std::size_t token) const {
    if (state >= state_count_) throw IndexError("state out of range");
    if (token >= vocab_size_) throw IndexError("token out of range");
  }

  std::size_t state_count_;
  std::size_t vocab_size_;
  std::vector<double> logits_;

  friend PolicyParams apply_update(const PolicyParams&, const std::vector<double>&, double);
};

/// Immutable copy of the params taken before a rollout phase (pi_old).
using PolicySnapshot = PolicyParams;

/**
 * Softmax over logits[state]/temperature, stabilized by max-subtraction.
 * Output sums to 1 within 1e-12.
 */
inline TokenDistribution distribution(const PolicyParams& params,
                                      std::size_t state, double temperature) {
  if (!std::isfinite(temperature) || temperature <= 0.0) {
    throw ConfigError("temperature must be finite and positive");
  }
  const double* z = params.row(state);
  const std::size_t v = params.vocab_size();
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v; ++i) zmax = std::max(zmax, z[i] / temperature);
  TokenDistribution probs(v);
  double total = 0.0;
  for (std::size_t i = 0; i < v; ++i) {
    probs[i] = std::exp(z[i] / temperature - zmax);
    total += probs[i];
  }
  for (std::size_t i = 0; i < v; ++i) probs[i] /= total;
  return probs;
}

/// Shannon entropy in nats; 0*ln(0) := 0.
inline double token_entropy(const TokenDistribution& dist) {
  double h = 0.0;
  for (double p : dist) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

/**
 * ln distribution(params, state, temperature)[token], computed in log space:
 * z_t/tau - logsumexp(z/tau). Consistent with distribution() to 1e-12.
 */
inline double log_prob(const PolicyParams& params, std::size_t state,
                       std::size_t token, double temperature) {
  if (!std::isfinite(temperature) || temperature <= 0.0) {
    throw ConfigError("temperature must be finite and positive");
  }
  if (token >= params.vocab_size()) throw IndexError("token out of range");
  const double* z = params.row(state);
  const std::size_t v = params.vocab_size();
  double zmax = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < v; ++i) zmax = std::max(zmax, z[i] / temperature);
  double total = 0.0;
  for (std::size_t i = 0; i < v; ++i) total += std::exp(z[i] / temperature - zmax);
  return z[token] / temperature - zmax - std::log(total);
}

/**
 * Nucleus sampling: restrict to the smallest probability-descending prefix
 * whose cumulative mass reaches top_p (ties broken by lower token id),
 * renormalize, and draw. top_p = 1 is plain categorical sampling over the
 * full support.
 */
inline std::size_t sample(const TokenDistribution& dist, double top_p,
                          rng::Rng& rng) {
  if (!(top_p > 0.0) || top_p > 1.0) throw ConfigError("top_p must be in (0,1]");
  const std::size_t v = dist.size();
  const double u = rng.uniform();

  if (top_p >= 1.0) {
    double cum = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
      cum += dist[i];
      if (u < cum) return i;
    }
    return v - 1;
  }

  std::vector<std::size_t> order(v);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dist[a] > dist[b];
  });
  // The 1e-12 slack absorbs cumulative-sum rounding at the nucleus boundary.
  double mass = 0.0;
  std::size_t cutoff = v;
  for (std::size_t i = 0; i < v; ++i) {
    mass += dist[order[i]];
    if (mass >= top_p - 1e-12) {
      cutoff = i + 1;
      break;
    }
  }
  double cum = 0.0;
  const double target = u * mass;
  for (std::size_t i = 0; i < cutoff; ++i) {
    cum += dist[order[i]];
    if (target < cum) return order[i];
  }
  return order[cutoff - 1];
}

/**
 * Gradient step z <- z - lr * grad over the full table. Returns new params;
 * the input is untouched.
 */
inline PolicyParams apply_update(const PolicyParams& params,
                                 const std::vector<double>& grads, double lr) {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be finite and positive");
  if (grads.size() != params.raw().size()) {
    throw ShapeError("gradient shape mismatch");
  }
  PolicyParams out = params;
  for (std::size_t i = 0; i < grads.size(); ++i) {
    if (!std::isfinite(grads[i])) throw NumericsError("non-finite gradient");
    out.logits_[i] -= lr * grads[i];
  }
  return out;
}

// ============================================================================
// Checkpoint serialization
// ============================================================================

inline std::string save_checkpoint_text(const PolicyParams& params) {
  std::string out = "{\n";
  out += "  \"state_count\": " + std::to_string(params.state_count()) + ",\n";
  out += "  \"vocab_size\": " + std::to_string(params.vocab_size()) + ",\n";
  out += "  \"logits\": [\n";
  for (std::size_t s = 0; s < params.state_count(); ++s) {
    out += "    [";
    for (std::size_t t = 0; t < params.vocab_size(); ++t) {
      if (t > 0) out += ", ";
      out += io::fmt_double(params.logit(s, t));
    }
    out += (s + 1 < params.state_count()) ? "],\n" : "]\n";
  }
  out += "  ]\n}\n";
  return out;
}

inline PolicyParams load_checkpoint_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("checkpoint JSON: ") + e.what());
  }
  if (!doc.is_object() || !doc.contains("state_count") ||
      !doc.contains("vocab_size") || !doc.contains("logits")) {
    throw ParseError("checkpoint JSON missing required keys");
  }
  const auto state_count = doc.at("state_count").get<std::size_t>();
  const auto vocab_size = doc.at("vocab_size").get<std::size_t>();
  const auto& rows = doc.at("logits");
  if (!rows.is_array() || rows.size() != state_count) {
    throw ShapeError("checkpoint logits row count mismatch");
  }
  PolicyParams params(state_count, vocab_size);
  for (std::size_t s = 0; s < state_count; ++s) {
    const auto& row = rows.at(s);
    if (!row.is_array() || row.size() != vocab_size) {
      throw ShapeError("checkpoint logits column count mismatch");
    }
    for (std::size_t t = 0; t < vocab_size; ++t) {
      params.set_logit(s, t, row.at(t).get<double>());
    }
  }
  return params;
}

}  // namespace forklab::policy
