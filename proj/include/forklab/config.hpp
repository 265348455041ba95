#pragma once

// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file config.hpp
 * @brief Training configuration: defaults, strict JSON parsing (unknown keys
 * rejected, every type checked), and resolved-config echoing.
 *
 * Every run writes the fully resolved config back into its run directory, so
 * a run is reproducible from its own artifacts alone.
 */

#include <concepts>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include <forklab/credit.hpp>
#include <forklab/errors.hpp>
#include <forklab/objective.hpp>

namespace forklab::config {

struct TaskFamilyConfig {
  std::string kind = "fork_arith";
  std::int64_t modulus = 23;
  std::size_t horizon = 8;
  std::size_t train_tasks = 16;
  std::size_t eval_tasks = 8;
  /// Accepted success-fraction window for rejection-sampled instances.
  double min_success = 0.01;
  double max_success = 0.10;
};

struct TrainConfig {
  credit::Mode mode = credit::Mode::grpo;
  /// Quadrant restriction of the loss; all four = the unrestricted objective.
  objective::QuadrantMask quadrants = objective::kAllQuadrants;
  std::size_t group_size = 8;
  std::size_t queries_per_step = 64;
  /// Mini-batch size in whole trajectories.
  std::size_t ppo_mini_batch = 64;
  double lr = 0.05;
  double alpha = 0.2;
  double phi = 2.0;
  double eps_low = 0.20;
  double eps_high = 0.28;
  double temperature = 1.0;
  double top_p = 0.95;
  std::size_t total_steps = 300;
  std::uint64_t seed = 1;
  double entropy_reg_coef = 0.001;
  std::size_t proxy_bins = 32;
  /// 0 = checkpoint at the final step only; n = also every n steps.
  std::size_t checkpoint_interval = 0;
  /// 0 = dump rollouts and shaped advantages at the final step only.
  std::size_t dump_interval = 0;
  std::string out_dir;
  TaskFamilyConfig task_family;

  objective::ClipConfig clip() const { return {eps_low, eps_high}; }
};

namespace detail {

inline void require_keys(const nlohmann::json& doc,
                         const std::vector<std::string>& known,
                         const std::string& scope) {
  for (const auto& [key, value] : doc.items()) {
    bool found = false;
    for (const auto& k : known) {
      if (k == key) {
        found = true;
        break;
      }
    }
    if (!found) throw ConfigError("unknown key: " + scope + key);
  }
}

inline void read_field(const nlohmann::json& doc, const char* key, double& out) {
  if (!doc.contains(key)) return;
  if (!doc.at(key).is_number()) throw ConfigError(std::string(key) + " must be a number");
  out = doc.at(key).get<double>();
}

/// One template covers std::size_t and std::uint64_t whether or not the
/// platform makes them the same type.
template <std::unsigned_integral T>
inline void read_field(const nlohmann::json& doc, const char* key, T& out) {
  if (!doc.contains(key)) return;
  if (!doc.at(key).is_number_unsigned() && !doc.at(key).is_number_integer()) {
    throw ConfigError(std::string(key) + " must be a non-negative integer");
  }
  if (!doc.at(key).is_number_unsigned() && doc.at(key).get<std::int64_t>() < 0) {
    throw ConfigError(std::string(key) + " must be non-negative");
  }
  out = static_cast<T>(doc.at(key).get<std::uint64_t>());
}

inline void read_field(const nlohmann::json& doc, const char* key, std::int64_t& out) {
  if (!doc.contains(key)) return;
  if (!doc.at(key).is_number_integer() && !doc.at(key).is_number_unsigned()) {
    throw ConfigError(std::string(key) + " must be an integer");
  }
  out = doc.at(key).get<std::int64_t>();
}

inline void read_field(const nlohmann::json& doc, const char* key, std::string& out) {
  if (!doc.contains(key)) return;
  if (!doc.at(key).is_string()) throw ConfigError(std::string(key) + " must be a string");
  out = doc.at(key).get<std::string>();
}

}  // namespace detail

inline void validate_config(const TrainConfig& cfg);

/// Build a config from a parsed JSON document; omitted keys keep their
/// defaults, unknown keys and type mismatches raise ConfigError naming the key.
inline TrainConfig config_from_json(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  detail::require_keys(
      doc,
      {"mode", "quadrants", "group_size", "queries_per_step", "ppo_mini_batch",
       "lr", "alpha", "phi", "eps_low", "eps_high", "temperature", "top_p",
       "total_steps", "seed", "entropy_reg_coef", "proxy_bins",
       "checkpoint_interval", "dump_interval", "out_dir", "task_family"},
      "");

  TrainConfig cfg;
  if (doc.contains("mode")) {
    if (!doc.at("mode").is_string()) throw ConfigError("mode must be a string");
    cfg.mode = credit::mode_from_name(doc.at("mode").get<std::string>());
  }
  if (doc.contains("quadrants")) {
    if (!doc.at("quadrants").is_array()) {
      throw ConfigError("quadrants must be an array of quadrant names");
    }
    cfg.quadrants = {false, false, false, false};
    for (const auto& entry : doc.at("quadrants")) {
      if (!entry.is_string()) throw ConfigError("quadrants entries must be strings");
      const auto q = credit::quadrant_from_name(entry.get<std::string>());
      cfg.quadrants[static_cast<std::size_t>(q)] = true;
    }
  }
  detail::read_field(doc, "group_size", cfg.group_size);
  detail::read_field(doc, "queries_per_step", cfg.queries_per_step);
  detail::read_field(doc, "ppo_mini_batch", cfg.ppo_mini_batch);
  detail::read_field(doc, "lr", cfg.lr);
  detail::read_field(doc, "alpha", cfg.alpha);
  detail::read_field(doc, "phi", cfg.phi);
  detail::read_field(doc, "eps_low", cfg.eps_low);
  detail::read_field(doc, "eps_high", cfg.eps_high);
  detail::read_field(doc, "temperature", cfg.temperature);
  detail::read_field(doc, "top_p", cfg.top_p);
  detail::read_field(doc, "total_steps", cfg.total_steps);
  detail::read_field(doc, "seed", cfg.seed);
  detail::read_field(doc, "entropy_reg_coef", cfg.entropy_reg_coef);
  detail::read_field(doc, "proxy_bins", cfg.proxy_bins);
  detail::read_field(doc, "checkpoint_interval", cfg.checkpoint_interval);
  detail::read_field(doc, "dump_interval", cfg.dump_interval);
  detail::read_field(doc, "out_dir", cfg.out_dir);

  if (doc.contains("task_family")) {
    const auto& tf = doc.at("task_family");
    if (!tf.is_object()) throw ConfigError("task_family must be an object");
    detail::require_keys(tf,
                         {"kind", "modulus", "horizon", "train_tasks",
                          "eval_tasks", "min_success", "max_success"},
                         "task_family.");
    detail::read_field(tf, "kind", cfg.task_family.kind);
    detail::read_field(tf, "modulus", cfg.task_family.modulus);
    detail::read_field(tf, "horizon", cfg.task_family.horizon);
    detail::read_field(tf, "train_tasks", cfg.task_family.train_tasks);
    detail::read_field(tf, "eval_tasks", cfg.task_family.eval_tasks);
    detail::read_field(tf, "min_success", cfg.task_family.min_success);
    detail::read_field(tf, "max_success", cfg.task_family.max_success);
  }

  validate_config(cfg);
  return cfg;
}

/// Parse config JSON text; malformed JSON raises ParseError.
inline TrainConfig parse_config_json(const std::string& text) {
  const auto doc = nlohmann::json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw ParseError("config is not valid JSON");
  return config_from_json(doc);
}

inline void validate_config(const TrainConfig& cfg) {
  if (cfg.group_size < 2) throw ConfigError("group_size must be >= 2");
  if (cfg.queries_per_step < 1) throw ConfigError("queries_per_step must be >= 1");
  if (cfg.ppo_mini_batch < 1) throw ConfigError("ppo_mini_batch must be >= 1");
  if (!(cfg.lr > 0.0)) throw ConfigError("lr must be positive");
  if (cfg.alpha < 0.0 || cfg.alpha > 1.0) throw ConfigError("alpha must lie in [0, 1]");
  if (!(cfg.phi > 0.0)) throw ConfigError("phi must be positive");
  if (!(cfg.eps_low > 0.0 && cfg.eps_low < 1.0)) throw ConfigError("eps_low must lie in (0, 1)");
  if (!(cfg.eps_high > 0.0)) throw ConfigError("eps_high must be positive");
  if (!(cfg.temperature > 0.0)) throw ConfigError("temperature must be positive");
  if (!(cfg.top_p > 0.0 && cfg.top_p <= 1.0)) throw ConfigError("top_p must lie in (0, 1]");
  if (cfg.proxy_bins < 2) throw ConfigError("proxy_bins must be >= 2");
  if (cfg.task_family.kind != "fork_arith") {
    throw ConfigError("task_family.kind must be fork_arith");
  }
  if (cfg.task_family.modulus < 2) throw ConfigError("task_family.modulus must be >= 2");
  if (cfg.task_family.horizon < 1) throw ConfigError("task_family.horizon must be >= 1");
  if (cfg.task_family.train_tasks < 1) throw ConfigError("task_family.train_tasks must be >= 1");
  if (!(cfg.task_family.min_success >= 0.0 &&
        cfg.task_family.max_success <= 1.0 &&
        cfg.task_family.min_success <= cfg.task_family.max_success)) {
    throw ConfigError("task_family success window must satisfy 0 <= min <= max <= 1");
  }
}

inline nlohmann::json config_to_json(const TrainConfig& cfg) {
  nlohmann::json doc;
  doc["mode"] = credit::mode_name(cfg.mode);
  auto quadrants = nlohmann::json::array();
  for (std::size_t q = 0; q < 4; ++q) {
    if (cfg.quadrants[q]) {
      quadrants.push_back(credit::quadrant_name(static_cast<credit::Quadrant>(q)));
    }
  }
  doc["quadrants"] = quadrants;
  doc["group_size"] = cfg.group_size;
  doc["queries_per_step"] = cfg.queries_per_step;
  doc["ppo_mini_batch"] = cfg.ppo_mini_batch;
  doc["lr"] = cfg.lr;
  doc["alpha"] = cfg.alpha;
  doc["phi"] = cfg.phi;
  doc["eps_low"] = cfg.eps_low;
  doc["eps_high"] = cfg.eps_high;
  doc["temperature"] = cfg.temperature;
  doc["top_p"] = cfg.top_p;
  doc["total_steps"] = cfg.total_steps;
  doc["seed"] = cfg.seed;
  doc["entropy_reg_coef"] = cfg.entropy_reg_coef;
  doc["proxy_bins"] = cfg.proxy_bins;
  doc["checkpoint_interval"] = cfg.checkpoint_interval;
  doc["dump_interval"] = cfg.dump_interval;
  doc["out_dir"] = cfg.out_dir;
  doc["task_family"] = {{"kind", cfg.task_family.kind},
                        {"modulus", cfg.task_family.modulus},
                        {"horizon", cfg.task_family.horizon},
                        {"train_tasks", cfg.task_family.train_tasks},
                        {"eval_tasks", cfg.task_family.eval_tasks},
                        {"min_success", cfg.task_family.min_success},
                        {"max_success", cfg.task_family.max_success}};
  return doc;
}

}  // namespace forklab::config
