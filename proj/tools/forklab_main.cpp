// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file forklab_main.cpp
 * @brief Command-line front end: train / eval / analyze / report.
 *
 * Every subcommand exits 0 on success. Library errors exit with the
 * category's stable code and print `error[<category>]: <message>` on stderr.
 * When --out is omitted, the FORKLAB_OUT_ROOT environment variable supplies
 * the parent directory and the subcommand name supplies the leaf.
 */

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include <forklab/forklab.hpp>

namespace {

std::filesystem::path resolve_out_dir(const std::string& out_flag,
                                      const std::string& leaf) {
  if (!out_flag.empty()) return std::filesystem::path(out_flag);
  const char* root = std::getenv("FORKLAB_OUT_ROOT");
  if (root != nullptr && *root != '\0') {
    return std::filesystem::path(root) / leaf;
  }
  throw forklab::ConfigError(
      "--out is required when FORKLAB_OUT_ROOT is not set");
}

std::vector<std::size_t> parse_k_list(const std::string& spec) {
  std::vector<std::size_t> ks;
  std::size_t pos = 0;
  while (pos <= spec.size()) {
    std::size_t comma = spec.find(',', pos);
    if (comma == std::string::npos) comma = spec.size();
    const std::string piece = spec.substr(pos, comma - pos);
    if (piece.empty()) throw forklab::ConfigError("empty entry in --k list");
    std::size_t consumed = 0;
    unsigned long long value = 0;
    try {
      value = std::stoull(piece, &consumed);
    } catch (const std::exception&) {
      throw forklab::ConfigError("invalid --k entry: " + piece);
    }
    if (consumed != piece.size() || value == 0) {
      throw forklab::ConfigError("invalid --k entry: " + piece);
    }
    ks.push_back(static_cast<std::size_t>(value));
    pos = comma + 1;
  }
  if (ks.empty()) throw forklab::ConfigError("--k list is empty");
  return ks;
}

int run_train(const std::string& config_path, const std::string& out_flag,
              bool seed_set, std::uint64_t seed_override) {
  auto cfg = forklab::config::parse_config_json(
      forklab::io::read_file(config_path));
  if (seed_set) cfg.seed = seed_override;
  const auto out_dir = resolve_out_dir(
      !out_flag.empty() ? out_flag : cfg.out_dir, "train");
  const auto result = forklab::trainer::run(cfg, out_dir);
  std::cout << "run complete: " << result.metrics.size() << " steps logged, "
            << result.skipped_steps.size() << " skipped, outputs in "
            << out_dir.string() << "\n";
  return 0;
}

int run_eval(const std::string& checkpoint_path, const std::string& tasks_path,
             std::size_t n, const std::string& k_spec,
             const std::string& out_flag, std::uint64_t seed,
             double temperature, double top_p) {
  const auto params = forklab::policy::load_checkpoint_text(
      forklab::io::read_file(checkpoint_path));
  const auto tasks_json =
      nlohmann::json::parse(forklab::io::read_file(tasks_path), nullptr, false);
  if (tasks_json.is_discarded()) {
    throw forklab::ParseError("invalid JSON in " + tasks_path);
  }
  std::vector<forklab::env::Task> tasks;
  if (tasks_json.is_array()) {
    for (const auto& item : tasks_json) {
      tasks.push_back(forklab::env::task_from_json(item));
    }
  } else {
    tasks.push_back(forklab::env::task_from_json(tasks_json));
  }
  const auto ks = parse_k_list(k_spec);
  forklab::evaluation::DecodingConfig decoding;
  decoding.temperature = temperature;
  decoding.top_p = top_p;
  const auto report =
      forklab::evaluation::evaluate(params, tasks, n, ks, decoding, seed);
  const auto out_dir = resolve_out_dir(out_flag, "eval");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw forklab::IoError("cannot create directory: " + out_dir.string());
  }
  forklab::io::write_file_atomic(
      out_dir / "eval_report.json",
      forklab::evaluation::report_to_json(report).dump(2) + "\n");
  forklab::io::write_file_atomic(
      out_dir / "pass_curve.csv",
      forklab::evaluation::report_to_csv(report, "eval"));
  forklab::io::write_manifest(out_dir);
  std::cout << "evaluated " << tasks.size() << " tasks with n=" << n
            << "; outputs in " << out_dir.string() << "\n";
  return 0;
}

int run_analyze(const std::string& log_path, double alpha, double phi,
                std::size_t bins, double hmax, const std::string& out_flag) {
  const auto groups =
      forklab::logio::ingest_rollout_log(forklab::io::read_file(log_path));
  forklab::logio::AnalyzeOptions options;
  options.alpha = alpha;
  options.phi = phi;
  options.n_bins = bins;
  options.h_max = hmax;
  const auto bundle = forklab::logio::analyze(groups, options);
  const auto out_dir = resolve_out_dir(out_flag, "analyze");
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) {
    throw forklab::IoError("cannot create directory: " + out_dir.string());
  }
  forklab::io::write_file_atomic(
      out_dir / "analysis.json",
      forklab::logio::bundle_to_json(bundle).dump(2) + "\n");
  forklab::io::write_file_atomic(
      out_dir / "histogram.csv",
      forklab::logio::histogram_to_csv(bundle.histogram));
  std::string shaped;
  for (const auto& rec : bundle.shaped) {
    shaped += forklab::logio::shaped_record_to_jsonl(rec);
  }
  forklab::io::write_file_atomic(out_dir / "shaped_advantages.jsonl", shaped);
  forklab::io::write_manifest(out_dir);
  std::cout << "analyzed " << bundle.token_count << " tokens; outputs in "
            << out_dir.string() << "\n";
  return 0;
}

int run_report(const std::string& in_dir, const std::string& out_flag) {
  const auto out_dir = resolve_out_dir(out_flag, "report");
  forklab::report::emit_report(in_dir, out_dir);
  forklab::io::write_manifest(out_dir);
  std::cout << "report written to " << out_dir.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular policy-gradient laboratory for verifiable tasks"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(forklab::kVersion));

  std::string config_path, out_flag, checkpoint_path, tasks_path, k_spec,
      log_path, in_dir;
  std::uint64_t seed_override = 0;
  bool seed_set = false;
  std::size_t eval_n = 32;
  std::uint64_t eval_seed = 1;
  double eval_temperature = 0.6;
  double eval_top_p = 0.95;
  double alpha = 0.2;
  double phi = 2.0;
  std::size_t bins = 32;
  double hmax = 0.0;

  auto* train = app.add_subcommand("train", "Train a policy from a config");
  train->add_option("--config", config_path, "config JSON path")->required();
  train->add_option("--out", out_flag, "output run directory");
  train->add_option("--seed", seed_override, "override the config seed")
      ->each([&seed_set](const std::string&) { seed_set = true; });

  auto* eval_cmd =
      app.add_subcommand("eval", "Evaluate a checkpoint on a task file");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint JSON path")
      ->required();
  eval_cmd->add_option("--tasks", tasks_path, "task JSON (object or array)")
      ->required();
  eval_cmd->add_option("--n", eval_n, "samples per task")->required();
  eval_cmd->add_option("--k", k_spec, "comma-separated k list")->required();
  eval_cmd->add_option("--out", out_flag, "output directory");
  eval_cmd->add_option("--seed", eval_seed, "evaluation seed");
  eval_cmd->add_option("--temperature", eval_temperature,
                       "decoding temperature");
  eval_cmd->add_option("--top-p", eval_top_p, "nucleus truncation mass");

  auto* analyze =
      app.add_subcommand("analyze", "Analyze a rollout log (JSONL)");
  analyze->add_option("--log", log_path, "rollout JSONL path")->required();
  analyze->add_option("--alpha", alpha, "shaping strength");
  analyze->add_option("--phi", phi, "credit clip divisor");
  analyze->add_option("--bins", bins, "entropy histogram bins");
  analyze->add_option("--hmax", hmax,
                      "entropy bin range upper edge (0 = max observed)");
  analyze->add_option("--out", out_flag, "output directory");

  auto* report =
      app.add_subcommand("report", "Render charts from a run directory");
  report->add_option("--in", in_dir, "run or analysis directory")->required();
  report->add_option("--out", out_flag, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) {
      return run_train(config_path, out_flag, seed_set, seed_override);
    }
    if (eval_cmd->parsed()) {
      return run_eval(checkpoint_path, tasks_path, eval_n, k_spec, out_flag,
                      eval_seed, eval_temperature, eval_top_p);
    }
    if (analyze->parsed()) {
      return run_analyze(log_path, alpha, phi, bins, hmax, out_flag);
    }
    if (report->parsed()) {
      return run_report(in_dir, out_flag);
    }
  } catch (const forklab::Error& e) {
    std::cerr << "error[" << forklab::category_name(e.category())
              << "]: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
