// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file test_cli.cpp
 * @brief End-to-end checks of the command-line tool: subcommand artifacts,
 * output-directory resolution, and the stable error-category exit codes.
 *
 * FORKLAB_BIN points at the built binary. Every invocation strips
 * FORKLAB_OUT_ROOT from the environment unless a test sets it explicitly.
 */

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>
#include <vector>

#include <json.hpp>

#include <forklab/io.hpp>
#include <forklab/logio.hpp>
#include <forklab/report.hpp>

using namespace forklab;

namespace {

std::filesystem::path fresh_dir(const std::string& name) {
  const auto dir =
      std::filesystem::temp_directory_path() / "forklab_cli_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Run the CLI with `args`; `env_prefix` of "" scrubs FORKLAB_OUT_ROOT.
int run_cli(const std::string& args, const std::string& env_prefix = "") {
  const std::string env = env_prefix.empty()
                              ? std::string("env -u FORKLAB_OUT_ROOT ")
                              : "env " + env_prefix + " ";
  const std::string cmd =
      env + std::string(FORKLAB_BIN) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  REQUIRE(status != -1);
  REQUIRE(WIFEXITED(status));
  return WEXITSTATUS(status);
}

/// Write a small, fast training config and return its path.
std::filesystem::path write_tiny_config(const std::filesystem::path& dir) {
  const std::string text = R"({
  "group_size": 4,
  "queries_per_step": 8,
  "ppo_mini_batch": 32,
  "total_steps": 2,
  "seed": 11,
  "task_family": {
    "modulus": 7,
    "horizon": 4,
    "train_tasks": 4,
    "eval_tasks": 2,
    "min_success": 0.01,
    "max_success": 0.20
  }
})";
  const auto path = dir / "config.json";
  io::write_file_atomic(path, text);
  return path;
}

/// Write a two-group rollout log (one group with reward variance, one flat).
std::filesystem::path write_small_log(const std::filesystem::path& dir) {
  auto line = [](const char* qid, std::size_t traj, std::size_t t,
                 double entropy, int reward) {
    logio::RolloutLogRecord rec;
    rec.query_id = qid;
    rec.traj = traj;
    rec.t = t;
    rec.entropy = entropy;
    rec.reward = reward;
    return logio::record_to_jsonl(rec);
  };
  std::string log;
  log += line("mixed", 0, 0, 0.2, 1);
  log += line("mixed", 0, 1, 0.7, 1);
  log += line("mixed", 1, 0, 0.5, -1);
  log += line("mixed", 1, 1, 0.9, -1);
  log += line("flat", 0, 0, 0.3, 1);
  log += line("flat", 1, 0, 0.4, 1);
  const auto path = dir / "rollouts.jsonl";
  io::write_file_atomic(path, log);
  return path;
}

void check_manifest_hashes(const std::filesystem::path& dir) {
  const auto doc = nlohmann::json::parse(io::read_file(dir / "manifest.json"));
  const auto& files = doc.at("files");
  REQUIRE_FALSE(files.empty());
  std::size_t regular = 0;
  for (const auto& item : std::filesystem::recursive_directory_iterator(dir)) {
    if (item.is_regular_file()) regular += 1;
  }
  CHECK(files.size() + 1 == regular);
  for (const auto& [rel, hash] : files.items()) {
    CAPTURE(rel);
    CHECK(io::sha256_hex(io::read_file(dir / rel)) ==
          hash.get<std::string>());
  }
}

}  // namespace

TEST_CASE("version flag exits cleanly") {
  CHECK(run_cli("--version") == 0);
}

TEST_CASE("missing required flags fail argument parsing") {
  CHECK(run_cli("train") != 0);
  CHECK(run_cli("no_such_command") != 0);
}

TEST_CASE("train writes a complete, hash-consistent run directory") {
  const auto work = fresh_dir("train_ok");
  const auto cfg = write_tiny_config(work);
  const auto out = work / "run";
  REQUIRE(run_cli("train --config " + cfg.string() + " --out " + out.string()) ==
          0);

  for (const char* name :
       {"resolved_config.json", "tasks_train.json", "tasks_eval.json",
        "metrics.csv", "timing.csv", "checkpoint_final.json",
        "eval_report.json", "pass_curve.csv", "run_metadata.json",
        "manifest.json", "rollouts_step1.jsonl",
        "shaped_advantages_step1.jsonl"}) {
    CAPTURE(name);
    CHECK(std::filesystem::exists(out / name));
  }
  check_manifest_hashes(out);

  const auto metrics = report::parse_csv(io::read_file(out / "metrics.csv"));
  CHECK(metrics.rows.size() == 2);
  CHECK(metrics.column("step") == 0);

  // The seed override changes the metrics; the run itself still succeeds.
  const auto out2 = work / "run_seed9";
  REQUIRE(run_cli("train --config " + cfg.string() + " --seed 9 --out " +
                  out2.string()) == 0);
  CHECK(io::read_file(out2 / "metrics.csv") !=
        io::read_file(out / "metrics.csv"));
}

TEST_CASE("train surfaces error categories as exit codes") {
  const auto work = fresh_dir("train_errors");
  const auto missing = work / "no_such_config.json";
  CHECK(run_cli("train --config " + missing.string() + " --out " +
                (work / "a").string()) == 3);

  const auto malformed = work / "malformed.json";
  io::write_file_atomic(malformed, "not json");
  CHECK(run_cli("train --config " + malformed.string() + " --out " +
                (work / "b").string()) == 4);

  const auto unknown = work / "unknown_key.json";
  io::write_file_atomic(unknown, "{\"bogus\": 1}");
  CHECK(run_cli("train --config " + unknown.string() + " --out " +
                (work / "c").string()) == 2);

  // No --out, no config out_dir, no FORKLAB_OUT_ROOT: nowhere to write.
  const auto cfg = write_tiny_config(work);
  CHECK(run_cli("train --config " + cfg.string()) == 2);
}

TEST_CASE("output directories resolve from flag, config, or environment") {
  const auto work = fresh_dir("out_resolution");

  SECTION("FORKLAB_OUT_ROOT supplies the parent, the subcommand the leaf") {
    const auto cfg = write_tiny_config(work);
    const auto root = work / "root";
    REQUIRE(run_cli("train --config " + cfg.string(),
                    "FORKLAB_OUT_ROOT=" + root.string()) == 0);
    CHECK(std::filesystem::exists(root / "train" / "metrics.csv"));
  }

  SECTION("the config's own out_dir is honored when --out is omitted") {
    const auto target = work / "from_config";
    const std::string text = "{\"total_steps\": 1, \"group_size\": 4, "
                             "\"queries_per_step\": 8, "
                             "\"out_dir\": \"" + target.string() + "\", "
                             "\"task_family\": {\"modulus\": 7, \"horizon\": 4, "
                             "\"train_tasks\": 4, \"eval_tasks\": 2, "
                             "\"max_success\": 0.2}}";
    const auto cfg_path = work / "with_out_dir.json";
    io::write_file_atomic(cfg_path, text);
    REQUIRE(run_cli("train --config " + cfg_path.string()) == 0);
    CHECK(std::filesystem::exists(target / "metrics.csv"));
  }
}

TEST_CASE("eval scores a checkpoint against a task file") {
  const auto work = fresh_dir("eval_ok");
  const auto cfg = write_tiny_config(work);
  const auto run_dir = work / "run";
  REQUIRE(run_cli("train --config " + cfg.string() + " --out " +
                  run_dir.string()) == 0);

  const auto checkpoint = run_dir / "checkpoint_final.json";
  const auto tasks = run_dir / "tasks_eval.json";
  const auto out = work / "eval";
  REQUIRE(run_cli("eval --checkpoint " + checkpoint.string() + " --tasks " +
                  tasks.string() + " --n 8 --k 1,2,4 --out " + out.string()) ==
          0);
  CHECK(std::filesystem::exists(out / "eval_report.json"));
  CHECK(std::filesystem::exists(out / "manifest.json"));

  const auto doc = nlohmann::json::parse(io::read_file(out / "eval_report.json"));
  CHECK(doc.at("samples_per_task").get<std::size_t>() == 8);
  CHECK(doc.at("per_task").size() == 2);

  const auto curve = report::parse_csv(io::read_file(out / "pass_curve.csv"));
  CHECK(curve.column("task_set") < curve.header.size());
  CHECK(curve.column("k") < curve.header.size());
  CHECK(curve.column("pass_at_k") < curve.header.size());
  CHECK(curve.rows.size() == 3);

  SECTION("a single task object works as well as an array") {
    const auto pool = nlohmann::json::parse(io::read_file(tasks));
    const auto single = work / "one_task.json";
    io::write_file_atomic(single, pool.at(0).dump(2) + "\n");
    const auto out_single = work / "eval_single";
    CHECK(run_cli("eval --checkpoint " + checkpoint.string() + " --tasks " +
                  single.string() + " --n 4 --k 1 --out " +
                  out_single.string()) == 0);
    const auto single_doc = nlohmann::json::parse(
        io::read_file(out_single / "eval_report.json"));
    CHECK(single_doc.at("per_task").size() == 1);
  }

  SECTION("bad inputs map to their error categories") {
    CHECK(run_cli("eval --checkpoint " + checkpoint.string() + " --tasks " +
                  tasks.string() + " --n 8 --k 0 --out " +
                  (work / "e1").string()) == 2);
    CHECK(run_cli("eval --checkpoint " + checkpoint.string() + " --tasks " +
                  tasks.string() + " --n 4 --k 8 --out " +
                  (work / "e2").string()) == 15);
    const auto bad_tasks = work / "bad_tasks.json";
    io::write_file_atomic(bad_tasks, "not json");
    CHECK(run_cli("eval --checkpoint " + checkpoint.string() + " --tasks " +
                  bad_tasks.string() + " --n 4 --k 1 --out " +
                  (work / "e3").string()) == 4);
    CHECK(run_cli("eval --checkpoint " + (work / "nope.json").string() +
                  " --tasks " + tasks.string() + " --n 4 --k 1 --out " +
                  (work / "e4").string()) == 3);
  }
}

TEST_CASE("analyze writes analysis artifacts from a rollout log") {
  const auto work = fresh_dir("analyze_ok");
  const auto log = write_small_log(work);
  const auto out = work / "analysis";
  REQUIRE(run_cli("analyze --log " + log.string() + " --bins 8 --out " +
                  out.string()) == 0);

  const auto doc = nlohmann::json::parse(io::read_file(out / "analysis.json"));
  CHECK(doc.at("token_count").get<std::size_t>() == 6);
  CHECK(doc.at("dropped_group_fraction").get<double>() == 0.5);
  CHECK(doc.at("options").at("n_bins").get<std::size_t>() == 8);

  const auto hist = report::parse_csv(io::read_file(out / "histogram.csv"));
  CHECK(hist.rows.size() == 8);

  // Only the variance-bearing group is shaped: 4 records, one per line.
  const auto shaped = io::read_file(out / "shaped_advantages.jsonl");
  CHECK(std::count(shaped.begin(), shaped.end(), '\n') == 4);
  CHECK(shaped.find("\n\n") == std::string::npos);
  CHECK(std::filesystem::exists(out / "manifest.json"));

  SECTION("an explicit --hmax is echoed into the analysis") {
    const auto out2 = work / "analysis_hmax";
    REQUIRE(run_cli("analyze --log " + log.string() + " --hmax 2.5 --out " +
                    out2.string()) == 0);
    const auto doc2 =
        nlohmann::json::parse(io::read_file(out2 / "analysis.json"));
    CHECK(doc2.at("options").at("h_max").get<double>() == 2.5);
  }

  SECTION("bad logs map to their error categories") {
    const auto empty = work / "empty.jsonl";
    io::write_file_atomic(empty, "");
    CHECK(run_cli("analyze --log " + empty.string() + " --out " +
                  (work / "a1").string()) == 5);

    const auto dup = work / "dup.jsonl";
    const std::string rec = "{\"query_id\": \"q\", \"traj\": 0, \"t\": 0, "
                            "\"entropy\": 0.1, \"reward\": 1}\n";
    io::write_file_atomic(dup, rec + rec);
    CHECK(run_cli("analyze --log " + dup.string() + " --out " +
                  (work / "a2").string()) == 14);

    const auto garbled = work / "garbled.jsonl";
    io::write_file_atomic(garbled, rec + "{oops\n");
    CHECK(run_cli("analyze --log " + garbled.string() + " --out " +
                  (work / "a3").string()) == 4);
  }
}

TEST_CASE("report renders charts from run and analysis directories") {
  const auto work = fresh_dir("report_ok");
  const auto cfg = write_tiny_config(work);
  const auto run_dir = work / "run";
  REQUIRE(run_cli("train --config " + cfg.string() + " --out " +
                  run_dir.string()) == 0);

  SECTION("a run directory yields metric and pass-curve charts") {
    const auto out = work / "report";
    REQUIRE(run_cli("report --in " + run_dir.string() + " --out " +
                    out.string()) == 0);
    for (const char* name :
         {"report_metrics.csv", "solve_rate.svg", "entropy.svg", "loss.svg",
          "pass_at_k_train_pool.svg", "pass_at_k_eval_pool.svg",
          "manifest.json"}) {
      CAPTURE(name);
      CHECK(std::filesystem::exists(out / name));
    }
    CHECK_FALSE(std::filesystem::exists(out / "histogram.svg"));
  }

  SECTION("an analysis directory yields the entropy histogram chart") {
    const auto analysis = work / "analysis";
    const auto log = write_small_log(work);
    REQUIRE(run_cli("analyze --log " + log.string() + " --out " +
                    analysis.string()) == 0);
    const auto out = work / "report_analysis";
    REQUIRE(run_cli("report --in " + analysis.string() + " --out " +
                    out.string()) == 0);
    CHECK(std::filesystem::exists(out / "histogram.svg"));
    CHECK_FALSE(std::filesystem::exists(out / "solve_rate.svg"));
  }

  SECTION("degenerate inputs map to their error categories") {
    const auto empty_in = fresh_dir("report_empty_in");
    CHECK(run_cli("report --in " + empty_in.string() + " --out " +
                  (work / "r1").string()) == 3);

    const auto header_only = fresh_dir("report_header_only");
    io::write_file_atomic(header_only / "metrics.csv",
                          "step,solve_rate,mean_entropy,loss_total\n");
    CHECK(run_cli("report --in " + header_only.string() + " --out " +
                  (work / "r2").string()) == 5);
  }
}
