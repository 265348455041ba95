// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file test_env.cpp
 * @brief Task dynamics, state encoding, verification, and the exhaustive
 * enumeration oracle, cross-checked by independent forward accumulation.
 */

#include <catch2/catch_amalgamated.hpp>

#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include <forklab/env.hpp>
#include <forklab/errors.hpp>
#include <forklab/rng.hpp>

using namespace forklab;
using env::ConstantTask;
using env::EpisodeState;
using env::ForkArithTask;
using env::Op;
using env::OpKind;
using env::Task;

namespace {

/// start=0, target=3, modulus=7, ops {add1, add2, mul2}, horizon 2.
Task small_task() {
  ForkArithTask t;
  t.start = 0;
  t.target = 3;
  t.modulus = 7;
  t.horizon = 2;
  t.op_vocab = {{OpKind::add, 1}, {OpKind::add, 2}, {OpKind::mul, 2}};
  return Task{t};
}

}  // namespace

TEST_CASE("apply_op wraps modular arithmetic including negative constants") {
  CHECK(env::apply_op({OpKind::add, 1}, 6, 7) == 0);
  CHECK(env::apply_op({OpKind::add, -3}, 1, 7) == 5);
  CHECK(env::apply_op({OpKind::mul, 3}, 5, 7) == 1);
  CHECK(env::apply_op({OpKind::mul, -1}, 2, 7) == 5);
  CHECK(env::apply_op({OpKind::noop, 0}, 4, 7) == 4);
}

TEST_CASE("reset and step walk the arithmetic chain") {
  const auto task = small_task();
  auto s = env::reset(task);
  CHECK(s == EpisodeState{0, 0});
  s = env::step(task, s, 0);  // add1
  CHECK(s == EpisodeState{1, 1});
  s = env::step(task, s, 2);  // mul2
  CHECK(s == EpisodeState{2, 2});
  CHECK_THROWS_AS(env::step(task, s, 0), EpisodeDoneError);
  CHECK_THROWS_AS(env::step(task, env::reset(task), 3), IndexError);
}

TEST_CASE("constant task steps only track the position") {
  const Task task{ConstantTask{{1, 0, 1}, 2}};
  auto s = env::reset(task);
  CHECK(s == EpisodeState{0, 0});
  s = env::step(task, s, 1);
  CHECK(s == EpisodeState{1, 0});
  CHECK(env::task_horizon(task) == 3);
  CHECK(env::task_vocab_size(task) == 2);
  CHECK(env::task_state_count(task) == 4);
  CHECK(env::verify(task, {1, 0, 1}) == 1);
  CHECK(env::verify(task, {1, 0, 0}) == -1);
}

TEST_CASE("state ids encode (step, value) bijectively") {
  const auto task = small_task();
  CHECK(env::state_id(task, EpisodeState{2, 3}) == 17);
  CHECK(env::task_state_count(task) == 21);
  std::set<std::size_t> seen;
  for (std::size_t stp = 0; stp <= 2; ++stp) {
    for (std::int64_t val = 0; val < 7; ++val) {
      const auto sid = env::state_id(task, EpisodeState{stp, val});
      REQUIRE(sid < env::task_state_count(task));
      seen.insert(sid);
    }
  }
  CHECK(seen.size() == 21);
}

TEST_CASE("family state ids separate targets sharing one table") {
  const auto task = small_task();
  CHECK(env::family_state_count(task) == 7 * 21);
  CHECK(env::family_state_id(task, EpisodeState{2, 3}) == 3 * 21 + 17);

  // Distinct (target, step, value) triples map to distinct rows.
  std::set<std::size_t> seen;
  for (std::int64_t target = 0; target < 7; ++target) {
    ForkArithTask variant = std::get<ForkArithTask>(task);
    variant.target = target;
    const Task vt{variant};
    for (std::size_t stp = 0; stp <= 2; ++stp) {
      for (std::int64_t val = 0; val < 7; ++val) {
        const auto fid = env::family_state_id(vt, EpisodeState{stp, val});
        REQUIRE(fid < env::family_state_count(vt));
        seen.insert(fid);
      }
    }
  }
  CHECK(seen.size() == 7 * 21);

  // Constant tasks are their own family.
  const Task ct{ConstantTask{{0, 1}, 2}};
  CHECK(env::family_state_count(ct) == env::task_state_count(ct));
  CHECK(env::family_state_id(ct, EpisodeState{1, 0}) == 1);
}

TEST_CASE("verify rewards exactly the sequences reaching the target") {
  const auto task = small_task();
  CHECK(env::verify(task, {0, 1}) == 1);   // 0 ->1 ->3
  CHECK(env::verify(task, {1, 0}) == 1);   // 0 ->2 ->3
  CHECK(env::verify(task, {2, 2}) == -1);  // 0 ->0 ->0
  CHECK_THROWS_AS(env::verify(task, {0}), LengthError);
  CHECK_THROWS_AS(env::verify(task, {0, 1, 2}), LengthError);
}

TEST_CASE("enumeration counts solutions and per-fork completions") {
  const auto table = env::enumerate_solutions(small_task());
  CHECK(table.total_sequences == 9);
  CHECK(table.correct_count == 2);
  CHECK(table.success_fraction() == 2.0 / 9.0);
  // Reset state (0,0): add1 and add2 keep a path open, mul2 does not.
  CHECK(table.success_counts[0 * 3 + 0] == 1);
  CHECK(table.success_counts[0 * 3 + 1] == 1);
  CHECK(table.success_counts[0 * 3 + 2] == 0);
  // State (1,1), id 8: only add2 reaches 3.
  CHECK(table.success_counts[8 * 3 + 0] == 0);
  CHECK(table.success_counts[8 * 3 + 1] == 1);
  CHECK(table.success_counts[8 * 3 + 2] == 0);
}

TEST_CASE("enumeration handles the constant and unreachable extremes") {
  const Task ct{ConstantTask{{1, 0, 1, 1, 0, 1}, 2}};
  const auto ct_table = env::enumerate_solutions(ct);
  CHECK(ct_table.total_sequences == 64);
  CHECK(ct_table.correct_count == 1);

  // Even-only dynamics can never reach an odd target.
  ForkArithTask blocked;
  blocked.start = 0;
  blocked.target = 1;
  blocked.modulus = 4;
  blocked.horizon = 5;
  blocked.op_vocab = {{OpKind::add, 2}, {OpKind::noop, 0}};
  const auto blocked_table = env::enumerate_solutions(Task{blocked});
  CHECK(blocked_table.total_sequences == 32);
  CHECK(blocked_table.correct_count == 0);
  CHECK(blocked_table.success_fraction() == 0.0);
}

TEST_CASE("enumeration refuses spaces past the sequence budget") {
  ForkArithTask big;
  big.start = 0;
  big.target = 1;
  big.modulus = 11;
  big.horizon = 8;
  big.op_vocab.assign(10, Op{OpKind::add, 1});
  for (std::size_t i = 0; i < big.op_vocab.size(); ++i) {
    big.op_vocab[i].c = static_cast<std::int64_t>(i);
  }
  CHECK_THROWS_AS(env::enumerate_solutions(Task{big}), BudgetError);
}

TEST_CASE("fork table matches independent forward accumulation") {
  // Forward walk over every sequence accumulates (state, token) success
  // counts directly; the library computes them by backward DP.
  rng::Rng rng(2024);
  for (int trial = 0; trial < 5; ++trial) {
    ForkArithTask t;
    t.modulus = 5 + static_cast<std::int64_t>(rng.below(4));
    t.horizon = 3;
    t.op_vocab = {{OpKind::add, 1},
                  {OpKind::add, static_cast<std::int64_t>(1 + rng.below(4))},
                  {OpKind::mul, 2},
                  {OpKind::noop, 0}};
    t.start = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(t.modulus)));
    t.target = static_cast<std::int64_t>(rng.below(static_cast<std::uint64_t>(t.modulus)));
    const Task task{t};
    const std::size_t vocab = env::task_vocab_size(task);

    std::vector<std::uint64_t> forward(env::task_state_count(task) * vocab, 0);
    std::uint64_t total = 0, correct = 0;
    std::vector<std::size_t> tokens(t.horizon, 0);
    bool done = false;
    while (!done) {
      total += 1;
      const bool win = env::verify(task, tokens) > 0;
      if (win) {
        correct += 1;
        auto s = env::reset(task);
        for (std::size_t tok : tokens) {
          forward[env::state_id(task, s) * vocab + tok] += 1;
          s = env::step(task, s, tok);
        }
      }
      done = true;
      for (std::size_t i = tokens.size(); i-- > 0;) {
        if (++tokens[i] < vocab) {
          done = false;
          break;
        }
        tokens[i] = 0;
      }
    }

    const auto table = env::enumerate_solutions(task);
    REQUIRE(table.total_sequences == total);
    REQUIRE(table.correct_count == correct);
    // The DP counts completions from every state; the forward walk only
    // visits states reachable from the start, so compare along reachable
    // (state, token) pairs.
    std::set<std::size_t> reachable{env::state_id(task, env::reset(task))};
    std::vector<EpisodeState> frontier{env::reset(task)};
    while (!frontier.empty()) {
      std::vector<EpisodeState> next;
      for (const auto& s : frontier) {
        if (s.step >= t.horizon) continue;
        for (std::size_t tok = 0; tok < vocab; ++tok) {
          const auto n = env::step(task, s, tok);
          if (reachable.insert(env::state_id(task, n)).second) next.push_back(n);
        }
      }
      frontier = std::move(next);
    }
    for (std::size_t sid : reachable) {
      const auto stp = sid / static_cast<std::size_t>(t.modulus);
      if (stp >= t.horizon) continue;
      for (std::size_t tok = 0; tok < vocab; ++tok) {
        REQUIRE(table.success_counts[sid * vocab + tok] == forward[sid * vocab + tok]);
      }
    }
  }
}

TEST_CASE("sampled tasks land inside the success window deterministically") {
  rng::Rng a(7), b(7);
  const auto ops = env::default_op_vocab();
  const auto t1 = env::sample_fork_arith(7, 4, ops, 0.01, 0.20, a);
  const auto t2 = env::sample_fork_arith(7, 4, ops, 0.01, 0.20, b);
  CHECK(t1 == t2);
  const auto frac = env::enumerate_solutions(Task{t1}).success_fraction();
  CHECK(frac >= 0.01);
  CHECK(frac <= 0.20);
}

TEST_CASE("an unsatisfiable success window exhausts the sampling budget") {
  rng::Rng rng(3);
  // One noop op: the fraction is 0 or 1, never inside (0.3, 0.6).
  const std::vector<Op> ops{{OpKind::noop, 0}, {OpKind::noop, 0}};
  CHECK_THROWS_AS(env::sample_fork_arith(2, 1, ops, 0.3, 0.6, rng), BudgetError);
}

TEST_CASE("task JSON round-trips both kinds") {
  const auto fa = small_task();
  CHECK(env::task_from_json(env::task_to_json(fa)) == fa);
  const Task ct{ConstantTask{{1, 0, 2}, 3}};
  CHECK(env::task_from_json(env::task_to_json(ct)) == ct);
}

TEST_CASE("task JSON validation rejects malformed instances") {
  using nlohmann::json;
  CHECK_THROWS_AS(env::task_from_json(json::array()), ParseError);
  CHECK_THROWS_AS(env::task_from_json(json{{"kind", "mystery"}}), ParseError);
  auto doc = env::task_to_json(small_task());
  auto bad = doc;
  bad["modulus"] = 1;
  bad["start"] = 0;
  bad["target"] = 0;
  CHECK_THROWS_AS(env::task_from_json(bad), ParseError);
  bad = doc;
  bad["horizon"] = 0;
  CHECK_THROWS_AS(env::task_from_json(bad), ParseError);
  bad = doc;
  bad["ops"] = nlohmann::json::array();
  CHECK_THROWS_AS(env::task_from_json(bad), ParseError);
  bad = doc;
  bad["start"] = 9;
  CHECK_THROWS_AS(env::task_from_json(bad), ParseError);
  bad = doc;
  bad["ops"][0]["op"] = "div";
  CHECK_THROWS_AS(env::task_from_json(bad), ParseError);

  json ct{{"kind", "constant"}, {"vocab_size", 2},
          {"required_sequence", json::array()}};
  CHECK_THROWS_AS(env::task_from_json(ct), ParseError);
  ct["required_sequence"] = {0, 2};
  CHECK_THROWS_AS(env::task_from_json(ct), ParseError);
}
