// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The forklab authors

/**
 * @file test_objective.cpp
 * @brief Clipped surrogate loss, quadrant decomposition, analytic gradients
 * against finite differences, and the ratio-1 simplified direction.
 */

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstddef>
#include <vector>

#include <forklab/credit.hpp>
#include <forklab/errors.hpp>
#include <forklab/objective.hpp>
#include <forklab/policy.hpp>
#include <forklab/rng.hpp>

using namespace forklab;
using credit::Quadrant;
using objective::BatchToken;
using objective::ClipConfig;
using policy::PolicyParams;

namespace {

/// Random params plus a batch whose logp_old values sit near the current
/// policy, so both clipped and unclipped branches occur.
struct Scenario {
  PolicyParams params;
  std::vector<BatchToken> batch;
};

Scenario random_scenario(rng::Rng& rng, std::size_t states, std::size_t vocab,
                         std::size_t n_tokens, double rho_spread) {
  Scenario sc{PolicyParams(states, vocab), {}};
  for (std::size_t s = 0; s < states; ++s) {
    for (std::size_t v = 0; v < vocab; ++v) {
      sc.params.set_logit(s, v, (rng.uniform() - 0.5) * 3.0);
    }
  }
  for (std::size_t i = 0; i < n_tokens; ++i) {
    BatchToken tok;
    tok.state = rng.below(states);
    tok.token = rng.below(vocab);
    const auto dist = policy::distribution(sc.params, tok.state, 1.0);
    tok.logp_old = std::log(dist[tok.token]) + (rng.uniform() - 0.5) * rho_spread;
    tok.adv = (rng.uniform() - 0.5) * 4.0;
    tok.quadrant = static_cast<Quadrant>(rng.below(4));
    sc.batch.push_back(tok);
  }
  return sc;
}

}  // namespace

TEST_CASE("importance ratios exponentiate log-prob gaps and stay bounded") {
  CHECK(objective::importance_ratio(-1.0, -1.0) == 1.0);
  CHECK(std::abs(objective::importance_ratio(-1.0, -2.0) - std::exp(1.0)) < 1e-15);
  CHECK_THROWS_AS(objective::importance_ratio(std::nan(""), -1.0), NumericsError);
  CHECK_THROWS_AS(objective::importance_ratio(-1.0, -INFINITY), NumericsError);
  CHECK_THROWS_AS(objective::importance_ratio(0.0, -20.0), NumericsError);
}

TEST_CASE("the surrogate takes the pessimistic branch on both sides") {
  const ClipConfig clip;
  CHECK(objective::surrogate_term(1.5, 1.0, clip) == 1.28);
  CHECK(objective::surrogate_term(0.5, -1.0, clip) == -0.8);
  CHECK(objective::surrogate_term(1.1, 1.0, clip) == 1.1);
  CHECK(objective::surrogate_term(0.9, -2.0, clip) == -1.8);
  CHECK(objective::surrogate_term(1.0, 3.0, clip) == 3.0);
}

TEST_CASE("a single ratio-one token yields loss minus its advantage") {
  PolicyParams params(1, 2);
  const auto dist = policy::distribution(params, 0, 1.0);
  BatchToken tok;
  tok.state = 0;
  tok.token = 0;
  tok.logp_old = std::log(dist[0]);
  tok.adv = 1.0;
  tok.quadrant = Quadrant::PHR;
  const auto loss = objective::batch_loss(params, {tok}, ClipConfig{});
  CHECK(loss.total == -1.0);
  CHECK(loss.per_quadrant[0] == -1.0);
  CHECK(loss.per_quadrant[1] == 0.0);
  CHECK(loss.token_count == 1);
  CHECK(loss.normalizer == 1);
}

TEST_CASE("loss validates batch shape and emptiness") {
  PolicyParams params(1, 2);
  CHECK_THROWS_AS(objective::batch_loss(params, {}, ClipConfig{}), EmptyInputError);
  BatchToken tok;
  tok.state = 1;
  CHECK_THROWS_AS(objective::batch_loss(params, {tok}, ClipConfig{}), ShapeError);
  tok.state = 0;
  tok.token = 2;
  CHECK_THROWS_AS(objective::batch_loss(params, {tok}, ClipConfig{}), ShapeError);
}

TEST_CASE("unselected and mask-excluded tokens keep normalizer membership") {
  PolicyParams params(1, 2);
  const auto dist = policy::distribution(params, 0, 1.0);
  BatchToken live;
  live.state = 0;
  live.token = 0;
  live.logp_old = std::log(dist[0]);
  live.adv = 2.0;
  live.quadrant = Quadrant::PHR;
  BatchToken dead = live;
  dead.selected = false;

  const auto loss = objective::batch_loss(params, {live, dead}, ClipConfig{});
  // Normalizer 2, one contributing token: -2.0 * (1/2).
  CHECK(loss.total == -1.0);
  CHECK(loss.token_count == 1);
  CHECK(loss.normalizer == 2);

  const auto masked = objective::batch_loss(
      params, {live, dead}, ClipConfig{},
      objective::single_quadrant(Quadrant::NLR));
  CHECK(masked.total == 0.0);
  CHECK(masked.token_count == 0);
  CHECK(masked.normalizer == 2);

  const auto none = objective::batch_loss(params, {dead, dead}, ClipConfig{});
  CHECK(none.total == 0.0);
  CHECK(none.token_count == 0);
}

TEST_CASE("quadrant losses decompose the full loss exactly") {
  rng::Rng rng(1212);
  for (int trial = 0; trial < 20; ++trial) {
    const auto sc = random_scenario(rng, 4, 5, 40, 1.0);
    const auto full = objective::batch_loss(sc.params, sc.batch, ClipConfig{});
    double sum = 0.0;
    std::size_t tokens = 0;
    for (int q = 0; q < 4; ++q) {
      const auto part = objective::batch_loss(
          sc.params, sc.batch, ClipConfig{},
          objective::single_quadrant(static_cast<Quadrant>(q)));
      // The masked total reproduces the full per-quadrant entry bitwise:
      // identical contributions accumulate in identical order.
      REQUIRE(part.total == full.per_quadrant[q]);
      REQUIRE(part.normalizer == full.normalizer);
      sum += part.total;
      tokens += part.token_count;
    }
    REQUIRE(std::abs(full.total - sum) < 1e-12);
    REQUIRE(tokens == full.token_count);
  }
}

TEST_CASE("analytic gradient matches the softmax closed form at ratio one") {
  PolicyParams params(1, 3);
  params.set_logit(0, 0, std::log(0.7));
  params.set_logit(0, 1, std::log(0.2));
  params.set_logit(0, 2, std::log(0.1));
  const auto dist = policy::distribution(params, 0, 1.0);
  BatchToken tok;
  tok.state = 0;
  tok.token = 0;
  tok.logp_old = std::log(dist[0]);
  tok.adv = 1.0;
  const auto grads = objective::analytic_gradients(params, {tok}, ClipConfig{});
  REQUIRE(grads.size() == 3);
  CHECK(std::abs(grads[0] - (-0.30000000000000004)) < 1e-12);
  CHECK(std::abs(grads[1] - 0.2) < 1e-12);
  CHECK(std::abs(grads[2] - 0.1) < 1e-12);
  // Softmax rows always produce zero-sum gradients.
  CHECK(std::abs(grads[0] + grads[1] + grads[2]) < 1e-12);
}

TEST_CASE("a saturated clipped branch contributes zero gradient") {
  PolicyParams params(1, 2);
  const auto dist = policy::distribution(params, 0, 1.0);
  BatchToken tok;
  tok.state = 0;
  tok.token = 0;
  tok.adv = 1.0;
  tok.logp_old = std::log(dist[0]) - std::log(2.0);  // rho = 2 > 1.28
  const auto grads = objective::analytic_gradients(params, {tok}, ClipConfig{});
  CHECK(grads == std::vector<double>{0.0, 0.0});
  const auto loss = objective::batch_loss(params, {tok}, ClipConfig{});
  CHECK(std::abs(loss.total - (-1.28)) < 1e-15);
}

TEST_CASE("a near-deterministic token has a vanishing gradient") {
  PolicyParams params(1, 3);
  params.set_logit(0, 0, 30.0);
  const auto dist = policy::distribution(params, 0, 1.0);
  BatchToken tok;
  tok.state = 0;
  tok.token = 0;
  tok.logp_old = std::log(dist[0]);
  tok.adv = 1.5;
  const auto grads = objective::analytic_gradients(params, {tok}, ClipConfig{});
  for (double g : grads) CHECK(std::abs(g) < 1e-9);
}

TEST_CASE("flipping the advantage negates the gradient exactly") {
  rng::Rng rng(333);
  for (int trial = 0; trial < 50; ++trial) {
    auto sc = random_scenario(rng, 2, 4, 1, 0.0);  // rho exactly 1: no clipping
    auto flipped = sc.batch;
    flipped[0].adv = -flipped[0].adv;
    const auto g = objective::analytic_gradients(sc.params, sc.batch, ClipConfig{});
    const auto gf = objective::analytic_gradients(sc.params, flipped, ClipConfig{});
    for (std::size_t i = 0; i < g.size(); ++i) {
      REQUIRE(g[i] == -gf[i]);
    }
  }
}

TEST_CASE("masked quadrants leave their rows untouched") {
  rng::Rng rng(444);
  const auto sc = random_scenario(rng, 3, 4, 30, 1.0);
  const auto grads = objective::analytic_gradients(
      sc.params, sc.batch, ClipConfig{},
      objective::single_quadrant(Quadrant::PLR));
  // Rows visited only by non-PLR tokens stay exactly zero.
  std::vector<bool> plr_state(3, false);
  for (const auto& tok : sc.batch) {
    if (tok.quadrant == Quadrant::PLR) plr_state[tok.state] = true;
  }
  for (std::size_t s = 0; s < 3; ++s) {
    if (plr_state[s]) continue;
    for (std::size_t v = 0; v < 4; ++v) {
      REQUIRE(grads[s * 4 + v] == 0.0);
    }
  }
}

TEST_CASE("the simplified direction is the exact ratio-one descent") {
  const auto descent = objective::simplified_gradient({0.5, 0.5}, 0, 1.0);
  CHECK(descent == std::vector<double>{0.5, -0.5});
  const auto frozen = objective::simplified_gradient({0.7, 0.2, 0.1}, 0, 1.0);
  CHECK(frozen[0] == 0.30000000000000004);
  CHECK(frozen[1] == -0.2);
  CHECK(frozen[2] == -0.1);
  const auto zero = objective::simplified_gradient({0.7, 0.3}, 1, 0.0);
  CHECK(zero == std::vector<double>{0.0, 0.0});
  CHECK(zero == std::vector<double>{-0.0, -0.0});
  CHECK_THROWS_AS(objective::simplified_gradient({0.5, 0.5}, 2, 1.0), IndexError);
}

TEST_CASE("simplified equals minus analytic for single ratio-one tokens") {
  rng::Rng rng(555);
  for (int trial = 0; trial < 100; ++trial) {
    PolicyParams params(1, 2 + rng.below(6));
    for (std::size_t v = 0; v < params.vocab_size(); ++v) {
      params.set_logit(0, v, (rng.uniform() - 0.5) * 4.0);
    }
    const auto dist = policy::distribution(params, 0, 1.0);
    BatchToken tok;
    tok.state = 0;
    tok.token = rng.below(params.vocab_size());
    tok.logp_old = std::log(dist[tok.token]);
    tok.adv = (rng.uniform() - 0.5) * 4.0;
    const auto analytic =
        objective::analytic_gradients(params, {tok}, ClipConfig{});
    const auto descent =
        objective::simplified_gradient(dist, tok.token, tok.adv);
    for (std::size_t v = 0; v < dist.size(); ++v) {
      REQUIRE(std::abs(descent[v] + analytic[v]) < 1e-15);
    }
  }
}

TEST_CASE("finite differences confirm the gradient across regimes") {
  rng::Rng rng(666);
  SECTION("plain loss") {
    const auto sc = random_scenario(rng, 3, 4, 25, 1.0);
    const auto res =
        objective::fd_check(sc.params, sc.batch, ClipConfig{}, 1e-5, rng);
    REQUIRE(res.checked > 0);
    CHECK(res.max_rel_error <= 1e-6);
  }
  SECTION("entropy bonus and temperature") {
    const auto sc = random_scenario(rng, 2, 5, 20, 0.6);
    const auto res = objective::fd_check(sc.params, sc.batch, ClipConfig{}, 1e-5,
                                         rng, 200, objective::kAllQuadrants,
                                         0.7, 0.003);
    REQUIRE(res.checked > 0);
    CHECK(res.max_rel_error <= 1e-6);
  }
  SECTION("quadrant mask") {
    const auto sc = random_scenario(rng, 3, 4, 30, 1.0);
    const auto res =
        objective::fd_check(sc.params, sc.batch, ClipConfig{}, 1e-5, rng, 200,
                            objective::single_quadrant(Quadrant::NHR));
    CHECK(res.max_rel_error <= 1e-6);
  }
  SECTION("zero advantages give a zero gradient verified by fd") {
    auto sc = random_scenario(rng, 2, 3, 10, 0.5);
    for (auto& tok : sc.batch) tok.adv = 0.0;
    const auto res =
        objective::fd_check(sc.params, sc.batch, ClipConfig{}, 1e-5, rng);
    CHECK(res.max_rel_error <= 1e-6);
    const auto grads =
        objective::analytic_gradients(sc.params, sc.batch, ClipConfig{});
    for (double g : grads) CHECK(g == 0.0);
  }
}

TEST_CASE("finite differences expose an injected gradient fault") {
  rng::Rng rng(777);
  const auto sc = random_scenario(rng, 1, 3, 8, 0.0);
  const auto analytic =
      objective::analytic_gradients(sc.params, sc.batch, ClipConfig{});
  // Central difference at coordinate (0, 0), replicating the checker.
  const double h = 1e-5;
  PolicyParams plus = sc.params;
  plus.set_logit(0, 0, sc.params.logit(0, 0) + h);
  PolicyParams minus = sc.params;
  minus.set_logit(0, 0, sc.params.logit(0, 0) - h);
  const double fd = (objective::batch_loss(plus, sc.batch, ClipConfig{}).total -
                     objective::batch_loss(minus, sc.batch, ClipConfig{}).total) /
                    (2.0 * h);
  const double honest = std::abs(analytic[0] - fd) / std::max(std::abs(fd), 1e-8);
  CHECK(honest <= 1e-6);
  const double corrupted = analytic[0] + 0.5 * std::abs(analytic[0]) + 0.01;
  const double faulty = std::abs(corrupted - fd) / std::max(std::abs(fd), 1e-8);
  CHECK(faulty > 1e-4);
}

TEST_CASE("the fd step size is range-checked") {
  rng::Rng rng(888);
  const auto sc = random_scenario(rng, 1, 2, 2, 0.0);
  CHECK_THROWS_AS(
      objective::fd_check(sc.params, sc.batch, ClipConfig{}, 1e-8, rng),
      ConfigError);
  CHECK_THROWS_AS(
      objective::fd_check(sc.params, sc.batch, ClipConfig{}, 1e-2, rng),
      ConfigError);
}
