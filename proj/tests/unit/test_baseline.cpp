#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "ibtree/baseline.hpp"
#include "ibtree/errors.hpp"
#include "ibtree/evaluate.hpp"
#include "oracles.hpp"

using namespace ibtree;

namespace {

FiniteMdp chain_mdp(std::size_t n_states, std::size_t n_actions) {
  FiniteMdp m;
  m.n_states = n_states;
  m.n_actions = n_actions;
  m.outcomes.resize(n_states * n_actions);
  for (std::size_t s = 0; s < n_states; ++s) m.features.push_back({double(s) / double(n_states)});
  return m;
}

}  // namespace

TEST_SUITE("baseline") {

TEST_CASE("backward induction on hand-sized MDPs") {
  SUBCASE("one state, one terminal action") {
    FiniteMdp m = chain_mdp(1, 1);
    m.outcomes[0] = {{0, 1.0, 1.0, true}};
    const ExpertPolicy e = backward_induction(m, 1.0, TieBreak::Random);
    CHECK(e.q(0, 0) == 1.0);
  }
  SUBCASE("two-step chain with gamma one half") {
    FiniteMdp m = chain_mdp(2, 1);
    m.outcomes[0] = {{1, 1.0, 1.0, false}};
    m.outcomes[1] = {{1, 1.0, 1.0, true}};
    const ExpertPolicy e = backward_induction(m, 0.5, TieBreak::Random);
    CHECK(e.value(0) == doctest::Approx(1.5));
  }
  SUBCASE("a state that can never terminate is rejected when undiscounted") {
    FiniteMdp m = chain_mdp(2, 1);
    m.outcomes[0] = {{1, 1.0, 0.0, true}};
    m.outcomes[1] = {{1, 1.0, 0.0, false}};
    try {
      backward_induction(m, 1.0, TieBreak::Random);
      FAIL("expected InvalidInput");
    } catch (const InvalidInput& e) {
      CHECK(std::string(e.what()).find("state 1") != std::string::npos);
    }
    // a horizon makes it well posed
    CHECK_NOTHROW(backward_induction(m, 1.0, TieBreak::Random, 5));
  }
  SUBCASE("malformed distributions are rejected") {
    FiniteMdp m = chain_mdp(1, 1);
    m.outcomes[0] = {{0, 0.7, 1.0, true}};
    CHECK_THROWS_AS(backward_induction(m, 1.0, TieBreak::Random), InvalidInput);
  }
}

TEST_CASE("finite-horizon backups match exhaustive expectimax") {
  const TabularWorld w = oracle::stochastic_world();
  const FiniteMdp m = enumerate_tabular(w);
  for (std::size_t h = 1; h <= 6; ++h) {
    const ExpertPolicy e = backward_induction(m, 0.9, TieBreak::Random, h);
    for (std::size_t s = 0; s < m.n_states; ++s) {
      CHECK(e.value(s) == doctest::Approx(oracle::expectimax(m, s, h, 0.9)).epsilon(1e-12));
    }
  }
}

TEST_CASE("expert queries and tie-breaking") {
  ExpertPolicy e(2, 3, {1.0, 3.0, 3.0, 0.0, -1.0, 2.0}, TieBreak::FavorPrevious);
  CHECK(e.value(0) == 3.0);
  CHECK(e.weight(0) == 2.0);
  CHECK(e.weight(1) == 3.0);
  CHECK(e.optimal_actions(0) == std::vector<std::size_t>{1, 2});
  Rng rng(51);
  CHECK(e.act(0, std::nullopt, rng) == 1);
  CHECK(e.act(0, 2, rng) == 2);
  CHECK(e.act(0, 0, rng) == 1);
  CHECK(e.act(1, 2, rng) == 2);

  ExpertPolicy r(1, 3, {5.0, 5.0, 1.0}, TieBreak::Random);
  int ones = 0;
  for (int i = 0; i < 2000; ++i) {
    const std::size_t a = r.act(0, std::nullopt, rng);
    CHECK(a != 2);
    ones += a == 1;
  }
  CHECK(ones > 850);
  CHECK(ones < 1150);
}

TEST_CASE("PrereqWorld backward induction") {
  for (std::size_t m : {4U, 5U, 6U, 7U, 8U, 10U}) {
    CAPTURE(m);
    PrereqWorld env(PrereqSpec::standard(m));
    const FiniteMdp mdp = enumerate_prereq(env);
    CHECK(mdp.n_states == (std::size_t{1} << m));
    const ExpertPolicy e = backward_induction(mdp, 1.0, TieBreak::Random);
    CHECK(bellman_residual(mdp, e, 1.0) <= 1e-8);
    if (m == 7) CHECK(e.value(mdp.start) == -4.0);

    // the Eigen policy-value oracle agrees with the greedy policy's value
    std::vector<std::size_t> greedy;
    Rng rng(52);
    for (std::size_t s = 0; s < mdp.n_states; ++s) greedy.push_back(e.act(s, std::nullopt, rng));
    const auto v = oracle::policy_value(mdp, greedy, 1.0);
    REQUIRE(v.has_value());
    CHECK((*v)[mdp.start] == doctest::Approx(e.value(mdp.start)).epsilon(1e-9));
  }
}

TEST_CASE("the PrereqWorld expert never wastes a step on its path") {
  PrereqWorld env(PrereqSpec::standard(7));
  const FiniteMdp mdp = enumerate_prereq(env);
  const ExpertPolicy e = backward_induction(mdp, 1.0, TieBreak::Random);
  Rng rng(53);
  for (int episode = 0; episode < 200; ++episode) {
    BaseState s = env.reset(rng);
    for (;;) {
      const std::size_t a = e.act(env.encode(s), std::nullopt, rng);
      const StepResult r = env.step(s, a, rng);
      if (r.terminal) break;
      CHECK(env.encode(r.next_state) != env.encode(s));
      s = r.next_state;
    }
  }
}

TEST_CASE("PotholeWorld discretization") {
  const PotholeSpec spec = PotholeSpec::standard();
  CHECK_THROWS_AS(discretize_pothole(spec, 0.0), InvalidInput);
  CHECK_THROWS_AS(discretize_pothole(spec, 0.03), InvalidInput);

  const FiniteMdp mdp = discretize_pothole(spec, 0.01);
  CHECK(mdp.n_states == 5000);
  CHECK_NOTHROW(mdp.validate());

  SUBCASE("lane 1 pays 0.9 times the mean advance away from the road end") {
    for (std::size_t cell : {0U, 1234U, 4000U}) {
      double expected = 0.0;
      for (const auto& o : mdp.at(cell, 0)) expected += o.probability * o.reward;
      CHECK(expected == doctest::Approx(0.675).epsilon(1e-12));
    }
  }
  SUBCASE("cells within one minimum advance of the end always terminate") {
    for (std::size_t cell = 4950; cell < 5000; ++cell) {
      for (std::size_t lane = 0; lane < 3; ++lane) {
        const auto& list = mdp.at(cell, lane);
        REQUIRE(list.size() == 1);
        CHECK(list[0].terminal);
      }
    }
  }
  SUBCASE("cell lookup") {
    CHECK(pothole_cell(spec, 0.01, 0.0) == 0);
    CHECK(pothole_cell(spec, 0.01, 0.015) == 1);
    CHECK(pothole_cell(spec, 0.01, 0.03) == 3);
    CHECK(pothole_cell(spec, 0.01, 50.0) == 4999);
  }
  SUBCASE("the greedy expert earns about 50 in the continuous world") {
    const ExpertPolicy e = backward_induction(mdp, 1.0, TieBreak::FavorPrevious);
    CHECK(bellman_residual(mdp, e, 1.0) <= 1e-8);
    PotholeWorld env(spec);
    Rng rng(54);
    std::optional<std::size_t> prev;
    const double mean = oracle::rollout_mean(
        env,
        [&](const BaseState& s) {
          if (s.raw[0] == 0.0) prev.reset();
          const std::size_t a = e.act(pothole_cell(spec, 0.01, s.raw[0]), prev, rng);
          prev = a;
          return a;
        },
        10000, rng);
    CHECK(std::abs(mean - 50.0) <= 0.5);
    CHECK(std::abs(e.value(0) - mean) <= 0.5);
  }
}

TEST_CASE("tree fitting") {
  SUBCASE("constant labels give a single leaf") {
    std::vector<LabeledSample> s;
    for (int i = 0; i < 20; ++i) s.push_back({{i / 20.0, 0.3}, 2, 1.0});
    CHECK(fit_tree(s, 3, std::nullopt) == TreeNode::leaf(2));
  }
  SUBCASE("a single threshold is found at the midpoint") {
    std::vector<LabeledSample> s = {{{0.1}, 0, 1.0}, {{0.2}, 0, 1.0}, {{0.6}, 1, 1.0}, {{0.9}, 1, 1.0}};
    const TreeNode t = fit_tree(s, 2, std::nullopt);
    REQUIRE_FALSE(t.is_leaf());
    CHECK(t.threshold() == doctest::Approx(0.4));
    CHECK(t.left().action() == 0);
    CHECK(t.right().action() == 1);
  }
  SUBCASE("weights decide the majority") {
    std::vector<LabeledSample> s = {{{0.1}, 0, 1.0}, {{0.1}, 0, 1.0}, {{0.1}, 1, 5.0}};
    CHECK(fit_tree(s, 2, std::nullopt) == TreeNode::leaf(1));
  }
  SUBCASE("depth limit is honoured") {
    std::vector<LabeledSample> s;
    for (int i = 0; i < 16; ++i) s.push_back({{i / 16.0}, std::size_t(i % 2), 1.0});
    CHECK(tree_metrics(fit_tree(s, 2, 2)).depth <= 2);
    CHECK(weighted_accuracy(fit_tree(s, 2, std::nullopt), s) == 1.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(fit_tree({}, 2, std::nullopt), InvalidInput);
    std::vector<LabeledSample> s = {{{0.1}, 3, 1.0}};
    CHECK_THROWS_AS(fit_tree(s, 2, std::nullopt), InvalidInput);
  }
  SUBCASE("random data: accuracy at least the best single leaf") {
    Rng rng(55);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<LabeledSample> s;
      for (int i = 0; i < 200; ++i) {
        s.push_back({{u(rng), u(rng), u(rng)}, std::size_t(rng() % 3), u(rng)});
      }
      double best_leaf = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        best_leaf = std::max(best_leaf, weighted_accuracy(TreeNode::leaf(c), s));
      }
      for (std::size_t d : {1U, 3U, 6U}) {
        CHECK(weighted_accuracy(fit_tree(s, 3, d), s) >= best_leaf - 1e-12);
      }
    }
  }
}

TEST_CASE("unlimited-depth fit reproduces the expert on every enumerated state") {
  PrereqWorld env(PrereqSpec::standard(7));
  const FiniteMdp mdp = enumerate_prereq(env);
  const ExpertPolicy e = backward_induction(mdp, 1.0, TieBreak::FavorPrevious);
  std::vector<LabeledSample> s;
  Rng rng(56);
  for (std::size_t st = 0; st < mdp.n_states; ++st) {
    s.push_back({mdp.features[st], e.act(st, std::nullopt, rng), std::max(e.weight(st), 1e-3)});
  }
  const TreeNode t = fit_tree(s, env.n_base_actions(), std::nullopt);
  for (const auto& x : s) CHECK(tree_act(t, x.features) == x.label);
}

TEST_CASE("imitation") {
  SUBCASE("a constant expert gives a single leaf") {
    PotholeWorld env;
    const std::size_t cells = 5000;
    std::vector<double> q(cells * 3, 0.0);
    for (std::size_t s = 0; s < cells; ++s) q[s * 3 + 1] = 1.0;
    ExpertPolicy e(cells, 3, q, TieBreak::FavorPrevious);
    const PotholeSpec spec = PotholeSpec::standard();
    ImitationConfig cfg;
    cfg.dagger_iters = 3;
    cfg.rollouts_per_iter = 3;
    cfg.eval_episodes = 3;
    Rng rng(57);
    const ImitationResult r = fit_tree_imitation(
        e, [&](const BaseState& b) { return pothole_cell(spec, 0.01, b.raw[0]); }, env, cfg, rng);
    CHECK(r.tree == TreeNode::leaf(1));
    CHECK(r.history.size() == 3);
  }
  SUBCASE("PrereqWorld m=7 reaches the optimal reward") {
    PrereqWorld env(PrereqSpec::standard(7));
    const FiniteMdp mdp = enumerate_prereq(env);
    const ExpertPolicy e = backward_induction(mdp, 1.0, TieBreak::Random);
    ImitationConfig cfg;
    Rng rng(58);
    const ImitationResult r = fit_tree_imitation(
        e, [&](const BaseState& b) { return env.encode(b); }, env, cfg, rng);
    Rng eval(59);
    CHECK(evaluate_policy(r.tree, env, 100, eval).mean == -4.0);
    CHECK(r.best_iteration < r.history.size());
    for (const auto& h : r.history) CHECK(h.samples <= cfg.max_samples);
  }
  SUBCASE("the dataset is capped at max_samples, newest kept") {
    PrereqWorld env(PrereqSpec::standard(5));
    const FiniteMdp mdp = enumerate_prereq(env);
    const ExpertPolicy e = backward_induction(mdp, 1.0, TieBreak::Random);
    ImitationConfig cfg;
    cfg.max_samples = 7;
    cfg.dagger_iters = 4;
    Rng rng(60);
    const ImitationResult r = fit_tree_imitation(
        e, [&](const BaseState& b) { return env.encode(b); }, env, cfg, rng);
    CHECK(r.dataset.size() == 7);
  }
}

}  // TEST_SUITE
