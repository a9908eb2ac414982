#pragma once

// Baseline: exact expert by backward induction on a finite MDP, then a
// VIPER-style imitation loop ("VIPER-lite") that fits depth-limited trees to
// the expert's labels with Q-range sample weights.

#include <cstddef>
#include <functional>
#include <optional>
#include <vector>

#include "ibtree/env.hpp"
#include "ibtree/tree.hpp"

namespace ibtree {

struct FiniteMdp {
  std::size_t n_states = 0;
  std::size_t n_actions = 0;
  // outcomes[s * n_actions + a]
  std::vector<std::vector<TabularOutcome>> outcomes;
  std::size_t start = 0;
  // Normalized base features per state, for fitting trees on enumerated data.
  std::vector<std::vector<double>> features;

  const std::vector<TabularOutcome>& at(std::size_t s, std::size_t a) const {
    return outcomes[s * n_actions + a];
  }
  void validate() const;
};

enum class TieBreak { FavorPrevious, Random };

class ExpertPolicy {
 public:
  static constexpr double kTieTolerance = 1e-9;

  ExpertPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> q,
               TieBreak tie_break);

  std::size_t n_states() const noexcept { return n_states_; }
  std::size_t n_actions() const noexcept { return n_actions_; }
  TieBreak tie_break() const noexcept { return tie_break_; }

  double q(std::size_t s, std::size_t a) const { return q_[s * n_actions_ + a]; }
  double value(std::size_t s) const;
  // max_a Q*(s,a) - min_a Q*(s,a)
  double weight(std::size_t s) const;
  std::vector<std::size_t> optimal_actions(std::size_t s) const;

  // Greedy action. FavorPrevious keeps `previous` when it is optimal and
  // otherwise takes the lowest optimal index; Random draws among optima.
  std::size_t act(std::size_t s, std::optional<std::size_t> previous, Rng& rng) const;

 private:
  std::size_t n_states_;
  std::size_t n_actions_;
  std::vector<double> q_;
  TieBreak tie_break_;
};

// Bellman optimality sweeps until the largest change is below 1e-12. With a
// horizon h, Q holds the optimal h-step returns (h >= 1) instead. Without a
// horizon and gamma == 1, every state must be able to reach a terminal
// outcome, and sweeps must converge, otherwise InvalidInput is thrown.
ExpertPolicy backward_induction(const FiniteMdp& mdp, double gamma, TieBreak tie_break,
                                std::optional<std::size_t> horizon = std::nullopt);

// One further sweep from Q; returns the largest absolute change.
double bellman_residual(const FiniteMdp& mdp, const ExpertPolicy& expert, double gamma);

FiniteMdp enumerate_prereq(const PrereqWorld& env);
FiniteMdp enumerate_tabular(const TabularWorld& env);

// Grid over [0, road_length] with the given cell width; the Unif advance is
// integrated exactly against cell boundaries and pothole positions. A
// continuous position maps to the cell containing it.
FiniteMdp discretize_pothole(const PotholeSpec& spec, double resolution = 0.01);
std::size_t pothole_cell(const PotholeSpec& spec, double resolution, double position);

// ---------------------------------------------------------------------------
// Tree fitting

struct LabeledSample {
  std::vector<double> features;
  std::size_t label = 0;
  double weight = 1.0;
};

// Greedy top-down fit minimizing weighted misclassification (weighted Gini
// breaks ties); candidate thresholds are midpoints between consecutive
// distinct feature values. Splits until pure, constant, or max_depth.
TreeNode fit_tree(const std::vector<LabeledSample>& samples, std::size_t n_classes,
                  std::optional<std::size_t> max_depth);

double weighted_accuracy(const TreeNode& tree, const std::vector<LabeledSample>& samples);

struct ImitationConfig {
  std::optional<std::size_t> max_depth;
  std::size_t dagger_iters = 10;
  std::size_t rollouts_per_iter = 10;
  std::size_t eval_episodes = 100;
  std::size_t max_samples = 200000;
};

struct ImitationIteration {
  std::size_t iteration = 0;
  std::size_t samples = 0;
  double mean_reward = 0.0;
  double reward_std = 0.0;
  std::size_t depth = 0;
  std::size_t nodes = 0;
  double elapsed_s = 0.0;  // since the imitation loop started
};

struct ImitationResult {
  TreeNode tree;  // best evaluated tree; earliest wins ties
  std::size_t best_iteration = 0;
  std::vector<ImitationIteration> history;
  std::vector<LabeledSample> dataset;
};

// Maps a base state of `env` to the expert's state index.
using StateMapper = std::function<std::size_t(const BaseState&)>;

ImitationResult fit_tree_imitation(const ExpertPolicy& expert, const StateMapper& to_expert_state,
                                   const Environment& env, const ImitationConfig& config,
                                   Rng& rng);

}  // namespace ibtree
