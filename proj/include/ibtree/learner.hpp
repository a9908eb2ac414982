#pragma once

// Masked episodic-control Q-learning on an IBMDP.
//
// Two value memories are trained side by side:
//   Q   keyed on the observation (bounds only) - the policy reads only this;
//   Q_o keyed on the full wrapped state        - used only for bootstrapping.
//
// For a transition (s, a, r, s'):
//   a* = argmax over actions legal at s' of Q(mask(s'), .)
//   B  = Q_o(s', a*)
//   target = r                  if a is a base action and the step is terminal
//          = r + gamma_b * B    if a is a base action otherwise
//          = zeta + gamma_w * B if a is a split
// and both Q(mask(s), a) and Q_o(s, a) move toward that same target with
// rates alpha_b and alpha_o. Any other function approximator can be dropped in
// by keeping this target: choose with the masked model, evaluate with the
// full-state one.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ibtree/ibmdp.hpp"
#include "ibtree/qmemory.hpp"
#include "ibtree/tree.hpp"

namespace ibtree {

struct LearnerConfig {
  std::size_t k = 9;
  double alpha_b = 0.1;
  double alpha_o = 0.7;
  double epsilon_start = 1.0;
  double epsilon_end = 0.05;
  std::optional<std::size_t> epsilon_decay_episodes;  // defaults to episodes / 2
  std::size_t episodes = 1000;
  std::size_t eval_every = 0;  // 0: evaluate only at the end
  std::size_t eval_episodes = 100;
  std::size_t capacity = QMemory::kDefaultCapacity;
  std::size_t extract_depth_cap = 16;  // used when the IBMDP has no depth limit

  void validate() const;
  double epsilon_at(std::size_t episode) const;
};

struct Transition {
  WrappedState state;
  WrappedAction action;
  double reward = 0.0;
  WrappedState next;
  bool terminal = false;
};

struct CurvePoint {
  std::size_t episode = 0;
  double mean_reward = 0.0;
  double reward_std = 0.0;
  std::size_t depth = 0;
  std::size_t nodes = 0;
};

double compute_target(const Transition& t, const QMemory& q, const QMemory& q_omniscient,
                      const Ibmdp& ibmdp);

// Highest estimate among actions [0, legal_count); ties go to the lowest index.
std::size_t greedy_action(const QMemory& q, std::span<const double> obs_key,
                          std::size_t legal_count);

// Epsilon-greedy over actions [0, legal_count).
std::size_t select_action(const QMemory& q, std::span<const double> obs_key,
                          std::size_t legal_count, double epsilon, Rng& rng);

MaskedPolicy greedy_policy(const QMemory& q, const Ibmdp& ibmdp);

std::size_t extraction_depth_cap(const Ibmdp& ibmdp, const LearnerConfig& config);
TreeNode extract_greedy_tree(const QMemory& q, const Ibmdp& ibmdp, std::size_t depth_cap);

class Learner {
 public:
  Learner(const Ibmdp& ibmdp, LearnerConfig config);

  const QMemory& q() const noexcept { return q_; }
  const QMemory& q_omniscient() const noexcept { return q_o_; }
  const LearnerConfig& config() const noexcept { return config_; }
  std::size_t episodes_done() const noexcept { return episodes_done_; }

  // One epsilon-greedy episode on the wrapped environment. Returns the
  // number of wrapped steps taken.
  std::size_t run_episode(double epsilon, Rng& rng);

  // Applies the shared target to both memories and returns it.
  double learn(const Transition& t);

  TreeNode extract() const;

 private:
  const Ibmdp* ibmdp_;
  LearnerConfig config_;
  QMemory q_;
  QMemory q_o_;
  std::size_t episodes_done_ = 0;
  std::vector<double> obs_key_;
  std::vector<double> full_key_;
};

struct TrainResult {
  QMemory q;
  QMemory q_omniscient;
  std::vector<CurvePoint> curve;  // last entry is the final evaluation
  TreeNode tree;
};

// Runs config.episodes training episodes. Every eval_every episodes (and at
// the end) the greedy tree is extracted and evaluated on the base env.
TrainResult train(const Ibmdp& ibmdp, const LearnerConfig& config, Rng& rng,
                  const std::function<void(const CurvePoint&)>& on_eval = {});

}  // namespace ibtree
