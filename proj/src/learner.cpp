#include "ibtree/learner.hpp"

#include <algorithm>
#include <string>

#include "ibtree/errors.hpp"
#include "ibtree/evaluate.hpp"

namespace ibtree {

void LearnerConfig::validate() const {
  if (k < 1) throw InvalidInput("k must be at least 1");
  if (!(alpha_b > 0.0 && alpha_b <= 1.0)) throw InvalidInput("alpha_b must be in (0,1]");
  if (!(alpha_o > 0.0 && alpha_o <= 1.0)) throw InvalidInput("alpha_o must be in (0,1]");
  if (alpha_b > alpha_o) throw InvalidInput("alpha_b must not exceed alpha_o");
  for (double e : {epsilon_start, epsilon_end}) {
    if (!(e >= 0.0 && e <= 1.0)) throw InvalidInput("epsilon must be in [0,1]");
  }
  if (episodes < 1) throw InvalidInput("episodes must be positive");
  if (eval_episodes < 1) throw InvalidInput("eval_episodes must be positive");
  if (capacity < 1) throw InvalidInput("capacity must be positive");
}

double LearnerConfig::epsilon_at(std::size_t episode) const {
  const std::size_t decay = epsilon_decay_episodes.value_or(episodes / 2);
  if (decay == 0 || episode >= decay) return epsilon_end;
  const double frac = static_cast<double>(episode) / static_cast<double>(decay);
  return epsilon_start + frac * (epsilon_end - epsilon_start);
}

std::size_t greedy_action(const QMemory& q, std::span<const double> obs_key,
                          std::size_t legal_count) {
  if (legal_count == 0) throw InvalidInput("no legal actions");
  thread_local std::vector<double> values;
  q.estimates(obs_key, legal_count, values);
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

std::size_t select_action(const QMemory& q, std::span<const double> obs_key,
                          std::size_t legal_count, double epsilon, Rng& rng) {
  if (legal_count == 0) throw InvalidInput("no legal actions");
  if (epsilon > 0.0 && std::uniform_real_distribution<double>(0.0, 1.0)(rng) < epsilon) {
    return std::uniform_int_distribution<std::size_t>(0, legal_count - 1)(rng);
  }
  return greedy_action(q, obs_key, legal_count);
}

double compute_target(const Transition& t, const QMemory& q, const QMemory& q_omniscient,
                      const Ibmdp& ibmdp) {
  const IbmdpConfig& cfg = ibmdp.config();
  if (!t.action.is_split() && t.terminal) return t.reward;
  if (t.action.is_split() && t.terminal) throw InvariantViolation("split transitions never terminate");

  thread_local std::vector<double> key;
  Ibmdp::observation_key(t.next, key);
  const std::size_t best = greedy_action(q, key, ibmdp.legal_count(t.next.splits_since_base));
  Ibmdp::full_key(t.next, key);
  const double bootstrap = q_omniscient.estimate(key, best);

  if (t.action.is_split()) return cfg.zeta + cfg.gamma_w * bootstrap;
  return t.reward + cfg.gamma_b * bootstrap;
}

MaskedPolicy greedy_policy(const QMemory& q, const Ibmdp& ibmdp) {
  MaskedPolicy policy;
  policy.act = [&q, &ibmdp](const Observation& obs, std::size_t depth) {
    std::vector<double> key;
    Ibmdp::observation_key(obs, key);
    return ibmdp.decode(greedy_action(q, key, ibmdp.legal_count(depth)));
  };
  policy.best_base_action = [&q, &ibmdp](const Observation& obs) {
    std::vector<double> key;
    Ibmdp::observation_key(obs, key);
    return greedy_action(q, key, ibmdp.n_base_actions());
  };
  return policy;
}

std::size_t extraction_depth_cap(const Ibmdp& ibmdp, const LearnerConfig& config) {
  const auto& limit = ibmdp.config().depth_limit;
  return limit ? std::min(*limit, config.extract_depth_cap) : config.extract_depth_cap;
}

TreeNode extract_greedy_tree(const QMemory& q, const Ibmdp& ibmdp, std::size_t depth_cap) {
  return extract_tree(greedy_policy(q, ibmdp), ibmdp.n_features(), ibmdp.config().p, depth_cap);
}

// ---------------------------------------------------------------------------

Learner::Learner(const Ibmdp& ibmdp, LearnerConfig config)
    : ibmdp_(&ibmdp),
      config_((config.validate(), config)),
      q_(ibmdp.n_actions(), ibmdp.observation_key_size(), config_.k, config_.capacity),
      q_o_(ibmdp.n_actions(), ibmdp.full_key_size(), config_.k, config_.capacity) {}

double Learner::learn(const Transition& t) {
  const double target = compute_target(t, q_, q_o_, *ibmdp_);
  const std::size_t a = ibmdp_->encode(t.action);
  Ibmdp::observation_key(t.state, obs_key_);
  q_.update(obs_key_, a, target, config_.alpha_b);
  Ibmdp::full_key(t.state, full_key_);
  q_o_.update(full_key_, a, target, config_.alpha_o);
  return target;
}

std::size_t Learner::run_episode(double epsilon, Rng& rng) {
  const Ibmdp& ib = *ibmdp_;
  Transition t;
  t.state = ib.reset(rng);
  std::size_t steps = 0;
  while (steps < ib.config().max_wrapped_steps) {
    Ibmdp::observation_key(t.state, obs_key_);
    const std::size_t a =
        select_action(q_, obs_key_, ib.legal_count(t.state.splits_since_base), epsilon, rng);
    t.action = ib.decode(a);
    WrappedStep step = ib.step(t.state, t.action, rng);
    t.reward = step.reward;
    t.next = std::move(step.next);
    t.terminal = step.terminal;
    learn(t);
    ++steps;
    if (step.terminal || step.truncated) break;
    std::swap(t.state, t.next);
  }
  ++episodes_done_;
  return steps;
}

TreeNode Learner::extract() const {
  return extract_greedy_tree(q_, *ibmdp_, extraction_depth_cap(*ibmdp_, config_));
}

TrainResult train(const Ibmdp& ibmdp, const LearnerConfig& config, Rng& rng,
                  const std::function<void(const CurvePoint&)>& on_eval) {
  Learner learner(ibmdp, config);
  const std::uint64_t eval_seed = rng();
  std::vector<CurvePoint> curve;

  const auto evaluate = [&](std::size_t episode) {
    TreeNode tree = learner.extract();
    Rng eval_rng(eval_seed + episode);
    const EvalStats stats = evaluate_policy(tree, ibmdp.env(), config.eval_episodes, eval_rng);
    const TreeMetrics m = tree_metrics(tree);
    curve.push_back({episode, stats.mean, stats.std, m.depth, m.node_count});
    if (on_eval) on_eval(curve.back());
    return tree;
  };

  std::optional<TreeNode> last_tree;
  for (std::size_t e = 0; e < config.episodes; ++e) {
    learner.run_episode(config.epsilon_at(e), rng);
    const std::size_t done = e + 1;
    if (config.eval_every > 0 && done % config.eval_every == 0) {
      TreeNode tree = evaluate(done);
      if (done == config.episodes) last_tree = std::move(tree);
    }
  }
  if (!last_tree) last_tree = evaluate(config.episodes);

  return {learner.q(), learner.q_omniscient(), std::move(curve), std::move(*last_tree)};
}

}  // namespace ibtree
