#include "ibtree/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "ibtree/errors.hpp"
#include "ibtree/evaluate.hpp"

namespace ibtree {

void FiniteMdp::validate() const {
  if (n_states == 0 || n_actions == 0) throw InvalidInput("finite MDP needs states and actions");
  if (outcomes.size() != n_states * n_actions) {
    throw InvalidInput("finite MDP needs one outcome list per (state, action)");
  }
  if (start >= n_states) throw InvalidInput("start state out of range");
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    double total = 0.0;
    for (const auto& o : outcomes[i]) {
      if (o.next >= n_states) throw InvalidInput("outcome successor out of range");
      if (o.probability < 0.0) throw InvalidInput("negative outcome probability");
      total += o.probability;
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw InvalidInput("outcome distribution of state " + std::to_string(i / n_actions) +
                         ", action " + std::to_string(i % n_actions) + " sums to " +
                         std::to_string(total));
    }
  }
}

// ---------------------------------------------------------------------------

ExpertPolicy::ExpertPolicy(std::size_t n_states, std::size_t n_actions, std::vector<double> q,
                           TieBreak tie_break)
    : n_states_(n_states), n_actions_(n_actions), q_(std::move(q)), tie_break_(tie_break) {
  if (q_.size() != n_states_ * n_actions_) throw InvalidInput("Q table has the wrong size");
}

double ExpertPolicy::value(std::size_t s) const {
  const auto row = q_.begin() + static_cast<std::ptrdiff_t>(s * n_actions_);
  return *std::max_element(row, row + static_cast<std::ptrdiff_t>(n_actions_));
}

double ExpertPolicy::weight(std::size_t s) const {
  const auto row = q_.begin() + static_cast<std::ptrdiff_t>(s * n_actions_);
  const auto [lo, hi] = std::minmax_element(row, row + static_cast<std::ptrdiff_t>(n_actions_));
  return *hi - *lo;
}

std::vector<std::size_t> ExpertPolicy::optimal_actions(std::size_t s) const {
  const double best = value(s);
  std::vector<std::size_t> out;
  for (std::size_t a = 0; a < n_actions_; ++a) {
    if (q(s, a) >= best - kTieTolerance) out.push_back(a);
  }
  return out;
}

std::size_t ExpertPolicy::act(std::size_t s, std::optional<std::size_t> previous, Rng& rng) const {
  const auto best = optimal_actions(s);
  if (tie_break_ == TieBreak::FavorPrevious) {
    if (previous && std::find(best.begin(), best.end(), *previous) != best.end()) return *previous;
    return best.front();
  }
  if (best.size() == 1) return best.front();
  return best[std::uniform_int_distribution<std::size_t>(0, best.size() - 1)(rng)];
}

// ---------------------------------------------------------------------------

namespace {

double backup(const FiniteMdp& mdp, const std::vector<double>& v, std::size_t s, std::size_t a,
              double gamma) {
  double q = 0.0;
  for (const auto& o : mdp.at(s, a)) {
    q += o.probability * (o.reward + (o.terminal ? 0.0 : gamma * v[o.next]));
  }
  return q;
}

std::vector<double> q_from_values(const FiniteMdp& mdp, const std::vector<double>& v,
                                  double gamma) {
  std::vector<double> q(mdp.n_states * mdp.n_actions);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) q[s * mdp.n_actions + a] = backup(mdp, v, s, a, gamma);
  }
  return q;
}

void require_terminating(const FiniteMdp& mdp) {
  // states from which some action sequence reaches a terminal outcome
  std::vector<char> reaches(mdp.n_states, 0);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t s = 0; s < mdp.n_states; ++s) {
      if (reaches[s]) continue;
      for (std::size_t a = 0; a < mdp.n_actions && !reaches[s]; ++a) {
        for (const auto& o : mdp.at(s, a)) {
          if (o.probability > 0.0 && (o.terminal || reaches[o.next])) {
            reaches[s] = 1;
            changed = true;
            break;
          }
        }
      }
    }
  }
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    if (!reaches[s]) {
      throw InvalidInput("state " + std::to_string(s) +
                         " can never terminate; supply a horizon or gamma < 1");
    }
  }
}

}  // namespace

ExpertPolicy backward_induction(const FiniteMdp& mdp, double gamma, TieBreak tie_break,
                                std::optional<std::size_t> horizon) {
  mdp.validate();
  if (!(gamma > 0.0 && gamma <= 1.0)) throw InvalidInput("gamma must be in (0,1]");

  std::vector<double> v(mdp.n_states, 0.0);
  if (horizon) {
    // Q is read off one further backup, so h decisions need h - 1 sweeps
    if (*horizon == 0) throw InvalidInput("horizon must be at least 1");
    for (std::size_t h = 1; h < *horizon; ++h) {
      std::vector<double> next(mdp.n_states);
      for (std::size_t s = 0; s < mdp.n_states; ++s) {
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < mdp.n_actions; ++a) best = std::max(best, backup(mdp, v, s, a, gamma));
        next[s] = best;
      }
      v = std::move(next);
    }
    return {mdp.n_states, mdp.n_actions, q_from_values(mdp, v, gamma), tie_break};
  }

  if (gamma == 1.0) require_terminating(mdp);

  constexpr std::size_t kMaxSweeps = 1'000'000;
  constexpr double kTolerance = 1e-12;
  // Successors usually carry higher indices (PotholeWorld cells), so sweeping
  // downward converges in one pass there.
  bool converged = false;
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double delta = 0.0;
    for (std::size_t s = mdp.n_states; s-- > 0;) {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < mdp.n_actions; ++a) best = std::max(best, backup(mdp, v, s, a, gamma));
      delta = std::max(delta, std::abs(best - v[s]));
      v[s] = best;
    }
    if (!std::isfinite(delta) || std::abs(v[mdp.start]) > 1e15) break;
    if (delta <= kTolerance) {
      converged = true;
      break;
    }
  }
  if (!converged) throw InvalidInput("backward induction did not converge; MDP does not terminate");
  return {mdp.n_states, mdp.n_actions, q_from_values(mdp, v, gamma), tie_break};
}

double bellman_residual(const FiniteMdp& mdp, const ExpertPolicy& expert, double gamma) {
  std::vector<double> v(mdp.n_states);
  for (std::size_t s = 0; s < mdp.n_states; ++s) v[s] = expert.value(s);
  double worst = 0.0;
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      worst = std::max(worst, std::abs(backup(mdp, v, s, a, gamma) - expert.q(s, a)));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------

FiniteMdp enumerate_prereq(const PrereqWorld& env) {
  const std::size_t m = env.prereq_spec().m;
  if (m > 20) throw InvalidInput("PrereqWorld too large to enumerate");
  FiniteMdp mdp;
  mdp.n_states = std::size_t{1} << m;
  mdp.n_actions = env.n_base_actions();
  mdp.outcomes.resize(mdp.n_states * mdp.n_actions);
  mdp.features.resize(mdp.n_states);
  Rng unused(0);
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    const BaseState state = env.decode(s);
    mdp.features[s] = state.features;
    for (std::size_t a = 0; a < mdp.n_actions; ++a) {
      const StepResult r = env.step(state, a, unused);
      mdp.outcomes[s * mdp.n_actions + a] = {
          {static_cast<std::size_t>(env.encode(r.next_state)), 1.0, r.reward, r.terminal}};
    }
  }
  mdp.start = static_cast<std::size_t>(env.encode(env.reset(unused)));
  return mdp;
}

FiniteMdp enumerate_tabular(const TabularWorld& env) {
  FiniteMdp mdp;
  mdp.n_states = env.n_states();
  mdp.n_actions = env.n_base_actions();
  mdp.start = env.start();
  for (std::size_t s = 0; s < mdp.n_states; ++s) {
    mdp.features.push_back(env.state_features(s));
    for (std::size_t a = 0; a < mdp.n_actions; ++a) mdp.outcomes.push_back(env.outcomes(s, a));
  }
  return mdp;
}

namespace {

std::size_t exact_ratio(double numerator, double resolution, const char* what) {
  const double ratio = numerator / resolution;
  const double rounded = std::round(ratio);
  if (std::abs(ratio - rounded) > 1e-6 || rounded < 1.0) {
    throw InvalidInput(std::string("resolution must divide ") + what + " evenly");
  }
  return static_cast<std::size_t>(rounded);
}

}  // namespace

std::size_t pothole_cell(const PotholeSpec& spec, double resolution, double position) {
  const std::size_t cells = exact_ratio(spec.road_length, resolution, "the road length");
  const double cell = std::floor(position / resolution + 1e-9);
  if (cell <= 0.0) return 0;
  return std::min(cells - 1, static_cast<std::size_t>(cell));
}

FiniteMdp discretize_pothole(const PotholeSpec& spec, double resolution) {
  if (!(resolution > 0.0)) throw InvalidInput("resolution must be positive");
  spec.validate();
  const std::size_t cells = exact_ratio(spec.road_length, resolution, "the road length");
  const std::size_t lo = exact_ratio(spec.advance_low, resolution, "the minimum advance");
  const std::size_t hi = exact_ratio(spec.advance_high, resolution, "the maximum advance");
  const double prob = 1.0 / static_cast<double>(hi - lo);

  FiniteMdp mdp;
  mdp.n_states = cells;
  mdp.n_actions = 3;
  mdp.start = 0;
  mdp.outcomes.resize(cells * 3);
  mdp.features.resize(cells);

  for (std::size_t i = 0; i < cells; ++i) {
    const double x = static_cast<double>(i) * resolution;
    mdp.features[i] = {x / spec.road_length};
    for (std::size_t lane = 0; lane < 3; ++lane) {
      const auto holes = spec.potholes(lane);
      const auto it = std::upper_bound(holes.begin(), holes.end(), x);
      const double gap = it == holes.end() ? std::numeric_limits<double>::infinity() : *it - x;

      auto& list = mdp.outcomes[i * 3 + lane];
      TabularOutcome terminal{0, 0.0, 0.0, true};
      for (std::size_t t = lo; t < hi; ++t) {
        const double u_lo = static_cast<double>(t) * resolution;
        const double u_hi = static_cast<double>(t + 1) * resolution;
        const bool ends = i + t >= cells;
        const double moved = ends ? spec.road_length - x : 0.5 * (u_lo + u_hi);
        double reward = 0.0;
        if (lane == 0) {
          reward = spec.lane1_discount * moved;
        } else {
          const double hit = std::clamp((u_hi - gap) / (u_hi - u_lo), 0.0, 1.0);
          reward = moved - spec.pothole_penalty * hit;
        }
        if (ends) {
          terminal.probability += prob;
          terminal.reward += prob * reward;
        } else {
          list.push_back({i + t, prob, reward, false});
        }
      }
      if (terminal.probability > 0.0) {
        terminal.reward /= terminal.probability;
        list.push_back(terminal);
      }
    }
  }
  return mdp;
}

// ---------------------------------------------------------------------------
// Tree fitting

namespace {

constexpr double kEps = 1e-12;

struct SplitChoice {
  bool found = false;
  std::size_t feature = 0;
  double threshold = 0.0;
  double error = std::numeric_limits<double>::infinity();
  double gini = std::numeric_limits<double>::infinity();
};

class TreeFitter {
 public:
  TreeFitter(const std::vector<LabeledSample>& samples, std::size_t n_classes,
             std::optional<std::size_t> max_depth)
      : samples_(samples), n_classes_(n_classes), max_depth_(max_depth) {}

  TreeNode fit(std::vector<std::size_t> idx, std::size_t depth) const {
    std::vector<double> w(n_classes_, 0.0);
    std::vector<std::size_t> count(n_classes_, 0);
    for (std::size_t i : idx) {
      w[samples_[i].label] += samples_[i].weight;
      ++count[samples_[i].label];
    }
    const double total = std::accumulate(w.begin(), w.end(), 0.0);
    std::size_t majority = 0;
    for (std::size_t c = 1; c < n_classes_; ++c) {
      const bool better = total > 0.0 ? w[c] > w[majority] : count[c] > count[majority];
      if (better) majority = c;
    }
    const double error = total - w[majority];
    const bool pure = total > 0.0 ? error <= kEps * std::max(total, 1.0)
                                  : count[majority] == idx.size();
    if (pure || (max_depth_ && depth >= *max_depth_)) return TreeNode::leaf(majority);

    const SplitChoice split = best_split(idx, w);
    if (!split.found) return TreeNode::leaf(majority);

    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) {
      (samples_[i].features[split.feature] <= split.threshold ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    TreeNode l = fit(std::move(left), depth + 1);
    TreeNode r = fit(std::move(right), depth + 1);
    return TreeNode::internal(split.feature, split.threshold, std::move(l), std::move(r));
  }

 private:
  static double impurity_terms(const std::vector<double>& w, double total, double& gini) {
    if (total <= 0.0) {
      gini = 0.0;
      return 0.0;
    }
    double best = 0.0, sq = 0.0;
    for (double x : w) {
      best = std::max(best, x);
      sq += x * x;
    }
    gini = total - sq / total;
    return total - best;
  }

  SplitChoice best_split(std::vector<std::size_t> idx, const std::vector<double>& totals) const {
    SplitChoice best;
    const std::size_t n_features = samples_[idx.front()].features.size();
    const double all = std::accumulate(totals.begin(), totals.end(), 0.0);
    std::vector<double> left(n_classes_), right(n_classes_);
    for (std::size_t f = 0; f < n_features; ++f) {
      std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return samples_[a].features[f] < samples_[b].features[f];
      });
      std::fill(left.begin(), left.end(), 0.0);
      double left_total = 0.0;
      for (std::size_t pos = 1; pos < idx.size(); ++pos) {
        const auto& prev = samples_[idx[pos - 1]];
        left[prev.label] += prev.weight;
        left_total += prev.weight;
        const double a = prev.features[f];
        const double b = samples_[idx[pos]].features[f];
        if (!(a < b)) continue;
        for (std::size_t c = 0; c < n_classes_; ++c) right[c] = totals[c] - left[c];
        double gl = 0.0, gr = 0.0;
        const double err = impurity_terms(left, left_total, gl) +
                           impurity_terms(right, all - left_total, gr);
        const double gini = gl + gr;
        if (err < best.error - kEps || (err <= best.error + kEps && gini < best.gini - kEps)) {
          best = {true, f, 0.5 * (a + b), err, gini};
        }
      }
    }
    return best;
  }

  const std::vector<LabeledSample>& samples_;
  std::size_t n_classes_;
  std::optional<std::size_t> max_depth_;
};

}  // namespace

TreeNode fit_tree(const std::vector<LabeledSample>& samples, std::size_t n_classes,
                  std::optional<std::size_t> max_depth) {
  if (samples.empty()) throw InvalidInput("cannot fit a tree to an empty sample set");
  if (n_classes == 0) throw InvalidInput("need at least one class");
  const std::size_t n_features = samples.front().features.size();
  for (const auto& s : samples) {
    if (s.label >= n_classes) throw InvalidInput("sample label out of range");
    if (s.features.size() != n_features) throw InvalidInput("samples differ in feature count");
    if (!(s.weight >= 0.0)) throw InvalidInput("sample weights must be non-negative");
  }
  std::vector<std::size_t> idx(samples.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return TreeFitter(samples, n_classes, max_depth).fit(std::move(idx), 0);
}

double weighted_accuracy(const TreeNode& tree, const std::vector<LabeledSample>& samples) {
  double hit = 0.0, total = 0.0;
  for (const auto& s : samples) {
    total += s.weight;
    if (tree_act(tree, s.features) == s.label) hit += s.weight;
  }
  return total > 0.0 ? hit / total : 1.0;
}

// ---------------------------------------------------------------------------

ImitationResult fit_tree_imitation(const ExpertPolicy& expert, const StateMapper& to_expert_state,
                                   const Environment& env, const ImitationConfig& config,
                                   Rng& rng) {
  if (expert.n_actions() != env.n_base_actions()) {
    throw InvalidInput("expert and environment disagree on the action count");
  }
  if (config.dagger_iters == 0) throw InvalidInput("dagger_iters must be positive");

  const auto started = std::chrono::steady_clock::now();
  const std::uint64_t eval_seed = rng();
  std::vector<LabeledSample> dataset;
  std::optional<TreeNode> current;
  std::optional<ImitationResult> result;
  double best_mean = -std::numeric_limits<double>::infinity();

  for (std::size_t it = 0; it < config.dagger_iters; ++it) {
    for (std::size_t r = 0; r < config.rollouts_per_iter; ++r) {
      BaseState s = env.reset(rng);
      std::optional<std::size_t> previous;
      for (;;) {
        const std::size_t si = to_expert_state(s);
        const std::size_t label = expert.act(si, previous, rng);
        dataset.push_back({s.features, label, expert.weight(si)});
        const std::size_t a = current ? tree_act(*current, s) : label;
        previous = a;
        StepResult step = env.step(s, a, rng);
        if (step.terminal || step.truncated) break;
        s = std::move(step.next_state);
      }
    }
    if (dataset.size() > config.max_samples) {
      dataset.erase(dataset.begin(),
                    dataset.begin() + static_cast<std::ptrdiff_t>(dataset.size() - config.max_samples));
    }
    if (dataset.empty()) throw InvalidInput("imitation gathered no samples");

    TreeNode tree = fit_tree(dataset, env.n_base_actions(), config.max_depth);
    Rng eval_rng(eval_seed + it);
    const EvalStats stats = evaluate_policy(tree, env, config.eval_episodes, eval_rng);
    const TreeMetrics m = tree_metrics(tree);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    ImitationIteration record{it, dataset.size(), stats.mean, stats.std, m.depth, m.node_count, elapsed};

    if (!result) result.emplace(ImitationResult{tree, it, {}, {}});
    result->history.push_back(record);
    if (stats.mean > best_mean) {
      best_mean = stats.mean;
      result->tree = tree;
      result->best_iteration = it;
    }
    current = std::move(tree);
  }
  result->dataset = std::move(dataset);
  return std::move(*result);
}

}  // namespace ibtree
