#include "ibtree/evaluate.hpp"

#include <cmath>
#include <vector>

#include "ibtree/errors.hpp"

namespace ibtree {

EvalStats mean_and_std(std::span<const double> values) {
  EvalStats s;
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  if (values.size() > 1) {
    double sq = 0.0;
    for (double v : values) sq += (v - s.mean) * (v - s.mean);
    s.std = std::sqrt(sq / static_cast<double>(values.size() - 1));
  }
  return s;
}

EvalStats evaluate_policy(const TreeNode& tree, const Environment& env, std::size_t episodes,
                          Rng& rng) {
  if (episodes == 0) throw InvalidInput("evaluation needs at least one episode");
  validate_tree(tree, env);
  std::vector<double> returns;
  returns.reserve(episodes);
  for (std::size_t e = 0; e < episodes; ++e) {
    BaseState s = env.reset(rng);
    double total = 0.0;
    for (;;) {
      StepResult r = env.step(s, tree_act(tree, s), rng);
      total += r.reward;
      if (r.terminal || r.truncated) break;
      s = std::move(r.next_state);
    }
    returns.push_back(total);
  }
  return mean_and_std(returns);
}

}  // namespace ibtree
