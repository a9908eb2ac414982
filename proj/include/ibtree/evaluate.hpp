#pragma once

#include <cstddef>
#include <span>

#include "ibtree/env.hpp"
#include "ibtree/tree.hpp"

namespace ibtree {

struct EvalStats {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation, 0 for a single episode
};

// Runs the tree on the base environment (no split penalties) until each
// episode terminates or is truncated.
EvalStats evaluate_policy(const TreeNode& tree, const Environment& env, std::size_t episodes,
                          Rng& rng);

EvalStats mean_and_std(std::span<const double> values);

}  // namespace ibtree
