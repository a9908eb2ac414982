#pragma once

// Decision-tree policies over normalized base features, and their extraction
// from masked IBMDP policies.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>

#include "ibtree/ibmdp.hpp"
#include "json.hpp"

namespace ibtree {

// Immutable binary tree. Internal nodes send obs[feature] <= threshold left.
class TreeNode {
 public:
  static TreeNode leaf(std::size_t action);
  static TreeNode internal(std::size_t feature, double threshold, TreeNode left, TreeNode right);

  bool is_leaf() const noexcept { return !left_; }
  std::size_t action() const;
  std::size_t feature() const;
  double threshold() const;
  const TreeNode& left() const;
  const TreeNode& right() const;

  friend bool operator==(const TreeNode& a, const TreeNode& b);

 private:
  TreeNode() = default;

  std::size_t index_ = 0;  // action for leaves, feature for internal nodes
  double threshold_ = 0.0;
  std::shared_ptr<const TreeNode> left_;
  std::shared_ptr<const TreeNode> right_;
};

struct TreeMetrics {
  std::size_t depth = 0;  // internal nodes on the longest root-leaf path
  std::size_t node_count = 0;
};

// What extraction needs from a policy defined on observations. `act` gets
// the number of splits already on the path so it can respect a depth limit.
struct MaskedPolicy {
  std::function<WrappedAction(const Observation&, std::size_t depth)> act;
  std::function<std::size_t(const Observation&)> best_base_action;
};

// Recursive transcription of the masked policy into a tree, starting at the
// root observation. A split at depth_cap is replaced by best_base_action.
TreeNode extract_tree(const MaskedPolicy& policy, std::size_t n_features, std::size_t p,
                      std::size_t depth_cap);

std::size_t tree_act(const TreeNode& tree, std::span<const double> features);
inline std::size_t tree_act(const TreeNode& tree, const BaseState& state) {
  return tree_act(tree, state.features);
}

TreeMetrics tree_metrics(const TreeNode& tree);

// Throws InvalidInput if a leaf action or split feature is out of range for env.
void validate_tree(const TreeNode& tree, const Environment& env);

nlohmann::json tree_to_json(const TreeNode& tree);
TreeNode tree_from_json(const nlohmann::json& doc);
std::string tree_serialize(const TreeNode& tree, int indent = -1);
TreeNode tree_deserialize(const std::string& text);

// Indented if/else rendering with thresholds in environment units.
std::string describe_tree(const TreeNode& tree, const Environment& env);

}  // namespace ibtree
