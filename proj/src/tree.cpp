#include "ibtree/tree.hpp"

#include <algorithm>
#include <sstream>

#include "ibtree/errors.hpp"

namespace ibtree {

TreeNode TreeNode::leaf(std::size_t action) {
  TreeNode n;
  n.index_ = action;
  return n;
}

TreeNode TreeNode::internal(std::size_t feature, double threshold, TreeNode left, TreeNode right) {
  TreeNode n;
  n.index_ = feature;
  n.threshold_ = threshold;
  n.left_ = std::make_shared<const TreeNode>(std::move(left));
  n.right_ = std::make_shared<const TreeNode>(std::move(right));
  return n;
}

std::size_t TreeNode::action() const {
  if (!is_leaf()) throw InvalidInput("internal node has no action");
  return index_;
}

std::size_t TreeNode::feature() const {
  if (is_leaf()) throw InvalidInput("leaf has no feature");
  return index_;
}

double TreeNode::threshold() const {
  if (is_leaf()) throw InvalidInput("leaf has no threshold");
  return threshold_;
}

const TreeNode& TreeNode::left() const {
  if (is_leaf()) throw InvalidInput("leaf has no children");
  return *left_;
}

const TreeNode& TreeNode::right() const {
  if (is_leaf()) throw InvalidInput("leaf has no children");
  return *right_;
}

bool operator==(const TreeNode& a, const TreeNode& b) {
  if (a.is_leaf() != b.is_leaf()) return false;
  if (a.is_leaf()) return a.index_ == b.index_;
  return a.index_ == b.index_ && a.threshold_ == b.threshold_ && *a.left_ == *b.left_ &&
         *a.right_ == *b.right_;
}

// ---------------------------------------------------------------------------

namespace {

TreeNode subtree_from_policy(const MaskedPolicy& policy, const Observation& obs, std::size_t p,
                             std::size_t depth, std::size_t depth_cap) {
  const WrappedAction a = policy.act(obs, depth);
  if (!a.is_split()) return TreeNode::leaf(a.base);
  if (depth >= depth_cap) return TreeNode::leaf(policy.best_base_action(obs));

  const std::size_t c = a.feature;
  if (c >= obs.lower.size()) throw InvalidInput("policy chose a split on an unknown feature");
  if (a.value_index < 1 || a.value_index > p) throw InvalidInput("policy chose an invalid split value");
  const double v = static_cast<double>(a.value_index) / static_cast<double>(p + 1);
  const double vp = project_value(v, obs.lower[c], obs.upper[c]);

  Observation left = obs;
  Observation right = obs;
  left.upper[c] = vp;
  right.lower[c] = vp;
  TreeNode l = subtree_from_policy(policy, left, p, depth + 1, depth_cap);
  TreeNode r = subtree_from_policy(policy, right, p, depth + 1, depth_cap);
  return TreeNode::internal(c, vp, std::move(l), std::move(r));
}

}  // namespace

TreeNode extract_tree(const MaskedPolicy& policy, std::size_t n_features, std::size_t p,
                      std::size_t depth_cap) {
  if (p < 1) throw InvalidInput("p must be at least 1");
  return subtree_from_policy(policy, Observation::root(n_features), p, 0, depth_cap);
}

std::size_t tree_act(const TreeNode& tree, std::span<const double> features) {
  const TreeNode* node = &tree;
  while (!node->is_leaf()) {
    node = features[node->feature()] <= node->threshold() ? &node->left() : &node->right();
  }
  return node->action();
}

TreeMetrics tree_metrics(const TreeNode& tree) {
  if (tree.is_leaf()) return {0, 1};
  const TreeMetrics l = tree_metrics(tree.left());
  const TreeMetrics r = tree_metrics(tree.right());
  return {1 + std::max(l.depth, r.depth), 1 + l.node_count + r.node_count};
}

void validate_tree(const TreeNode& tree, const Environment& env) {
  if (tree.is_leaf()) {
    if (tree.action() >= env.n_base_actions()) {
      throw InvalidInput("tree leaf action " + std::to_string(tree.action()) +
                         " out of range for " + std::string(env.name()));
    }
    return;
  }
  if (tree.feature() >= env.n_features()) {
    throw InvalidInput("tree splits on feature " + std::to_string(tree.feature()) +
                       " but " + std::string(env.name()) + " has " +
                       std::to_string(env.n_features()));
  }
  validate_tree(tree.left(), env);
  validate_tree(tree.right(), env);
}

// ---------------------------------------------------------------------------
// JSON

nlohmann::json tree_to_json(const TreeNode& tree) {
  if (tree.is_leaf()) return {{"type", "leaf"}, {"action", tree.action()}};
  return {{"type", "internal"},
          {"feature", tree.feature()},
          {"threshold", tree.threshold()},
          {"left", tree_to_json(tree.left())},
          {"right", tree_to_json(tree.right())}};
}

namespace {

const nlohmann::json& field(const nlohmann::json& doc, const char* name, const std::string& at) {
  auto it = doc.find(name);
  if (it == doc.end()) throw ParseError(at, std::string("missing field \"") + name + "\"");
  return *it;
}

std::size_t index_field(const nlohmann::json& doc, const char* name, const std::string& at) {
  const auto& v = field(doc, name, at);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    throw ParseError(at + "/" + name, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

TreeNode parse_node(const nlohmann::json& doc, const std::string& at) {
  if (!doc.is_object()) throw ParseError(at, "expected an object");
  const auto& type = field(doc, "type", at);
  if (!type.is_string()) throw ParseError(at + "/type", "expected a string");
  const auto kind = type.get<std::string>();
  if (kind == "leaf") return TreeNode::leaf(index_field(doc, "action", at));
  if (kind != "internal") throw ParseError(at + "/type", "unknown node type \"" + kind + "\"");

  const std::size_t feature = index_field(doc, "feature", at);
  const auto& th = field(doc, "threshold", at);
  if (!th.is_number()) throw ParseError(at + "/threshold", "expected a number");
  TreeNode left = parse_node(field(doc, "left", at), at + "/left");
  TreeNode right = parse_node(field(doc, "right", at), at + "/right");
  return TreeNode::internal(feature, th.get<double>(), std::move(left), std::move(right));
}

}  // namespace

TreeNode tree_from_json(const nlohmann::json& doc) { return parse_node(doc, ""); }

std::string tree_serialize(const TreeNode& tree, int indent) { return tree_to_json(tree).dump(indent); }

TreeNode tree_deserialize(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("byte " + std::to_string(e.byte), e.what());
  }
  return tree_from_json(doc);
}

// ---------------------------------------------------------------------------

namespace {

void describe_node(const TreeNode& node, const Environment& env,
                   const std::vector<std::string>& features,
                   const std::vector<std::string>& actions, int indent, std::ostringstream& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  if (node.is_leaf()) {
    const std::size_t a = node.action();
    out << pad << (a < actions.size() ? actions[a] : "action " + std::to_string(a)) << "\n";
    return;
  }
  const std::size_t f = node.feature();
  const std::string name = f < features.size() ? features[f] : "f" + std::to_string(f);
  const double t = f < env.n_features() ? env.denormalize_feature(f, node.threshold())
                                        : node.threshold();
  out << pad << "if " << name << " <= " << t << ":\n";
  describe_node(node.left(), env, features, actions, indent + 1, out);
  out << pad << "else:\n";
  describe_node(node.right(), env, features, actions, indent + 1, out);
}

}  // namespace

std::string describe_tree(const TreeNode& tree, const Environment& env) {
  std::ostringstream out;
  out.precision(6);
  describe_node(tree, env, env.feature_names(), env.action_names(), 0, out);
  return out.str();
}

}  // namespace ibtree
