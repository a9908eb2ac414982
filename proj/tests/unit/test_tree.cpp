#include <map>
#include <random>

#include "doctest.h"
#include "ibtree/errors.hpp"
#include "ibtree/tree.hpp"

using namespace ibtree;

namespace {

MaskedPolicy constant_policy(std::size_t a) {
  return {[a](const Observation&, std::size_t) { return WrappedAction::base_action(a); },
          [a](const Observation&) { return a; }};
}

TreeNode complete_depth2() {
  return TreeNode::internal(
      0, 0.5, TreeNode::internal(1, 0.25, TreeNode::leaf(0), TreeNode::leaf(1)),
      TreeNode::internal(1, 0.75, TreeNode::leaf(2), TreeNode::leaf(3)));
}

TreeNode random_tree(Rng& rng, std::size_t depth, std::size_t n_features, std::size_t n_actions) {
  std::uniform_real_distribution<double> u(0.01, 0.99);
  if (depth == 0 || rng() % 3 == 0) return TreeNode::leaf(rng() % n_actions);
  return TreeNode::internal(rng() % n_features, u(rng),
                            random_tree(rng, depth - 1, n_features, n_actions),
                            random_tree(rng, depth - 1, n_features, n_actions));
}

// A deterministic pseudo-random policy over observations: the choice is a
// hash of the bounds, so equal observations always get equal answers.
MaskedPolicy hashed_policy(std::size_t n_base, std::size_t n_features, std::size_t p,
                           std::uint64_t salt) {
  auto pick = [=](const Observation& o) {
    std::uint64_t h = salt;
    for (double v : o.lower) h = h * 1000003U ^ std::hash<double>{}(v);
    for (double v : o.upper) h = h * 998244353U ^ std::hash<double>{}(v);
    return h;
  };
  MaskedPolicy pol;
  pol.act = [=](const Observation& o, std::size_t) {
    const std::uint64_t h = pick(o);
    if (h % 3 == 0) return WrappedAction::base_action((h / 3) % n_base);
    return WrappedAction::split((h / 7) % n_features, (h / 11) % p + 1);
  };
  pol.best_base_action = [=](const Observation& o) { return pick(o) % n_base; };
  return pol;
}

void check_thresholds_inside(const TreeNode& t, std::vector<double> lo, std::vector<double> hi) {
  if (t.is_leaf()) return;
  const std::size_t f = t.feature();
  CHECK(t.threshold() > lo[f]);
  CHECK(t.threshold() < hi[f]);
  auto hi_left = hi;
  hi_left[f] = t.threshold();
  auto lo_right = lo;
  lo_right[f] = t.threshold();
  check_thresholds_inside(t.left(), lo, hi_left);
  check_thresholds_inside(t.right(), lo_right, hi);
}

}  // namespace

TEST_SUITE("tree") {

TEST_CASE("extraction of a constant policy is a leaf") {
  const TreeNode t = extract_tree(constant_policy(2), 3, 1, 10);
  CHECK(t == TreeNode::leaf(2));
}

TEST_CASE("one split extracts an internal node") {
  MaskedPolicy pol;
  pol.act = [](const Observation& o, std::size_t) {
    if (o.is_root()) return WrappedAction::split(0, 1);
    return WrappedAction::base_action(o.upper[0] <= 0.5 ? 0 : 1);
  };
  pol.best_base_action = [](const Observation&) { return std::size_t{0}; };
  const TreeNode t = extract_tree(pol, 1, 1, 10);
  CHECK(t == TreeNode::internal(0, 0.5, TreeNode::leaf(0), TreeNode::leaf(1)));
  CHECK(tree_metrics(t).depth == 1);
}

TEST_CASE("nested splits project onto the current interval") {
  MaskedPolicy pol;
  pol.act = [](const Observation& o, std::size_t depth) {
    if (depth == 0) return WrappedAction::split(0, 1);
    if (depth == 1 && o.upper[0] == 0.5) return WrappedAction::split(0, 1);
    return WrappedAction::base_action(0);
  };
  pol.best_base_action = [](const Observation&) { return std::size_t{0}; };
  const TreeNode t = extract_tree(pol, 1, 1, 10);
  REQUIRE_FALSE(t.left().is_leaf());
  CHECK(t.left().threshold() == 0.25);
  CHECK(t.right().is_leaf());
}

TEST_CASE("depth cap forces the best base action") {
  MaskedPolicy pol;
  pol.act = [](const Observation&, std::size_t) { return WrappedAction::split(0, 1); };
  pol.best_base_action = [](const Observation& o) { return o.upper[0] <= 0.5 ? std::size_t{1} : 0; };
  const TreeNode t = extract_tree(pol, 1, 1, 3);
  const TreeMetrics m = tree_metrics(t);
  CHECK(m.depth == 3);
  CHECK(m.node_count == 15);
  CHECK(t.left().left().left().action() == 1);
  CHECK(t.right().right().right().action() == 0);

  CHECK(extract_tree(pol, 1, 1, 0) == TreeNode::leaf(0));
}

TEST_CASE("random policies respect the cap and keep thresholds inside their intervals") {
  for (std::uint64_t salt = 0; salt < 50; ++salt) {
    const TreeNode t = extract_tree(hashed_policy(3, 2, 3, salt), 2, 3, 6);
    CHECK(tree_metrics(t).depth <= 6);
    check_thresholds_inside(t, {0.0, 0.0}, {1.0, 1.0});
  }
}

TEST_CASE("tree_act") {
  CHECK(tree_act(TreeNode::leaf(1), std::vector<double>{0.3}) == 1);
  const TreeNode stump = TreeNode::internal(0, 0.5, TreeNode::leaf(0), TreeNode::leaf(1));
  CHECK(tree_act(stump, std::vector<double>{0.5}) == 0);
  CHECK(tree_act(stump, std::vector<double>{0.5000001}) == 1);

  SUBCASE("every region of a depth-2 tree by brute force") {
    const TreeNode t = complete_depth2();
    // Region (i, j): feature 0 on side i of 0.5, feature 1 on side j of the
    // second-level threshold. Sample a grid and compare with the region map.
    for (int a = 0; a <= 20; ++a) {
      for (int b = 0; b <= 20; ++b) {
        const double x = a / 20.0, y = b / 20.0;
        std::size_t expected;
        if (x <= 0.5) {
          expected = y <= 0.25 ? 0 : 1;
        } else {
          expected = y <= 0.75 ? 2 : 3;
        }
        CHECK(tree_act(t, std::vector<double>{x, y}) == expected);
      }
    }
  }
}

TEST_CASE("tree metrics") {
  CHECK(tree_metrics(TreeNode::leaf(0)).depth == 0);
  CHECK(tree_metrics(TreeNode::leaf(0)).node_count == 1);
  const TreeMetrics s =
      tree_metrics(TreeNode::internal(0, 0.5, TreeNode::leaf(0), TreeNode::leaf(1)));
  CHECK(s.depth == 1);
  CHECK(s.node_count == 3);
  const TreeMetrics c = tree_metrics(complete_depth2());
  CHECK(c.depth == 2);
  CHECK(c.node_count == 7);
}

TEST_CASE("serialization") {
  CHECK(tree_to_json(TreeNode::leaf(0)) == nlohmann::json{{"type", "leaf"}, {"action", 0}});
  const nlohmann::json j = tree_to_json(TreeNode::internal(1, 0.25, TreeNode::leaf(0), TreeNode::leaf(2)));
  CHECK(j["type"] == "internal");
  CHECK(j["feature"] == 1);
  CHECK(j["threshold"] == 0.25);
  CHECK(j["left"]["action"] == 0);
  CHECK(j["right"]["action"] == 2);

  SUBCASE("random round trips") {
    Rng rng(11);
    for (int i = 0; i < 200; ++i) {
      const TreeNode t = random_tree(rng, 6, 4, 3);
      CHECK(tree_deserialize(tree_serialize(t)) == t);
      CHECK(tree_deserialize(tree_serialize(t, 2)) == t);
    }
  }
  SUBCASE("malformed documents") {
    CHECK_THROWS_AS(tree_deserialize(R"({"type":"branch"})"), ParseError);
    CHECK_THROWS_AS(tree_deserialize(R"({"type":"leaf"})"), ParseError);
    CHECK_THROWS_AS(tree_deserialize(R"({"type":"leaf","action":-1})"), ParseError);
    CHECK_THROWS_AS(tree_deserialize("[1,2"), ParseError);
    try {
      tree_deserialize(R"({"type":"internal","feature":0,"threshold":0.5,"left":{"type":"leaf","action":0},"right":{"type":"oops"}})");
      FAIL("expected a parse error");
    } catch (const ParseError& e) {
      CHECK(e.location() == "/right/type");
    }
  }
}

TEST_CASE("validate_tree against an environment") {
  PotholeWorld pot;
  CHECK_NOTHROW(validate_tree(TreeNode::leaf(2), pot));
  CHECK_THROWS_AS(validate_tree(TreeNode::leaf(3), pot), InvalidInput);
  CHECK_THROWS_AS(
      validate_tree(TreeNode::internal(1, 0.5, TreeNode::leaf(0), TreeNode::leaf(1)), pot),
      InvalidInput);
}

TEST_CASE("describe_tree uses environment units") {
  PotholeWorld pot;
  const std::string text =
      describe_tree(TreeNode::internal(0, 0.5, TreeNode::leaf(0), TreeNode::leaf(2)), pot);
  CHECK(text.find("position <= 25") != std::string::npos);
  CHECK(text.find("lane_1") != std::string::npos);
  CHECK(text.find("lane_3") != std::string::npos);
}

}  // TEST_SUITE
