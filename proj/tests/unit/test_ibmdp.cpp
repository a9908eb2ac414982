#include "doctest.h"
#include "ibtree/errors.hpp"
#include "ibtree/ibmdp.hpp"

using namespace ibtree;

TEST_SUITE("ibmdp") {

TEST_CASE("project_value") {
  CHECK(project_value(0.5, 0.0, 1.0) == 0.5);
  CHECK(project_value(0.25, 0.2, 0.6) == doctest::Approx(0.3));
  CHECK(project_value(2.0 / 3.0, 0.5, 0.8) == doctest::Approx(0.7));
  CHECK_THROWS_AS(project_value(0.5, 0.4, 0.4), InvariantViolation);
  CHECK_THROWS_AS(project_value(1.0, 0.0, 1.0), InvalidInput);
}

TEST_CASE("action encoding is base-first then feature-major") {
  CartPole env;
  IbmdpConfig cfg;
  cfg.p = 3;
  Ibmdp ib(env, cfg);
  CHECK(ib.n_actions() == 2 + 4 * 3);
  CHECK(ib.encode(WrappedAction::base_action(1)) == 1);
  CHECK(ib.encode(WrappedAction::split(0, 1)) == 2);
  CHECK(ib.encode(WrappedAction::split(2, 3)) == 2 + 2 * 3 + 2);
  for (std::size_t i = 0; i < ib.n_actions(); ++i) CHECK(ib.encode(ib.decode(i)) == i);
  CHECK(ib.split_value(1) == 0.25);
  CHECK_THROWS_AS(ib.decode(ib.n_actions()), InvalidInput);
  CHECK_THROWS_AS(ib.encode(WrappedAction::split(4, 1)), InvalidInput);
  CHECK_THROWS_AS(ib.encode(WrappedAction::split(0, 0)), InvalidInput);
  CHECK_THROWS_AS(ib.encode(WrappedAction::split(0, 4)), InvalidInput);
  CHECK_THROWS_AS(ib.encode(WrappedAction::base_action(2)), InvalidInput);
}

TEST_CASE("reset gives root bounds") {
  Rng rng(1);
  PotholeWorld pot;
  Ibmdp a(pot, {});
  const WrappedState s = a.reset(rng);
  CHECK(s.base.features == std::vector<double>{0.0});
  CHECK(s.lower == std::vector<double>{0.0});
  CHECK(s.upper == std::vector<double>{1.0});
  CHECK(s.is_root());

  PrereqWorld pw(PrereqSpec::standard(4));
  Ibmdp b(pw, {});
  const WrappedState t = b.reset(rng);
  CHECK(t.base.features == std::vector<double>(4, 0.0));
  CHECK(t.lower == std::vector<double>(4, 0.0));
  CHECK(t.upper == std::vector<double>(4, 1.0));
  CHECK(t.is_root());
}

TEST_CASE("split transitions") {
  PotholeWorld pot;
  IbmdpConfig cfg;
  cfg.zeta = -0.01;
  Ibmdp ib(pot, cfg);
  Rng rng(2);
  WrappedState s;
  s.base = pot.make_state({15.0});  // normalized 0.3
  s.lower = {0.0};
  s.upper = {1.0};

  const WrappedStep first = ib.step(s, WrappedAction::split(0, 1), rng);
  CHECK(first.next.lower == std::vector<double>{0.0});
  CHECK(first.next.upper == std::vector<double>{0.5});
  CHECK(first.reward == -0.01);
  CHECK_FALSE(first.terminal);
  CHECK(first.next.base.features == s.base.features);
  CHECK(first.next.splits_since_base == 1);

  const WrappedStep second = ib.step(first.next, WrappedAction::split(0, 1), rng);
  CHECK(second.next.lower[0] == doctest::Approx(0.25));
  CHECK(second.next.upper[0] == 0.5);
  CHECK(second.next.splits_since_base == 2);

  SUBCASE("a feature equal to the projected value goes to the upper-bound branch") {
    WrappedState t = s;
    t.base = pot.make_state({25.0});
    const WrappedStep r = ib.step(t, WrappedAction::split(0, 1), rng);
    CHECK(r.next.upper[0] == 0.5);
    CHECK(r.next.lower[0] == 0.0);
  }
}

TEST_CASE("base transitions reset the bounds") {
  PrereqWorld pw(PrereqSpec::standard(10));
  Ibmdp ib(pw, {});
  Rng rng(3);
  WrappedState s = ib.reset(rng);
  s = ib.step(s, WrappedAction::split(3, 1), rng).next;
  REQUIRE_FALSE(s.is_root());
  const WrappedStep r = ib.step(s, WrappedAction::base_action(4), rng);
  CHECK(r.next.base.features[4] == 1.0);
  CHECK(r.next.is_root());
  CHECK(r.next.splits_since_base == 0);
  CHECK(r.reward == -1.0);
  CHECK_FALSE(r.terminal);
}

TEST_CASE("legal actions respect the depth limit") {
  PotholeWorld pot;
  IbmdpConfig cfg;
  cfg.p = 2;

  SUBCASE("no limit") {
    Ibmdp ib(pot, cfg);
    CHECK(ib.legal_actions(0).size() == 3 + 2);
    CHECK(ib.legal_actions(100).size() == 3 + 2);
  }
  SUBCASE("limit 2") {
    cfg.depth_limit = 2;
    Ibmdp ib(pot, cfg);
    CHECK(ib.legal_count(1) == 5);
    const auto legal = ib.legal_actions(2);
    REQUIRE(legal.size() == 3);
    for (const auto& a : legal) CHECK_FALSE(a.is_split());

    Rng rng(4);
    WrappedState s = ib.reset(rng);
    s = ib.step(s, WrappedAction::split(0, 1), rng).next;
    s = ib.step(s, WrappedAction::split(0, 1), rng).next;
    CHECK_THROWS_AS(ib.step(s, WrappedAction::split(0, 1), rng), InvalidInput);
  }
  SUBCASE("limit 0") {
    cfg.depth_limit = 0;
    Ibmdp ib(pot, cfg);
    CHECK(ib.legal_count(0) == 3);
  }
}

TEST_CASE("masking drops the base state") {
  PotholeWorld pot;
  Ibmdp ib(pot, {});
  Rng rng(5);
  WrappedState a = ib.reset(rng);
  WrappedState b = a;
  b.base = pot.make_state({40.0});
  CHECK(mask(a) == mask(b));
  CHECK(mask(a) == Observation::root(1));
  a.upper = {0.5};
  const Observation o = mask(a);
  CHECK(o.lower == std::vector<double>{0.0});
  CHECK(o.upper == std::vector<double>{0.5});

  std::vector<double> key;
  Ibmdp::full_key(a, key);
  CHECK(key.size() == ib.full_key_size());
  Ibmdp::observation_key(a, key);
  CHECK(key.size() == ib.observation_key_size());
}

TEST_CASE("config validation") {
  PotholeWorld pot;
  IbmdpConfig cfg;
  cfg.p = 0;
  CHECK_THROWS_AS(Ibmdp(pot, cfg), InvalidInput);
  cfg = {};
  cfg.zeta = 0.5;
  CHECK_THROWS_AS(Ibmdp(pot, cfg), InvalidInput);
  cfg = {};
  cfg.gamma_b = 0.0;
  CHECK_THROWS_AS(Ibmdp(pot, cfg), InvalidInput);
  cfg = {};
  cfg.gamma_w = 1.5;
  CHECK_THROWS_AS(Ibmdp(pot, cfg), InvalidInput);
}

}  // TEST_SUITE
