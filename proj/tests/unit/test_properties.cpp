#include "doctest.h"
#include "ibtree/env.hpp"
#include "invariants.hpp"

using namespace ibtree;

TEST_SUITE("properties") {

TEST_CASE("wrapped-transition invariants on every environment") {
  PrereqWorld prereq(PrereqSpec::standard(7));
  PotholeWorld pothole;
  CartPole cartpole;
  const Environment* envs[] = {&prereq, &pothole, &cartpole};

  Rng rng(71);
  for (const Environment* env : envs) {
    for (std::size_t p : {1U, 3U, 10U}) {
      for (std::optional<std::size_t> limit :
           {std::optional<std::size_t>{}, std::optional<std::size_t>{0},
            std::optional<std::size_t>{2}, std::optional<std::size_t>{5}}) {
        IbmdpConfig cfg;
        cfg.p = p;
        cfg.zeta = -0.03;
        cfg.depth_limit = limit;
        Ibmdp ib(*env, cfg);
        invariants::Report report;
        invariants::random_walk(ib, 3000, 0.25, rng, report);
        CAPTURE(env->name());
        CAPTURE(p);
        CAPTURE(limit.value_or(999));
        CHECK_MESSAGE(report.ok(), report.summary());
      }
    }
  }
}

TEST_CASE("serialization round trips") {
  Rng rng(72);
  invariants::Report report;
  invariants::round_trips(500, rng, report);
  CHECK_MESSAGE(report.ok(), report.summary());
}

}  // TEST_SUITE
