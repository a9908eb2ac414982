#include <random>

#include "doctest.h"
#include "ibtree/errors.hpp"
#include "ibtree/qmemory.hpp"

using namespace ibtree;

TEST_SUITE("qmemory") {

TEST_CASE("estimates") {
  QMemory q(2, 2, 3);
  const std::vector<double> x = {0.2, 0.4};
  CHECK(q.estimate(x, 0) == 0.0);

  q.update(x, 0, 5.0, 0.1);
  CHECK(q.estimate(x, 0) == 5.0);
  CHECK(q.estimate(x, 1) == 0.0);
  CHECK(q.size(0) == 1);

  SUBCASE("mean of k equidistant neighbours") {
    QMemory m(1, 2, 3);
    m.update(std::vector<double>{1.0, 0.0}, 0, 2.0, 1.0);
    m.update(std::vector<double>{-1.0, 0.0}, 0, 4.0, 1.0);
    m.update(std::vector<double>{0.0, 1.0}, 0, 6.0, 1.0);
    CHECK(m.estimate(std::vector<double>{0.0, 0.0}, 0) == doctest::Approx(4.0));
  }
  SUBCASE("fewer entries than k averages what is there") {
    QMemory m(1, 1, 9);
    m.update(std::vector<double>{0.0}, 0, 1.0, 1.0);
    m.update(std::vector<double>{1.0}, 0, 3.0, 1.0);
    CHECK(m.estimate(std::vector<double>{0.4}, 0) == doctest::Approx(2.0));
  }
  SUBCASE("only the k nearest count") {
    QMemory m(1, 1, 2);
    m.update(std::vector<double>{0.0}, 0, 1.0, 1.0);
    m.update(std::vector<double>{0.1}, 0, 3.0, 1.0);
    m.update(std::vector<double>{0.9}, 0, 100.0, 1.0);
    CHECK(m.estimate(std::vector<double>{0.05}, 0) == doctest::Approx(2.0));
  }
}

TEST_CASE("updates") {
  QMemory q(1, 1, 1);
  const std::vector<double> x = {0.5};
  q.update(x, 0, 2.0, 1.0);
  q.update(x, 0, 4.0, 0.5);
  CHECK(q.estimate(x, 0) == 3.0);
  q.update(x, 0, 7.0, 1.0);
  CHECK(q.estimate(x, 0) == 7.0);
  CHECK(q.size(0) == 1);

  q.update(std::vector<double>{0.25}, 0, 7.0, 0.3);
  CHECK(q.size(0) == 2);
  CHECK(q.estimate(std::vector<double>{0.25}, 0) == 7.0);

  SUBCASE("keys within the exact tolerance are the same key") {
    q.update(std::vector<double>{0.5 + 1e-6}, 0, 9.0, 0.5);
    CHECK(q.size(0) == 2);
    CHECK(q.estimate(x, 0) == 8.0);
  }
  SUBCASE("bad arguments") {
    CHECK_THROWS_AS(q.update(x, 0, 1.0, 0.0), InvalidInput);
    CHECK_THROWS_AS(q.update(x, 0, 1.0, 1.5), InvalidInput);
    CHECK_THROWS_AS(q.update(x, 1, 1.0, 0.5), InvalidInput);
    CHECK_THROWS_AS(q.estimate(std::vector<double>{0.5, 0.5}, 0), InvalidInput);
    CHECK_THROWS_AS(QMemory(1, 1, 0), InvalidInput);
  }
}

TEST_CASE("capacity evicts the oldest entry") {
  QMemory q(1, 1, 1, 2);
  q.update(std::vector<double>{0.1}, 0, 1.0, 1.0);
  q.update(std::vector<double>{0.2}, 0, 2.0, 1.0);
  q.update(std::vector<double>{0.3}, 0, 3.0, 1.0);
  CHECK(q.size(0) == 2);
  // 0.1 is gone, so its nearest neighbour is now 0.2
  CHECK(q.estimate(std::vector<double>{0.1}, 0) == 2.0);
}

TEST_CASE("batch estimates match single estimates") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QMemory q(4, 3, 5);
  for (int i = 0; i < 500; ++i) {
    const std::vector<double> key = {u(rng), u(rng), u(rng)};
    q.update(key, rng() % 4, u(rng) * 10.0 - 5.0, 0.5);
  }
  std::vector<double> batch;
  for (int i = 0; i < 100; ++i) {
    const std::vector<double> key = {u(rng), u(rng), u(rng)};
    q.estimates(key, 4, batch);
    for (std::size_t a = 0; a < 4; ++a) CHECK(batch[a] == q.estimate(key, a));
  }
}

TEST_CASE("json round trip preserves every estimate") {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  QMemory q(3, 2, 4, 1000);
  for (int i = 0; i < 300; ++i) {
    const std::vector<double> key = {std::round(u(rng) * 8) / 8, std::round(u(rng) * 8) / 8};
    q.update(key, rng() % 3, u(rng), 0.3);
  }
  const QMemory back = QMemory::from_json(nlohmann::json::parse(q.to_json().dump()));
  CHECK(back.k() == 4);
  CHECK(back.capacity() == 1000);
  for (std::size_t a = 0; a < 3; ++a) CHECK(back.size(a) == q.size(a));
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> key = {u(rng), u(rng)};
    for (std::size_t a = 0; a < 3; ++a) CHECK(back.estimate(key, a) == q.estimate(key, a));
  }
  CHECK_THROWS_AS(QMemory::from_json(nlohmann::json::parse(R"({"actions":[]})")), ParseError);
}

}  // TEST_SUITE
