#pragma once

// Episodic-control value memory: one nearest-neighbour store per action.
// Estimates return the stored value for a matching key and otherwise the
// mean of the k nearest stored values; updates move a matching entry toward
// the target or insert the target as a new entry.

#include <cstddef>
#include <span>
#include <vector>

#include "ibtree/knn.hpp"
#include "json.hpp"

namespace ibtree {

class QMemory {
 public:
  // Squared distance at or below which two keys count as the same key.
  static constexpr double kExactTolerance = 1e-9;
  static constexpr std::size_t kDefaultCapacity = 1'000'000;

  QMemory(std::size_t n_actions, std::size_t key_dim, std::size_t k,
          std::size_t capacity = kDefaultCapacity);

  std::size_t n_actions() const noexcept { return stores_.size(); }
  std::size_t key_dim() const noexcept { return key_dim_; }
  std::size_t k() const noexcept { return k_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size(std::size_t action) const { return stores_.at(action).size(); }

  // 0 when nothing is stored for the action.
  double estimate(std::span<const double> key, std::size_t action) const;

  // Estimates for actions [0, count), hashing the key once.
  void estimates(std::span<const double> key, std::size_t count, std::vector<double>& out) const;

  void update(std::span<const double> key, std::size_t action, double target, double alpha);

  nlohmann::json to_json() const;
  static QMemory from_json(const nlohmann::json& doc);

 private:
  double estimate_hashed(std::span<const double> key, std::uint64_t hash,
                         std::size_t action) const;
  void check_key(std::span<const double> key) const;

  std::size_t key_dim_;
  std::size_t k_;
  std::size_t capacity_;
  std::vector<NeighborStore> stores_;
  mutable std::vector<Neighbor> scratch_;
};

}  // namespace ibtree
