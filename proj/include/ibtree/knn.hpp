#pragma once

// Append-only key/value store with oldest-first eviction and exact k-nearest
// neighbour queries (squared Euclidean). Keys live in a forest of static
// kd-trees merged like a binary counter, so inserts stay cheap while queries
// remain logarithmic.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace ibtree {

struct Neighbor {
  double distance_sq = 0.0;
  std::uint64_t id = 0;
};

class NeighborStore {
 public:
  NeighborStore(std::size_t dim, std::size_t capacity);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t capacity() const noexcept { return capacity_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(next_id_ - first_live_); }
  bool empty() const noexcept { return size() == 0; }

  static std::uint64_t hash_key(std::span<const double> key);

  // Live entry whose key is bit-identical to `key` (after -0 == +0).
  std::optional<std::uint64_t> find_identical(std::span<const double> key,
                                              std::uint64_t hash) const;

  // The min(k, size()) nearest live entries, nearest first. Among equally
  // distant entries the one found first wins.
  void nearest(std::span<const double> key, std::size_t k, std::vector<Neighbor>& out) const;

  // Nearest live entry at squared distance <= radius_sq, if any. Same answer
  // as nearest(key, 1) filtered by the radius, but prunes by the radius.
  std::optional<std::uint64_t> nearest_within(std::span<const double> key, double radius_sq) const;

  // Evicts the oldest entry when full. Returns the new entry's id.
  std::uint64_t insert(std::span<const double> key, double value, std::uint64_t hash);

  double value(std::uint64_t id) const { return values_[slot(id)]; }
  void set_value(std::uint64_t id, double v) { values_[slot(id)] = v; }
  std::span<const double> key(std::uint64_t id) const {
    return {keys_.data() + slot(id) * dim_, dim_};
  }

  // Live ids are [first_id(), end_id()), oldest first.
  std::uint64_t first_id() const noexcept { return first_live_; }
  std::uint64_t end_id() const noexcept { return next_id_; }

 private:
  struct KdNode {
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint32_t dim = 0;
    // Keys along `dim` are <= left_max on the left and >= right_min on the
    // right, with left_max < right_min, so lattice-valued keys still prune.
    double left_max = 0.0;
    double right_min = 0.0;
  };
  struct KdTree {
    std::vector<std::uint64_t> ids;
    std::vector<KdNode> nodes;
  };

  std::size_t slot(std::uint64_t id) const { return static_cast<std::size_t>(id - base_id_); }
  bool live(std::uint64_t id) const noexcept { return id >= first_live_; }
  double distance_sq(std::span<const double> q, std::uint64_t id, double bound) const;

  void evict_oldest();
  void flush_pending();
  void rebuild_all();
  void compact_storage();
  void build(KdTree& tree);
  std::int32_t build_node(KdTree& tree, std::uint32_t begin, std::uint32_t end);
  // `rd` is the squared distance from q to the node's cell, accumulated from
  // the per-dimension offsets in `offsets`.
  void search(const KdTree& tree, std::int32_t node, std::span<const double> q, std::size_t k,
              std::vector<Neighbor>& out, double rd, std::vector<double>& offsets,
              double limit) const;
  void collect(std::span<const double> key, std::size_t k, std::vector<Neighbor>& out,
               double limit) const;
  static void offer(std::vector<Neighbor>& out, std::size_t k, Neighbor n);

  std::size_t dim_;
  std::size_t capacity_;

  std::vector<double> keys_;
  std::vector<double> values_;
  std::uint64_t base_id_ = 0;     // id stored in slot 0
  std::uint64_t first_live_ = 0;  // ids below this are evicted
  std::uint64_t next_id_ = 0;

  // hash -> most recent id with that hash; only an accelerator, collisions
  // are resolved by comparing keys
  std::unordered_map<std::uint64_t, std::uint64_t> identity_;

  std::vector<KdTree> levels_;  // level i holds at most kBucket << i ids
  std::vector<std::uint64_t> pending_;
  std::size_t indexed_ = 0;  // ids held by levels_ and pending_, dead ones included
};

}  // namespace ibtree
