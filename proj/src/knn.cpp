#include "ibtree/knn.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>

#include "ibtree/errors.hpp"

namespace ibtree {

namespace {

constexpr std::size_t kBucket = 32;   // pending ids scanned linearly
constexpr std::uint32_t kLeafSize = 8;
constexpr std::uint32_t kSpreadSample = 32;

std::uint64_t mix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

}  // namespace

NeighborStore::NeighborStore(std::size_t dim, std::size_t capacity)
    : dim_(dim), capacity_(capacity) {
  if (dim_ == 0) throw InvalidInput("key dimension must be positive");
  if (capacity_ == 0) throw InvalidInput("memory capacity must be positive");
}

std::uint64_t NeighborStore::hash_key(std::span<const double> key) {
  std::uint64_t h = 0x9e3779b97f4a7c15ULL ^ key.size();
  for (double v : key) {
    if (v == 0.0) v = 0.0;  // fold -0 onto +0
    h = mix(h ^ std::bit_cast<std::uint64_t>(v)) + 0x9e3779b97f4a7c15ULL;
  }
  return h;
}

std::optional<std::uint64_t> NeighborStore::find_identical(std::span<const double> key,
                                                           std::uint64_t hash) const {
  const auto it = identity_.find(hash);
  if (it == identity_.end() || !live(it->second)) return std::nullopt;
  const auto stored = this->key(it->second);
  for (std::size_t i = 0; i < dim_; ++i) {
    if (stored[i] != key[i]) return std::nullopt;
  }
  return it->second;
}

double NeighborStore::distance_sq(std::span<const double> q, std::uint64_t id,
                                  double bound) const {
  const double* k = keys_.data() + slot(id) * dim_;
  double d = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double diff = q[i] - k[i];
    d += diff * diff;
    if (d > bound) break;
  }
  return d;
}

void NeighborStore::offer(std::vector<Neighbor>& out, std::size_t k, Neighbor n) {
  if (out.size() == k) {
    if (!(n.distance_sq < out.back().distance_sq)) return;
    out.pop_back();
  }
  auto pos = std::upper_bound(out.begin(), out.end(), n.distance_sq,
                              [](double d, const Neighbor& e) { return d < e.distance_sq; });
  out.insert(pos, n);
}

void NeighborStore::nearest(std::span<const double> key, std::size_t k,
                            std::vector<Neighbor>& out) const {
  collect(key, k, out, std::numeric_limits<double>::infinity());
}

std::optional<std::uint64_t> NeighborStore::nearest_within(std::span<const double> key,
                                                           double radius_sq) const {
  thread_local std::vector<Neighbor> out;
  collect(key, 1, out, radius_sq);
  if (out.empty()) return std::nullopt;
  return out.front().id;
}

void NeighborStore::collect(std::span<const double> key, std::size_t k, std::vector<Neighbor>& out,
                            double limit) const {
  out.clear();
  if (k == 0 || empty()) return;
  if (key.size() != dim_) throw InvalidInput("query key has wrong dimension");

  for (std::uint64_t id : pending_) {
    if (!live(id)) continue;
    const double bound = out.size() == k ? out.back().distance_sq : limit;
    const double d = distance_sq(key, id, bound);
    if (d <= limit) offer(out, k, {d, id});
  }
  thread_local std::vector<double> offsets;
  for (const auto& tree : levels_) {
    if (tree.ids.empty()) continue;
    offsets.assign(dim_, 0.0);
    search(tree, 0, key, k, out, 0.0, offsets, limit);
  }
}

void NeighborStore::search(const KdTree& tree, std::int32_t node_index, std::span<const double> q,
                           std::size_t k, std::vector<Neighbor>& out, double rd,
                           std::vector<double>& offsets, double limit) const {
  const KdNode& node = tree.nodes[static_cast<std::size_t>(node_index)];
  if (node.left < 0) {
    for (std::uint32_t i = node.begin; i < node.end; ++i) {
      const std::uint64_t id = tree.ids[i];
      if (!live(id)) continue;
      const double bound = out.size() == k ? out.back().distance_sq : limit;
      const double d = distance_sq(q, id, bound);
      if (d <= bound) offer(out, k, {d, id});
    }
    return;
  }
  const double x = q[node.dim];
  const bool go_left = x - node.left_max <= node.right_min - x;
  const std::int32_t near = go_left ? node.left : node.right;
  const std::int32_t far = go_left ? node.right : node.left;
  const double diff = go_left ? node.right_min - x : x - node.left_max;
  search(tree, near, q, k, out, rd, offsets, limit);

  // Incremental cell distance: only this node's dimension changes its offset.
  // A cell no closer than the current k-th neighbor cannot improve the set,
  // since ties never displace an accepted neighbor.
  const double old = offsets[node.dim];
  const double far_rd = rd - old * old + diff * diff;
  if (far_rd <= limit && (out.size() < k || far_rd < out.back().distance_sq)) {
    offsets[node.dim] = diff;
    search(tree, far, q, k, out, far_rd, offsets, limit);
    offsets[node.dim] = old;
  }
}

std::uint64_t NeighborStore::insert(std::span<const double> key, double value,
                                    std::uint64_t hash) {
  if (key.size() != dim_) throw InvalidInput("inserted key has wrong dimension");
  if (size() >= capacity_) evict_oldest();

  const std::uint64_t id = next_id_++;
  keys_.insert(keys_.end(), key.begin(), key.end());
  values_.push_back(value);
  identity_[hash] = id;
  pending_.push_back(id);
  ++indexed_;

  if (pending_.size() >= kBucket) flush_pending();
  if (indexed_ > 2 * size() + kBucket) rebuild_all();
  return id;
}

void NeighborStore::evict_oldest() {
  const std::uint64_t id = first_live_;
  const auto it = identity_.find(hash_key(key(id)));
  if (it != identity_.end() && it->second == id) identity_.erase(it);
  ++first_live_;
  compact_storage();
}

void NeighborStore::compact_storage() {
  const std::size_t dead = static_cast<std::size_t>(first_live_ - base_id_);
  if (dead < 4096 || dead < size()) return;
  keys_.erase(keys_.begin(), keys_.begin() + static_cast<std::ptrdiff_t>(dead * dim_));
  values_.erase(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(dead));
  base_id_ = first_live_;
}

void NeighborStore::flush_pending() {
  std::vector<std::uint64_t> gathered;
  for (std::uint64_t id : pending_) {
    if (live(id)) gathered.push_back(id);
  }
  pending_.clear();
  for (std::size_t level = 0;; ++level) {
    if (level == levels_.size()) levels_.emplace_back();
    KdTree& tree = levels_[level];
    if (tree.ids.empty()) {
      tree.ids = std::move(gathered);
      build(tree);
      break;
    }
    for (std::uint64_t id : tree.ids) {
      if (live(id)) gathered.push_back(id);
    }
    tree.ids.clear();
    tree.nodes.clear();
  }
  indexed_ = 0;
  for (const auto& t : levels_) indexed_ += t.ids.size();
}

void NeighborStore::rebuild_all() {
  std::vector<std::uint64_t> gathered;
  for (std::uint64_t id : pending_) {
    if (live(id)) gathered.push_back(id);
  }
  pending_.clear();
  for (auto& tree : levels_) {
    for (std::uint64_t id : tree.ids) {
      if (live(id)) gathered.push_back(id);
    }
    tree.ids.clear();
    tree.nodes.clear();
  }
  std::size_t level = 0;
  while ((kBucket << level) < gathered.size()) ++level;
  if (levels_.size() <= level) levels_.resize(level + 1);
  levels_[level].ids = std::move(gathered);
  build(levels_[level]);
  indexed_ = levels_[level].ids.size();
}

void NeighborStore::build(KdTree& tree) {
  tree.nodes.clear();
  if (tree.ids.empty()) return;
  build_node(tree, 0, static_cast<std::uint32_t>(tree.ids.size()));
}

std::int32_t NeighborStore::build_node(KdTree& tree, std::uint32_t begin, std::uint32_t end) {
  const auto index = static_cast<std::int32_t>(tree.nodes.size());
  tree.nodes.push_back({begin, end, -1, -1, 0, 0.0, 0.0});
  if (end - begin <= kLeafSize) return index;

  // split on the widest dimension of a strided sample
  const std::uint32_t stride = std::max<std::uint32_t>(1, (end - begin) / kSpreadSample);
  std::uint32_t best_dim = 0;
  double best_spread = 0.0;
  for (std::uint32_t d = 0; d < dim_; ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (std::uint32_t i = begin; i < end; i += stride) {
      const double v = keys_[slot(tree.ids[i]) * dim_ + d];
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    if (hi - lo > best_spread) {
      best_spread = hi - lo;
      best_dim = d;
    }
  }
  if (best_spread == 0.0) {
    // sample was constant; check the full range before giving up
    for (std::uint32_t d = 0; d < dim_ && best_spread == 0.0; ++d) {
      const double first = keys_[slot(tree.ids[begin]) * dim_ + d];
      for (std::uint32_t i = begin + 1; i < end; ++i) {
        if (keys_[slot(tree.ids[i]) * dim_ + d] != first) {
          best_spread = 1.0;
          best_dim = d;
          break;
        }
      }
    }
    if (best_spread == 0.0) return index;  // all keys identical
  }

  const std::uint32_t mid = begin + (end - begin) / 2;
  const auto key_at = [&](std::uint64_t id) { return keys_[slot(id) * dim_ + best_dim]; };
  std::nth_element(tree.ids.begin() + begin, tree.ids.begin() + mid, tree.ids.begin() + end,
                   [&](std::uint64_t a, std::uint64_t b) {
                     const double ka = key_at(a), kb = key_at(b);
                     return ka < kb || (ka == kb && a < b);
                   });
  // Partition by value so equal keys never straddle the split.
  const double pivot = key_at(tree.ids[mid]);
  auto first = tree.ids.begin() + begin;
  auto last = tree.ids.begin() + end;
  auto cut = std::partition(first, last, [&](std::uint64_t id) { return key_at(id) < pivot; });
  if (cut == first) cut = std::partition(first, last, [&](std::uint64_t id) { return key_at(id) <= pivot; });
  const auto split_at = static_cast<std::uint32_t>(cut - tree.ids.begin());

  double left_max = -std::numeric_limits<double>::infinity();
  double right_min = std::numeric_limits<double>::infinity();
  for (auto it = first; it != cut; ++it) left_max = std::max(left_max, key_at(*it));
  for (auto it = cut; it != last; ++it) right_min = std::min(right_min, key_at(*it));

  const std::int32_t left = build_node(tree, begin, split_at);
  const std::int32_t right = build_node(tree, split_at, end);
  KdNode& node = tree.nodes[static_cast<std::size_t>(index)];
  node.left = left;
  node.right = right;
  node.dim = best_dim;
  node.left_max = left_max;
  node.right_min = right_min;
  return index;
}

}  // namespace ibtree
