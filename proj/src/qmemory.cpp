#include "ibtree/qmemory.hpp"

#include <string>

#include "ibtree/errors.hpp"

namespace ibtree {

QMemory::QMemory(std::size_t n_actions, std::size_t key_dim, std::size_t k, std::size_t capacity)
    : key_dim_(key_dim), k_(k), capacity_(capacity) {
  if (n_actions == 0) throw InvalidInput("memory needs at least one action");
  if (k_ == 0) throw InvalidInput("k must be at least 1");
  stores_.reserve(n_actions);
  for (std::size_t a = 0; a < n_actions; ++a) stores_.emplace_back(key_dim, capacity);
}

void QMemory::check_key(std::span<const double> key) const {
  if (key.size() != key_dim_) {
    throw InvalidInput("key has " + std::to_string(key.size()) + " entries, memory expects " +
                       std::to_string(key_dim_));
  }
}

double QMemory::estimate_hashed(std::span<const double> key, std::uint64_t hash,
                                std::size_t action) const {
  const NeighborStore& store = stores_[action];
  if (store.empty()) return 0.0;
  if (auto id = store.find_identical(key, hash)) return store.value(*id);

  store.nearest(key, k_, scratch_);
  if (scratch_.front().distance_sq <= kExactTolerance) return store.value(scratch_.front().id);
  double sum = 0.0;
  for (const auto& n : scratch_) sum += store.value(n.id);
  return sum / static_cast<double>(scratch_.size());
}

double QMemory::estimate(std::span<const double> key, std::size_t action) const {
  check_key(key);
  if (action >= stores_.size()) throw InvalidInput("action out of range");
  return estimate_hashed(key, NeighborStore::hash_key(key), action);
}

void QMemory::estimates(std::span<const double> key, std::size_t count,
                        std::vector<double>& out) const {
  check_key(key);
  if (count > stores_.size()) throw InvalidInput("action count out of range");
  const std::uint64_t hash = NeighborStore::hash_key(key);
  out.resize(count);
  for (std::size_t a = 0; a < count; ++a) out[a] = estimate_hashed(key, hash, a);
}

void QMemory::update(std::span<const double> key, std::size_t action, double target,
                     double alpha) {
  check_key(key);
  if (action >= stores_.size()) throw InvalidInput("action out of range");
  if (!(alpha > 0.0 && alpha <= 1.0)) throw InvalidInput("learning rate must be in (0,1]");
  NeighborStore& store = stores_[action];
  const std::uint64_t hash = NeighborStore::hash_key(key);

  std::optional<std::uint64_t> match = store.find_identical(key, hash);
  if (!match && !store.empty()) match = store.nearest_within(key, kExactTolerance);
  if (match) {
    const double v = store.value(*match);
    store.set_value(*match, v + alpha * (target - v));
  } else {
    store.insert(key, target, hash);
  }
}

nlohmann::json QMemory::to_json() const {
  nlohmann::json actions = nlohmann::json::array();
  for (const auto& store : stores_) {
    nlohmann::json entries = nlohmann::json::array();
    for (std::uint64_t id = store.first_id(); id < store.end_id(); ++id) {
      const auto key = store.key(id);
      entries.push_back({{"key", std::vector<double>(key.begin(), key.end())},
                         {"value", store.value(id)}});
    }
    actions.push_back(std::move(entries));
  }
  return {{"key_dim", key_dim_}, {"k", k_}, {"capacity", capacity_}, {"actions", std::move(actions)}};
}

QMemory QMemory::from_json(const nlohmann::json& doc) {
  try {
    const auto& actions = doc.at("actions");
    QMemory q(actions.size(), doc.at("key_dim").get<std::size_t>(), doc.at("k").get<std::size_t>(),
              doc.at("capacity").get<std::size_t>());
    for (std::size_t a = 0; a < actions.size(); ++a) {
      for (const auto& e : actions[a]) {
        const auto key = e.at("key").get<std::vector<double>>();
        q.check_key(key);
        q.stores_[a].insert(key, e.at("value").get<double>(), NeighborStore::hash_key(key));
      }
    }
    return q;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError("", std::string("malformed value memory: ") + e.what());
  }
}

}  // namespace ibtree
