#pragma once

// Iterative Bounding MDP wrapper. A wrapped state pairs the base state with a
// lower/upper bound per feature; split actions tighten one bound, base
// actions act in the base MDP and reset the bounds to [0,1].

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "ibtree/env.hpp"

namespace ibtree {

struct IbmdpConfig {
  std::size_t p = 1;  // split values per feature
  double zeta = -0.01;
  double gamma_b = 1.0;
  double gamma_w = 1.0;
  std::optional<std::size_t> depth_limit;  // max consecutive splits
  std::size_t max_wrapped_steps = 1000;

  void validate() const;
};

struct WrappedAction {
  enum class Kind { Base, Split };

  Kind kind = Kind::Base;
  std::size_t base = 0;         // base action index, Kind::Base
  std::size_t feature = 0;      // Kind::Split
  std::size_t value_index = 0;  // Kind::Split, in [1, p]; v = j / (p + 1)

  static WrappedAction base_action(std::size_t a) { return {Kind::Base, a, 0, 0}; }
  static WrappedAction split(std::size_t feature, std::size_t value_index) {
    return {Kind::Split, 0, feature, value_index};
  }
  bool is_split() const noexcept { return kind == Kind::Split; }

  friend bool operator==(const WrappedAction&, const WrappedAction&) = default;
};

// The masked view of a wrapped state: bounds only.
struct Observation {
  std::vector<double> lower;
  std::vector<double> upper;

  static Observation root(std::size_t n_features);
  bool is_root() const;
  friend bool operator==(const Observation&, const Observation&) = default;
};

struct WrappedState {
  BaseState base;
  std::vector<double> lower;
  std::vector<double> upper;
  std::size_t splits_since_base = 0;

  bool is_root() const;
};

struct WrappedStep {
  WrappedState next;
  double reward = 0.0;
  bool terminal = false;
  bool truncated = false;
};

// v * (upper - lower) + lower, for v strictly inside (0,1).
double project_value(double v, double lower, double upper);

// Splits are legal iff there is no depth limit or fewer than depth_limit
// splits happened since the last base action.
bool splits_allowed(std::size_t splits_since_base, const IbmdpConfig& config);

class Ibmdp {
 public:
  Ibmdp(const Environment& env, IbmdpConfig config);

  const Environment& env() const noexcept { return *env_; }
  const IbmdpConfig& config() const noexcept { return config_; }

  std::size_t n_features() const noexcept { return env_->n_features(); }
  std::size_t n_base_actions() const noexcept { return env_->n_base_actions(); }
  std::size_t n_actions() const noexcept {
    return n_base_actions() + n_features() * config_.p;
  }
  double split_value(std::size_t value_index) const {
    return static_cast<double>(value_index) / static_cast<double>(config_.p + 1);
  }

  // Dense action encoding: base actions first, then feature-major splits.
  std::size_t encode(const WrappedAction& action) const;
  WrappedAction decode(std::size_t index) const;

  WrappedState reset(Rng& rng) const;
  WrappedStep step(const WrappedState& state, const WrappedAction& action, Rng& rng) const;

  // Legal actions form a prefix of the encoding: either the base actions or
  // every action.
  std::size_t legal_count(std::size_t splits_since_base) const;
  std::vector<WrappedAction> legal_actions(std::size_t splits_since_base) const;

  // Key layouts used by the value memories.
  std::size_t observation_key_size() const noexcept { return 2 * n_features(); }
  std::size_t full_key_size() const noexcept { return 3 * n_features(); }
  static void observation_key(const Observation& obs, std::vector<double>& out);
  static void observation_key(const WrappedState& state, std::vector<double>& out);
  static void full_key(const WrappedState& state, std::vector<double>& out);

 private:
  const Environment* env_;
  IbmdpConfig config_;
};

Observation mask(const WrappedState& state);

}  // namespace ibtree
