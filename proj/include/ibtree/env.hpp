#pragma once

// Factored base MDPs. Every environment is stateless: episode state lives in
// BaseState values, randomness comes from an injected Rng.

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace ibtree {

using Rng = std::mt19937_64;

struct BaseState {
  std::vector<double> features;  // normalized, each in [0,1]
  std::vector<double> raw;       // environment units, drives the dynamics
  std::size_t steps = 0;         // base steps taken so far this episode
};

struct EnvSpec {
  std::size_t n_features = 0;
  std::size_t n_base_actions = 0;
  std::vector<double> feature_lower_bounds;
  std::vector<double> feature_upper_bounds;
  std::size_t max_episode_steps = 0;
};

struct StepResult {
  BaseState next_state;
  double reward = 0.0;
  bool terminal = false;
  // Episode hit max_episode_steps without a terminal transition.
  bool truncated = false;
};

class Environment {
 public:
  explicit Environment(EnvSpec spec);
  virtual ~Environment() = default;

  Environment(const Environment&) = delete;
  Environment& operator=(const Environment&) = delete;

  const EnvSpec& spec() const noexcept { return spec_; }
  std::size_t n_features() const noexcept { return spec_.n_features; }
  std::size_t n_base_actions() const noexcept { return spec_.n_base_actions; }

  virtual std::string_view name() const = 0;
  virtual std::vector<std::string> feature_names() const;
  virtual std::vector<std::string> action_names() const;

  virtual BaseState reset(Rng& rng) const = 0;

  // Rejects out-of-range actions with InvalidInput. Marks the result truncated
  // when a non-terminal transition reaches max_episode_steps.
  StepResult step(const BaseState& state, std::size_t action, Rng& rng) const;

  // Clamp to the EnvSpec bounds, then map linearly onto [0,1].
  std::vector<double> normalize(std::span<const double> raw) const;
  std::vector<double> denormalize(std::span<const double> features) const;
  double denormalize_feature(std::size_t feature, double value) const;

  BaseState make_state(std::vector<double> raw, std::size_t steps = 0) const;

 protected:
  virtual StepResult transition(const BaseState& state, std::size_t action,
                                Rng& rng) const = 0;

 private:
  EnvSpec spec_;
};

// ---------------------------------------------------------------------------
// PrereqWorld

struct PrereqSpec {
  std::size_t m = 10;
  std::vector<std::vector<std::size_t>> prerequisites;
  std::size_t goal_item = 0;

  // The fixed 10-item prerequisite table, reduced to the first m items by
  // dropping higher-numbered items from every list.
  static PrereqSpec standard(std::size_t m);
  void validate() const;
};

class PrereqWorld final : public Environment {
 public:
  explicit PrereqWorld(PrereqSpec spec);

  std::string_view name() const override { return "prereqworld"; }
  std::vector<std::string> feature_names() const override;
  std::vector<std::string> action_names() const override;

  // All items absent.
  BaseState reset(Rng& rng) const override;

  const PrereqSpec& prereq_spec() const noexcept { return prereq_; }

  // Bitmask encoding used to enumerate the state space (bit i = item i).
  std::uint64_t encode(const BaseState& state) const;
  BaseState decode(std::uint64_t bits) const;

 protected:
  StepResult transition(const BaseState& state, std::size_t action,
                        Rng& rng) const override;

 private:
  PrereqSpec prereq_;
};

// ---------------------------------------------------------------------------
// PotholeWorld

struct PotholeSpec {
  double road_length = 50.0;
  std::vector<double> lane2_potholes;
  std::vector<double> lane3_potholes;
  double lane1_discount = 0.9;
  double pothole_penalty = 5.0;
  double advance_low = 0.5;
  double advance_high = 1.0;

  static PotholeSpec standard();
  void validate() const;
  // Potholes of a lane (0-based: 0 = lane_1, which has none).
  std::span<const double> potholes(std::size_t lane) const;
};

class PotholeWorld final : public Environment {
 public:
  explicit PotholeWorld(PotholeSpec spec = PotholeSpec::standard());

  std::string_view name() const override { return "potholeworld"; }
  std::vector<std::string> feature_names() const override { return {"position"}; }
  std::vector<std::string> action_names() const override {
    return {"lane_1", "lane_2", "lane_3"};
  }

  // Position 0.
  BaseState reset(Rng& rng) const override;

  // Deterministic core of step(): advance by the given draw.
  StepResult advance(const BaseState& state, std::size_t lane, double distance) const;

  const PotholeSpec& pothole_spec() const noexcept { return pothole_; }

 protected:
  StepResult transition(const BaseState& state, std::size_t action,
                        Rng& rng) const override;

 private:
  PotholeSpec pothole_;
};

// ---------------------------------------------------------------------------
// CartPole (Euler-integrated, classic control constants)

class CartPole final : public Environment {
 public:
  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kHalfLength = 0.5;
  static constexpr double kForce = 10.0;
  static constexpr double kTau = 0.02;
  static constexpr double kPositionLimit = 2.4;
  static constexpr double kAngleLimitDegrees = 15.0;
  static constexpr std::size_t kMaxSteps = 200;

  CartPole();

  std::string_view name() const override { return "cartpole"; }
  std::vector<std::string> feature_names() const override {
    return {"cart_position", "cart_velocity", "pole_angle", "pole_angular_velocity"};
  }
  std::vector<std::string> action_names() const override { return {"left", "right"}; }

  BaseState reset(Rng& rng) const override;

 protected:
  StepResult transition(const BaseState& state, std::size_t action,
                        Rng& rng) const override;
};

// ---------------------------------------------------------------------------
// Small explicit MDP with given feature vectors. Used for micro instances
// where the optimum is known in closed form.

struct TabularOutcome {
  std::size_t next = 0;
  double probability = 1.0;
  double reward = 0.0;
  bool terminal = false;
};

class TabularWorld final : public Environment {
 public:
  // features[s] must already be normalized. outcomes[s * n_actions + a].
  TabularWorld(std::vector<std::vector<double>> features, std::size_t n_actions,
               std::vector<std::vector<TabularOutcome>> outcomes, std::size_t start,
               std::size_t max_episode_steps = 100);

  std::string_view name() const override { return "tabular"; }
  BaseState reset(Rng& rng) const override;

  std::size_t n_states() const noexcept { return features_.size(); }
  std::size_t start() const noexcept { return start_; }
  const std::vector<double>& state_features(std::size_t s) const { return features_[s]; }
  const std::vector<TabularOutcome>& outcomes(std::size_t s, std::size_t a) const;
  std::size_t state_index(const BaseState& state) const;

 protected:
  StepResult transition(const BaseState& state, std::size_t action,
                        Rng& rng) const override;

 private:
  std::vector<std::vector<double>> features_;
  std::vector<std::vector<TabularOutcome>> outcomes_;
  std::size_t start_;
};

}  // namespace ibtree
