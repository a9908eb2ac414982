#include "ibtree/env.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "ibtree/errors.hpp"

namespace ibtree {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw InvalidInput(what);
}

}  // namespace

Environment::Environment(EnvSpec spec) : spec_(std::move(spec)) {
  require(spec_.n_features > 0, "environment needs at least one feature");
  require(spec_.n_base_actions > 0, "environment needs at least one action");
  require(spec_.feature_lower_bounds.size() == spec_.n_features &&
              spec_.feature_upper_bounds.size() == spec_.n_features,
          "feature bounds must have one entry per feature");
  for (std::size_t i = 0; i < spec_.n_features; ++i) {
    require(spec_.feature_lower_bounds[i] < spec_.feature_upper_bounds[i],
            "feature " + std::to_string(i) + ": lower bound must be below upper bound");
  }
  require(spec_.max_episode_steps > 0, "max_episode_steps must be positive");
}

std::vector<std::string> Environment::feature_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_features(); ++i) names.push_back("f" + std::to_string(i));
  return names;
}

std::vector<std::string> Environment::action_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < n_base_actions(); ++i) names.push_back("a" + std::to_string(i));
  return names;
}

StepResult Environment::step(const BaseState& state, std::size_t action, Rng& rng) const {
  if (action >= spec_.n_base_actions) {
    throw InvalidInput("base action " + std::to_string(action) + " out of range (" +
                       std::to_string(spec_.n_base_actions) + " actions)");
  }
  StepResult result = transition(state, action, rng);
  if (!result.terminal && result.next_state.steps >= spec_.max_episode_steps) {
    result.truncated = true;
  }
  return result;
}

std::vector<double> Environment::normalize(std::span<const double> raw) const {
  if (raw.size() != spec_.n_features) throw InvalidInput("raw state has wrong feature count");
  std::vector<double> out(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const double lo = spec_.feature_lower_bounds[i];
    const double hi = spec_.feature_upper_bounds[i];
    out[i] = (std::clamp(raw[i], lo, hi) - lo) / (hi - lo);
  }
  return out;
}

double Environment::denormalize_feature(std::size_t feature, double value) const {
  const double lo = spec_.feature_lower_bounds.at(feature);
  const double hi = spec_.feature_upper_bounds.at(feature);
  return lo + value * (hi - lo);
}

std::vector<double> Environment::denormalize(std::span<const double> features) const {
  if (features.size() != spec_.n_features) {
    throw InvalidInput("normalized state has wrong feature count");
  }
  std::vector<double> out(features.size());
  for (std::size_t i = 0; i < features.size(); ++i) out[i] = denormalize_feature(i, features[i]);
  return out;
}

BaseState Environment::make_state(std::vector<double> raw, std::size_t steps) const {
  BaseState s;
  s.features = normalize(raw);
  s.raw = std::move(raw);
  s.steps = steps;
  return s;
}

// ---------------------------------------------------------------------------
// PrereqWorld

PrereqSpec PrereqSpec::standard(std::size_t m) {
  static const std::vector<std::vector<std::size_t>> kFull = {
      {1, 2}, {5}, {4}, {6, 7}, {}, {7}, {7, 9}, {8}, {}, {}};
  require(m >= 1 && m <= kFull.size(), "PrereqWorld m must be in [1, 10]");
  PrereqSpec spec;
  spec.m = m;
  spec.goal_item = 0;
  for (std::size_t i = 0; i < m; ++i) {
    std::vector<std::size_t> kept;
    for (std::size_t p : kFull[i]) {
      if (p < m) kept.push_back(p);
    }
    spec.prerequisites.push_back(std::move(kept));
  }
  return spec;
}

void PrereqSpec::validate() const {
  require(m >= 1 && m <= 63, "PrereqWorld m must be in [1, 63]");
  require(prerequisites.size() == m, "prerequisite table must have one list per item");
  require(goal_item < m, "goal item out of range");
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p : prerequisites[i]) {
      require(p > i && p < m, "item " + std::to_string(i) + " has prerequisite " +
                                  std::to_string(p) + " violating the topological order");
    }
  }
}

namespace {

EnvSpec prereq_env_spec(const PrereqSpec& p) {
  p.validate();
  EnvSpec s;
  s.n_features = p.m;
  s.n_base_actions = p.m;
  s.feature_lower_bounds.assign(p.m, 0.0);
  s.feature_upper_bounds.assign(p.m, 1.0);
  s.max_episode_steps = 100;
  return s;
}

}  // namespace

PrereqWorld::PrereqWorld(PrereqSpec spec)
    : Environment(prereq_env_spec(spec)), prereq_(std::move(spec)) {}

std::vector<std::string> PrereqWorld::feature_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < prereq_.m; ++i) names.push_back("has_item_" + std::to_string(i));
  return names;
}

std::vector<std::string> PrereqWorld::action_names() const {
  std::vector<std::string> names;
  for (std::size_t i = 0; i < prereq_.m; ++i) names.push_back("make_" + std::to_string(i));
  return names;
}

BaseState PrereqWorld::reset(Rng& /*rng*/) const {
  return make_state(std::vector<double>(prereq_.m, 0.0));
}

std::uint64_t PrereqWorld::encode(const BaseState& state) const {
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < prereq_.m; ++i) {
    if (state.raw.at(i) > 0.5) bits |= std::uint64_t{1} << i;
  }
  return bits;
}

BaseState PrereqWorld::decode(std::uint64_t bits) const {
  std::vector<double> raw(prereq_.m);
  for (std::size_t i = 0; i < prereq_.m; ++i) raw[i] = ((bits >> i) & 1U) ? 1.0 : 0.0;
  return make_state(std::move(raw));
}

StepResult PrereqWorld::transition(const BaseState& state, std::size_t action,
                                   Rng& /*rng*/) const {
  StepResult r;
  r.next_state = state;
  r.next_state.steps = state.steps + 1;
  const auto& needs = prereq_.prerequisites[action];
  const bool satisfied = std::all_of(needs.begin(), needs.end(),
                                     [&](std::size_t p) { return state.raw[p] > 0.5; });
  if (satisfied) {
    for (std::size_t p : needs) {
      r.next_state.raw[p] = 0.0;
      r.next_state.features[p] = 0.0;
    }
    r.next_state.raw[action] = 1.0;
    r.next_state.features[action] = 1.0;
  }
  if (satisfied && action == prereq_.goal_item) {
    r.reward = 0.0;
    r.terminal = true;
  } else {
    r.reward = -1.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// PotholeWorld

PotholeSpec PotholeSpec::standard() {
  PotholeSpec s;
  s.lane2_potholes = {3.09,  5.97,  7.33,  8.874, 9.98,  11.70, 12.83,
                      14.62, 16.33, 19.55, 27.56, 31.28, 33.07, 36.30,
                      37.81, 39.14, 44.21, 46.81, 49.05};
  s.lane3_potholes = {0.0,   1.30,  4.53,  17.45, 18.47, 21.42, 23.34, 24.42,
                      25.70, 29.41, 34.46, 40.45, 42.39, 45.30, 47.87};
  return s;
}

void PotholeSpec::validate() const {
  require(road_length > 0.0, "road_length must be positive");
  require(advance_low > 0.0 && advance_low < advance_high, "advance range must be 0 < low < high");
  require(pothole_penalty >= 0.0, "pothole_penalty must be non-negative");
  for (const auto* lane : {&lane2_potholes, &lane3_potholes}) {
    require(std::is_sorted(lane->begin(), lane->end()), "pothole positions must be sorted");
    for (double p : *lane) {
      require(p >= 0.0 && p <= road_length, "pothole position outside the road");
    }
  }
}

std::span<const double> PotholeSpec::potholes(std::size_t lane) const {
  switch (lane) {
    case 1: return lane2_potholes;
    case 2: return lane3_potholes;
    default: return {};
  }
}

namespace {

EnvSpec pothole_env_spec(const PotholeSpec& p) {
  p.validate();
  EnvSpec s;
  s.n_features = 1;
  s.n_base_actions = 3;
  s.feature_lower_bounds = {0.0};
  s.feature_upper_bounds = {p.road_length};
  s.max_episode_steps = 1000;
  return s;
}

}  // namespace

PotholeWorld::PotholeWorld(PotholeSpec spec)
    : Environment(pothole_env_spec(spec)), pothole_(std::move(spec)) {}

BaseState PotholeWorld::reset(Rng& /*rng*/) const { return make_state({0.0}); }

StepResult PotholeWorld::advance(const BaseState& state, std::size_t lane,
                                 double distance) const {
  if (lane >= 3) throw InvalidInput("PotholeWorld lane out of range");
  const double from = state.raw.at(0);
  const double to = std::min(from + distance, pothole_.road_length);
  const double moved = to - from;

  StepResult r;
  r.next_state = make_state({to}, state.steps + 1);
  r.terminal = to >= pothole_.road_length;
  if (lane == 0) {
    r.reward = pothole_.lane1_discount * moved;
  } else {
    // collision interval is (from, to]
    const auto holes = pothole_.potholes(lane);
    const auto it = std::upper_bound(holes.begin(), holes.end(), from);
    const bool hit = it != holes.end() && *it <= to;
    r.reward = moved - (hit ? pothole_.pothole_penalty : 0.0);
  }
  return r;
}

StepResult PotholeWorld::transition(const BaseState& state, std::size_t action,
                                    Rng& rng) const {
  std::uniform_real_distribution<double> draw(pothole_.advance_low, pothole_.advance_high);
  return advance(state, action, draw(rng));
}

// ---------------------------------------------------------------------------
// CartPole

namespace {

EnvSpec cartpole_env_spec() {
  EnvSpec s;
  s.n_features = 4;
  s.n_base_actions = 2;
  s.feature_lower_bounds = {-2.0, -2.0, -0.14, -1.4};
  s.feature_upper_bounds = {2.0, 2.0, 0.14, 1.4};
  s.max_episode_steps = CartPole::kMaxSteps;
  return s;
}

}  // namespace

CartPole::CartPole() : Environment(cartpole_env_spec()) {}

BaseState CartPole::reset(Rng& rng) const {
  std::uniform_real_distribution<double> draw(-0.05, 0.05);
  std::vector<double> raw(4);
  for (auto& x : raw) x = draw(rng);
  return make_state(std::move(raw));
}

StepResult CartPole::transition(const BaseState& state, std::size_t action,
                                Rng& /*rng*/) const {
  constexpr double total_mass = kCartMass + kPoleMass;
  constexpr double pole_mass_length = kPoleMass * kHalfLength;
  const double angle_limit = kAngleLimitDegrees * std::numbers::pi / 180.0;

  double x = state.raw[0], x_dot = state.raw[1], theta = state.raw[2], theta_dot = state.raw[3];
  const double force = action == 1 ? kForce : -kForce;
  const double cos_t = std::cos(theta);
  const double sin_t = std::sin(theta);
  const double temp = (force + pole_mass_length * theta_dot * theta_dot * sin_t) / total_mass;
  const double theta_acc =
      (kGravity * sin_t - cos_t * temp) /
      (kHalfLength * (4.0 / 3.0 - kPoleMass * cos_t * cos_t / total_mass));
  const double x_acc = temp - pole_mass_length * theta_acc * cos_t / total_mass;

  x += kTau * x_dot;
  x_dot += kTau * x_acc;
  theta += kTau * theta_dot;
  theta_dot += kTau * theta_acc;

  StepResult r;
  r.next_state = make_state({x, x_dot, theta, theta_dot}, state.steps + 1);
  r.reward = 1.0;
  r.terminal = std::abs(x) > kPositionLimit || std::abs(theta) > angle_limit ||
               r.next_state.steps >= kMaxSteps;
  return r;
}

// ---------------------------------------------------------------------------
// TabularWorld

namespace {

EnvSpec tabular_env_spec(const std::vector<std::vector<double>>& features, std::size_t n_actions,
                         std::size_t max_steps) {
  require(!features.empty(), "tabular world needs at least one state");
  EnvSpec s;
  s.n_features = features.front().size();
  s.n_base_actions = n_actions;
  s.feature_lower_bounds.assign(s.n_features, 0.0);
  s.feature_upper_bounds.assign(s.n_features, 1.0);
  s.max_episode_steps = max_steps;
  return s;
}

}  // namespace

TabularWorld::TabularWorld(std::vector<std::vector<double>> features, std::size_t n_actions,
                           std::vector<std::vector<TabularOutcome>> outcomes, std::size_t start,
                           std::size_t max_episode_steps)
    : Environment(tabular_env_spec(features, n_actions, max_episode_steps)),
      features_(std::move(features)),
      outcomes_(std::move(outcomes)),
      start_(start) {
  require(start_ < features_.size(), "start state out of range");
  require(outcomes_.size() == features_.size() * n_actions,
          "need one outcome list per (state, action)");
  for (const auto& f : features_) {
    require(f.size() == n_features(), "all states need the same feature count");
    for (double v : f) require(v >= 0.0 && v <= 1.0, "tabular features must be normalized");
  }
  for (const auto& list : outcomes_) {
    double total = 0.0;
    for (const auto& o : list) {
      require(o.next < features_.size(), "outcome successor out of range");
      require(o.probability >= 0.0, "negative outcome probability");
      total += o.probability;
    }
    require(std::abs(total - 1.0) <= 1e-9, "outcome probabilities must sum to 1");
  }
}

BaseState TabularWorld::reset(Rng& /*rng*/) const { return make_state(features_[start_]); }

const std::vector<TabularOutcome>& TabularWorld::outcomes(std::size_t s, std::size_t a) const {
  return outcomes_.at(s * n_base_actions() + a);
}

std::size_t TabularWorld::state_index(const BaseState& state) const {
  for (std::size_t s = 0; s < features_.size(); ++s) {
    if (features_[s] == state.raw) return s;
  }
  throw InvalidInput("state is not one of the tabular world's states");
}

StepResult TabularWorld::transition(const BaseState& state, std::size_t action, Rng& rng) const {
  const auto& list = outcomes(state_index(state), action);
  double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const TabularOutcome* chosen = &list.back();
  for (const auto& o : list) {
    if (u < o.probability) {
      chosen = &o;
      break;
    }
    u -= o.probability;
  }
  StepResult r;
  r.next_state = make_state(features_[chosen->next], state.steps + 1);
  r.reward = chosen->reward;
  r.terminal = chosen->terminal;
  return r;
}

}  // namespace ibtree
