#include "ibtree/ibmdp.hpp"

#include <algorithm>
#include <string>

#include "ibtree/errors.hpp"

namespace ibtree {

void IbmdpConfig::validate() const {
  if (p < 1) throw InvalidInput("p must be at least 1");
  if (!(zeta <= 0.0)) throw InvalidInput("zeta must be <= 0");
  if (!(gamma_b > 0.0 && gamma_b <= 1.0)) throw InvalidInput("gamma_b must be in (0,1]");
  if (!(gamma_w > 0.0 && gamma_w <= 1.0)) throw InvalidInput("gamma_w must be in (0,1]");
  if (max_wrapped_steps < 1) throw InvalidInput("max_wrapped_steps must be positive");
}

Observation Observation::root(std::size_t n_features) {
  return {std::vector<double>(n_features, 0.0), std::vector<double>(n_features, 1.0)};
}

bool Observation::is_root() const {
  return std::all_of(lower.begin(), lower.end(), [](double v) { return v == 0.0; }) &&
         std::all_of(upper.begin(), upper.end(), [](double v) { return v == 1.0; });
}

bool WrappedState::is_root() const { return mask(*this).is_root(); }

double project_value(double v, double lower, double upper) {
  if (!(lower < upper)) {
    throw InvariantViolation("degenerate bound interval [" + std::to_string(lower) + ", " +
                             std::to_string(upper) + "]");
  }
  if (!(v > 0.0 && v < 1.0)) throw InvalidInput("split value must lie in (0,1)");
  return v * (upper - lower) + lower;
}

bool splits_allowed(std::size_t splits_since_base, const IbmdpConfig& config) {
  return !config.depth_limit || splits_since_base < *config.depth_limit;
}

Ibmdp::Ibmdp(const Environment& env, IbmdpConfig config) : env_(&env), config_(config) {
  config_.validate();
}

std::size_t Ibmdp::encode(const WrappedAction& action) const {
  if (!action.is_split()) {
    if (action.base >= n_base_actions()) throw InvalidInput("base action out of range");
    return action.base;
  }
  if (action.feature >= n_features()) throw InvalidInput("split feature out of range");
  if (action.value_index < 1 || action.value_index > config_.p) {
    throw InvalidInput("split value index must be in [1, p]");
  }
  return n_base_actions() + action.feature * config_.p + (action.value_index - 1);
}

WrappedAction Ibmdp::decode(std::size_t index) const {
  if (index >= n_actions()) throw InvalidInput("action index out of range");
  if (index < n_base_actions()) return WrappedAction::base_action(index);
  const std::size_t rel = index - n_base_actions();
  return WrappedAction::split(rel / config_.p, rel % config_.p + 1);
}

WrappedState Ibmdp::reset(Rng& rng) const {
  WrappedState s;
  s.base = env_->reset(rng);
  s.lower.assign(n_features(), 0.0);
  s.upper.assign(n_features(), 1.0);
  return s;
}

WrappedStep Ibmdp::step(const WrappedState& state, const WrappedAction& action, Rng& rng) const {
  encode(action);  // range checks
  WrappedStep out;
  if (!action.is_split()) {
    StepResult r = env_->step(state.base, action.base, rng);
    out.next.base = std::move(r.next_state);
    out.next.lower.assign(n_features(), 0.0);
    out.next.upper.assign(n_features(), 1.0);
    out.next.splits_since_base = 0;
    out.reward = r.reward;
    out.terminal = r.terminal;
    out.truncated = r.truncated;
    return out;
  }

  if (!splits_allowed(state.splits_since_base, config_)) {
    throw InvalidInput("split action taken after the depth limit was reached");
  }
  const std::size_t c = action.feature;
  const double vp = project_value(split_value(action.value_index), state.lower[c], state.upper[c]);
  out.next = state;
  if (state.base.features[c] <= vp) {
    out.next.upper[c] = std::min(state.upper[c], vp);
  } else {
    out.next.lower[c] = std::max(state.lower[c], vp);
  }
  out.next.splits_since_base = state.splits_since_base + 1;
  out.reward = config_.zeta;
  return out;
}

std::size_t Ibmdp::legal_count(std::size_t splits_since_base) const {
  return splits_allowed(splits_since_base, config_) ? n_actions() : n_base_actions();
}

std::vector<WrappedAction> Ibmdp::legal_actions(std::size_t splits_since_base) const {
  std::vector<WrappedAction> out;
  const std::size_t count = legal_count(splits_since_base);
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) out.push_back(decode(i));
  return out;
}

void Ibmdp::observation_key(const Observation& obs, std::vector<double>& out) {
  out.clear();
  out.insert(out.end(), obs.lower.begin(), obs.lower.end());
  out.insert(out.end(), obs.upper.begin(), obs.upper.end());
}

void Ibmdp::observation_key(const WrappedState& state, std::vector<double>& out) {
  out.clear();
  out.insert(out.end(), state.lower.begin(), state.lower.end());
  out.insert(out.end(), state.upper.begin(), state.upper.end());
}

void Ibmdp::full_key(const WrappedState& state, std::vector<double>& out) {
  out.clear();
  out.insert(out.end(), state.base.features.begin(), state.base.features.end());
  out.insert(out.end(), state.lower.begin(), state.lower.end());
  out.insert(out.end(), state.upper.begin(), state.upper.end());
}

Observation mask(const WrappedState& state) { return {state.lower, state.upper}; }

}  // namespace ibtree
