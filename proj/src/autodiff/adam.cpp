#include "clef/autodiff/adam.hpp"

#include <cmath>

#include "clef/errors.hpp"

namespace clef::ad {

void AdamState::init(const ParameterList& params) {
  first_moment_.clear();
  second_moment_.clear();
  for (const auto& p : params) {
    first_moment_.emplace_back(p.tensor.size(), 0.0);
    second_moment_.emplace_back(p.tensor.size(), 0.0);
  }
  step_ = 0;
  initialized_ = true;
}

void adam_step(const ParameterList& params, AdamState& state) {
  if (!state.initialized_ || state.first_moment_.size() != params.size()) {
    throw InvalidArgument("adam_step: optimizer state not initialized for these parameters");
  }
  const AdamConfig& c = state.config_;
  ++state.step_;
  const double t = static_cast<double>(state.step_);
  const double correction1 = 1.0 - std::pow(c.beta1, t);
  const double correction2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor p = params[i].tensor;
    auto& m = state.first_moment_[i];
    auto& v = state.second_moment_[i];
    if (m.size() != p.size()) throw InvalidArgument("adam_step: moment shape mismatch");
    auto value = p.mutable_data();
    auto grad = p.mutable_grad();
    for (std::size_t k = 0; k < value.size(); ++k) {
      const double g = grad[k];
      m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
      v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      value[k] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.epsilon);
      grad[k] = 0.0;
    }
  }
}

}  // namespace clef::ad
