#pragma once

#include <cstdint>
#include <vector>

#include "clef/autodiff/tensor.hpp"

namespace clef::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

class AdamState {
 public:
  explicit AdamState(AdamConfig config = {}) : config_(config) {}

  void init(const ParameterList& params);
  bool initialized() const { return initialized_; }
  std::uint64_t step() const { return step_; }
  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }

 private:
  friend void adam_step(const ParameterList& params, AdamState& state);

  AdamConfig config_;
  bool initialized_ = false;
  std::uint64_t step_ = 0;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
};

/// Bias-corrected Adam update using the accumulated grads, which are zeroed
/// afterwards. Throws InvalidArgument if `state` was not initialized for
/// exactly these parameters.
void adam_step(const ParameterList& params, AdamState& state);

}  // namespace clef::ad
