#pragma once

#include <random>
#include <string>

#include "clef/autodiff/ops.hpp"
#include "clef/autodiff/tensor.hpp"

namespace clef {

/// Per-call mode. Dropout is only active when `training` is set and an RNG is supplied.
struct ForwardContext {
  bool training = false;
  std::mt19937_64* rng = nullptr;
};

ad::Tensor dropout(const ad::Tensor& x, double probability, const ForwardContext& ctx);

/// y = x W + b with W [in x out] and b [1 x out].
class Linear {
 public:
  Linear() = default;
  Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, std::string name);

  ad::Tensor forward(const ad::Tensor& x) const;
  ad::ParameterList parameters() const;

  std::size_t in_features() const { return weight_.rows(); }
  std::size_t out_features() const { return weight_.cols(); }
  ad::Tensor& weight() { return weight_; }
  ad::Tensor& bias() { return bias_; }

 private:
  std::string name_;
  ad::Tensor weight_;
  ad::Tensor bias_;
};

/// Gated recurrent unit. Input-side products for a whole sequence are computed
/// up front by `project_inputs`; `step` then only does the recurrent half.
class GruCell {
 public:
  GruCell() = default;
  GruCell(std::size_t input, std::size_t hidden, std::mt19937_64& rng, std::string name);

  /// [n x input] -> [n x 3*hidden] (update, reset, candidate blocks).
  ad::Tensor project_inputs(const ad::Tensor& x) const;
  ad::Tensor step(const ad::Tensor& projected, const ad::Tensor& state) const;
  ad::ParameterList parameters() const;
  std::size_t hidden() const { return hidden_; }

 private:
  std::string name_;
  std::size_t hidden_ = 0;
  Linear input_;
  ad::Tensor recurrent_;       // [hidden x 3*hidden]
  ad::Tensor recurrent_bias_;  // [1 x 3*hidden]
};

void append(ad::ParameterList& into, const ad::ParameterList& from);

}  // namespace clef
