#include "clef/layers.hpp"

#include <cmath>

#include "clef/errors.hpp"

namespace clef {

ad::Tensor dropout(const ad::Tensor& x, double probability, const ForwardContext& ctx) {
  if (!ctx.training || ctx.rng == nullptr || probability <= 0.0) return x;
  if (probability >= 1.0) throw InvalidArgument("dropout probability must be below 1");
  std::bernoulli_distribution keep(1.0 - probability);
  std::vector<double> mask(x.size());
  const double scale = 1.0 / (1.0 - probability);
  for (double& m : mask) m = keep(*ctx.rng) ? scale : 0.0;
  return ad::mul(x, ad::Tensor(x.shape(), std::move(mask)));
}

Linear::Linear(std::size_t in, std::size_t out, std::mt19937_64& rng, std::string name)
    : name_(std::move(name)),
      weight_(ad::Tensor::randn({in, out}, rng, 1.0 / std::sqrt(static_cast<double>(in)), true)),
      bias_(ad::Tensor::zeros({1, out}, true)) {}

ad::Tensor Linear::forward(const ad::Tensor& x) const {
  if (x.cols() != weight_.rows()) {
    throw ShapeMismatch(name_ + ": input width " + std::to_string(x.cols()) + ", expected " +
                        std::to_string(weight_.rows()));
  }
  return ad::add(ad::matmul(x, weight_), bias_);
}

ad::ParameterList Linear::parameters() const {
  return {{name_ + ".weight", weight_}, {name_ + ".bias", bias_}};
}

GruCell::GruCell(std::size_t input, std::size_t hidden, std::mt19937_64& rng, std::string name)
    : name_(name),
      hidden_(hidden),
      input_(input, 3 * hidden, rng, name + ".input"),
      recurrent_(ad::Tensor::randn({hidden, 3 * hidden}, rng, 1.0 / std::sqrt(static_cast<double>(hidden)), true)),
      recurrent_bias_(ad::Tensor::zeros({1, 3 * hidden}, true)) {}

ad::Tensor GruCell::project_inputs(const ad::Tensor& x) const { return input_.forward(x); }

ad::Tensor GruCell::step(const ad::Tensor& projected, const ad::Tensor& state) const {
  const std::size_t h = hidden_;
  ad::Tensor rec = ad::add(ad::matmul(state, recurrent_), recurrent_bias_);
  ad::Tensor update = ad::sigmoid(ad::add(ad::slice_cols(projected, 0, h), ad::slice_cols(rec, 0, h)));
  ad::Tensor reset = ad::sigmoid(ad::add(ad::slice_cols(projected, h, h), ad::slice_cols(rec, h, h)));
  ad::Tensor candidate = ad::tanh(
      ad::add(ad::slice_cols(projected, 2 * h, h), ad::mul(reset, ad::slice_cols(rec, 2 * h, h))));
  // h' = (1 - z) * n + z * h
  return ad::add(candidate, ad::mul(update, ad::sub(state, candidate)));
}

ad::ParameterList GruCell::parameters() const {
  ad::ParameterList out = input_.parameters();
  out.push_back({name_ + ".recurrent", recurrent_});
  out.push_back({name_ + ".recurrent_bias", recurrent_bias_});
  return out;
}

void append(ad::ParameterList& into, const ad::ParameterList& from) {
  into.insert(into.end(), from.begin(), from.end());
}

}  // namespace clef
