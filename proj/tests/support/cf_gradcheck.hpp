#pragma once

// Finite-difference check for the outcome predictor. The classifier reaches
// the representation either through a detach (no balancing) or through a
// gradient reversal, so the taped gradient of the total loss is the gradient
// of a different scalar for each parameter group:
//   outcome parameters:    mse + s * ce, s = 0 (detach) or -lambda (reversal)
//   classifier parameters: mse + ce

#include <set>

#include "clef/counterfactual.hpp"
#include "gradcheck.hpp"

namespace clef::testing {

struct CfGradCheck {
  GradCheck outcome;
  GradCheck classifier;
};

inline double cf_loss_value(const cf::OutcomePredictor& model, std::span<const cf::FactualSample> samples,
                            double ce_weight) {
  const auto out = model.run(samples, {});
  const std::size_t tau = samples.front().request.plan.size();
  std::vector<double> targets, weights;
  std::vector<int> labels;
  for (const auto& s : samples) {
    for (std::size_t r = 0; r < tau; ++r) {
      targets.push_back(s.targets[r] / model.scale());
      weights.push_back(s.weights[r]);
    }
    labels.push_back(static_cast<int>(s.request.plan.front()));
  }
  // Independent evaluation of the two terms.
  double num = 0, den = 0;
  for (std::size_t k = 0; k < targets.size(); ++k) {
    const double e = out.predictions.data()[k] - targets[k];
    num += weights[k] * e * e;
    den += weights[k];
  }
  double ce = 0;
  const std::size_t classes = out.logits.cols();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    double hi = out.logits.at(i, 0);
    for (std::size_t c = 1; c < classes; ++c) hi = std::max(hi, out.logits.at(i, c));
    double z = 0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(out.logits.at(i, c) - hi);
    ce += hi + std::log(z) - out.logits.at(i, static_cast<std::size_t>(labels[i]));
  }
  ce /= static_cast<double>(labels.size());
  return num / den + ce_weight * ce;
}

inline CfGradCheck cf_gradcheck(const cf::OutcomePredictor& model, std::span<const cf::FactualSample> samples,
                                const GradCheckOptions& opt = {}) {
  const double s =
      model.config().balancing == cf::Balancing::gradient_reversal ? -model.config().lambda : 0.0;
  const auto outcome = model.outcome_parameters();
  std::set<std::string> outcome_names;
  for (const auto& p : outcome) outcome_names.insert(p.name);
  ad::ParameterList classifier;
  for (const auto& p : model.parameters())
    if (!outcome_names.count(p.name)) classifier.push_back(p);
  auto build = [&] { return model.loss(samples, {}); };
  CfGradCheck r;
  r.outcome = gradcheck(outcome, build, [&] { return cf_loss_value(model, samples, s); }, opt);
  r.classifier = gradcheck(classifier, build, [&] { return cf_loss_value(model, samples, 1.0); }, opt);
  return r;
}

}  // namespace clef::testing
