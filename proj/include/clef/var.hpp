#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "clef/model.hpp"
#include "clef/trajectory.hpp"

namespace clef {

/// x_t = c + sum_{r=1..p} A_r x_{t-r}.
struct VarModel {
  std::size_t order = 1;
  std::size_t variables = 0;
  std::vector<double> intercept;              // V
  std::vector<std::vector<double>> lags;      // p blocks, each V x V row-major
  bool regularized = false;                   // design was rank deficient

  /// Largest |eigenvalue| of the companion matrix.
  double spectral_radius() const;
};

/// Least squares over every window of every trajectory. Needs at least
/// p*V + 1 rows. A rank-deficient design falls back to ridge 1e-8 (logged).
VarModel fit_var(const std::vector<Trajectory>& train, std::size_t order);

/// Iterated forecast of the `horizon` steps after `prefix` (which needs at
/// least `order` rows).
std::vector<std::vector<double>> forecast_var(const VarModel& model, std::span<const std::vector<double>> prefix,
                                              std::size_t horizon);

/// Ignores conditions; iterates to each query's target step.
class VarForecaster final : public Forecaster {
 public:
  explicit VarForecaster(VarModel model) : model_(std::move(model)) {}
  std::string kind() const override { return "var"; }
  std::vector<std::vector<double>> predict(const Trajectory& trajectory,
                                           std::span<const Query> queries) const override;
  const VarModel& model() const { return model_; }

 private:
  VarModel model_;
};

}  // namespace clef
