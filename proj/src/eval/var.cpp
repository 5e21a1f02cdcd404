#include "clef/var.hpp"

#include <Eigen/Dense>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>

#include "clef/errors.hpp"

namespace clef {

double VarModel::spectral_radius() const {
  const auto v = static_cast<Eigen::Index>(variables);
  const auto n = static_cast<Eigen::Index>(order) * v;
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t r = 0; r < order; ++r) {
    for (Eigen::Index i = 0; i < v; ++i) {
      for (Eigen::Index j = 0; j < v; ++j) {
        companion(i, static_cast<Eigen::Index>(r) * v + j) = lags[r][static_cast<std::size_t>(i * v + j)];
      }
    }
  }
  if (n > v) companion.bottomLeftCorner(n - v, n - v).setIdentity();
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

VarModel fit_var(const std::vector<Trajectory>& train, std::size_t order) {
  if (order == 0) throw InvalidArgument("VAR order must be at least 1");
  if (train.empty()) throw InvalidArgument("VAR needs training trajectories");
  const std::size_t v = train.front().variables();
  std::size_t rows = 0;
  for (const auto& t : train) {
    if (t.variables() != v) throw ShapeMismatch("trajectories differ in variable count");
    if (t.length() > order) rows += t.length() - order;
  }
  const std::size_t cols = 1 + order * v;
  if (rows < cols) {
    throw InvalidArgument("VAR(" + std::to_string(order) + ") needs at least " + std::to_string(cols) +
                          " samples, got " + std::to_string(rows));
  }

  Eigen::MatrixXd x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Eigen::MatrixXd y(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(v));
  Eigen::Index row = 0;
  for (const auto& t : train) {
    for (std::size_t s = order; s < t.length(); ++s, ++row) {
      x(row, 0) = 1.0;
      for (std::size_t r = 1; r <= order; ++r) {
        for (std::size_t k = 0; k < v; ++k) {
          x(row, static_cast<Eigen::Index>(1 + (r - 1) * v + k)) = t.values[s - r][k];
        }
      }
      for (std::size_t k = 0; k < v; ++k) y(row, static_cast<Eigen::Index>(k)) = t.values[s][k];
    }
  }

  VarModel model;
  model.order = order;
  model.variables = v;
  Eigen::MatrixXd beta;
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  if (qr.rank() < static_cast<Eigen::Index>(cols)) {
    spdlog::warn("VAR design matrix is rank deficient ({} of {}); using ridge 1e-8", qr.rank(), cols);
    model.regularized = true;
    Eigen::MatrixXd gram = x.transpose() * x;
    gram.diagonal().array() += 1e-8;
    beta = gram.ldlt().solve(x.transpose() * y);
  } else {
    beta = qr.solve(y);
  }

  model.intercept.resize(v);
  model.lags.assign(order, std::vector<double>(v * v));
  for (std::size_t k = 0; k < v; ++k) model.intercept[k] = beta(0, static_cast<Eigen::Index>(k));
  for (std::size_t r = 0; r < order; ++r) {
    for (std::size_t i = 0; i < v; ++i) {
      for (std::size_t j = 0; j < v; ++j) {
        // beta is [cols x V]: output i reads input column j of lag r.
        model.lags[r][i * v + j] = beta(static_cast<Eigen::Index>(1 + r * v + j), static_cast<Eigen::Index>(i));
      }
    }
  }
  return model;
}

std::vector<std::vector<double>> forecast_var(const VarModel& model, std::span<const std::vector<double>> prefix,
                                              std::size_t horizon) {
  if (prefix.size() < model.order) {
    throw InvalidArgument("VAR(" + std::to_string(model.order) + ") forecast needs " + std::to_string(model.order) +
                          " history rows");
  }
  const std::size_t v = model.variables;
  std::vector<std::vector<double>> window(prefix.end() - static_cast<std::ptrdiff_t>(model.order), prefix.end());
  std::vector<std::vector<double>> out;
  out.reserve(horizon);
  for (std::size_t h = 0; h < horizon; ++h) {
    std::vector<double> next = model.intercept;
    for (std::size_t r = 0; r < model.order; ++r) {
      const auto& lagged = window[window.size() - 1 - r];
      if (lagged.size() != v) throw ShapeMismatch("VAR forecast: history row has the wrong width");
      for (std::size_t i = 0; i < v; ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < v; ++j) acc += model.lags[r][i * v + j] * lagged[j];
        next[i] += acc;
      }
    }
    out.push_back(next);
    window.erase(window.begin());
    window.push_back(std::move(next));
  }
  return out;
}

std::vector<std::vector<double>> VarForecaster::predict(const Trajectory& trajectory,
                                                        std::span<const Query> queries) const {
  std::vector<std::vector<double>> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    if (!q.target_step || *q.target_step <= q.origin) {
      throw InvalidHorizon("VAR forecasts need a grid target step after the origin");
    }
    const std::size_t horizon = *q.target_step - q.origin;
    std::span<const std::vector<double>> prefix(trajectory.values.data(), q.origin + 1);
    if (prefix.size() < model_.order) {
      // Too little history for the lag structure: fall back to persistence.
      out.push_back(trajectory.values[q.origin]);
      continue;
    }
    out.push_back(forecast_var(model_, prefix, horizon).back());
  }
  return out;
}

}  // namespace clef
