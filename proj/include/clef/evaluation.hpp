#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "clef/metrics.hpp"
#include "clef/model.hpp"
#include "clef/trajectory.hpp"

namespace clef {

/// One single-jump forecasting pair inside a trajectory.
struct PairIndex {
  std::size_t trajectory = 0;
  std::size_t origin = 0;
  std::size_t target = 0;
  std::vector<std::string> condition;

  std::size_t horizon() const { return target - origin; }
};

/// Every (i, j) with min_horizon <= j - i <= max_horizon whose interval (i, j]
/// carries at most one condition (see jump_condition).
std::vector<PairIndex> enumerate_pairs(const std::vector<Trajectory>& trajectories, std::size_t min_horizon,
                                       std::size_t max_horizon);

Query make_query(const Trajectory& t, const PairIndex& pair);

/// Scores `pairs` with one model call per pair. Buckets are keyed by horizon.
MetricReport evaluate_pairs(const Forecaster& model, const std::vector<Trajectory>& trajectories,
                            const std::vector<PairIndex>& pairs);

MetricReport evaluate_immediate(const Forecaster& model, const std::vector<Trajectory>& trajectories);

/// Single-jump pairs with 1 < j - i <= horizon, bucketed 2..horizon. A horizon
/// of 1 degenerates to the immediate protocol.
MetricReport evaluate_delayed(const Forecaster& model, const std::vector<Trajectory>& trajectories,
                              std::size_t horizon);

/// Counterfactual trajectories only. Each is predicted from the shared prefix
/// [0, D) under its own condition at D, at every step >= D; buckets are keyed
/// by absolute step. Throws DataLeakage when a counterfactual id is in
/// `train_ids`.
MetricReport evaluate_zero_shot_cf(const Forecaster& model, const std::vector<Trajectory>& counterfactuals,
                                   const std::set<std::string>& train_ids);

/// Positive per-variable normalization scale: the mean absolute value over the
/// training split (1 where that is zero).
std::vector<double> fit_scale(const std::vector<Trajectory>& train);

}  // namespace clef
