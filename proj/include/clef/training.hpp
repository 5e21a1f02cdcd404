#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clef/model.hpp"
#include "clef/trajectory.hpp"

namespace clef {

struct TrainConfig {
  std::size_t epochs = 60;
  std::size_t batch_size = 16;            // trajectories per step
  std::size_t pairs_per_trajectory = 24;  // sampled (i, j) pairs per trajectory and step
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
  std::size_t patience = 10;
  std::size_t horizon = 14;  // H_max
  double huber_delta = 1.0;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double train_loss = 0;
  double val_mae = 0;
};

struct TrainResult {
  std::vector<EpochRecord> curve;
  std::size_t best_epoch = 0;
  double best_val_mae = 0;
  bool early_stopped = false;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Minimizes the Huber loss over sampled pairs. Each step draws a horizon
/// uniformly from 1..H_max and then a valid pair of that horizon, so immediate
/// and delayed pairs are mixed evenly. Early stops on validation MAE over all
/// pairs up to H_max and restores the best parameters. The normalization scale
/// must already be set on the model.
TrainResult train(SequenceModel& model, const std::vector<Trajectory>& train_split,
                  const std::vector<Trajectory>& val_split, const TrainConfig& config,
                  const EpochCallback& on_epoch = {});

}  // namespace clef
