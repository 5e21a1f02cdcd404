#include "clef/training.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "clef/autodiff/adam.hpp"
#include "clef/autodiff/ops.hpp"
#include "clef/autodiff/tape.hpp"
#include "clef/errors.hpp"
#include "clef/evaluation.hpp"

namespace clef {

void TrainConfig::validate() const {
  if (batch_size == 0 || pairs_per_trajectory == 0) throw InvalidArgument("batch sizes must be positive");
  if (!(learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
  if (horizon == 0) throw InvalidArgument("horizon cap must be at least 1");
  if (!(huber_delta > 0)) throw InvalidArgument("huber delta must be positive");
}

namespace {

// Valid pairs of one trajectory, grouped by horizon.
using HorizonBuckets = std::map<std::size_t, std::vector<PairIndex>>;

double validation_mae(const SequenceModel& model, const std::vector<Trajectory>& val,
                      const std::vector<PairIndex>& pairs) {
  return evaluate_pairs(model, val, pairs).overall.mae;
}

}  // namespace

TrainResult train(SequenceModel& model, const std::vector<Trajectory>& train_split,
                  const std::vector<Trajectory>& val_split, const TrainConfig& config,
                  const EpochCallback& on_epoch) {
  config.validate();
  if (train_split.empty()) throw InvalidArgument("training split is empty");

  std::vector<HorizonBuckets> buckets(train_split.size());
  for (auto& p : enumerate_pairs(train_split, 1, config.horizon)) {
    buckets[p.trajectory][p.horizon()].push_back(p);
  }
  std::vector<std::size_t> usable;
  for (std::size_t n = 0; n < buckets.size(); ++n) {
    if (!buckets[n].empty()) usable.push_back(n);
  }
  if (usable.empty()) throw InvalidArgument("training split has no trajectory with two steps");

  const auto val_pairs = val_split.empty() ? std::vector<PairIndex>{} : enumerate_pairs(val_split, 1, config.horizon);
  const ad::ParameterList params = model.parameters();
  ad::AdamState adam(ad::AdamConfig{config.learning_rate});
  adam.init(params);
  std::mt19937_64 rng(config.seed);
  const ForwardContext ctx{true, &rng};

  TrainResult result;
  result.best_val_mae = val_pairs.empty() ? INFINITY : validation_mae(model, val_split, val_pairs);
  auto best = snapshot(params);
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(usable.begin(), usable.end(), rng);
    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < usable.size(); start += config.batch_size) {
      const std::size_t end = std::min(usable.size(), start + config.batch_size);
      std::vector<PairRequest> requests;
      for (std::size_t b = start; b < end; ++b) {
        const std::size_t n = usable[b];
        const HorizonBuckets& by_h = buckets[n];
        std::uniform_int_distribution<std::size_t> pick_h(0, by_h.size() - 1);
        for (std::size_t s = 0; s < config.pairs_per_trajectory; ++s) {
          auto it = std::next(by_h.begin(), static_cast<std::ptrdiff_t>(pick_h(rng)));
          const auto& candidates = it->second;
          const PairIndex& p = candidates[std::uniform_int_distribution<std::size_t>(0, candidates.size() - 1)(rng)];
          const Trajectory& t = train_split[n];
          requests.push_back(PairRequest{&t, make_query(t, p), &t.values[p.target]});
        }
      }
      double loss_value = 0;
      try {
        ad::Tape tape;
        ad::TapeScope scope(tape);
        const PairBatch batch = model.make_batch(requests);
        ad::Tensor loss = ad::huber_loss(model.predict_batch(batch, ctx), batch.target, config.huber_delta);
        loss_value = loss.item();
        ad::backward(loss, tape);
      } catch (const NonFiniteValue& e) {
        throw TrainingDiverged("epoch " + std::to_string(epoch) + ", step " + std::to_string(steps) + ": " +
                               e.what());
      }
      ad::adam_step(params, adam);
      loss_sum += loss_value;
      ++steps;
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(steps), 0.0};
    if (!std::isfinite(record.train_loss)) {
      throw TrainingDiverged("epoch " + std::to_string(epoch) + ": training loss is not finite");
    }
    record.val_mae = val_pairs.empty() ? record.train_loss : validation_mae(model, val_split, val_pairs);
    result.curve.push_back(record);
    if (on_epoch) on_epoch(record);

    if (record.val_mae < result.best_val_mae) {
      result.best_val_mae = record.val_mae;
      result.best_epoch = epoch;
      best = snapshot(params);
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      result.early_stopped = true;
      break;
    }
  }
  restore(params, best);
  return result;
}

}  // namespace clef
