#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "clef/condition_registry.hpp"
#include "clef/data/tumor.hpp"
#include "clef/encoders.hpp"
#include "clef/layers.hpp"
#include "clef/temporal.hpp"

namespace clef::cf {

using data::Treatment;
using data::TumorTrajectory;

enum class HeadMode { clef, plain };
enum class Balancing { none, gradient_reversal };

std::string to_string(HeadMode m);
std::string to_string(Balancing b);
HeadMode parse_head_mode(const std::string& text);
Balancing parse_balancing(const std::string& text);

struct OutcomeConfig {
  HeadMode head = HeadMode::clef;
  Balancing balancing = Balancing::none;
  double lambda = 1.0;  // gradient reversal strength, constant
  std::size_t hidden = 16;
  std::size_t condition_dim = 8;
  std::size_t layers = 1;
  double dropout = 0.0;
  /// Step r multiplies the step r-1 prediction; when false it always
  /// multiplies the last observation.
  bool autoregressive = true;

  void validate() const;
};

/// Prediction request: outcomes for days origin+1 .. origin+plan.size() given
/// the history up to `origin` and the planned treatments plan[r] on day origin+r.
struct OutcomeRequest {
  std::size_t origin = 0;
  std::vector<Treatment> plan;
};

class OutcomeModel {
 public:
  virtual ~OutcomeModel() = default;
  virtual std::string kind() const = 0;
  /// Raw volumes, one row of plan.size() values per request.
  virtual std::vector<std::vector<double>> predict(const TumorTrajectory& patient,
                                                   std::span<const OutcomeRequest> requests) const = 0;
};

/// Last observed outcome at every step.
class PersistenceOutcome final : public OutcomeModel {
 public:
  std::string kind() const override { return "persistence"; }
  std::vector<std::vector<double>> predict(const TumorTrajectory& patient,
                                           std::span<const OutcomeRequest> requests) const override;
};

/// One factual training sample; targets[r] is the observed volume on day
/// origin + r + 1, weights mask days past the end of the trajectory.
struct FactualSample {
  const TumorTrajectory* patient = nullptr;
  OutcomeRequest request;
  std::vector<double> targets;
  std::vector<double> weights;
};

/// Builds the factual window of length tau at `origin`.
FactualSample factual_sample(const TumorTrajectory& patient, std::size_t origin, std::size_t tau);

/// Recurrent history encoder over [volume, treatment embedding] plus a
/// per-step decoder. The history encoder only sees treatments that were
/// already applied (day < origin); planned treatments reach the model through
/// the adapter H and the decoder input.
class OutcomePredictor final : public OutcomeModel {
 public:
  OutcomePredictor(OutcomeConfig config, ConditionRegistry registry, std::uint64_t seed);
  OutcomePredictor(const OutcomePredictor&) = delete;
  OutcomePredictor& operator=(const OutcomePredictor&) = delete;

  std::string kind() const override;
  std::vector<std::vector<double>> predict(const TumorTrajectory& patient,
                                           std::span<const OutcomeRequest> requests) const override;

  struct Output {
    ad::Tensor predictions;  // [P x tau], normalized
    ad::Tensor states;       // phi at each origin, [P x hidden]
    ad::Tensor logits;       // treatment classifier on phi (through GR when enabled), [P x 4]
  };
  /// All requests must share one plan length.
  Output run(std::span<const FactualSample> samples, const ForwardContext& ctx) const;
  /// MSE on observed outcomes plus, for the classifier, its cross-entropy on
  /// the treatment applied at the origin.
  ad::Tensor loss(std::span<const FactualSample> samples, const ForwardContext& ctx) const;

  /// Fraction of samples whose origin treatment the classifier predicts.
  double treatment_accuracy(std::span<const FactualSample> samples) const;

  ad::ParameterList parameters() const;
  /// Parameters that the factual loss reaches (everything except the classifier).
  ad::ParameterList outcome_parameters() const;

  const OutcomeConfig& config() const { return config_; }
  const ConditionRegistry& registry() const { return registry_; }
  double scale() const { return scale_; }
  void set_scale(double s);

  void set_unit_concepts(bool on) { unit_concepts_ = on; }
  /// Gradient reversal strength.
  void set_lambda(double lambda) { config_.lambda = lambda; }

 private:
  ad::Tensor embed_condition(const std::vector<Treatment>& treatments) const;

  OutcomeConfig config_;
  ConditionRegistry registry_;
  std::mt19937_64 init_rng_;
  std::unique_ptr<SequenceEncoder> encoder_;
  TimeEncoder time_;
  Linear adapter_;
  GruCell decoder_;
  Linear ffn_;        // clef head: hidden -> 1
  Linear plain_hidden_;
  Linear plain_out_;
  Linear classifier_;
  double scale_ = 1.0;
  bool unit_concepts_ = false;
};

struct CfTrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 64;
  std::size_t origins_per_patient = 8;
  std::size_t tau = 6;
  double learning_rate = 3e-3;
  std::uint64_t seed = 0;
  std::size_t patience = 6;

  void validate() const;
};

struct CfTrainResult {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  std::size_t best_epoch = 0;
};

/// Every usable (origin, window) of a cohort; origins need at least one
/// observed future day.
std::vector<FactualSample> factual_samples(const std::vector<TumorTrajectory>& cohort, std::size_t tau,
                                           std::size_t min_origin = 1);

/// Trains on factual outcomes only and restores the parameters with the best
/// validation outcome loss.
CfTrainResult train_predictor(OutcomePredictor& model, const std::vector<TumorTrajectory>& train,
                              const std::vector<TumorTrajectory>& val, const CfTrainConfig& config,
                              const std::function<void(std::size_t, double, double)>& on_epoch = {});

/// Mean factual volume over a cohort; the normalization scale.
double outcome_scale(const std::vector<TumorTrajectory>& cohort);

/// Per-tau RMSE over all futures divided by `max_volume`, in percent.
/// Entry r is tau = r + 1.
std::vector<double> evaluate_counterfactual(const OutcomeModel& model, const std::vector<TumorTrajectory>& cohort,
                                            const std::vector<data::CounterfactualFuture>& futures,
                                            std::size_t tau_max, double max_volume);

}  // namespace clef::cf
