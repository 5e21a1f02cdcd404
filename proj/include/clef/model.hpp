#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "clef/autodiff/tensor.hpp"
#include "clef/condition_registry.hpp"
#include "clef/encoders.hpp"
#include "clef/layers.hpp"
#include "clef/temporal.hpp"
#include "clef/trajectory.hpp"

namespace clef {

struct ModelConfig {
  std::size_t variables = 0;
  std::size_t condition_dim = 64;
  std::size_t hidden_dim = 0;  // 0 means "same as variables"
  bool ffn_enabled = false;
  EncoderConfig encoder;

  /// Fills hidden_dim and the encoder's input/hidden sizes, then validates.
  ModelConfig resolved() const;
  void validate() const;
};

/// One forecast request against a trajectory: predict the state at
/// `target_time` from steps [0, origin] under `condition`.
struct Query {
  std::size_t origin = 0;
  std::vector<std::string> condition;
  Timestamp target_time;
  std::optional<std::size_t> target_step;  // grid index of the target, when known
};

/// Anything that answers forecast queries; shared by models and baselines.
class Forecaster {
 public:
  virtual ~Forecaster() = default;
  virtual std::string kind() const = 0;
  virtual std::vector<std::vector<double>> predict(const Trajectory& trajectory,
                                                   std::span<const Query> queries) const = 0;
};

/// SimpleLinear: the last observed state, at any horizon.
class PersistenceForecaster final : public Forecaster {
 public:
  std::string kind() const override { return "persistence"; }
  std::vector<std::vector<double>> predict(const Trajectory& trajectory,
                                           std::span<const Query> queries) const override;
};

struct PairRequest {
  const Trajectory* trajectory = nullptr;
  Query query;
  const std::vector<double>* target = nullptr;
};

/// Encoder inputs for a set of trajectories plus one row per requested pair.
struct PairBatch {
  SequenceBatch sequence;
  std::vector<std::size_t> state_rows;
  std::vector<Timestamp> from_time;
  std::vector<Timestamp> to_time;
  ad::Tensor condition_embedding;  // [P x d_z]
  ad::Tensor last_value;           // [P x V], normalized
  ad::Tensor target;               // [P x V], normalized; undefined without targets
  std::vector<std::vector<double>> raw_last;

  std::size_t pairs() const { return state_rows.size(); }
};

/// Shared body of the conditional forecasters: sequence encoder F, condition
/// adapter H and the time tables. Values are divided by a per-variable
/// positive scale before entering the network.
class SequenceModel : public Forecaster {
 public:
  SequenceModel(ModelConfig config, ConditionRegistry registry, std::uint64_t seed);
  SequenceModel(const SequenceModel&) = delete;
  SequenceModel& operator=(const SequenceModel&) = delete;

  const ModelConfig& config() const { return config_; }
  const ConditionRegistry& registry() const { return registry_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t variables() const { return config_.variables; }

  const std::vector<double>& scale() const { return scale_; }
  void set_scale(std::vector<double> scale);
  const std::vector<std::string>& variable_names() const { return variable_names_; }
  void set_variable_names(std::vector<std::string> names);
  std::size_t variable_index(const std::string& name_or_index) const;

  PairBatch make_batch(std::span<const PairRequest> requests) const;
  /// Normalized predictions, [P x V].
  ad::Tensor predict_batch(const PairBatch& batch, const ForwardContext& ctx) const;
  std::vector<std::vector<double>> predict(const Trajectory& trajectory,
                                           std::span<const Query> queries) const override;

  /// H: [n x d_z] -> [n x d_h].
  ad::Tensor adapt_condition(const ad::Tensor& embedding) const;
  const SequenceEncoder& encoder() const { return *encoder_; }
  const TimeEncoder& time_encoder() const { return time_; }
  TimeEncoder& time_encoder() { return time_; }
  Linear& adapter() { return adapter_; }

  ad::ParameterList parameters() const;

  std::uint64_t encoder_passes() const { return encoder_passes_.load(); }
  std::uint64_t decode_calls() const { return decode_calls_.load(); }

 protected:
  struct Embeddings {
    ad::Tensor hidden;  // h_x per pair
    ad::Tensor delta;   // time delta per pair
    ad::Tensor condition;  // h_s per pair
  };
  Embeddings embed(const PairBatch& batch, const ForwardContext& ctx) const;

  virtual ad::Tensor head(const Embeddings& e, const PairBatch& batch, const ForwardContext& ctx) const = 0;
  virtual std::vector<std::vector<double>> decode_raw(const PairBatch& batch) const;
  virtual ad::ParameterList head_parameters() const = 0;

  ModelConfig config_;
  ConditionRegistry registry_;
  std::uint64_t seed_;
  std::mt19937_64 init_rng_;
  std::unique_ptr<SequenceEncoder> encoder_;
  TimeEncoder time_;
  Linear adapter_;
  std::vector<double> scale_;
  std::vector<std::string> variable_names_;
  mutable std::atomic<std::uint64_t> encoder_passes_{0};
  mutable std::atomic<std::uint64_t> decode_calls_{0};
};

/// Temporal concept c for the interval (from, to].
struct ConceptVector {
  std::vector<double> values;
  Timestamp from;
  Timestamp to;
};

/// Set/scale edits on concept entries.
struct EditSpec {
  enum class Mode { set, scale };
  struct Edit {
    std::size_t index = 0;
    Mode mode = Mode::scale;
    double value = 1.0;
  };
  std::vector<Edit> edits;

  /// Comma-separated "mode:variable:value" items; variable is a name or index.
  static EditSpec parse(const std::string& text, const std::vector<std::string>& variable_names);
};

/// Applies the edits; throws InvalidIntervention when there are none, an index
/// is out of range, or no entry changes.
ConceptVector intervene(const ConceptVector& concept_vec, const EditSpec& edits);

/// Definition of the temporal concept: x_j / x_i elementwise.
ConceptVector oracle_concept(std::span<const double> from, std::span<const double> to);

/// c = GELU(FFN(h_x * (delta + h_s))); FFN is skipped when null.
ad::Tensor encode_concept(const ad::Tensor& hidden, const ad::Tensor& delta,
                          const ad::Tensor& condition, const Linear* ffn);
/// x_hat = c * x_last.
ad::Tensor decode_concept(const ad::Tensor& last, const ad::Tensor& concept_vec);
std::vector<double> decode_concept(std::span<const double> last, std::span<const double> concept_vec);

/// GELU^{-1}(1); bias that makes a fresh concept start at the identity.
double unit_concept_preactivation();

struct Forecast {
  std::vector<double> prediction;
  ConceptVector concept_vec;
};

class ClefModel final : public SequenceModel {
 public:
  ClefModel(ModelConfig config, ConditionRegistry registry, std::uint64_t seed);

  std::string kind() const override { return "clef"; }

  /// Concepts for every pair of a batch, [P x V].
  ad::Tensor concepts(const PairBatch& batch, const ForwardContext& ctx) const;

  /// Single-jump forecast of the state at `target` given the whole of `history`.
  Forecast forward(const Trajectory& history, const std::vector<std::string>& condition,
                   const Timestamp& target, const EditSpec* edits = nullptr) const;

  /// Autoregressive generation on the benchmark grid; `conditions[k]` is used
  /// for generated step k (the last entry repeats when shorter than `steps`).
  /// Edits, when given, are applied to the concept at every generated step.
  Trajectory rollout(const Trajectory& history, std::span<const std::vector<std::string>> conditions,
                     std::size_t steps, const EditSpec* edits = nullptr) const;

  /// Ablation: replace every concept by ones (persistence).
  void set_unit_concepts(bool on) { unit_concepts_ = on; }
  bool unit_concepts() const { return unit_concepts_; }

 protected:
  ad::Tensor head(const Embeddings& e, const PairBatch& batch, const ForwardContext& ctx) const override;
  std::vector<std::vector<double>> decode_raw(const PairBatch& batch) const override;
  ad::ParameterList head_parameters() const override;

 private:
  ad::Tensor concepts_from(const Embeddings& e) const;

  std::optional<Linear> ffn_;
  bool unit_concepts_ = false;
};

/// Conditional forecaster without the concept bottleneck: an MLP maps
/// [h_x, delta + h_s] straight to the (normalized) target state.
class NoConceptModel final : public SequenceModel {
 public:
  NoConceptModel(ModelConfig config, ConditionRegistry registry, std::uint64_t seed);
  std::string kind() const override { return "no-concept"; }

 protected:
  ad::Tensor head(const Embeddings& e, const PairBatch& batch, const ForwardContext& ctx) const override;
  ad::ParameterList head_parameters() const override;

 private:
  Linear hidden_;
  Linear output_;
};

std::unique_ptr<SequenceModel> make_model(const std::string& kind, const ModelConfig& config,
                                          ConditionRegistry registry, std::uint64_t seed);

std::vector<std::vector<double>> snapshot(const ad::ParameterList& params);
void restore(const ad::ParameterList& params, const std::vector<std::vector<double>>& values);

}  // namespace clef
