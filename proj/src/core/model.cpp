#include "clef/model.hpp"

#include <cmath>
#include <map>
#include <sstream>

#include "clef/autodiff/ops.hpp"
#include "clef/errors.hpp"

namespace clef {

ModelConfig ModelConfig::resolved() const {
  ModelConfig c = *this;
  if (c.hidden_dim == 0) c.hidden_dim = c.variables;
  c.encoder.input_dim = c.variables + c.condition_dim;
  c.encoder.hidden_dim = c.hidden_dim;
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (variables == 0) throw InvalidArgument("model needs at least one variable");
  if (condition_dim == 0) throw InvalidArgument("condition dimension must be positive");
  if (!ffn_enabled && hidden_dim != variables) {
    throw InvalidArgument("without the concept FFN the hidden size must equal the variable count (" +
                          std::to_string(hidden_dim) + " != " + std::to_string(variables) + ")");
  }
  encoder.validate();
}

std::vector<std::vector<double>> PersistenceForecaster::predict(const Trajectory& trajectory,
                                                                std::span<const Query> queries) const {
  std::vector<std::vector<double>> out;
  out.reserve(queries.size());
  for (const auto& q : queries) out.push_back(trajectory.values.at(q.origin));
  return out;
}

SequenceModel::SequenceModel(ModelConfig config, ConditionRegistry registry, std::uint64_t seed)
    : config_(config.resolved()), registry_(std::move(registry)), seed_(seed), init_rng_(seed) {
  if (registry_.dim() != config_.condition_dim) {
    throw ShapeMismatch("condition registry dimension " + std::to_string(registry_.dim()) +
                        " does not match the model's " + std::to_string(config_.condition_dim));
  }
  encoder_ = make_encoder(config_.encoder, init_rng_);
  time_ = TimeEncoder(config_.hidden_dim, init_rng_);
  adapter_ = Linear(config_.condition_dim, config_.hidden_dim, init_rng_, "adapter");
  scale_.assign(config_.variables, 1.0);
  for (std::size_t k = 0; k < config_.variables; ++k) variable_names_.push_back("x" + std::to_string(k));
}

void SequenceModel::set_scale(std::vector<double> scale) {
  if (scale.size() != config_.variables) throw ShapeMismatch("scale has the wrong length");
  for (double s : scale) {
    if (!(s > 0) || !std::isfinite(s)) throw InvalidArgument("normalization scale must be positive");
  }
  scale_ = std::move(scale);
}

void SequenceModel::set_variable_names(std::vector<std::string> names) {
  if (names.size() != config_.variables) throw ShapeMismatch("variable name count mismatch");
  variable_names_ = std::move(names);
}

std::size_t SequenceModel::variable_index(const std::string& name_or_index) const {
  for (std::size_t k = 0; k < variable_names_.size(); ++k) {
    if (variable_names_[k] == name_or_index) return k;
  }
  try {
    std::size_t used = 0;
    const unsigned long k = std::stoul(name_or_index, &used);
    if (used == name_or_index.size() && k < config_.variables) return k;
  } catch (const std::exception&) {
  }
  throw InvalidArgument("unknown variable '" + name_or_index + "'");
}

PairBatch SequenceModel::make_batch(std::span<const PairRequest> requests) const {
  if (requests.empty()) throw InvalidArgument("empty forecast batch");
  const std::size_t v = config_.variables;
  const std::size_t dz = config_.condition_dim;

  std::map<const Trajectory*, std::size_t> column;
  std::vector<const Trajectory*> sequences;
  std::vector<std::size_t> needed;
  for (const auto& r : requests) {
    if (!r.trajectory) throw InvalidArgument("forecast request without a trajectory");
    const Trajectory& t = *r.trajectory;
    if (t.length() == 0) throw InvalidArgument("encoder received an empty history");
    if (t.variables() != v) {
      throw ShapeMismatch("trajectory '" + t.id + "' has " + std::to_string(t.variables()) +
                          " variables, model expects " + std::to_string(v));
    }
    if (r.query.origin >= t.length()) throw InvalidArgument("query origin beyond the trajectory");
    if (!(t.timestamps[r.query.origin] < r.query.target_time)) {
      throw InvalidHorizon("target time " + r.query.target_time.iso() + " is not after " +
                           t.timestamps[r.query.origin].iso());
    }
    auto [it, inserted] = column.emplace(&t, sequences.size());
    if (inserted) {
      sequences.push_back(&t);
      needed.push_back(0);
    }
    needed[it->second] = std::max(needed[it->second], r.query.origin + 1);
  }

  const std::size_t batch = sequences.size();
  std::size_t length = 0;
  for (std::size_t n : needed) length = std::max(length, n);

  std::vector<double> features(length * batch * (v + dz), 0.0);
  std::vector<Timestamp> times(length * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const Trajectory& t = *sequences[b];
    for (std::size_t s = 0; s < length; ++s) {
      const std::size_t row = s * batch + b;
      if (s < needed[b]) {
        double* f = features.data() + row * (v + dz);
        for (std::size_t k = 0; k < v; ++k) f[k] = t.values[s][k] / scale_[k];
        auto z = registry_.combine(t.conditions[s]);
        std::copy(z.begin(), z.end(), f + v);
        times[row] = t.timestamps[s];
      } else {
        times[row] = t.timestamps[needed[b] - 1];
      }
    }
  }

  PairBatch out;
  out.sequence.length = length;
  out.sequence.batch = batch;
  out.sequence.features = ad::Tensor::matrix(length * batch, v + dz, std::move(features));
  out.sequence.time_embedding = time_.encode(times);

  const std::size_t p = requests.size();
  std::vector<double> z(p * dz), last(p * v), target;
  const bool with_target = requests.front().target != nullptr;
  if (with_target) target.resize(p * v);
  for (std::size_t i = 0; i < p; ++i) {
    const auto& r = requests[i];
    const Trajectory& t = *r.trajectory;
    const std::size_t b = column.at(&t);
    out.state_rows.push_back(r.query.origin * batch + b);
    out.from_time.push_back(t.timestamps[r.query.origin]);
    out.to_time.push_back(r.query.target_time);
    auto zc = registry_.combine(r.query.condition);
    std::copy(zc.begin(), zc.end(), z.begin() + static_cast<std::ptrdiff_t>(i * dz));
    const auto& x = t.values[r.query.origin];
    out.raw_last.push_back(x);
    for (std::size_t k = 0; k < v; ++k) last[i * v + k] = x[k] / scale_[k];
    if (with_target) {
      if (!r.target || r.target->size() != v) throw ShapeMismatch("forecast target has the wrong shape");
      for (std::size_t k = 0; k < v; ++k) target[i * v + k] = (*r.target)[k] / scale_[k];
    }
  }
  out.condition_embedding = ad::Tensor::matrix(p, dz, std::move(z));
  out.last_value = ad::Tensor::matrix(p, v, std::move(last));
  if (with_target) out.target = ad::Tensor::matrix(p, v, std::move(target));
  return out;
}

SequenceModel::Embeddings SequenceModel::embed(const PairBatch& batch, const ForwardContext& ctx) const {
  ad::Tensor states = encoder_->encode_all(batch.sequence, ctx);
  encoder_passes_.fetch_add(1);
  decode_calls_.fetch_add(batch.pairs());
  return Embeddings{ad::gather_rows(states, batch.state_rows), time_.delta(batch.from_time, batch.to_time),
                    adapt_condition(batch.condition_embedding)};
}

ad::Tensor SequenceModel::predict_batch(const PairBatch& batch, const ForwardContext& ctx) const {
  return head(embed(batch, ctx), batch, ctx);
}

std::vector<std::vector<double>> SequenceModel::decode_raw(const PairBatch& batch) const {
  ad::Tensor normalized = predict_batch(batch, {});
  std::vector<std::vector<double>> out(batch.pairs());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = normalized.row_vector(i);
    for (std::size_t k = 0; k < out[i].size(); ++k) out[i][k] *= scale_[k];
  }
  return out;
}

std::vector<std::vector<double>> SequenceModel::predict(const Trajectory& trajectory,
                                                        std::span<const Query> queries) const {
  if (queries.empty()) return {};
  std::vector<PairRequest> requests;
  requests.reserve(queries.size());
  for (const auto& q : queries) requests.push_back(PairRequest{&trajectory, q, nullptr});
  return decode_raw(make_batch(requests));
}

ad::Tensor SequenceModel::adapt_condition(const ad::Tensor& embedding) const {
  if (embedding.cols() != config_.condition_dim) {
    throw ShapeMismatch("condition embedding has dimension " + std::to_string(embedding.cols()) +
                        ", expected " + std::to_string(config_.condition_dim));
  }
  return adapter_.forward(embedding);
}

ad::ParameterList SequenceModel::parameters() const {
  ad::ParameterList out = encoder_->parameters();
  append(out, time_.parameters());
  append(out, adapter_.parameters());
  append(out, head_parameters());
  return out;
}

double unit_concept_preactivation() {
  // Newton on GELU(y) = 1.
  double y = 1.0;
  for (int i = 0; i < 50; ++i) {
    const double cdf = 0.5 * std::erfc(-y / std::sqrt(2.0));
    const double pdf = std::exp(-0.5 * y * y) / std::sqrt(2.0 * 3.14159265358979323846);
    y -= (y * cdf - 1.0) / (cdf + y * pdf);
  }
  return y;
}

ad::Tensor encode_concept(const ad::Tensor& hidden, const ad::Tensor& delta, const ad::Tensor& condition,
                          const Linear* ffn) {
  if (hidden.shape() != delta.shape() || hidden.shape() != condition.shape()) {
    throw ShapeMismatch("concept encoder inputs differ in shape: " + ad::shape_string(hidden.shape()) + ", " +
                        ad::shape_string(delta.shape()) + ", " + ad::shape_string(condition.shape()));
  }
  ad::Tensor timed_condition = ad::add(delta, condition);
  ad::Tensor mixed = ad::mul(hidden, timed_condition);
  if (ffn) mixed = ffn->forward(mixed);
  return ad::gelu(mixed);
}

ad::Tensor decode_concept(const ad::Tensor& last, const ad::Tensor& concept_vec) {
  if (last.shape() != concept_vec.shape()) throw ShapeMismatch("concept decoder: shapes differ");
  return ad::mul(concept_vec, last);
}

std::vector<double> decode_concept(std::span<const double> last, std::span<const double> concept_vec) {
  if (last.size() != concept_vec.size()) throw ShapeMismatch("concept decoder: lengths differ");
  std::vector<double> out(last.size());
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = concept_vec[k] * last[k];
  return out;
}

ConceptVector oracle_concept(std::span<const double> from, std::span<const double> to) {
  if (from.size() != to.size()) throw ShapeMismatch("oracle concept: lengths differ");
  ConceptVector c;
  c.values.resize(from.size());
  for (std::size_t k = 0; k < from.size(); ++k) {
    if (std::abs(from[k]) <= 1e-12) throw NonInvertibleValue("oracle concept: near-zero denominator");
    c.values[k] = to[k] / from[k];
  }
  return c;
}

EditSpec EditSpec::parse(const std::string& text, const std::vector<std::string>& variable_names) {
  EditSpec spec;
  std::stringstream items(text);
  std::string item;
  while (std::getline(items, item, ',')) {
    if (item.empty()) continue;
    const auto a = item.find(':');
    const auto b = item.rfind(':');
    if (a == std::string::npos || a == b) {
      throw InvalidIntervention("edit '" + item + "' is not mode:variable:value");
    }
    const std::string mode = item.substr(0, a);
    const std::string variable = item.substr(a + 1, b - a - 1);
    Edit e;
    if (mode == "scale") {
      e.mode = Mode::scale;
    } else if (mode == "set") {
      e.mode = Mode::set;
    } else {
      throw InvalidIntervention("unknown edit mode '" + mode + "'");
    }
    bool found = false;
    for (std::size_t k = 0; k < variable_names.size(); ++k) {
      if (variable_names[k] == variable) {
        e.index = k;
        found = true;
        break;
      }
    }
    try {
      if (!found) {
        std::size_t used = 0;
        e.index = std::stoul(variable, &used);
        if (used != variable.size()) throw std::invalid_argument(variable);
      }
      std::size_t used = 0;
      const std::string value = item.substr(b + 1);
      e.value = std::stod(value, &used);
      if (used != value.size()) throw std::invalid_argument(value);
    } catch (const std::exception&) {
      throw InvalidIntervention("cannot parse edit '" + item + "'");
    }
    spec.edits.push_back(e);
  }
  return spec;
}

ConceptVector intervene(const ConceptVector& concept_vec, const EditSpec& edits) {
  if (edits.edits.empty()) throw InvalidIntervention("empty edit set");
  ConceptVector out = concept_vec;
  for (const auto& e : edits.edits) {
    if (e.index >= out.values.size()) {
      throw InvalidIntervention("edit index " + std::to_string(e.index) + " out of range");
    }
    if (!std::isfinite(e.value)) throw InvalidIntervention("edit value is not finite");
    if (e.mode == EditSpec::Mode::set) {
      out.values[e.index] = e.value;
    } else {
      out.values[e.index] *= e.value;
    }
  }
  if (out.values == concept_vec.values) throw InvalidIntervention("edits leave the concept unchanged");
  return out;
}

ClefModel::ClefModel(ModelConfig config, ConditionRegistry registry, std::uint64_t seed)
    : SequenceModel(std::move(config), std::move(registry), seed) {
  const double unit = unit_concept_preactivation();
  // Start near c = 1 so an untrained model behaves like persistence.
  Linear& out = encoder_->output_layer();
  for (double& w : out.weight().mutable_data()) w *= 0.1;
  for (double& b : out.bias().mutable_data()) b = 1.0;
  if (config_.ffn_enabled) {
    ffn_ = Linear(config_.hidden_dim, config_.variables, init_rng_, "concept.ffn");
    for (double& w : ffn_->weight().mutable_data()) w *= 0.1;
    for (double& b : ffn_->bias().mutable_data()) b = unit;
    for (double& b : adapter_.bias().mutable_data()) b = 1.0;
  } else {
    for (double& b : adapter_.bias().mutable_data()) b = unit;
  }
}

ad::Tensor ClefModel::concepts_from(const Embeddings& e) const {
  if (unit_concepts_) return ad::Tensor::ones({e.hidden.rows(), config_.variables});
  return encode_concept(e.hidden, e.delta, e.condition, ffn_ ? &*ffn_ : nullptr);
}

ad::Tensor ClefModel::concepts(const PairBatch& batch, const ForwardContext& ctx) const {
  return concepts_from(embed(batch, ctx));
}

ad::Tensor ClefModel::head(const Embeddings& e, const PairBatch& batch, const ForwardContext&) const {
  return decode_concept(batch.last_value, concepts_from(e));
}

std::vector<std::vector<double>> ClefModel::decode_raw(const PairBatch& batch) const {
  ad::Tensor c = concepts(batch, {});
  std::vector<std::vector<double>> out(batch.pairs());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = decode_concept(batch.raw_last[i], c.row_vector(i));
  return out;
}

ad::ParameterList ClefModel::head_parameters() const {
  if (!ffn_) return {};
  return ffn_->parameters();
}

Forecast ClefModel::forward(const Trajectory& history, const std::vector<std::string>& condition,
                            const Timestamp& target, const EditSpec* edits) const {
  if (history.length() == 0) throw InvalidArgument("forward needs a non-empty history");
  const std::size_t origin = history.length() - 1;
  PairRequest request{&history, Query{origin, condition, target, std::nullopt}, nullptr};
  PairBatch batch = make_batch(std::span(&request, 1));
  ad::Tensor c = concepts(batch, {});
  Forecast f;
  f.concept_vec = ConceptVector{c.to_vector(), history.timestamps[origin], target};
  if (edits) f.concept_vec = intervene(f.concept_vec, *edits);
  f.prediction = decode_concept(history.values[origin], f.concept_vec.values);
  return f;
}

Trajectory ClefModel::rollout(const Trajectory& history, std::span<const std::vector<std::string>> conditions,
                              std::size_t steps, const EditSpec* edits) const {
  if (steps == 0) throw InvalidArgument("rollout needs at least one step");
  if (history.length() == 0) throw InvalidArgument("rollout needs a non-empty history");
  Trajectory running = history;
  Trajectory suffix;
  suffix.id = history.id + ":rollout";
  for (std::size_t k = 0; k < steps; ++k) {
    std::vector<std::string> cond;
    if (!conditions.empty()) {
      cond = conditions[std::min(k, conditions.size() - 1)];
    } else {
      cond = history.conditions.back();
    }
    const Timestamp next = next_grid_timestamp(running.timestamps.back(), running.length());
    Forecast f = forward(running, cond, next, edits);
    running.timestamps.push_back(next);
    running.values.push_back(f.prediction);
    running.conditions.push_back(cond);
    suffix.timestamps.push_back(next);
    suffix.values.push_back(std::move(f.prediction));
    suffix.conditions.push_back(std::move(cond));
  }
  return suffix;
}

NoConceptModel::NoConceptModel(ModelConfig config, ConditionRegistry registry, std::uint64_t seed)
    : SequenceModel(std::move(config), std::move(registry), seed) {
  const std::size_t h = config_.hidden_dim;
  hidden_ = Linear(2 * h, 2 * h, init_rng_, "head.hidden");
  output_ = Linear(2 * h, config_.variables, init_rng_, "head.output");
}

ad::Tensor NoConceptModel::head(const Embeddings& e, const PairBatch&, const ForwardContext&) const {
  const ad::Tensor parts[] = {e.hidden, ad::add(e.delta, e.condition)};
  return output_.forward(ad::gelu(hidden_.forward(ad::concat_cols(parts))));
}

ad::ParameterList NoConceptModel::head_parameters() const {
  ad::ParameterList out = hidden_.parameters();
  append(out, output_.parameters());
  return out;
}

std::unique_ptr<SequenceModel> make_model(const std::string& kind, const ModelConfig& config,
                                          ConditionRegistry registry, std::uint64_t seed) {
  if (kind == "clef") return std::make_unique<ClefModel>(config, std::move(registry), seed);
  if (kind == "no-concept") return std::make_unique<NoConceptModel>(config, std::move(registry), seed);
  throw InvalidArgument("unknown model kind '" + kind + "'");
}

std::vector<std::vector<double>> snapshot(const ad::ParameterList& params) {
  std::vector<std::vector<double>> out;
  for (const auto& p : params) out.push_back(p.tensor.to_vector());
  return out;
}

void restore(const ad::ParameterList& params, const std::vector<std::vector<double>>& values) {
  if (values.size() != params.size()) throw ShapeMismatch("parameter snapshot size mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    ad::Tensor t = params[i].tensor;
    auto dst = t.mutable_data();
    if (dst.size() != values[i].size()) throw ShapeMismatch("parameter snapshot shape mismatch");
    std::copy(values[i].begin(), values[i].end(), dst.begin());
  }
}

}  // namespace clef
