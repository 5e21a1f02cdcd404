#include "clef/counterfactual.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "clef/autodiff/adam.hpp"
#include "clef/autodiff/ops.hpp"
#include "clef/autodiff/tape.hpp"
#include "clef/errors.hpp"
#include "clef/model.hpp"

namespace clef::cf {

namespace {

// Tumor series are daily.
Timestamp day_timestamp(std::size_t day) {
  return Timestamp{kReferenceYear, 1, 1, 0}.plus_hours(24 * static_cast<std::int64_t>(day));
}

}  // namespace

std::string to_string(HeadMode m) { return m == HeadMode::clef ? "clef" : "plain"; }
std::string to_string(Balancing b) { return b == Balancing::none ? "none" : "gradient-reversal"; }

HeadMode parse_head_mode(const std::string& text) {
  if (text == "clef") return HeadMode::clef;
  if (text == "plain") return HeadMode::plain;
  throw InvalidArgument("unknown head mode '" + text + "'");
}

Balancing parse_balancing(const std::string& text) {
  if (text == "none") return Balancing::none;
  if (text == "gradient-reversal" || text == "gr") return Balancing::gradient_reversal;
  throw InvalidArgument("unknown balancing '" + text + "'");
}

void OutcomeConfig::validate() const {
  if (hidden == 0 || condition_dim == 0 || layers == 0) throw InvalidArgument("outcome model sizes must be positive");
  if (!(dropout >= 0 && dropout < 1)) throw InvalidArgument("dropout must be in [0, 1)");
  if (!(lambda >= 0)) throw InvalidArgument("gradient reversal lambda must be non-negative");
}

std::vector<std::vector<double>> PersistenceOutcome::predict(const TumorTrajectory& patient,
                                                             std::span<const OutcomeRequest> requests) const {
  std::vector<std::vector<double>> out;
  for (const auto& r : requests) out.emplace_back(r.plan.size(), patient.volumes.at(r.origin));
  return out;
}

FactualSample factual_sample(const TumorTrajectory& patient, std::size_t origin, std::size_t tau) {
  if (tau == 0) throw InvalidArgument("empty treatment plan");
  if (origin >= patient.length()) throw InvalidArgument("origin beyond the observed trajectory");
  FactualSample s;
  s.patient = &patient;
  s.request.origin = origin;
  for (std::size_t r = 0; r < tau; ++r) {
    const std::size_t day = origin + r;
    const bool observed = day + 1 < patient.length();
    s.request.plan.push_back(observed ? patient.treatments[day] : Treatment::none);
    s.targets.push_back(observed ? patient.volumes[day + 1] : 0.0);
    s.weights.push_back(observed ? 1.0 : 0.0);
  }
  return s;
}

std::vector<FactualSample> factual_samples(const std::vector<TumorTrajectory>& cohort, std::size_t tau,
                                           std::size_t min_origin) {
  std::vector<FactualSample> out;
  for (const auto& p : cohort) {
    for (std::size_t t = min_origin; t + 1 < p.length(); ++t) out.push_back(factual_sample(p, t, tau));
  }
  return out;
}

OutcomePredictor::OutcomePredictor(OutcomeConfig config, ConditionRegistry registry, std::uint64_t seed)
    : config_(config), registry_(std::move(registry)), init_rng_(seed) {
  config_.validate();
  if (registry_.dim() != config_.condition_dim) throw ShapeMismatch("registry dimension differs from condition_dim");
  EncoderConfig enc;
  enc.kind = EncoderKind::recurrent;
  enc.input_dim = 1 + config_.condition_dim;
  enc.hidden_dim = config_.hidden;
  enc.layers = config_.layers;
  enc.heads = 1;
  enc.dropout = config_.dropout;
  encoder_ = make_encoder(enc, init_rng_);
  time_ = TimeEncoder(config_.hidden, init_rng_);
  adapter_ = Linear(config_.condition_dim, config_.hidden, init_rng_, "cf.adapter");
  decoder_ = GruCell(1 + config_.condition_dim, config_.hidden, init_rng_, "cf.decoder");
  if (config_.head == HeadMode::clef) {
    ffn_ = Linear(config_.hidden, 1, init_rng_, "cf.concept.ffn");
    for (double& w : ffn_.weight().mutable_data()) w *= 0.1;
    ffn_.bias().mutable_data()[0] = unit_concept_preactivation();
  } else {
    plain_hidden_ = Linear(2 * config_.hidden, 2 * config_.hidden, init_rng_, "cf.plain.hidden");
    plain_out_ = Linear(2 * config_.hidden, 1, init_rng_, "cf.plain.output");
  }
  classifier_ = Linear(config_.hidden, 4, init_rng_, "cf.treatment_classifier");
}

std::string OutcomePredictor::kind() const {
  return to_string(config_.head) + (config_.balancing == Balancing::gradient_reversal ? "+gr" : "");
}

void OutcomePredictor::set_scale(double s) {
  if (!(s > 0) || !std::isfinite(s)) throw InvalidArgument("outcome scale must be positive");
  scale_ = s;
}

ad::Tensor OutcomePredictor::embed_condition(const std::vector<Treatment>& treatments) const {
  const std::size_t dz = config_.condition_dim;
  std::vector<double> z(treatments.size() * dz);
  for (std::size_t i = 0; i < treatments.size(); ++i) {
    const auto e = registry_.get(data::treatment_token(treatments[i]));
    std::copy(e.begin(), e.end(), z.begin() + static_cast<std::ptrdiff_t>(i * dz));
  }
  return ad::Tensor::matrix(treatments.size(), dz, std::move(z));
}

OutcomePredictor::Output OutcomePredictor::run(std::span<const FactualSample> samples,
                                               const ForwardContext& ctx) const {
  if (samples.empty()) throw InvalidArgument("empty outcome batch");
  const std::size_t tau = samples.front().request.plan.size();
  if (tau == 0) throw InvalidArgument("empty treatment plan");
  const std::size_t dz = config_.condition_dim;

  std::map<const TumorTrajectory*, std::size_t> column;
  std::vector<const TumorTrajectory*> patients;
  std::vector<std::size_t> needed;
  for (const auto& s : samples) {
    if (!s.patient) throw InvalidArgument("outcome sample without a patient");
    if (s.request.plan.size() != tau) throw ShapeMismatch("outcome batch mixes plan lengths");
    if (s.request.origin >= s.patient->length()) throw InvalidArgument("origin beyond the observed trajectory");
    auto [it, inserted] = column.emplace(s.patient, patients.size());
    if (inserted) {
      patients.push_back(s.patient);
      needed.push_back(0);
    }
    needed[it->second] = std::max(needed[it->second], s.request.origin + 1);
  }
  const std::size_t batch = patients.size();
  const std::size_t length = *std::max_element(needed.begin(), needed.end());

  std::vector<double> features(length * batch * (1 + dz), 0.0);
  std::vector<Timestamp> times(length * batch);
  for (std::size_t b = 0; b < batch; ++b) {
    const TumorTrajectory& p = *patients[b];
    for (std::size_t s = 0; s < length; ++s) {
      const std::size_t row = s * batch + b;
      times[row] = day_timestamp(std::min(s, needed[b] - 1));
      if (s >= needed[b]) continue;
      double* f = features.data() + row * (1 + dz);
      f[0] = p.volumes[s] / scale_;
      // Day s was reached under the treatment of day s - 1.
      const auto z = registry_.get(data::treatment_token(s == 0 ? Treatment::none : p.treatments[s - 1]));
      std::copy(z.begin(), z.end(), f + 1);
    }
  }
  SequenceBatch seq{length, batch, ad::Tensor::matrix(length * batch, 1 + dz, std::move(features)),
                    time_.encode(times)};
  const ad::Tensor all_states = encoder_->encode_all(seq, ctx);

  const std::size_t n = samples.size();
  std::vector<std::size_t> rows(n);
  std::vector<double> last(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = samples[i];
    rows[i] = s.request.origin * batch + column.at(s.patient);
    last[i] = s.patient->volumes[s.request.origin] / scale_;
  }
  Output out;
  out.states = ad::gather_rows(all_states, rows);
  const ad::Tensor probe = config_.balancing == Balancing::gradient_reversal
                               ? ad::gradient_reversal(out.states, config_.lambda)
                               : out.states.detach();
  out.logits = classifier_.forward(probe);

  const ad::Tensor last_value = ad::Tensor::matrix(n, 1, last);
  ad::Tensor state = out.states;
  ad::Tensor previous = last_value;
  std::vector<ad::Tensor> steps;
  std::vector<Treatment> step_plan(n);
  std::vector<Timestamp> from(n), to(n);
  for (std::size_t r = 0; r < tau; ++r) {
    if (r > 0) {
      for (std::size_t i = 0; i < n; ++i) step_plan[i] = samples[i].request.plan[r - 1];
      const ad::Tensor parts[] = {previous, embed_condition(step_plan)};
      state = decoder_.step(decoder_.project_inputs(ad::concat_cols(parts)), state);
    }
    for (std::size_t i = 0; i < n; ++i) {
      step_plan[i] = samples[i].request.plan[r];
      from[i] = day_timestamp(samples[i].request.origin + r);
      to[i] = day_timestamp(samples[i].request.origin + r + 1);
    }
    const ad::Tensor timed = ad::add(time_.delta(from, to), adapter_.forward(embed_condition(step_plan)));
    ad::Tensor prediction;
    if (config_.head == HeadMode::clef) {
      const ad::Tensor c = unit_concepts_ ? ad::Tensor::ones({n, 1}) : ad::gelu(ffn_.forward(ad::mul(state, timed)));
      prediction = ad::mul(c, config_.autoregressive ? previous : last_value);
    } else {
      const ad::Tensor parts[] = {state, timed};
      prediction = plain_out_.forward(ad::gelu(plain_hidden_.forward(ad::concat_cols(parts))));
    }
    steps.push_back(prediction);
    previous = prediction;
  }
  out.predictions = ad::concat_cols(steps);
  return out;
}

ad::Tensor OutcomePredictor::loss(std::span<const FactualSample> samples, const ForwardContext& ctx) const {
  const Output out = run(samples, ctx);
  const std::size_t tau = samples.front().request.plan.size();
  std::vector<double> targets, weights;
  std::vector<int> labels;
  targets.reserve(samples.size() * tau);
  for (const auto& s : samples) {
    if (s.targets.size() != tau || s.weights.size() != tau) throw ShapeMismatch("sample targets have the wrong length");
    for (std::size_t r = 0; r < tau; ++r) {
      targets.push_back(s.targets[r] / scale_);
      weights.push_back(s.weights[r]);
    }
    labels.push_back(static_cast<int>(s.request.plan.front()));
  }
  const ad::Tensor target = ad::Tensor::matrix(samples.size(), tau, std::move(targets));
  const ad::Tensor outcome = ad::weighted_mse_loss(out.predictions, target, weights);
  return ad::add(outcome, ad::softmax_cross_entropy(out.logits, labels));
}

double OutcomePredictor::treatment_accuracy(std::span<const FactualSample> samples) const {
  const Output out = run(samples, {});
  std::size_t hits = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto row = out.logits.row_vector(i);
    const auto best = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    if (best == static_cast<int>(samples[i].request.plan.front())) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(samples.size());
}

std::vector<std::vector<double>> OutcomePredictor::predict(const TumorTrajectory& patient,
                                                           std::span<const OutcomeRequest> requests) const {
  std::map<std::size_t, std::vector<std::size_t>> by_length;
  for (std::size_t i = 0; i < requests.size(); ++i) {
    if (requests[i].plan.empty()) throw InvalidArgument("empty treatment plan");
    by_length[requests[i].plan.size()].push_back(i);
  }
  std::vector<std::vector<double>> out(requests.size());
  for (const auto& [tau, members] : by_length) {
    std::vector<FactualSample> samples;
    for (std::size_t i : members) samples.push_back(FactualSample{&patient, requests[i], {}, {}});
    const ad::Tensor pred = run(samples, {}).predictions;
    for (std::size_t k = 0; k < members.size(); ++k) {
      auto row = pred.row_vector(k);
      for (double& v : row) v *= scale_;
      out[members[k]] = std::move(row);
    }
  }
  return out;
}

ad::ParameterList OutcomePredictor::outcome_parameters() const {
  ad::ParameterList out = encoder_->parameters();
  append(out, time_.parameters());
  append(out, adapter_.parameters());
  append(out, decoder_.parameters());
  if (config_.head == HeadMode::clef) {
    append(out, ffn_.parameters());
  } else {
    append(out, plain_hidden_.parameters());
    append(out, plain_out_.parameters());
  }
  return out;
}

ad::ParameterList OutcomePredictor::parameters() const {
  ad::ParameterList out = outcome_parameters();
  append(out, classifier_.parameters());
  return out;
}

void CfTrainConfig::validate() const {
  if (batch_size == 0 || origins_per_patient == 0 || tau == 0) throw InvalidArgument("train sizes must be positive");
  if (!(learning_rate > 0)) throw InvalidArgument("learning rate must be positive");
}

double outcome_scale(const std::vector<TumorTrajectory>& cohort) {
  double sum = 0;
  std::size_t n = 0;
  for (const auto& p : cohort) {
    for (double v : p.volumes) sum += v;
    n += p.length();
  }
  if (n == 0 || !(sum > 0)) throw InvalidArgument("cannot fit an outcome scale on an empty cohort");
  return sum / static_cast<double>(n);
}

namespace {

double mean_loss(const OutcomePredictor& model, const std::vector<FactualSample>& samples) {
  if (samples.empty()) return 0.0;
  // Outcome part only, in chunks to keep the batch moderate.
  double total = 0, weight = 0;
  constexpr std::size_t chunk = 4096;
  for (std::size_t start = 0; start < samples.size(); start += chunk) {
    const std::size_t end = std::min(samples.size(), start + chunk);
    std::span<const FactualSample> part(samples.data() + start, end - start);
    const auto pred = model.run(part, {}).predictions;
    for (std::size_t i = 0; i < part.size(); ++i) {
      for (std::size_t r = 0; r < part[i].targets.size(); ++r) {
        const double e = pred.at(i, r) - part[i].targets[r] / model.scale();
        total += part[i].weights[r] * e * e;
        weight += part[i].weights[r];
      }
    }
  }
  return weight > 0 ? total / weight : 0.0;
}

}  // namespace

CfTrainResult train_predictor(OutcomePredictor& model, const std::vector<TumorTrajectory>& train,
                              const std::vector<TumorTrajectory>& val, const CfTrainConfig& config,
                              const std::function<void(std::size_t, double, double)>& on_epoch) {
  config.validate();
  std::vector<std::vector<FactualSample>> per_patient(train.size());
  for (std::size_t n = 0; n < train.size(); ++n) {
    for (std::size_t t = 1; t + 1 < train[n].length(); ++t) per_patient[n].push_back(factual_sample(train[n], t, config.tau));
  }
  std::vector<std::size_t> usable;
  for (std::size_t n = 0; n < train.size(); ++n) {
    if (!per_patient[n].empty()) usable.push_back(n);
  }
  if (usable.empty()) throw InvalidArgument("no patient has a usable factual window");
  const auto val_samples = factual_samples(val, config.tau);

  const ad::ParameterList params = model.parameters();
  ad::AdamState adam(ad::AdamConfig{config.learning_rate});
  adam.init(params);
  std::mt19937_64 rng(config.seed);
  const ForwardContext ctx{true, &rng};

  CfTrainResult result;
  double best_val = val_samples.empty() ? INFINITY : mean_loss(model, val_samples);
  auto best = snapshot(params);
  std::size_t since_best = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::shuffle(usable.begin(), usable.end(), rng);
    double loss_sum = 0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start < usable.size(); start += config.batch_size) {
      const std::size_t end = std::min(usable.size(), start + config.batch_size);
      std::vector<FactualSample> batch;
      for (std::size_t b = start; b < end; ++b) {
        const auto& candidates = per_patient[usable[b]];
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        for (std::size_t k = 0; k < config.origins_per_patient; ++k) batch.push_back(candidates[pick(rng)]);
      }
      ad::Tape tape;
      ad::TapeScope scope(tape);
      double value = 0;
      try {
        ad::Tensor l = model.loss(batch, ctx);
        value = l.item();
        ad::backward(l, tape);
      } catch (const NonFiniteValue& e) {
        throw TrainingDiverged("epoch " + std::to_string(epoch) + ": " + e.what());
      }
      ad::adam_step(params, adam);
      loss_sum += value;
      ++steps;
    }
    const double train_loss = loss_sum / static_cast<double>(steps);
    const double val_loss = val_samples.empty() ? train_loss : mean_loss(model, val_samples);
    result.train_loss.push_back(train_loss);
    result.val_loss.push_back(val_loss);
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
    if (val_loss < best_val) {
      best_val = val_loss;
      best = snapshot(params);
      result.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  restore(params, best);
  return result;
}

std::vector<double> evaluate_counterfactual(const OutcomeModel& model, const std::vector<TumorTrajectory>& cohort,
                                            const std::vector<data::CounterfactualFuture>& futures,
                                            std::size_t tau_max, double max_volume) {
  if (tau_max == 0) throw InvalidArgument("tau_max must be at least 1");
  if (!(max_volume > 0)) throw InvalidArgument("normalizing volume must be positive");
  std::map<std::size_t, std::vector<const data::CounterfactualFuture*>> by_patient;
  for (const auto& f : futures) {
    if (f.plan.size() < tau_max || f.volumes.size() < f.origin + tau_max + 1) {
      throw InvalidArgument("counterfactual future lacks ground truth up to tau_max");
    }
    if (f.patient >= cohort.size()) throw InvalidArgument("future refers to an unknown patient");
    by_patient[f.patient].push_back(&f);
  }
  std::vector<double> sq(tau_max, 0.0);
  std::size_t count = 0;
  for (const auto& [patient, members] : by_patient) {
    std::vector<OutcomeRequest> requests;
    for (const auto* f : members) {
      requests.push_back(OutcomeRequest{f->origin, std::vector<Treatment>(f->plan.begin(), f->plan.begin() + static_cast<std::ptrdiff_t>(tau_max))});
    }
    const auto pred = model.predict(cohort[patient], requests);
    for (std::size_t k = 0; k < members.size(); ++k) {
      for (std::size_t r = 0; r < tau_max; ++r) {
        const double e = pred[k][r] - members[k]->volumes[members[k]->origin + r + 1];
        sq[r] += e * e;
      }
    }
    count += members.size();
  }
  if (count == 0) throw InvalidArgument("no counterfactual futures to evaluate");
  std::vector<double> out(tau_max);
  for (std::size_t r = 0; r < tau_max; ++r) out[r] = 100.0 * std::sqrt(sq[r] / static_cast<double>(count)) / max_volume;
  return out;
}

}  // namespace clef::cf
