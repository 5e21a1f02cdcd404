#include "clef/data/tumor.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <numeric>

#include "clef/condition_registry.hpp"
#include "clef/data/synthetic.hpp"
#include "clef/errors.hpp"

namespace clef::data {

namespace {

double sphere_volume(double diameter) { return std::numbers::pi / 6.0 * diameter * diameter * diameter; }

// Stage mix and initial diameter (mean, sd, lo, hi) per stage, in cm.
constexpr std::array<double, 5> kStageWeights = {1432, 128, 1306, 7248, 12840};
constexpr std::array<std::array<double, 4>, 5> kStageDiameters = {{
    {1.72, 4.70, 0.3, 5.0},
    {1.96, 1.63, 0.3, 13.0},
    {1.91, 9.40, 0.3, 13.0},
    {2.76, 6.87, 0.3, 13.0},
    {3.86, 8.82, 0.3, 13.0},
}};

double truncated_normal(std::mt19937_64& rng, double mean, double sd, double lo, double hi) {
  std::normal_distribution<double> n(mean, sd);
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double x = n(rng);
    if (x >= lo && x <= hi) return x;
  }
  throw SimulationDiverged("truncated normal sampler did not converge");
}

struct State {
  double volume = 0;
  double concentration = 0;
  bool absorbed = false;
  bool died = false;
};

// One Euler day. Returns the next volume clamped to [V_min, V_max].
void step(const TumorSimConfig& config, const PatientParams& p, double noise, Treatment treatment, State& s) {
  const double decay = std::exp(-std::numbers::ln2 / config.chemo_half_life);
  s.concentration = s.concentration * decay + (has_chemo(treatment) ? config.chemo_dose : 0.0);
  if (s.absorbed) return;
  const double d = has_radio(treatment) ? config.radio_dose : 0.0;
  const double rate = p.rho * std::log(config.carrying_volume() / s.volume) - p.beta_c * s.concentration -
                      (p.alpha * d + p.beta * d * d) + noise;
  const double next = s.volume * (1.0 + rate);
  if (!std::isfinite(next)) throw SimulationDiverged("tumor volume became non-finite");
  if (next > config.max_volume()) {
    s.volume = config.max_volume();
    s.absorbed = true;
    s.died = true;
  } else if (next < config.min_volume) {
    s.volume = config.min_volume;
    s.absorbed = true;
  } else {
    s.volume = next;
  }
}

double trailing_mean_diameter(const TumorSimConfig& config, const std::vector<double>& volumes, std::size_t t) {
  const std::size_t from = t + 1 > config.window ? t + 1 - config.window : 0;
  double sum = 0;
  for (std::size_t k = from; k <= t; ++k) sum += diameter_of(volumes[k]);
  return sum / static_cast<double>(t + 1 - from);
}

double assignment_probability(const TumorSimConfig& config, double mean_diameter) {
  const double z = config.gamma / config.max_diameter * (mean_diameter - config.offset_diameter);
  return 1.0 / (1.0 + std::exp(-z));
}

}  // namespace

void TumorSimConfig::validate() const {
  if (!(gamma >= 0)) throw InvalidArgument("gamma must be non-negative");
  if (train_count == 0 || val_count == 0 || test_count == 0) throw InvalidArgument("cohort counts must be positive");
  if (max_steps < 2) throw InvalidArgument("max_steps must be at least 2");
  if (window == 0) throw InvalidArgument("policy window must be positive");
  if (!(chemo_half_life > 0) || !(max_diameter > 0) || !(carrying_capacity > 0)) {
    throw InvalidArgument("tumor constants must be positive");
  }
  if (!(noise_std >= 0)) throw InvalidArgument("noise_std must be non-negative");
}

double TumorSimConfig::carrying_volume() const { return sphere_volume(carrying_capacity); }
double TumorSimConfig::max_volume() const { return sphere_volume(max_diameter); }

std::string treatment_token(Treatment t) {
  switch (t) {
    case Treatment::none: return std::string(kNullCondition);
    case Treatment::chemo: return "chemo";
    case Treatment::radio: return "radio";
    case Treatment::both: return "chemo+radio";
  }
  return std::string(kNullCondition);
}

Treatment treatment_from_token(const std::string& token) {
  if (token == kNullCondition) return Treatment::none;
  if (token == "chemo") return Treatment::chemo;
  if (token == "radio") return Treatment::radio;
  if (token == "chemo+radio") return Treatment::both;
  throw UnknownCondition("not a tumor treatment: '" + token + "'");
}

double diameter_of(double volume) { return std::cbrt(6.0 * volume / std::numbers::pi); }

TumorTrajectory draw_patient(const TumorSimConfig& config, std::mt19937_64& rng, std::string id) {
  config.validate();
  TumorTrajectory t;
  t.id = std::move(id);
  std::discrete_distribution<int> stage(kStageWeights.begin(), kStageWeights.end());
  t.params.stage = stage(rng);
  const auto& dia = kStageDiameters[static_cast<std::size_t>(t.params.stage)];
  t.params.initial_volume = sphere_volume(truncated_normal(rng, dia[0], dia[1], dia[2], dia[3]));
  const double inf = INFINITY;
  t.params.rho = truncated_normal(rng, config.rho_mean, config.rho_std, 0.0, inf);
  t.params.alpha = truncated_normal(rng, config.alpha_mean, config.alpha_std, 0.0, inf);
  t.params.beta = t.params.alpha / config.alpha_beta_ratio;
  t.params.beta_c = truncated_normal(rng, config.beta_c_mean, config.beta_c_std, 0.0, inf);
  if (config.effect_free) t.params.alpha = t.params.beta = t.params.beta_c = 0.0;
  std::normal_distribution<double> noise(0.0, config.noise_std);
  t.noise.resize(config.max_steps);
  for (double& e : t.noise) e = config.noise_std > 0 ? noise(rng) : 0.0;
  return t;
}

void simulate_factual(const TumorSimConfig& config, TumorTrajectory& patient, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  State s;
  s.volume = patient.params.initial_volume;
  patient.volumes.assign(1, s.volume);
  patient.treatments.clear();
  while (patient.volumes.size() < config.max_steps) {
    const std::size_t t = patient.volumes.size() - 1;
    const double p = assignment_probability(config, trailing_mean_diameter(config, patient.volumes, t));
    const bool chemo = u(rng) < p;
    const bool radio = u(rng) < p;
    const Treatment a = make_treatment(chemo, radio);
    patient.treatments.push_back(a);
    step(config, patient.params, patient.noise[t], a, s);
    patient.volumes.push_back(s.volume);
    if (s.absorbed) break;
  }
  patient.died = s.died;
  patient.recovered = s.absorbed && !s.died;
  patient.treatments.push_back(Treatment::none);
}

std::vector<double> simulate_under(const TumorSimConfig& config, const TumorTrajectory& patient,
                                   const std::vector<Treatment>& treatments, bool stop_at_boundary) {
  if (treatments.size() + 1 > config.max_steps || treatments.size() > patient.noise.size()) {
    throw InvalidArgument("treatment sequence exceeds the " + std::to_string(config.max_steps) + "-day cap");
  }
  State s;
  s.volume = patient.params.initial_volume;
  std::vector<double> out{s.volume};
  out.reserve(treatments.size() + 1);
  for (std::size_t t = 0; t < treatments.size(); ++t) {
    step(config, patient.params, patient.noise[t], treatments[t], s);
    out.push_back(s.volume);
    if (s.absorbed && stop_at_boundary) break;
  }
  return out;
}

std::vector<TumorTrajectory> simulate_cohort(const TumorSimConfig& config, std::size_t count,
                                             std::uint64_t stream_offset, const std::string& prefix) {
  std::vector<TumorTrajectory> out;
  out.reserve(count);
  for (std::size_t n = 0; n < count; ++n) {
    auto rng = stream(config.seed, stream_offset + n);
    char id[48];
    std::snprintf(id, sizeof id, "%s-%05zu", prefix.c_str(), n);
    auto patient = draw_patient(config, rng, id);
    simulate_factual(config, patient, rng);
    out.push_back(std::move(patient));
  }
  return out;
}

TumorCohorts simulate_cohorts(const TumorSimConfig& config) {
  config.validate();
  TumorCohorts c;
  c.train = simulate_cohort(config, config.train_count, 0, "train");
  c.val = simulate_cohort(config, config.val_count, 1'000'000'000ULL, "val");
  c.test = simulate_cohort(config, config.test_count, 2'000'000'000ULL, "test");
  return c;
}

namespace {

// Origins whose full window stays under the day cap.
std::size_t last_origin(const TumorSimConfig& config, const TumorTrajectory& patient, std::size_t tau_max) {
  if (tau_max == 0) throw InvalidArgument("tau_max must be at least 1");
  if (tau_max + 1 > config.max_steps) {
    throw InvalidArgument("window of " + std::to_string(tau_max) + " days exceeds the " +
                          std::to_string(config.max_steps) + "-day cap");
  }
  return std::min(patient.length() - 1, config.max_steps - 1 - tau_max);
}

CounterfactualFuture run_future(const TumorSimConfig& config, const TumorTrajectory& patient, std::size_t index,
                                std::size_t origin, std::size_t offset, std::vector<Treatment> plan) {
  std::vector<Treatment> schedule(patient.treatments.begin(),
                                  patient.treatments.begin() + static_cast<std::ptrdiff_t>(origin));
  schedule.insert(schedule.end(), plan.begin(), plan.end());
  CounterfactualFuture f;
  f.patient = index;
  f.origin = origin;
  f.offset = offset;
  f.plan = std::move(plan);
  f.volumes = simulate_under(config, patient, schedule);
  return f;
}

}  // namespace

std::vector<CounterfactualFuture> make_single_sliding(const TumorSimConfig& config, const TumorTrajectory& patient,
                                                      std::size_t patient_index, std::size_t tau_max,
                                                      Treatment event, std::size_t min_origin) {
  const std::size_t last = last_origin(config, patient, tau_max);
  std::vector<CounterfactualFuture> out;
  for (std::size_t t = min_origin; t <= last; ++t) {
    for (std::size_t o = 0; o < tau_max; ++o) {
      std::vector<Treatment> plan(tau_max, Treatment::none);
      plan[o] = event;
      out.push_back(run_future(config, patient, patient_index, t, o, std::move(plan)));
    }
  }
  return out;
}

std::vector<CounterfactualFuture> make_random_trajectories(const TumorSimConfig& config,
                                                           const TumorTrajectory& patient,
                                                           std::size_t patient_index, std::size_t tau_max,
                                                           std::size_t n, std::mt19937_64& rng,
                                                           std::size_t min_origin) {
  if (n == 0) throw InvalidArgument("need at least one random future");
  const std::size_t last = last_origin(config, patient, tau_max);
  std::bernoulli_distribution coin(0.5);
  std::vector<CounterfactualFuture> out;
  for (std::size_t t = min_origin; t <= last; ++t) {
    for (std::size_t k = 0; k < n; ++k) {
      std::vector<Treatment> plan(tau_max);
      for (auto& a : plan) {
        const bool chemo = coin(rng);
        const bool radio = coin(rng);
        a = make_treatment(chemo, radio);
      }
      out.push_back(run_future(config, patient, patient_index, t, k, std::move(plan)));
    }
  }
  return out;
}

Trajectory to_trajectory(const TumorTrajectory& patient) {
  Trajectory t;
  t.id = patient.id;
  for (std::size_t k = 0; k < patient.length(); ++k) {
    t.timestamps.push_back(step_to_timestamp(k));
    t.values.push_back({patient.volumes[k]});
    t.conditions.push_back({k == 0 ? std::string(kNullCondition) : treatment_token(patient.treatments[k - 1])});
  }
  return t;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) throw InvalidArgument("spearman needs two equal series of length >= 2");
  auto ranks = [](const std::vector<double>& x) {
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) { return x[i] < x[j]; });
    std::vector<double> r(x.size());
    for (std::size_t i = 0; i < order.size();) {
      std::size_t j = i;
      while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]]) ++j;
      const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

double confounding_spearman(const TumorSimConfig& config, const std::vector<TumorTrajectory>& cohort) {
  std::vector<double> diameters, assigned;
  for (const auto& p : cohort) {
    for (std::size_t t = 0; t + 1 < p.length(); ++t) {
      diameters.push_back(trailing_mean_diameter(config, p.volumes, t));
      assigned.push_back((has_chemo(p.treatments[t]) ? 1.0 : 0.0) + (has_radio(p.treatments[t]) ? 1.0 : 0.0));
    }
  }
  return spearman(diameters, assigned);
}

}  // namespace clef::data
