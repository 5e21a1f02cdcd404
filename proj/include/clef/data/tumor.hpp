#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "clef/trajectory.hpp"

namespace clef::data {

/// Daily-step PK-PD tumor growth with confounded chemo/radio assignment.
/// Constants follow the setup commonly used by recurrent counterfactual
/// benchmarks; all of them are free parameters here.
struct TumorSimConfig {
  double gamma = 0.0;
  std::size_t train_count = 10000;
  std::size_t val_count = 1000;
  std::size_t test_count = 1000;
  std::size_t max_steps = 60;
  std::uint64_t seed = 0;

  double rho_mean = 7.00e-5, rho_std = 7.23e-3;
  double alpha_mean = 0.0398, alpha_std = 0.168;
  double alpha_beta_ratio = 10.0;
  double beta_c_mean = 0.028, beta_c_std = 0.0007;
  double carrying_capacity = 30.0;  // diameter in cm; K is the matching sphere volume
  double chemo_half_life = 1.0;     // days
  double chemo_dose = 5.0;
  double radio_dose = 2.0;          // Gy
  double noise_std = 0.01;
  std::size_t window = 15;          // trailing window for the mean diameter
  double max_diameter = 13.0;       // D_max; also defines V_max
  double offset_diameter = 6.5;     // policy centering
  double min_volume = 1.6701700790245659e-05;  // exp(-11)

  /// Zeroes every treatment coefficient (effect-free cohort).
  bool effect_free = false;

  void validate() const;
  double carrying_volume() const;
  double max_volume() const;
};

enum class Treatment : unsigned char { none = 0, chemo = 1, radio = 2, both = 3 };

std::string treatment_token(Treatment t);
Treatment treatment_from_token(const std::string& token);
inline bool has_chemo(Treatment t) { return (static_cast<unsigned>(t) & 1u) != 0; }
inline bool has_radio(Treatment t) { return (static_cast<unsigned>(t) & 2u) != 0; }
inline Treatment make_treatment(bool chemo, bool radio) {
  return static_cast<Treatment>((chemo ? 1u : 0u) | (radio ? 2u : 0u));
}

struct PatientParams {
  double rho = 0, alpha = 0, beta = 0, beta_c = 0;
  int stage = 0;
  double initial_volume = 0;
};

/// One simulated patient. `treatments[t]` is applied on day t and acts on
/// volumes[t + 1]. `noise` holds one pre-drawn draw per possible day so that
/// counterfactual re-runs see the same noise.
struct TumorTrajectory {
  std::string id;
  PatientParams params;
  std::vector<double> volumes;
  std::vector<Treatment> treatments;  // same length as volumes; the last entry is never applied
  std::vector<double> noise;          // max_steps entries
  bool died = false;
  bool recovered = false;

  std::size_t length() const { return volumes.size(); }
};

double diameter_of(double volume);

/// Draws the per-patient parameters and noise.
TumorTrajectory draw_patient(const TumorSimConfig& config, std::mt19937_64& rng, std::string id);

/// Runs the confounded policy for one patient. Throws SimulationDiverged on a
/// non-finite state.
void simulate_factual(const TumorSimConfig& config, TumorTrajectory& patient, std::mt19937_64& rng);

/// Volumes under an arbitrary treatment sequence with the patient's own
/// noise. The result has treatments.size() + 1 entries, or fewer when
/// `stop_at_boundary` ends the run at death/recovery; without it, the
/// boundaries are absorbing.
std::vector<double> simulate_under(const TumorSimConfig& config, const TumorTrajectory& patient,
                                   const std::vector<Treatment>& treatments, bool stop_at_boundary = false);

std::vector<TumorTrajectory> simulate_cohort(const TumorSimConfig& config, std::size_t count,
                                             std::uint64_t stream_offset = 0, const std::string& prefix = "pt");

struct TumorCohorts {
  std::vector<TumorTrajectory> train, val, test;
};
TumorCohorts simulate_cohorts(const TumorSimConfig& config);

/// Counterfactual future from prediction origin t: `plan[r]` is the treatment
/// on day t + r, and `volumes` holds the whole series, factual prefix
/// [0, t] included, followed by plan.size() simulated days.
struct CounterfactualFuture {
  std::size_t patient = 0;
  std::size_t origin = 0;
  std::size_t offset = 0;  // sliding offset, or draw index for random futures
  std::vector<Treatment> plan;
  std::vector<double> volumes;
};

/// For every origin t and offset o in [0, tau_max): a window where only day
/// t + o carries `event`. Throws InvalidArgument when t + tau_max exceeds the
/// day cap.
std::vector<CounterfactualFuture> make_single_sliding(const TumorSimConfig& config, const TumorTrajectory& patient,
                                                      std::size_t patient_index, std::size_t tau_max,
                                                      Treatment event = Treatment::both,
                                                      std::size_t min_origin = 1);

/// `n` futures per origin with independent Bernoulli(0.5) chemo and radio draws.
std::vector<CounterfactualFuture> make_random_trajectories(const TumorSimConfig& config,
                                                           const TumorTrajectory& patient,
                                                           std::size_t patient_index, std::size_t tau_max,
                                                           std::size_t n, std::mt19937_64& rng,
                                                           std::size_t min_origin = 1);

/// Dataset view: values = [[volume]], conditions[k] = treatment of day k - 1.
Trajectory to_trajectory(const TumorTrajectory& patient);

/// Spearman rank correlation between the trailing mean diameter and the
/// number of treatments assigned, over every (patient, day).
double confounding_spearman(const TumorSimConfig& config, const std::vector<TumorTrajectory>& cohort);

double spearman(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace clef::data
