#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "clef/trajectory.hpp"

namespace clef::data {

/// Multiplicative branching generator: x_t = x_{t-1} * exp(drift(s_t) + eta)
/// with eta ~ N(0, noise_sigma^2). Each step draws its condition from a
/// categorical that puts `none_probability` on "none" and spreads the rest
/// evenly over the K tokens.
struct GeneratorConfig {
  std::size_t variables = 20;
  std::size_t conditions = 8;
  std::size_t trajectories = 600;
  std::size_t min_length = 20;
  std::size_t max_length = 37;
  double drift_range = 0.05;           // token drifts ~ U(-r, r)
  double baseline_drift_range = 0.02;  // drift of "none" ~ U(-r, r)
  double none_probability = 0.7;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  // Counterfactual pairs.
  std::size_t divergence = 10;
  std::size_t cf_min_length = 20;
  std::size_t cf_max_length = 24;

  void validate() const;
};

/// Drift rows: one per token, plus the baseline used by "none".
struct DriftTable {
  std::vector<std::string> tokens;
  std::vector<std::vector<double>> drift;  // K x V
  std::vector<double> baseline;            // V

  /// Per-step log-rate under a condition list (mean over tokens; null -> baseline).
  std::vector<double> log_rate(const std::vector<std::string>& condition) const;
};

std::string token_name(std::size_t k);
DriftTable make_drift_table(const GeneratorConfig& config);

/// Independent RNG stream for trajectory `index` under `seed`.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index);

Trajectory generate_trajectory(const GeneratorConfig& config, const DriftTable& table, std::mt19937_64& rng,
                               std::string id);

struct CounterfactualPair {
  Trajectory original;
  Trajectory counterfactual;
  std::size_t divergence = 0;
};

/// The first `divergence` steps are copied from the original; step D gets a
/// different condition and the suffix is simulated afresh.
CounterfactualPair generate_cf_pair(const GeneratorConfig& config, const DriftTable& table, std::size_t divergence,
                                    std::mt19937_64& rng, const std::string& id);

std::vector<Trajectory> generate_dataset(const GeneratorConfig& config);
/// Alternating original / counterfactual records, `trajectories` pairs.
std::vector<Trajectory> generate_cf_dataset(const GeneratorConfig& config);

struct Split {
  std::vector<Trajectory> train;
  std::vector<Trajectory> val;
  std::vector<Trajectory> test;
};

struct SplitFractions {
  double train = 0.6;
  double val = 0.2;
  double test = 0.2;
};

/// Seeded random split. In zero-shot mode originals go to train/val (in the
/// train:val ratio) and every counterfactual goes to test.
Split split_dataset(const std::vector<Trajectory>& trajectories, SplitFractions fractions, std::uint64_t seed,
                    bool zero_shot = false);

}  // namespace clef::data
