#include "clef/data/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "clef/condition_registry.hpp"
#include "clef/errors.hpp"

namespace clef::data {

void GeneratorConfig::validate() const {
  if (variables == 0) throw InvalidArgument("generator needs at least one variable");
  if (conditions == 0) throw InvalidArgument("generator needs at least one condition token");
  if (min_length < 2 || max_length < min_length) throw InvalidArgument("invalid trajectory length range");
  if (drift_range < 0 || drift_range > 0.5 || baseline_drift_range < 0 || baseline_drift_range > 0.5) {
    throw InvalidArgument("drift magnitudes must lie in [0, 0.5]");
  }
  if (!(none_probability >= 0 && none_probability < 1)) throw InvalidArgument("none_probability must be in [0, 1)");
  if (!(noise_sigma >= 0)) throw InvalidArgument("noise_sigma must be non-negative");
}

std::vector<double> DriftTable::log_rate(const std::vector<std::string>& condition) const {
  if (is_null_condition(condition)) return baseline;
  std::vector<double> out(baseline.size(), 0.0);
  std::size_t n = 0;
  for (const auto& token : condition) {
    if (token == kNullCondition) continue;
    auto it = std::find(tokens.begin(), tokens.end(), token);
    if (it == tokens.end()) throw UnknownCondition("generator has no drift for '" + token + "'");
    const auto& row = drift[static_cast<std::size_t>(it - tokens.begin())];
    for (std::size_t k = 0; k < out.size(); ++k) out[k] += row[k];
    ++n;
  }
  for (double& v : out) v /= static_cast<double>(n);
  return out;
}

std::string token_name(std::size_t k) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "cond%02zu", k);
  return buf;
}

std::mt19937_64 stream(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

DriftTable make_drift_table(const GeneratorConfig& config) {
  config.validate();
  auto rng = stream(config.seed, ~0ULL);
  std::uniform_real_distribution<double> token_drift(-config.drift_range, config.drift_range);
  std::uniform_real_distribution<double> base_drift(-config.baseline_drift_range, config.baseline_drift_range);
  DriftTable t;
  for (std::size_t s = 0; s < config.conditions; ++s) {
    t.tokens.push_back(token_name(s));
    std::vector<double> row(config.variables);
    for (double& d : row) d = token_drift(rng);
    t.drift.push_back(std::move(row));
  }
  t.baseline.resize(config.variables);
  for (double& d : t.baseline) d = base_drift(rng);
  return t;
}

namespace {

std::vector<std::string> draw_condition(const GeneratorConfig& config, const DriftTable& table,
                                        std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (u(rng) < config.none_probability) return {std::string(kNullCondition)};
  std::uniform_int_distribution<std::size_t> pick(0, table.tokens.size() - 1);
  return {table.tokens[pick(rng)]};
}

std::vector<double> advance(const std::vector<double>& x, const std::vector<double>& rate, double sigma,
                            std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> out(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double eta = sigma > 0 ? noise(rng) : 0.0;
    out[k] = x[k] * std::exp(rate[k] + eta);
  }
  return out;
}

void extend(Trajectory& t, std::size_t length, const GeneratorConfig& config, const DriftTable& table,
            std::mt19937_64& rng) {
  while (t.values.size() < length) {
    auto condition = draw_condition(config, table, rng);
    t.values.push_back(advance(t.values.back(), table.log_rate(condition), config.noise_sigma, rng));
    t.conditions.push_back(std::move(condition));
    t.timestamps.push_back(step_to_timestamp(t.timestamps.size()));
  }
}

std::size_t draw_length(std::size_t lo, std::size_t hi, std::mt19937_64& rng) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace

Trajectory generate_trajectory(const GeneratorConfig& config, const DriftTable& table, std::mt19937_64& rng,
                               std::string id) {
  config.validate();
  Trajectory t;
  t.id = std::move(id);
  const std::size_t length = draw_length(config.min_length, config.max_length, rng);
  std::lognormal_distribution<double> initial(0.0, 0.25);
  std::vector<double> x0(config.variables);
  for (double& v : x0) v = initial(rng);
  t.values.push_back(std::move(x0));
  t.conditions.push_back({std::string(kNullCondition)});
  t.timestamps.push_back(step_to_timestamp(0));
  extend(t, length, config, table, rng);
  return t;
}

CounterfactualPair generate_cf_pair(const GeneratorConfig& config, const DriftTable& table, std::size_t divergence,
                                    std::mt19937_64& rng, const std::string& id) {
  config.validate();
  GeneratorConfig original_config = config;
  original_config.min_length = std::max(config.min_length, divergence + 1);
  original_config.max_length = std::max(config.max_length, original_config.min_length);
  CounterfactualPair pair;
  pair.original = generate_trajectory(original_config, table, rng, "og-" + id);
  if (divergence < 1 || divergence >= pair.original.length()) {
    throw InvalidArgument("divergence step " + std::to_string(divergence) + " out of range");
  }
  pair.divergence = divergence;
  Trajectory cf = pair.original.prefix(divergence);
  cf.id = "cf-" + id;
  cf.cf_of = pair.original.id;
  cf.divergence = divergence;

  // The counterfactual condition has to differ from the original's at D.
  std::vector<std::string> condition;
  do {
    condition = draw_condition(config, table, rng);
  } while (condition == pair.original.conditions[divergence]);
  cf.values.push_back(advance(cf.values.back(), table.log_rate(condition), config.noise_sigma, rng));
  cf.conditions.push_back(std::move(condition));
  cf.timestamps.push_back(step_to_timestamp(divergence));

  const std::size_t length =
      draw_length(std::max(config.cf_min_length, divergence + 1), std::max(config.cf_max_length, divergence + 1), rng);
  extend(cf, length, config, table, rng);
  pair.counterfactual = std::move(cf);
  return pair;
}

std::vector<Trajectory> generate_dataset(const GeneratorConfig& config) {
  const DriftTable table = make_drift_table(config);
  std::vector<Trajectory> out;
  out.reserve(config.trajectories);
  for (std::size_t n = 0; n < config.trajectories; ++n) {
    auto rng = stream(config.seed, n);
    char id[32];
    std::snprintf(id, sizeof id, "traj-%05zu", n);
    out.push_back(generate_trajectory(config, table, rng, id));
  }
  return out;
}

std::vector<Trajectory> generate_cf_dataset(const GeneratorConfig& config) {
  const DriftTable table = make_drift_table(config);
  std::vector<Trajectory> out;
  out.reserve(2 * config.trajectories);
  for (std::size_t n = 0; n < config.trajectories; ++n) {
    auto rng = stream(config.seed, n);
    char id[32];
    std::snprintf(id, sizeof id, "%05zu", n);
    auto pair = generate_cf_pair(config, table, config.divergence, rng, id);
    out.push_back(std::move(pair.original));
    out.push_back(std::move(pair.counterfactual));
  }
  return out;
}

Split split_dataset(const std::vector<Trajectory>& trajectories, SplitFractions fractions, std::uint64_t seed,
                    bool zero_shot) {
  if (trajectories.empty()) throw InvalidArgument("cannot split an empty dataset");
  if (fractions.train < 0 || fractions.val < 0 || fractions.test < 0 ||
      std::abs(fractions.train + fractions.val + fractions.test - 1.0) > 1e-9) {
    throw InvalidArgument("split fractions must be non-negative and sum to 1");
  }
  std::mt19937_64 rng(seed);
  Split split;
  auto take = [&](std::vector<std::size_t> order, double f_train, double f_val, bool rest_to_test) {
    std::shuffle(order.begin(), order.end(), rng);
    const double n = static_cast<double>(order.size());
    const auto n_train = static_cast<std::size_t>(std::llround(f_train * n));
    const auto n_val = std::min(order.size() - n_train, static_cast<std::size_t>(std::llround(f_val * n)));
    for (std::size_t k = 0; k < order.size(); ++k) {
      const Trajectory& t = trajectories[order[k]];
      if (k < n_train) {
        split.train.push_back(t);
      } else if (k < n_train + n_val || !rest_to_test) {
        split.val.push_back(t);
      } else {
        split.test.push_back(t);
      }
    }
  };
  if (!zero_shot) {
    std::vector<std::size_t> order(trajectories.size());
    std::iota(order.begin(), order.end(), 0);
    take(order, fractions.train, fractions.val, true);
    return split;
  }
  std::vector<std::size_t> originals;
  for (std::size_t k = 0; k < trajectories.size(); ++k) {
    if (trajectories[k].cf_of) {
      split.test.push_back(trajectories[k]);
    } else {
      originals.push_back(k);
    }
  }
  const double kept = fractions.train + fractions.val;
  if (!originals.empty()) {
    const double f_train = kept > 0 ? fractions.train / kept : 1.0;
    take(originals, f_train, 1.0 - f_train, false);
  }
  return split;
}

}  // namespace clef::data
