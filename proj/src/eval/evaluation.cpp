#include "clef/evaluation.hpp"

#include <cmath>
#include <map>

#include "clef/errors.hpp"

namespace clef {

std::vector<PairIndex> enumerate_pairs(const std::vector<Trajectory>& trajectories, std::size_t min_horizon,
                                       std::size_t max_horizon) {
  if (min_horizon == 0 || max_horizon < min_horizon) throw InvalidHorizon("invalid horizon range");
  std::vector<PairIndex> out;
  for (std::size_t n = 0; n < trajectories.size(); ++n) {
    const Trajectory& t = trajectories[n];
    for (std::size_t i = 0; i + min_horizon < t.length(); ++i) {
      const std::size_t last = std::min(t.length() - 1, i + max_horizon);
      for (std::size_t j = i + min_horizon; j <= last; ++j) {
        auto condition = jump_condition(t, i, j);
        if (!condition) break;  // wider intervals contain the same two conditions
        out.push_back(PairIndex{n, i, j, std::move(*condition)});
      }
    }
  }
  return out;
}

Query make_query(const Trajectory& t, const PairIndex& pair) {
  return Query{pair.origin, pair.condition, t.timestamps.at(pair.target), pair.target};
}

MetricReport evaluate_pairs(const Forecaster& model, const std::vector<Trajectory>& trajectories,
                            const std::vector<PairIndex>& pairs) {
  std::map<std::size_t, std::vector<const PairIndex*>> by_trajectory;
  for (const auto& p : pairs) by_trajectory[p.trajectory].push_back(&p);

  MetricAccumulator total;
  std::map<std::size_t, MetricAccumulator> buckets;
  MetricReport report;
  for (const auto& [n, members] : by_trajectory) {
    const Trajectory& t = trajectories.at(n);
    std::vector<Query> queries;
    queries.reserve(members.size());
    for (const PairIndex* p : members) queries.push_back(make_query(t, *p));
    auto predictions = model.predict(t, queries);
    if (predictions.size() != queries.size()) throw ShapeMismatch("forecaster returned the wrong number of rows");
    report.predictions += predictions.size();
    for (std::size_t q = 0; q < members.size(); ++q) {
      const auto& target = t.values[members[q]->target];
      total.add(predictions[q], target);
      buckets[members[q]->horizon()].add(predictions[q], target);
    }
  }
  report.overall = total.overall();
  for (std::size_t k = 0; k < total.variables(); ++k) report.per_variable.push_back(total.variable(k));
  for (const auto& [h, acc] : buckets) report.per_horizon[h] = acc.overall();
  return report;
}

MetricReport evaluate_immediate(const Forecaster& model, const std::vector<Trajectory>& trajectories) {
  return evaluate_pairs(model, trajectories, enumerate_pairs(trajectories, 1, 1));
}

MetricReport evaluate_delayed(const Forecaster& model, const std::vector<Trajectory>& trajectories,
                              std::size_t horizon) {
  if (horizon == 0) throw InvalidHorizon("horizon must be at least 1");
  if (horizon == 1) return evaluate_immediate(model, trajectories);
  MetricReport report = evaluate_pairs(model, trajectories, enumerate_pairs(trajectories, 2, horizon));
  for (std::size_t h = 2; h <= horizon; ++h) report.per_horizon.try_emplace(h, MetricAccumulator().overall());
  return report;
}

MetricReport evaluate_zero_shot_cf(const Forecaster& model, const std::vector<Trajectory>& counterfactuals,
                                   const std::set<std::string>& train_ids) {
  MetricAccumulator total;
  std::map<std::size_t, MetricAccumulator> steps;
  MetricReport report;
  report.horizon_label = "step";
  for (const Trajectory& cf : counterfactuals) {
    if (!cf.cf_of || !cf.divergence) {
      throw InvalidArgument("trajectory '" + cf.id + "' is not a counterfactual");
    }
    if (train_ids.count(cf.id)) throw DataLeakage("counterfactual '" + cf.id + "' is in the training split");
    const std::size_t d = *cf.divergence;
    Trajectory history = cf.prefix(d);
    std::vector<Query> queries;
    for (std::size_t j = d; j < cf.length(); ++j) {
      queries.push_back(Query{d - 1, cf.conditions[d], cf.timestamps[j], j});
    }
    if (queries.empty()) continue;
    auto predictions = model.predict(history, queries);
    report.predictions += predictions.size();
    for (std::size_t q = 0; q < queries.size(); ++q) {
      const std::size_t j = d + q;
      total.add(predictions[q], cf.values[j]);
      steps[j].add(predictions[q], cf.values[j]);
    }
  }
  report.overall = total.overall();
  for (std::size_t k = 0; k < total.variables(); ++k) report.per_variable.push_back(total.variable(k));
  for (const auto& [j, acc] : steps) report.per_horizon[j] = acc.overall();
  return report;
}

std::vector<double> fit_scale(const std::vector<Trajectory>& train) {
  if (train.empty()) throw InvalidArgument("cannot fit normalization on an empty split");
  const std::size_t v = train.front().variables();
  std::vector<double> sum(v, 0.0);
  std::size_t n = 0;
  for (const auto& t : train) {
    if (t.variables() != v) throw ShapeMismatch("trajectories differ in variable count");
    for (const auto& row : t.values) {
      for (std::size_t k = 0; k < v; ++k) sum[k] += std::abs(row[k]);
      ++n;
    }
  }
  for (double& s : sum) {
    s /= static_cast<double>(n);
    if (!(s > 1e-12) || !std::isfinite(s)) s = 1.0;
  }
  return sum;
}

}  // namespace clef
