#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace clef {

struct Metrics {
  double mae = 0;
  double rmse = 0;
  std::optional<double> r2;  // missing when the target has no variance
  std::size_t count = 0;     // scored scalar entries
};

/// Streaming accumulator over (prediction, target) vectors.
class MetricAccumulator {
 public:
  explicit MetricAccumulator(std::size_t variables = 0) { reset(variables); }
  void reset(std::size_t variables);
  void add(std::span<const double> prediction, std::span<const double> target);
  void merge(const MetricAccumulator& other);

  Metrics overall() const;
  Metrics variable(std::size_t k) const;
  std::size_t variables() const { return sums_.size(); }
  std::size_t rows() const { return rows_; }

 private:
  struct Sums {
    double abs = 0, sq = 0, y = 0, yy = 0;
  };
  Metrics finish(std::span<const Sums> sums) const;

  std::vector<Sums> sums_;
  std::size_t rows_ = 0;
};

struct MetricReport {
  Metrics overall;
  std::vector<Metrics> per_variable;
  std::map<std::size_t, Metrics> per_horizon;  // horizon (or absolute step) -> metrics
  std::string horizon_label = "horizon";
  std::size_t predictions = 0;

  struct Row {
    std::string metric;
    std::string scope;
    std::optional<std::size_t> horizon;
    std::optional<double> value;
  };
  /// Flat {metric, scope, horizon, value} rows.
  std::vector<Row> rows(const std::vector<std::string>& variable_names = {}) const;
};

/// 1 - SS_res/SS_tot per column, averaged over columns with non-zero target
/// variance. Rows are time steps, columns are variables.
std::optional<double> r2(const std::vector<std::vector<double>>& prediction,
                         const std::vector<std::vector<double>>& target);

/// Treats `a` as a prediction of `b` over their shared steps and variables.
/// With `symmetric`, averages both directions.
std::optional<double> trajectory_r2(const std::vector<std::vector<double>>& a,
                                    const std::vector<std::vector<double>>& b, bool symmetric = false);

}  // namespace clef
