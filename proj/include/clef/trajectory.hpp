#pragma once

#include <optional>
#include <string>
#include <vector>

#include "clef/temporal.hpp"

namespace clef {

/// Multivariate longitudinal sequence. `conditions[t]` holds the condition
/// tokens attached to step t, i.e. the conditions under which `values[t]` was
/// reached from `values[t-1]`.
struct Trajectory {
  std::string id;
  std::vector<Timestamp> timestamps;
  std::vector<std::vector<double>> values;  // length x variables
  std::vector<std::vector<std::string>> conditions;
  std::optional<std::string> cf_of;
  std::optional<std::size_t> divergence;

  std::size_t length() const { return values.size(); }
  std::size_t variables() const { return values.empty() ? 0 : values.front().size(); }

  /// Structural checks: aligned lengths, equal row widths, strictly increasing
  /// timestamps, finite values. Throws InvalidArgument.
  void validate() const;
  /// Steps [0, end).
  Trajectory prefix(std::size_t end) const;

  bool operator==(const Trajectory&) const = default;
};

/// True for an empty list or one made only of "none".
bool is_null_condition(const std::vector<std::string>& tokens);

/// Condition that governs the jump from step `from` to step `to`: the single
/// non-null condition list inside (from, to], or {"none"} when there is none.
/// Returns nullopt when two or more steps in the interval carry a condition,
/// since a single-jump query cannot express that.
std::optional<std::vector<std::string>> jump_condition(const Trajectory& t, std::size_t from, std::size_t to);

/// Grid trajectory builder used by the generators.
Trajectory make_grid_trajectory(std::string id, std::vector<std::vector<double>> values,
                                std::vector<std::vector<std::string>> conditions);

}  // namespace clef
