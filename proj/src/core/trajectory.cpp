#include "clef/trajectory.hpp"

#include <cmath>

#include "clef/condition_registry.hpp"
#include "clef/errors.hpp"

namespace clef {

void Trajectory::validate() const {
  const std::string where = "trajectory '" + id + "': ";
  if (id.empty()) throw InvalidArgument("trajectory without an id");
  if (values.empty()) throw InvalidArgument(where + "no steps");
  if (timestamps.size() != values.size() || conditions.size() != values.size()) {
    throw InvalidArgument(where + "timestamps, values and conditions differ in length");
  }
  const std::size_t v = values.front().size();
  if (v == 0) throw InvalidArgument(where + "no variables");
  for (std::size_t t = 0; t < values.size(); ++t) {
    if (values[t].size() != v) throw InvalidArgument(where + "ragged value rows");
    for (double x : values[t]) {
      if (!std::isfinite(x)) throw InvalidArgument(where + "non-finite value");
    }
    timestamps[t].validate();
    if (t > 0 && !(timestamps[t - 1] < timestamps[t])) {
      throw InvalidArgument(where + "timestamps not strictly increasing");
    }
    for (const auto& c : conditions[t]) {
      if (c.empty()) throw InvalidArgument(where + "empty condition token");
    }
  }
  if (divergence && (*divergence == 0 || *divergence >= values.size())) {
    throw InvalidArgument(where + "divergence step out of range");
  }
}

Trajectory Trajectory::prefix(std::size_t end) const {
  if (end == 0 || end > values.size()) throw InvalidArgument("prefix length out of range");
  Trajectory out;
  out.id = id;
  out.timestamps.assign(timestamps.begin(), timestamps.begin() + static_cast<std::ptrdiff_t>(end));
  out.values.assign(values.begin(), values.begin() + static_cast<std::ptrdiff_t>(end));
  out.conditions.assign(conditions.begin(), conditions.begin() + static_cast<std::ptrdiff_t>(end));
  out.cf_of = cf_of;
  if (divergence && *divergence < end) out.divergence = divergence;
  return out;
}

bool is_null_condition(const std::vector<std::string>& tokens) {
  for (const auto& c : tokens) {
    if (c != kNullCondition) return false;
  }
  return true;
}

std::optional<std::vector<std::string>> jump_condition(const Trajectory& t, std::size_t from, std::size_t to) {
  if (from >= to || to >= t.length()) throw InvalidArgument("jump interval out of range");
  const std::vector<std::string>* found = nullptr;
  for (std::size_t k = from + 1; k <= to; ++k) {
    if (is_null_condition(t.conditions[k])) continue;
    if (found) return std::nullopt;
    found = &t.conditions[k];
  }
  if (!found) return std::vector<std::string>{std::string(kNullCondition)};
  return *found;
}

Trajectory make_grid_trajectory(std::string id, std::vector<std::vector<double>> values,
                                std::vector<std::vector<std::string>> conditions) {
  Trajectory t;
  t.id = std::move(id);
  for (std::size_t i = 0; i < values.size(); ++i) t.timestamps.push_back(step_to_timestamp(i));
  t.values = std::move(values);
  t.conditions = std::move(conditions);
  return t;
}

}  // namespace clef
