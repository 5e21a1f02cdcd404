#pragma once

#include <compare>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "clef/autodiff/tensor.hpp"

namespace clef {

/// Calendar timestamp at hour resolution.
struct Timestamp {
  int year = 2000;
  int month = 1;
  int day = 1;
  int hour = 0;

  bool valid() const;
  /// Throws InvalidArgument unless the date exists on the proleptic Gregorian calendar.
  void validate() const;

  std::int64_t hours_since_epoch() const;
  static Timestamp from_hours_since_epoch(std::int64_t hours);
  Timestamp plus_hours(std::int64_t hours) const;

  /// ISO-8601 truncated to hours, e.g. "2000-01-02T06:00".
  std::string iso() const;
  /// Accepts "YYYY-MM-DDTHH:MM" or "YYYY-MM-DDTHH"; minutes are dropped.
  static Timestamp parse(std::string_view text);

  auto operator<=>(const Timestamp&) const = default;
};

inline constexpr int kReferenceYear = 2000;

/// Benchmark grid: step 0 is 2000-01-01T00:00 and step i lies 10*i hours after step i-1.
Timestamp step_to_timestamp(std::size_t index);
/// Timestamp of the grid step that follows a history of `length` steps ending at `last`.
Timestamp next_grid_timestamp(const Timestamp& last, std::size_t length);

/// Alternating sin/cos positional encoding with base 10000.
std::vector<double> sinusoidal_encoding(double position, std::size_t dim);

/// h_t = sinusoid(year - 2000) + month[m] + day[d] + hour[h], with learned
/// month (12), day (31) and hour (24) tables.
class TimeEncoder {
 public:
  TimeEncoder() = default;
  TimeEncoder(std::size_t dim, std::mt19937_64& rng, double init_std = 0.1);

  std::size_t dim() const { return dim_; }

  ad::Tensor encode(std::span<const Timestamp> times) const;
  ad::Tensor encode(const Timestamp& t) const;
  /// Rows h_to - h_from.
  ad::Tensor delta(std::span<const Timestamp> from, std::span<const Timestamp> to) const;
  ad::Tensor delta(const Timestamp& from, const Timestamp& to) const;

  ad::ParameterList parameters() const;
  ad::Tensor& month_table() { return month_; }
  ad::Tensor& day_table() { return day_; }
  ad::Tensor& hour_table() { return hour_; }

 private:
  std::size_t dim_ = 0;
  ad::Tensor month_;
  ad::Tensor day_;
  ad::Tensor hour_;
};

}  // namespace clef
