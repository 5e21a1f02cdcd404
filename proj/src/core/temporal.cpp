#include "clef/temporal.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>

#include "clef/autodiff/ops.hpp"
#include "clef/errors.hpp"

namespace clef {

namespace {

std::chrono::year_month_day to_ymd(const Timestamp& t) {
  return std::chrono::year{t.year} / std::chrono::month{static_cast<unsigned>(t.month)} /
         std::chrono::day{static_cast<unsigned>(t.day)};
}

}  // namespace

bool Timestamp::valid() const {
  if (month < 1 || month > 12 || day < 1 || day > 31 || hour < 0 || hour > 23) return false;
  return to_ymd(*this).ok();
}

void Timestamp::validate() const {
  if (!valid()) throw InvalidArgument("invalid calendar timestamp " + iso());
}

std::int64_t Timestamp::hours_since_epoch() const {
  validate();
  const auto days = std::chrono::sys_days{to_ymd(*this)}.time_since_epoch().count();
  return static_cast<std::int64_t>(days) * 24 + hour;
}

Timestamp Timestamp::from_hours_since_epoch(std::int64_t hours) {
  std::int64_t days = hours / 24;
  std::int64_t hour = hours % 24;
  if (hour < 0) {
    hour += 24;
    days -= 1;
  }
  const std::chrono::sys_days sd{std::chrono::days{days}};
  const std::chrono::year_month_day ymd{sd};
  return Timestamp{static_cast<int>(ymd.year()), static_cast<int>(static_cast<unsigned>(ymd.month())),
                   static_cast<int>(static_cast<unsigned>(ymd.day())), static_cast<int>(hour)};
}

Timestamp Timestamp::plus_hours(std::int64_t hours) const {
  return from_hours_since_epoch(hours_since_epoch() + hours);
}

std::string Timestamp::iso() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:00", year, month, day, hour);
  return buf;
}

Timestamp Timestamp::parse(std::string_view text) {
  const std::string s(text);
  Timestamp t;
  int minutes = 0;
  char sep = 0;
  const int n = std::sscanf(s.c_str(), "%d-%d-%d%c%d:%d", &t.year, &t.month, &t.day, &sep,
                            &t.hour, &minutes);
  if (n < 5 || (sep != 'T' && sep != ' ')) {
    throw ParseError("malformed timestamp '" + s + "'");
  }
  if (!t.valid()) throw ParseError("invalid calendar timestamp '" + s + "'");
  return t;
}

Timestamp step_to_timestamp(std::size_t index) {
  const auto i = static_cast<std::int64_t>(index);
  Timestamp origin{kReferenceYear, 1, 1, 0};
  return origin.plus_hours(5 * i * (i + 1));
}

Timestamp next_grid_timestamp(const Timestamp& last, std::size_t length) {
  return last.plus_hours(10 * static_cast<std::int64_t>(length));
}

std::vector<double> sinusoidal_encoding(double position, std::size_t dim) {
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim; ++k) {
    const double exponent = static_cast<double>(2 * (k / 2)) / static_cast<double>(dim);
    const double angle = position / std::pow(10000.0, exponent);
    out[k] = (k % 2 == 0) ? std::sin(angle) : std::cos(angle);
  }
  return out;
}

TimeEncoder::TimeEncoder(std::size_t dim, std::mt19937_64& rng, double init_std)
    : dim_(dim),
      month_(ad::Tensor::randn({12, dim}, rng, init_std, true)),
      day_(ad::Tensor::randn({31, dim}, rng, init_std, true)),
      hour_(ad::Tensor::randn({24, dim}, rng, init_std, true)) {}

ad::Tensor TimeEncoder::encode(std::span<const Timestamp> times) const {
  std::vector<std::size_t> months, days, hours;
  std::vector<double> years;
  years.reserve(times.size() * dim_);
  for (const auto& t : times) {
    t.validate();
    months.push_back(static_cast<std::size_t>(t.month - 1));
    days.push_back(static_cast<std::size_t>(t.day - 1));
    hours.push_back(static_cast<std::size_t>(t.hour));
    auto s = sinusoidal_encoding(static_cast<double>(t.year - kReferenceYear), dim_);
    years.insert(years.end(), s.begin(), s.end());
  }
  ad::Tensor sinus = ad::Tensor::matrix(times.size(), dim_, std::move(years));
  ad::Tensor out = ad::add(sinus, ad::gather_rows(month_, months));
  out = ad::add(out, ad::gather_rows(day_, days));
  return ad::add(out, ad::gather_rows(hour_, hours));
}

ad::Tensor TimeEncoder::encode(const Timestamp& t) const { return encode(std::span(&t, 1)); }

ad::Tensor TimeEncoder::delta(std::span<const Timestamp> from, std::span<const Timestamp> to) const {
  if (from.size() != to.size()) throw ShapeMismatch("time delta: endpoint counts differ");
  return ad::sub(encode(to), encode(from));
}

ad::Tensor TimeEncoder::delta(const Timestamp& from, const Timestamp& to) const {
  return delta(std::span(&from, 1), std::span(&to, 1));
}

ad::ParameterList TimeEncoder::parameters() const {
  return {{"time.month", month_}, {"time.day", day_}, {"time.hour", hour_}};
}

}  // namespace clef
