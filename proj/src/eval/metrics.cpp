#include "clef/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "clef/errors.hpp"

namespace clef {

void MetricAccumulator::reset(std::size_t variables) {
  sums_.assign(variables, Sums{});
  rows_ = 0;
}

void MetricAccumulator::add(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size()) throw ShapeMismatch("metric: prediction and target differ in length");
  if (sums_.empty() && rows_ == 0) sums_.assign(target.size(), Sums{});
  if (target.size() != sums_.size()) throw ShapeMismatch("metric: variable count changed");
  for (std::size_t k = 0; k < target.size(); ++k) {
    const double r = target[k] - prediction[k];
    sums_[k].abs += std::abs(r);
    sums_[k].sq += r * r;
    sums_[k].y += target[k];
    sums_[k].yy += target[k] * target[k];
  }
  ++rows_;
}

void MetricAccumulator::merge(const MetricAccumulator& other) {
  if (other.rows_ == 0) return;
  if (rows_ == 0 && sums_.empty()) sums_.assign(other.sums_.size(), Sums{});
  if (other.sums_.size() != sums_.size()) throw ShapeMismatch("metric: cannot merge different widths");
  for (std::size_t k = 0; k < sums_.size(); ++k) {
    sums_[k].abs += other.sums_[k].abs;
    sums_[k].sq += other.sums_[k].sq;
    sums_[k].y += other.sums_[k].y;
    sums_[k].yy += other.sums_[k].yy;
  }
  rows_ += other.rows_;
}

Metrics MetricAccumulator::finish(std::span<const Sums> sums) const {
  Metrics m;
  m.count = rows_ * sums.size();
  if (m.count == 0) {
    m.mae = m.rmse = std::nan("");
    return m;
  }
  double abs = 0, sq = 0, r2_sum = 0;
  std::size_t r2_n = 0;
  const double n = static_cast<double>(rows_);
  for (const auto& s : sums) {
    abs += s.abs;
    sq += s.sq;
    const double ss_tot = s.yy - s.y * s.y / n;
    if (rows_ >= 2 && ss_tot > 1e-12 * std::max(1.0, s.yy)) {
      r2_sum += 1.0 - s.sq / ss_tot;
      ++r2_n;
    }
  }
  m.mae = abs / static_cast<double>(m.count);
  m.rmse = std::sqrt(sq / static_cast<double>(m.count));
  if (r2_n > 0) m.r2 = r2_sum / static_cast<double>(r2_n);
  return m;
}

Metrics MetricAccumulator::overall() const { return finish(sums_); }

Metrics MetricAccumulator::variable(std::size_t k) const {
  return finish(std::span<const Sums>(sums_).subspan(k, 1));
}

std::vector<MetricReport::Row> MetricReport::rows(const std::vector<std::string>& variable_names) const {
  std::vector<Row> out;
  auto push = [&](const Metrics& m, const std::string& scope, std::optional<std::size_t> h) {
    auto finite = [](double v) -> std::optional<double> {
      if (std::isfinite(v)) return v;
      return std::nullopt;
    };
    out.push_back({"mae", scope, h, finite(m.mae)});
    out.push_back({"rmse", scope, h, finite(m.rmse)});
    out.push_back({"r2", scope, h, m.r2});
    out.push_back({"count", scope, h, static_cast<double>(m.count)});
  };
  push(overall, "overall", std::nullopt);
  for (std::size_t k = 0; k < per_variable.size(); ++k) {
    const std::string name = k < variable_names.size() ? variable_names[k] : std::to_string(k);
    push(per_variable[k], "variable:" + name, std::nullopt);
  }
  for (const auto& [h, m] : per_horizon) push(m, horizon_label, h);
  return out;
}

std::optional<double> r2(const std::vector<std::vector<double>>& prediction,
                         const std::vector<std::vector<double>>& target) {
  if (prediction.size() != target.size()) throw ShapeMismatch("r2: series differ in length");
  if (target.size() < 2) throw InvalidArgument("r2 needs at least two points");
  MetricAccumulator acc;
  for (std::size_t t = 0; t < target.size(); ++t) acc.add(prediction[t], target[t]);
  return acc.overall().r2;
}

std::optional<double> trajectory_r2(const std::vector<std::vector<double>>& a,
                                    const std::vector<std::vector<double>>& b, bool symmetric) {
  const std::size_t steps = std::min(a.size(), b.size());
  if (steps == 0 || a.front().empty() || b.front().empty()) {
    throw InvalidArgument("trajectories share no steps or variables");
  }
  const std::size_t vars = std::min(a.front().size(), b.front().size());
  std::vector<std::vector<double>> pa(steps), pb(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    pa[t].assign(a[t].begin(), a[t].begin() + static_cast<std::ptrdiff_t>(vars));
    pb[t].assign(b[t].begin(), b[t].begin() + static_cast<std::ptrdiff_t>(vars));
  }
  auto forward = r2(pa, pb);
  if (!symmetric) return forward;
  auto backward = r2(pb, pa);
  if (!forward || !backward) return std::nullopt;
  return 0.5 * (*forward + *backward);
}

}  // namespace clef
