#include <doctest.h>

#include <cmath>
#include <random>

#include "clef/data/synthetic.hpp"
#include "clef/errors.hpp"
#include "clef/evaluation.hpp"
#include "clef/metrics.hpp"
#include "clef/training.hpp"
#include "clef/var.hpp"

using namespace clef;

namespace {

using Matrix = std::vector<std::vector<double>>;

// Two-pass R^2 per column, averaged.
double r2_oracle(const Matrix& pred, const Matrix& target) {
  const std::size_t v = target.front().size();
  double total = 0;
  for (std::size_t k = 0; k < v; ++k) {
    double mean = 0;
    for (const auto& row : target) mean += row[k];
    mean /= static_cast<double>(target.size());
    double res = 0, tot = 0;
    for (std::size_t t = 0; t < target.size(); ++t) {
      res += (target[t][k] - pred[t][k]) * (target[t][k] - pred[t][k]);
      tot += (target[t][k] - mean) * (target[t][k] - mean);
    }
    total += 1 - res / tot;
  }
  return total / static_cast<double>(v);
}

/// Echoes the queried origin state plus a constant, to make protocol routing visible.
class OffsetForecaster final : public Forecaster {
 public:
  std::string kind() const override { return "offset"; }
  std::vector<std::vector<double>> predict(const Trajectory& t, std::span<const Query> queries) const override {
    std::vector<std::vector<double>> out;
    for (const auto& q : queries) {
      auto row = t.values[q.origin];
      for (double& v : row) v += 0.25;
      out.push_back(row);
    }
    return out;
  }
};

data::GeneratorConfig small_generator(std::uint64_t seed) {
  data::GeneratorConfig c;
  c.variables = 3;
  c.conditions = 3;
  c.trajectories = 30;
  c.min_length = 8;
  c.max_length = 14;
  c.cf_min_length = 12;
  c.cf_max_length = 14;
  c.divergence = 6;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("metric accumulator matches direct formulas") {
  const Matrix pred{{1.0, 2.0}, {2.0, 0.0}, {4.0, 1.0}};
  const Matrix target{{1.5, 2.0}, {2.0, 1.0}, {3.0, 3.0}};
  MetricAccumulator acc;
  for (std::size_t t = 0; t < 3; ++t) acc.add(pred[t], target[t]);
  const Metrics m = acc.overall();
  CHECK(m.count == 6);
  CHECK(m.mae == doctest::Approx((0.5 + 0 + 0 + 1 + 1 + 2) / 6.0));
  CHECK(m.rmse == doctest::Approx(std::sqrt((0.25 + 0 + 0 + 1 + 1 + 4) / 6.0)));
  REQUIRE(m.r2);
  CHECK(*m.r2 == doctest::Approx(r2_oracle(pred, target)));
  CHECK(acc.variable(1).mae == doctest::Approx(1.0));
  MetricAccumulator a, b;
  a.add(pred[0], target[0]);
  b.add(pred[1], target[1]);
  b.add(pred[2], target[2]);
  a.merge(b);
  CHECK(a.overall().rmse == doctest::Approx(m.rmse));
  CHECK_THROWS_AS(acc.add(pred[0], std::vector<double>{1.0}), ShapeMismatch);
}

TEST_CASE("r2 is one for a perfect fit and missing without variance") {
  std::mt19937_64 rng(1);
  Matrix x(10, std::vector<double>(3));
  for (auto& row : x)
    for (double& v : row) v = std::normal_distribution<double>()(rng);
  CHECK(*r2(x, x) == doctest::Approx(1.0));
  Matrix flat(5, std::vector<double>{2.0});
  CHECK_FALSE(r2(flat, flat).has_value());
  Matrix mean_pred(10, std::vector<double>(3, 0.0));
  for (std::size_t k = 0; k < 3; ++k) {
    double m = 0;
    for (const auto& row : x) m += row[k];
    for (auto& row : mean_pred) row[k] = m / 10;
  }
  CHECK(*r2(mean_pred, x) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK_THROWS_AS(r2(x, Matrix(9, std::vector<double>(3))), ShapeMismatch);
}

TEST_CASE("trajectory r2 truncates to the overlap and can be symmetric") {
  const Matrix a{{1, 0}, {2, 1}, {3, 0}, {9, 9}};
  const Matrix b{{1.1, 0}, {2.2, 1}, {2.7, 0}};
  const Matrix a3(a.begin(), a.begin() + 3);
  CHECK(*trajectory_r2(a, b) == doctest::Approx(r2_oracle(a3, b)));
  CHECK(*trajectory_r2(a, b, true) == doctest::Approx(0.5 * (r2_oracle(a3, b) + r2_oracle(b, a3))));
  const Matrix wide{{1, 5, 7}, {2, 6, 1}};
  const Matrix narrow{{1}, {2}};
  CHECK(*trajectory_r2(wide, narrow) == doctest::Approx(1.0));
  CHECK_THROWS_AS(trajectory_r2({}, narrow), InvalidArgument);
}

TEST_CASE("pair enumeration respects horizons and single-jump validity") {
  const Trajectory t = make_grid_trajectory("p", Matrix(6, {1.0}), {{"none"}, {"a"}, {"none"}, {"b"}, {"none"}, {"none"}});
  const auto pairs = enumerate_pairs({t}, 1, 10);
  for (const auto& p : pairs) {
    CHECK(jump_condition(t, p.origin, p.target).has_value());
    CHECK(p.condition == *jump_condition(t, p.origin, p.target));
  }
  // Brute-force count of valid pairs.
  std::size_t expected = 0;
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = i + 1; j < 6; ++j) expected += jump_condition(t, i, j).has_value();
  CHECK(pairs.size() == expected);
  CHECK(enumerate_pairs({t}, 1, 1).size() == 5);
  for (const auto& p : enumerate_pairs({t}, 2, 3)) {
    CHECK(p.horizon() >= 2);
    CHECK(p.horizon() <= 3);
  }
  CHECK_THROWS_AS(enumerate_pairs({t}, 0, 2), InvalidHorizon);
}

TEST_CASE("delayed evaluation at horizon one is the immediate protocol") {
  const auto data = data::generate_dataset(small_generator(2));
  const OffsetForecaster model;
  const auto a = evaluate_immediate(model, data);
  const auto b = evaluate_delayed(model, data, 1);
  CHECK(a.overall.mae == b.overall.mae);
  CHECK(a.overall.rmse == b.overall.rmse);
  CHECK(a.predictions == b.predictions);
  const auto d = evaluate_delayed(model, data, 5);
  CHECK(d.per_horizon.begin()->first == 2);
  CHECK(d.per_horizon.rbegin()->first == 5);
  CHECK_THROWS_AS(evaluate_delayed(model, data, 0), InvalidHorizon);
}

TEST_CASE("persistence scores equal hand-computed immediate errors") {
  const Trajectory t = make_grid_trajectory("x", {{1.0}, {3.0}, {2.0}}, {{"none"}, {"none"}, {"a"}});
  const auto r = evaluate_immediate(PersistenceForecaster(), {t});
  CHECK(r.overall.mae == doctest::Approx(1.5));
  CHECK(r.overall.rmse == doctest::Approx(std::sqrt(2.5)));
  CHECK(r.per_horizon.at(1).count == 2);
}

TEST_CASE("zero-shot evaluation predicts from the shared prefix and guards leakage") {
  auto records = data::generate_cf_dataset(small_generator(3));
  std::vector<Trajectory> cfs;
  for (const auto& t : records)
    if (t.cf_of) cfs.push_back(t);
  const auto r = evaluate_zero_shot_cf(PersistenceForecaster(), cfs, {});
  CHECK(r.horizon_label == "step");
  CHECK(r.per_horizon.begin()->first == 6);
  // Persistence from step D-1: the step-D bucket MAE equals the mean jump size.
  MetricAccumulator acc;
  for (const auto& t : cfs) acc.add(t.values[5], t.values[6]);
  CHECK(r.per_horizon.at(6).mae == doctest::Approx(acc.overall().mae));
  CHECK_THROWS_AS(evaluate_zero_shot_cf(PersistenceForecaster(), cfs, {cfs[3].id}), DataLeakage);
  CHECK_THROWS_AS(evaluate_zero_shot_cf(PersistenceForecaster(), {records[0]}, {}), InvalidArgument);
}

TEST_CASE("normalization scale is the mean absolute value") {
  const Trajectory a = make_grid_trajectory("a", {{1.0, 0.0}, {-3.0, 0.0}}, {{"none"}, {"none"}});
  const Trajectory b = make_grid_trajectory("b", {{2.0, 0.0}}, {{"none"}});
  CHECK(fit_scale({a, b}) == std::vector<double>{2.0, 1.0});
  CHECK_THROWS_AS(fit_scale({}), InvalidArgument);
}

TEST_CASE("var recovers known coefficients from noiseless data") {
  const std::vector<double> a{0.5, 0.2, -0.1, 0.8};
  const std::vector<double> c{0.1, -0.2};
  std::mt19937_64 rng(4);
  std::vector<Trajectory> train;
  for (int n = 0; n < 5; ++n) {
    Matrix x{{std::normal_distribution<double>()(rng), std::normal_distribution<double>()(rng)}};
    for (int s = 0; s < 12; ++s) {
      const auto& p = x.back();
      x.push_back({c[0] + a[0] * p[0] + a[1] * p[1], c[1] + a[2] * p[0] + a[3] * p[1]});
    }
    const std::vector<std::vector<std::string>> none(x.size(), {"none"});
    train.push_back(make_grid_trajectory("v" + std::to_string(n), x, none));
  }
  const VarModel m = fit_var(train, 1);
  CHECK_FALSE(m.regularized);
  for (std::size_t k = 0; k < 4; ++k) CHECK(m.lags[0][k] == doctest::Approx(a[k]).epsilon(1e-8));
  for (std::size_t k = 0; k < 2; ++k) CHECK(m.intercept[k] == doctest::Approx(c[k]).epsilon(1e-8));
  // Eigenvalues of [[0.5, 0.2], [-0.1, 0.8]]: 0.65 +- sqrt(0.0025) = 0.7, 0.6.
  CHECK(m.spectral_radius() == doctest::Approx(0.7).epsilon(1e-6));
  const auto f = forecast_var(m, std::span(train[0].values.data(), 3), 2);
  const auto& p = train[0].values[2];
  const double x0 = c[0] + a[0] * p[0] + a[1] * p[1];
  const double x1 = c[1] + a[2] * p[0] + a[3] * p[1];
  CHECK(f[0][0] == doctest::Approx(x0));
  CHECK(f[1][1] == doctest::Approx(c[1] + a[2] * x0 + a[3] * x1));
  CHECK_THROWS_AS(fit_var({train[0].prefix(2)}, 1), InvalidArgument);
}

TEST_CASE("var falls back to ridge on a rank-deficient design") {
  // Second variable is a copy of the first: collinear columns.
  Matrix x;
  for (int s = 0; s < 10; ++s) x.push_back({std::sin(0.3 * s), std::sin(0.3 * s)});
  const auto t = make_grid_trajectory("r", x, std::vector<std::vector<std::string>>(10, {"none"}));
  const VarModel m = fit_var({t}, 1);
  CHECK(m.regularized);
  for (double v : m.lags[0]) CHECK(std::isfinite(v));
}

TEST_CASE("var forecaster iterates to the target step") {
  VarModel m;
  m.order = 1;
  m.variables = 1;
  m.intercept = {0.0};
  m.lags = {{2.0}};
  const Trajectory t = make_grid_trajectory("g", {{1.0}, {3.0}}, {{"none"}, {"none"}});
  const VarForecaster f(m);
  const Query q{1, {"none"}, step_to_timestamp(4), 4};
  CHECK(f.predict(t, std::span(&q, 1)).front()[0] == 24.0);
  const Query bad{1, {"none"}, step_to_timestamp(4), std::nullopt};
  CHECK_THROWS_AS(f.predict(t, std::span(&bad, 1)), InvalidHorizon);
}

TEST_CASE("training reduces the loss and is deterministic") {
  auto gen = small_generator(5);
  gen.trajectories = 40;
  const auto data = data::generate_dataset(gen);
  const auto split = data::split_dataset(data, {}, 1);
  auto run = [&] {
    ModelConfig mc;
    mc.variables = 3;
    mc.condition_dim = 8;
    mc.encoder.layers = 1;
    mc.encoder.dropout = 0.0;
    auto model = make_model("clef", mc.resolved(), ConditionRegistry::hashed(8, 1), 7);
    model->set_scale(fit_scale(split.train));
    TrainConfig tc;
    tc.epochs = 6;
    tc.seed = 3;
    tc.horizon = 4;
    const auto result = train(*model, split.train, split.val, tc);
    return std::make_pair(result, snapshot(model->parameters()));
  };
  const auto [first, params_a] = run();
  const auto [second, params_b] = run();
  REQUIRE(first.curve.size() == 6);
  CHECK(first.curve.back().train_loss < first.curve.front().train_loss);
  CHECK(params_a == params_b);
  for (std::size_t e = 0; e < first.curve.size(); ++e) CHECK(first.curve[e].val_mae == second.curve[e].val_mae);
  TrainConfig bad;
  bad.learning_rate = 0;
  CHECK_THROWS_AS(bad.validate(), InvalidArgument);
}
