#include <doctest.h>

#include <cmath>
#include <set>

#include "clef/data/synthetic.hpp"
#include "clef/errors.hpp"

using namespace clef;
using namespace clef::data;

namespace {

GeneratorConfig small(std::uint64_t seed) {
  GeneratorConfig c;
  c.variables = 5;
  c.conditions = 4;
  c.trajectories = 50;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("drift table entries stay inside their ranges") {
  const auto c = small(1);
  const auto t = make_drift_table(c);
  REQUIRE(t.tokens.size() == 4);
  CHECK(t.tokens[0] == "cond00");
  for (const auto& row : t.drift)
    for (double d : row) CHECK(std::abs(d) <= c.drift_range);
  for (double d : t.baseline) CHECK(std::abs(d) <= c.baseline_drift_range);
  CHECK(t.log_rate({"none"}) == t.baseline);
  const auto mix = t.log_rate({"cond01", "cond03"});
  for (std::size_t k = 0; k < 5; ++k) CHECK(mix[k] == doctest::Approx(0.5 * (t.drift[1][k] + t.drift[3][k])));
  CHECK_THROWS_AS(t.log_rate({"cond09"}), UnknownCondition);
}

TEST_CASE("noise-free trajectories follow the multiplicative recursion exactly") {
  const auto c = small(2);
  const auto table = make_drift_table(c);
  for (const auto& t : generate_dataset(c)) {
    t.validate();
    CHECK(t.length() >= c.min_length);
    CHECK(t.length() <= c.max_length);
    CHECK(is_null_condition(t.conditions[0]));
    for (std::size_t s = 1; s < t.length(); ++s) {
      CHECK(t.timestamps[s] == step_to_timestamp(s));
      const auto rate = table.log_rate(t.conditions[s]);
      for (std::size_t k = 0; k < c.variables; ++k)
        CHECK(t.values[s][k] == doctest::Approx(t.values[s - 1][k] * std::exp(rate[k])).epsilon(1e-14));
    }
  }
}

TEST_CASE("condition frequencies match the configured none probability") {
  auto c = small(3);
  c.trajectories = 400;
  std::size_t none = 0, total = 0;
  for (const auto& t : generate_dataset(c)) {
    for (std::size_t s = 1; s < t.length(); ++s) {
      none += is_null_condition(t.conditions[s]);
      ++total;
    }
  }
  CHECK(static_cast<double>(none) / static_cast<double>(total) == doctest::Approx(0.7).epsilon(0.03));
}

TEST_CASE("generation is deterministic per seed") {
  CHECK(generate_dataset(small(4)) == generate_dataset(small(4)));
  CHECK_FALSE(generate_dataset(small(4)) == generate_dataset(small(5)));
}

TEST_CASE("counterfactual pairs share the prefix bit for bit and differ at divergence") {
  auto c = small(6);
  const auto records = generate_cf_dataset(c);
  REQUIRE(records.size() == 2 * c.trajectories);
  for (std::size_t n = 0; n < records.size(); n += 2) {
    const Trajectory& og = records[n];
    const Trajectory& cf = records[n + 1];
    REQUIRE(cf.cf_of == og.id);
    REQUIRE(cf.divergence == c.divergence);
    const std::size_t d = *cf.divergence;
    CHECK(cf.length() >= c.cf_min_length);
    CHECK(cf.length() <= c.cf_max_length);
    for (std::size_t s = 0; s < d; ++s) {
      CHECK(cf.values[s] == og.values[s]);
      CHECK(cf.conditions[s] == og.conditions[s]);
      CHECK(cf.timestamps[s] == og.timestamps[s]);
    }
    CHECK(cf.conditions[d] != og.conditions[d]);
    CHECK(cf.prefix(d).values == og.prefix(d).values);
    CHECK_FALSE(cf.prefix(d).divergence.has_value());
  }
}

TEST_CASE("random split sizes and disjointness") {
  auto c = small(7);
  c.trajectories = 100;
  const auto data = generate_dataset(c);
  const auto s = split_dataset(data, {}, 11);
  CHECK(s.train.size() == 60);
  CHECK(s.val.size() == 20);
  CHECK(s.test.size() == 20);
  std::set<std::string> ids;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (const auto& t : *part) ids.insert(t.id);
  CHECK(ids.size() == 100);
  CHECK_THROWS_AS(split_dataset(data, {0.5, 0.5, 0.5}, 1), InvalidArgument);
}

TEST_CASE("zero-shot split keeps every counterfactual in test") {
  auto c = small(8);
  c.trajectories = 40;
  const auto data = generate_cf_dataset(c);
  const auto s = split_dataset(data, {0.6, 0.2, 0.2}, 3, true);
  CHECK(s.test.size() == 40);
  for (const auto& t : s.test) CHECK(t.cf_of.has_value());
  CHECK(s.train.size() == 30);
  CHECK(s.val.size() == 10);
  for (const auto& t : s.train) CHECK_FALSE(t.cf_of.has_value());
}

TEST_CASE("jump condition picks the single active condition") {
  Trajectory t = make_grid_trajectory("j", std::vector<std::vector<double>>(6, {1.0}),
                                      {{"none"}, {"none"}, {"a"}, {"none"}, {"b"}, {"none"}});
  CHECK(jump_condition(t, 0, 1) == std::vector<std::string>{"none"});
  CHECK(jump_condition(t, 0, 3) == std::vector<std::string>{"a"});
  CHECK(jump_condition(t, 2, 3) == std::vector<std::string>{"none"});
  CHECK(jump_condition(t, 3, 5) == std::vector<std::string>{"b"});
  CHECK_FALSE(jump_condition(t, 1, 4).has_value());
  CHECK_THROWS_AS(jump_condition(t, 3, 3), InvalidArgument);
  CHECK_THROWS_AS(jump_condition(t, 0, 6), InvalidArgument);
}

TEST_CASE("generator configuration is validated") {
  auto c = small(9);
  c.none_probability = 1.0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = small(9);
  c.min_length = 1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = small(9);
  c.drift_range = 0.9;
  CHECK_THROWS_AS(make_drift_table(c), InvalidArgument);
}
