#include <doctest.h>

#include <cmath>
#include <numbers>

#include "clef/data/synthetic.hpp"
#include "clef/data/tumor.hpp"
#include "clef/errors.hpp"

using namespace clef;
using namespace clef::data;

namespace {

TumorSimConfig small(double gamma, std::uint64_t seed = 1) {
  TumorSimConfig c;
  c.gamma = gamma;
  c.train_count = 40;
  c.val_count = 10;
  c.test_count = 10;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("two simulated days match a hand transcription of the dynamics") {
  const auto c = small(0.0);
  auto rng = stream(3, 0);
  const auto p = draw_patient(c, rng, "p");
  const double v0 = p.params.initial_volume;
  const double k = std::numbers::pi / 6 * 30.0 * 30.0 * 30.0;
  const double decay = std::pow(0.5, 1.0 / c.chemo_half_life);
  const auto vols = simulate_under(c, p, {Treatment::both, Treatment::chemo});
  REQUIRE(vols.size() == 3);
  const double c0 = 5.0;
  const double rate0 = p.params.rho * std::log(k / v0) - p.params.beta_c * c0 -
                       (p.params.alpha * 2.0 + p.params.beta * 4.0) + p.noise[0];
  const double v1 = v0 * (1 + rate0);
  CHECK(vols[1] == doctest::Approx(v1).epsilon(1e-13));
  const double c1 = c0 * decay + 5.0;
  const double rate1 = p.params.rho * std::log(k / v1) - p.params.beta_c * c1 + p.noise[1];
  CHECK(vols[2] == doctest::Approx(v1 * (1 + rate1)).epsilon(1e-13));
  CHECK(p.params.beta == doctest::Approx(p.params.alpha / 10.0));
}

TEST_CASE("volumes stay inside the clamp and boundaries absorb") {
  const auto c = small(10.0);
  for (const auto& p : simulate_cohort(c, 60)) {
    CHECK(p.treatments.size() == p.length());
    for (double v : p.volumes) {
      CHECK(v >= c.min_volume);
      CHECK(v <= c.max_volume());
    }
    if (p.died) CHECK(p.volumes.back() == c.max_volume());
    if (p.recovered) CHECK(p.volumes.back() == c.min_volume);
    if (!p.died && !p.recovered) CHECK(p.length() == c.max_steps);
  }
  CHECK(diameter_of(c.max_volume()) == doctest::Approx(13.0));
}

TEST_CASE("factual volumes are reproduced by replaying the treatments") {
  const auto c = small(4.0);
  for (const auto& p : simulate_cohort(c, 20)) {
    const std::vector<Treatment> applied(p.treatments.begin(), p.treatments.end() - 1);
    CHECK(simulate_under(c, p, applied, true) == p.volumes);
  }
}

TEST_CASE("effect-free cohorts ignore every treatment") {
  auto c = small(4.0);
  c.effect_free = true;
  const auto cohort = simulate_cohort(c, 10);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto futures = make_single_sliding(c, cohort[i], i, 5);
    REQUIRE_FALSE(futures.empty());
    const auto& ref = futures.front();
    const std::vector<Treatment> nothing(ref.origin + 5, Treatment::none);
    std::vector<Treatment> with_prefix(cohort[i].treatments.begin(),
                                       cohort[i].treatments.begin() + static_cast<std::ptrdiff_t>(ref.origin));
    with_prefix.resize(ref.origin + 5, Treatment::none);
    CHECK(simulate_under(c, cohort[i], with_prefix) == simulate_under(c, cohort[i], nothing));
    for (const auto& f : futures)
      if (f.origin == ref.origin) CHECK(f.volumes == ref.volumes);
  }
}

TEST_CASE("sliding futures keep the factual prefix and place one event") {
  const auto c = small(2.0);
  const auto cohort = simulate_cohort(c, 10);
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    const auto& p = cohort[i];
    if (p.length() < 10) continue;
    for (const auto& f : make_single_sliding(c, p, i, 6)) {
      CHECK(f.plan.size() == 6);
      CHECK(f.volumes.size() == f.origin + 7);
      for (std::size_t s = 0; s <= f.origin; ++s) CHECK(f.volumes[s] == p.volumes[s]);
      for (std::size_t r = 0; r < 6; ++r) CHECK(f.plan[r] == (r == f.offset ? Treatment::both : Treatment::none));
    }
  }
  CHECK_THROWS_AS(make_single_sliding(c, cohort[0], 0, 60), InvalidArgument);
}

TEST_CASE("random futures draw fresh plans but share the prefix") {
  const auto c = small(2.0);
  const auto cohort = simulate_cohort(c, 5);
  std::mt19937_64 rng(5);
  const auto futures = make_random_trajectories(c, cohort[0], 0, 4, 3, rng);
  for (const auto& f : futures) {
    CHECK(f.plan.size() == 4);
    for (std::size_t s = 0; s <= f.origin; ++s) CHECK(f.volumes[s] == cohort[0].volumes[s]);
  }
}

TEST_CASE("spearman matches hand-ranked examples") {
  CHECK(spearman({1, 2, 3, 4}, {10, 20, 30, 40}) == doctest::Approx(1.0));
  CHECK(spearman({1, 2, 3, 4}, {4, 3, 2, 1}) == doctest::Approx(-1.0));
  // Ranks a = (1, 2, 3), b = (1.5, 1.5, 3): Pearson on ranks = sqrt(3)/2.
  CHECK(spearman({1, 2, 3}, {5, 5, 9}) == doctest::Approx(std::sqrt(3.0) / 2));
  CHECK(spearman({1, 1, 1}, {1, 2, 3}) == 0.0);
  CHECK_THROWS_AS(spearman({1}, {1}), InvalidArgument);
}

TEST_CASE("confounding strength increases with gamma") {
  double previous = -1;
  for (double gamma : {0.0, 2.0, 6.0}) {
    auto c = small(gamma, 9);
    const double rho = confounding_spearman(c, simulate_cohort(c, 150));
    if (gamma == 0.0) CHECK(std::abs(rho) < 0.05);
    CHECK(rho > previous);
    previous = rho;
  }
  CHECK(previous > 0.2);
}

TEST_CASE("dataset view shifts treatments onto the next step") {
  const auto c = small(4.0);
  const auto p = simulate_cohort(c, 1).front();
  const auto t = to_trajectory(p);
  t.validate();
  CHECK(t.variables() == 1);
  CHECK(t.conditions[0] == std::vector<std::string>{"none"});
  for (std::size_t k = 1; k < t.length(); ++k)
    CHECK(t.conditions[k] == std::vector<std::string>{treatment_token(p.treatments[k - 1])});
  CHECK(treatment_from_token("chemo+radio") == Treatment::both);
  CHECK_THROWS_AS(treatment_from_token("surgery"), UnknownCondition);
}
