#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "tmle/error.hpp"
#include "tmle/population.hpp"
#include "tmle/representativity.hpp"

using namespace tmle;

namespace {

SuperPopulationSpec linear_spec(double noise) {
  SuperPopulationSpec s;
  s.features = {NormalLaw{0, 1}, UniformLaw{0, 1}};
  s.dependence = {DependenceKind::linear, 10.0, {2.0, 1.0}, {}};
  s.noise_sd = noise;
  return s;
}

SuperPopulationSpec rare_spec() {
  SuperPopulationSpec s;
  s.task = Task::classification;
  s.classes = 2;
  s.features = {NormalLaw{0, 1}, NormalLaw{0, 1}, NormalLaw{0, 1}};
  s.dependence = {DependenceKind::logistic_threshold, 0.0, {2.0, 1.5, 1.0}, {}};
  return with_prevalence(s, {0.9978, 0.0022});
}

}  // namespace

TEST_CASE("empty realization") {
  const auto pop = realize_population(linear_spec(1.0), 0, 1);
  CHECK(pop.empty());
  CHECK(true_total(pop) == 0.0);
}

TEST_CASE("noiseless regression targets equal the mean function") {
  const auto spec = linear_spec(0.0);
  const auto pop = realize_population(spec, 500, 3);
  REQUIRE(pop.size() == 500);
  CHECK(pop.contiguous());
  for (std::size_t i = 0; i < pop.size(); ++i) {
    const auto x = pop.x0(i);
    CHECK(pop.y0(i) == 10.0 + 2.0 * x[0] + 1.0 * x[1]);
  }
}

TEST_CASE("rare-event prevalence is reproduced") {
  const auto spec = rare_spec();
  CHECK(spec.prevalence[1] == doctest::Approx(0.0022).epsilon(1e-5));
  const auto pop = realize_population(spec, 100000, 11);
  const double positives = true_total(pop);
  CHECK(std::abs(positives - 220.0) <= 45.0);

  std::size_t counted = 0;
  for (double y : pop.targets()) counted += y == 1.0;
  CHECK(positives == static_cast<double>(counted));
}

TEST_CASE("populations of different sizes share their prefix") {
  const auto spec = linear_spec(1.0);
  const auto small = realize_population(spec, 50, 9);
  const auto large = realize_population(spec, 200, 9);
  for (std::size_t i = 0; i < small.size(); ++i) {
    CHECK(small.id(i) == large.id(i));
    CHECK(small.y0(i) == large.y0(i));
  }
  const auto shifted = realize_population(spec, 10, 9, 1001);
  CHECK(raw(shifted.id(0)) == 1001);
  CHECK_FALSE(shifted.contiguous());
}

TEST_CASE("drift operators") {
  auto spec = linear_spec(1.0);
  spec.drift.kind = DriftKind::mean_shift;
  CHECK(apply_drift(spec, 0.0) == spec);

  const auto shifted = apply_drift(spec, 0.7);
  CHECK(std::get<NormalLaw>(shifted.features[0]) == NormalLaw{0.7, 1.0});
  CHECK(shifted.features[1] == spec.features[1]);

  auto feature0 = [](const FinitePopulation& p) { return p.features().column(0); };
  const auto base = feature0(realize_population(spec, 10000, 5));
  const double d_half = ks_distance(base, feature0(realize_population(apply_drift(spec, 0.5), 10000, 5)));
  const double d_two = ks_distance(base, feature0(realize_population(apply_drift(spec, 2.0), 10000, 5)));
  CHECK(d_two > d_half);

  auto rot = rare_spec();
  rot.drift.kind = DriftKind::theta_rotation;
  rot.drift.plane = {0, 1};
  const auto turned = apply_drift(rot, 0.3);
  const auto& a = rot.dependence.coefficients;
  const auto& b = turned.dependence.coefficients;
  CHECK(std::hypot(b[0], b[1]) == doctest::Approx(std::hypot(a[0], a[1])));
  CHECK(b[2] == a[2]);
  CHECK(turned.thresholds == rot.thresholds);

  CHECK_THROWS_AS(apply_drift(spec, -1.0), ConfigError);
  CHECK_THROWS_AS(apply_drift(linear_spec(1.0), 1.0), ConfigError);
}

TEST_CASE("true totals") {
  FinitePopulation pop(Task::regression, 0, 1, "toy", 0);
  const std::vector<double> x{0.0};
  pop.push_back(unit_id(1), x, 1.0);
  pop.push_back(unit_id(2), x, 2.0);
  pop.push_back(unit_id(3), x, 3.5);
  CHECK(true_total(pop) == 6.5);
  CHECK_THROWS_AS(pop.push_back(unit_id(2), x, 0.0), DataError);
  CHECK(pop.row_of(unit_id(2)) == 1);
  CHECK_THROWS_AS(pop.row_of(unit_id(99)), LookupError);
}

TEST_CASE("super-population validation") {
  auto s = linear_spec(1.0);
  s.dependence.coefficients = {1.0};
  CHECK_THROWS_AS(s.validate(), ConfigError);

  s = linear_spec(-1.0);
  CHECK_THROWS_AS(s.validate(), ConfigError);

  s = linear_spec(1.0);
  s.features[0] = UniformLaw{1, 0};
  CHECK_THROWS_AS(s.validate(), ConfigError);

  auto c = rare_spec();
  c.thresholds.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_THROWS_AS(with_prevalence(rare_spec(), {0.5, 0.6}), ConfigError);
}

TEST_CASE("subset and merge keep ids") {
  const auto spec = linear_spec(1.0);
  const auto a = realize_population(spec, 5, 1);
  const auto b = realize_population(spec, 3, 2, 6);
  const auto m = merge(b, a);
  CHECK(m.size() == 8);
  CHECK(m.contiguous());
  const std::vector<std::size_t> rows{1, 3};
  const auto s = subset(a, rows);
  CHECK(raw(s.id(0)) == 2);
  CHECK(raw(s.id(1)) == 4);
  CHECK_THROWS_AS(merge(a, a), DataError);
}
