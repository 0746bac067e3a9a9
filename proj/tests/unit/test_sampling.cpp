#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <unordered_map>
#include <vector>

#include "tmle/error.hpp"
#include "tmle/sampling.hpp"

using namespace tmle;

namespace {

// Unit k has feature k-1 and target y(k).
template <class F>
FinitePopulation toy(std::size_t n, F y) {
  FinitePopulation pop(Task::regression, 0, 1, "toy", 0);
  for (std::size_t k = 1; k <= n; ++k) {
    const std::vector<double> x{static_cast<double>(k - 1)};
    pop.push_back(unit_id(k), x, y(k));
  }
  return pop;
}

FinitePopulation linear_population(std::size_t n, std::uint64_t seed) {
  SuperPopulationSpec s;
  s.features = {NormalLaw{0, 1}};
  s.dependence = {DependenceKind::linear, 5.0, {2.0}, {}};
  s.noise_sd = 1.0;
  return realize_population(s, n, seed);
}

std::unordered_map<UnitId, double> targets(const FinitePopulation& pop) {
  std::unordered_map<UnitId, double> out;
  for (std::size_t i = 0; i < pop.size(); ++i) out[pop.id(i)] = pop.y0(i);
  return out;
}

struct Moments {
  double mean = 0, se = 0;
};

Moments moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  const double m = std::accumulate(v.begin(), v.end(), 0.0) / n;
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return {m, std::sqrt(ss / (n - 1) / n)};
}

}  // namespace

TEST_CASE("census and fixed-size SRSWOR") {
  const auto pop = linear_population(100, 1);
  const auto census = draw(Srswor{100}, pop, 3);
  CHECK(census.size() == 100);
  for (const auto& d : census.draws) CHECK(d.inclusion_probability == 1.0);
  CHECK(ht_total(census, targets(pop)) == doctest::Approx(true_total(pop)).epsilon(1e-12));

  const auto big = linear_population(10000, 2);
  const auto s = draw(Srswor{500}, big, 4);
  CHECK(s.size() == 500);
  for (const auto& d : s.draws) CHECK(d.inclusion_probability == 0.05);
  for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.draws[i - 1].unit < s.draws[i].unit);
  CHECK(draw(Srswor{500}, big, 4) == s);
  CHECK_THROWS_AS(draw(Srswor{101}, pop, 1), DesignError);
}

TEST_CASE("analytic inclusion probabilities") {
  const auto ten = toy(10, [](std::size_t) { return 1.0; });
  CHECK(inclusion_prob(Srswor{5}, ten, unit_id(3)) == 0.5);

  const auto sixteen = toy(16, [](std::size_t) { return 1.0; });
  const Stratified strat{0, {8.0}, {2, 3}};
  CHECK(inclusion_prob(strat, sixteen, unit_id(1)) == 0.25);
  CHECK(inclusion_prob(strat, sixteen, unit_id(16)) == 3.0 / 8.0);
  const auto ss = draw(strat, sixteen, 9);
  CHECK(ss.size() == 5);

  // Enumerate all 27 ordered draws of three units with replacement.
  const auto three = toy(3, [](std::size_t) { return 1.0; });
  int hits = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) hits += (a == 0 || b == 0 || c == 0);
  CHECK(inclusion_prob(Srswr{3}, three, unit_id(1)) == doctest::Approx(hits / 27.0).epsilon(1e-15));
  CHECK(hits == 19);
}

TEST_CASE("HT arithmetic") {
  Sample s;
  s.draws = {{unit_id(1), 0.5, 1, 0.0}, {unit_id(2), 0.25, 1, 0.0}};
  const std::vector<double> y{3.0, 1.0};
  CHECK(ht_total(s, y) == 10.0);
  s.draws[1].inclusion_probability = 0.0;
  CHECK_THROWS_AS(ht_total(s, y), DesignError);
}

TEST_CASE("SRSWR multiplicities") {
  const auto pop = linear_population(50, 3);
  const auto s = draw(Srswr{80}, pop, 5);
  std::size_t total = 0;
  for (const auto& d : s.draws) total += d.multiplicity;
  CHECK(total == 80);
  CHECK(s.draw_count == 80);
  CHECK(s.with_replacement);
}

TEST_CASE("HT and Hansen-Hurwitz unbiasedness") {
  const auto pop = linear_population(10000, 7);
  const auto y = targets(pop);
  const double truth = true_total(pop);
  std::vector<double> wor, wr;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    wor.push_back(ht_total(draw(Srswor{500}, pop, r), y));
    wr.push_back(ht_total(draw(Srswr{500}, pop, r + 100000), y));
  }
  const auto a = moments(wor);
  const auto b = moments(wr);
  CHECK(std::abs(a.mean - truth) < 3 * a.se);
  CHECK(std::abs(b.mean - truth) < 3 * b.se);
}

TEST_CASE("Poisson expansion sums estimate N") {
  const auto pop = toy(300, [](std::size_t) { return 1.0; });
  PoissonDesign design;
  for (std::size_t k = 0; k < 300; ++k) design.probabilities.push_back(0.1 + 0.8 * (k % 17) / 16.0);
  std::vector<double> sums;
  for (std::uint64_t r = 0; r < 2000; ++r) {
    const auto s = draw(design, pop, r);
    double t = 0;
    for (const auto& d : s.draws) t += 1.0 / d.inclusion_probability;
    sums.push_back(t);
  }
  const auto m = moments(sums);
  CHECK(std::abs(m.mean - 300.0) < 3 * m.se);
  CHECK(inclusion_prob(design, pop, unit_id(18)) == design.probabilities[17]);

  PoissonDesign bad;
  bad.probabilities.assign(300, 0.0);
  CHECK_THROWS_AS(draw(bad, pop, 1), DesignError);
}

TEST_CASE("nonresponse") {
  const auto pop = linear_population(10000, 11);
  const auto s = draw(Srswor{1000}, pop, 1);

  std::unordered_map<UnitId, double> ones, halves;
  for (const auto id : pop.ids()) {
    ones[id] = 1.0;
    halves[id] = 0.5;
  }
  CHECK(apply_nonresponse(s, ones, 2) == s);
  const auto kept = apply_nonresponse(s, halves, 2);
  CHECK(std::abs(static_cast<double>(kept.size()) - 500.0) <= 47.0);

  // Response rises with y, so respondents overstate the total.
  std::unordered_map<UnitId, double> tilted;
  for (std::size_t i = 0; i < pop.size(); ++i) tilted[pop.id(i)] = pop.y0(i) > 5.0 ? 0.9 : 0.3;
  const auto y = targets(pop);
  std::vector<double> est;
  for (std::uint64_t r = 0; r < 2000; ++r) est.push_back(ht_total(apply_nonresponse(draw(Srswor{500}, pop, r), tilted, r), y));
  const auto m = moments(est);
  CHECK(std::abs(m.mean - true_total(pop)) > 3 * m.se);

  std::unordered_map<UnitId, double> zero = ones;
  zero[s.draws[0].unit] = 0.0;
  CHECK_THROWS_AS(apply_nonresponse(s, zero, 1), ConfigError);
  CHECK_THROWS_AS(apply_nonresponse(s, {}, 1), ConfigError);
}
