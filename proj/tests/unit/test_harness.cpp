#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "tmle/error.hpp"
#include "tmle/pipeline.hpp"

using namespace tmle;
using namespace tmle::harness;

namespace {

const std::string kSmall = R"(schema_version = 1
seed = 99
replicates = 6
task = regression
population.features = [normal(0, 1), uniform(0, 1)]
population.intercept = 5
population.coefficients = [2, 1]
population.noise_sd = 1
population.size = 2000
drift.kind = mean_shift
drift.magnitude = 0.5
frame.undercoverage = 0.1
frame.undercoverage_tilt = 1
frame.overcoverage = 0.05
training.design.kind = srswor
training.design.size = 400
target.design.kind = srswor
target.design.size = 200
measurement.feature_sd = [0.5, 0]
measurement.omit = [1]
measurement.target_sd = 0.5
nonresponse.base = 0.8
nonresponse.tilt = -0.5
toggles.sampling = true
toggles.frame_coverage = true
toggles.nonresponse = true
toggles.feature_noise = true
)";

ObservedDataset labeled(const std::vector<double>& y, Task task = Task::classification) {
  ObservedDataset d;
  d.x = FeatureMatrix(1);
  d.task = task;
  d.classes = task == Task::classification ? 2 : 0;
  for (std::size_t i = 0; i < y.size(); ++i) d.push_back(unit_id(i + 1), std::vector<double>{double(i)}, y[i]);
  return d;
}

}  // namespace

TEST_CASE("holdout split") {
  std::vector<double> y(100);
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = double(i);
  const auto d = labeled(y, Task::regression);
  const auto [train, test] = split_train_test(d, 0.25, 5);
  CHECK(train.size() == 75);
  CHECK(test.size() == 25);
  std::set<UnitId> seen(train.x.ids().begin(), train.x.ids().end());
  for (auto id : test.x.ids()) CHECK(seen.insert(id).second);
  CHECK(seen.size() == 100);
  const auto again = split_train_test(d, 0.25, 5);
  CHECK(again.first == train);
  CHECK(again.second == test);
  CHECK_THROWS_AS(split_train_test(labeled({1.0, 0.0}), 0.1, 1), ConfigError);
  CHECK_THROWS_AS(split_train_test(d, 1.0, 1), ConfigError);
}

TEST_CASE("split parts are exchangeable") {
  rng::Stream s(3, 0);
  std::vector<double> y(200);
  for (auto& v : y) v = s.normal(10, 3);
  const auto d = labeled(y, Task::regression);
  const int reps = 1000;
  double s1 = 0, s2 = 0;
  for (int r = 0; r < reps; ++r) {
    const auto [a, b] = split_train_test(d, 0.3, static_cast<std::uint64_t>(r));
    double ma = 0, mb = 0;
    for (double v : a.y) ma += v / a.size();
    for (double v : b.y) mb += v / b.size();
    s1 += ma - mb;
    s2 += (ma - mb) * (ma - mb);
  }
  const double mean = s1 / reps, sd = std::sqrt(s2 / reps - mean * mean);
  CHECK(std::abs(mean) < 3 * sd / std::sqrt(double(reps)));
}

TEST_CASE("k-fold assignment is balanced") {
  const auto f = kfold_assignment(103, 5, 1);
  std::vector<int> sizes(5, 0);
  for (auto k : f) ++sizes[k];
  CHECK(*std::max_element(sizes.begin(), sizes.end()) - *std::min_element(sizes.begin(), sizes.end()) <= 1);
  CHECK(kfold_assignment(103, 5, 1) == f);
  CHECK_THROWS_AS(kfold_assignment(3, 5, 1), ConfigError);
}

TEST_CASE("metrics") {
  const auto d = labeled({1, 0, 1, 0, 1, 0});
  const std::vector<double> perfect{0.9, 0.1, 0.8, 0.2, 1.0, 0.0};
  const auto m = evaluate_scores(perfect, d);
  CHECK(m.accuracy() == 1.0);
  CHECK(m.f1() == 1.0);

  const std::vector<double> negative(6, 0.0);
  const auto n = evaluate_scores(negative, d);
  CHECK(n.accuracy() == 0.5);
  CHECK(n.recall() == 0.0);
  CHECK(n.precision() == 0.0);

  const std::vector<double> mixed{0.9, 0.6, 0.3, 0.2, 0.7, 0.5};
  const auto x = evaluate_scores(mixed, d);
  CHECK(x.tp + x.fp + x.tn + x.fn == 6.0);
  CHECK(std::abs(x.accuracy() - (x.tp + x.tn) / 6.0) <= 1e-12);
  CHECK(std::abs(x.precision() - x.tp / (x.tp + x.fp)) <= 1e-12);
  CHECK(std::abs(x.recall() - x.tp / (x.tp + x.fn)) <= 1e-12);
  const double p = x.precision(), r = x.recall();
  CHECK(std::abs(x.f1() - 2 * p * r / (p + r)) <= 1e-12);

  const auto reg = labeled({1.5, 2.5, -1.0}, Task::regression);
  const std::vector<double> exact{1.5, 2.5, -1.0};
  CHECK(evaluate_scores(exact, reg).rmse() == 0.0);
  const std::vector<double> off{2.5, 2.5, -1.0};
  CHECK(evaluate_scores(off, reg).rmse() == doctest::Approx(std::sqrt(1.0 / 3.0)));
  CHECK(evaluate_scores(off, reg).mean_error() == doctest::Approx(1.0 / 3.0));

  auto pooled = x;
  pooled += n;
  CHECK(pooled.n == 12);
  CHECK(pooled.tp == x.tp + n.tp);
  CHECK_THROWS_AS(evaluate_scores({}, ObservedDataset{}), DataError);
}

TEST_CASE("frames") {
  auto cfg = parse_scenario(kSmall);
  const auto pop = realize_population(cfg.population, 2000, 1);
  CHECK(materialize_frame(pop, cfg.population, FrameRules{}, 2).targets() == pop.targets());

  const auto frame = materialize_frame(pop, cfg.population, cfg.frame, 2);
  const auto cov = coverage_report(frame, pop);
  CHECK(cov.undercoverage > 0.05);
  CHECK(cov.undercoverage < 0.15);
  CHECK(cov.overcoverage == doctest::Approx(0.05).epsilon(0.02));
  for (auto id : frame.ids()) {
    if (!pop.contains(id)) CHECK(raw(id) > 2000);
  }
  // Tilted undercoverage drops high values more often.
  double kept_mean = 0, all_mean = 0;
  std::size_t kept = 0;
  for (std::size_t i = 0; i < pop.size(); ++i) {
    all_mean += pop.y0(i) / pop.size();
    if (frame.contains(pop.id(i))) {
      kept_mean += pop.y0(i);
      ++kept;
    }
  }
  CHECK(kept_mean / kept < all_mean);

  const auto prop = response_propensities(frame, {1.0, 2.0});
  for (const auto& [id, p] : prop) CHECK(p == 1.0);
}

TEST_CASE("configurations follow the toggles") {
  const auto cfg = parse_scenario(kSmall);
  const auto c = configurations(cfg);
  REQUIRE(c.size() == 6);
  CHECK(c[0].key == "baseline");
  CHECK(c[1].key == "only_feature_noise");
  CHECK(c[2].key == "only_frame_coverage");
  CHECK(c[3].key == "only_sampling");
  CHECK(c[4].key == "only_nonresponse");
  CHECK(c[5].key == "all");
  CHECK(c[5].toggles == cfg.toggles);
}

TEST_CASE("replicate determinism and error-free exactness") {
  const auto cfg = parse_scenario(kSmall);
  for (const auto& conf : configurations(cfg)) {
    const auto a = replicate_once(cfg, conf.toggles, 3);
    const auto b = replicate_once(cfg, conf.toggles, 3);
    CHECK(a.estimate == b.estimate);
    CHECK(a.estimate.point_estimate == a.estimate.synthetic_term + a.estimate.correction_term);
  }
  for (std::size_t r = 0; r < 5; ++r) {
    const auto e = replicate_once(cfg, Toggles{}, r);
    CHECK(std::abs(e.error()) <= 1e-9 * std::abs(e.true_total));
    CHECK(e.sample_size == 2000);
  }

  auto assisting = cfg;
  assisting.mode = EstimatorMode::assisting;
  const auto e = replicate_once(assisting, Toggles{}, 0);
  CHECK(std::abs(e.error()) <= 1e-9 * std::abs(e.true_total));

  auto kfold = cfg;
  kfold.split.kind = SplitKind::kfold;
  kfold.split.folds = 4;
  const auto k = replicate_once(kfold, Toggles{}.set(ErrorSource::sampling), 0);
  CHECK(k.internal.n == 400);
}

TEST_CASE("decomposition algebra") {
  const auto cfg = parse_scenario(kSmall);
  const auto run = run_scenario(cfg, 2);
  CHECK(run.failures == 0);
  const auto& rows = run.decomposition.configurations;
  REQUIRE(rows.size() == 6);
  CHECK(std::abs(rows[0].bias) <= 1e-9 * rows[0].mean_true_total);
  CHECK(rows[0].variance <= 1e-18 * rows[0].mean_true_total * rows[0].mean_true_total);
  for (const auto& row : rows) {
    CHECK(row.replicates == 6);
    const double scale = std::max({row.mse, row.variance, row.bias * row.bias, 1e-300});
    CHECK(std::abs(row.mse - (row.variance + row.bias * row.bias)) <= 1e-9 * scale);
  }
  double sum = rows[0].bias;
  double scale = std::abs(rows[0].bias);
  for (const auto& a : run.decomposition.attribution) {
    sum += a.bias_delta;
    scale = std::max(scale, std::abs(a.bias_delta));
  }
  CHECK(run.decomposition.attribution.size() == 5);
  CHECK(run.decomposition.attribution.back().source == "interaction");
  CHECK(std::abs(sum - rows.back().bias) <= 1e-9 * std::max(scale, std::abs(rows.back().bias)));

  // Failed replicates are dropped from every configuration.
  auto results = run.replicates;
  results[2 * 6 + 3].ok = false;
  const auto d = decompose(configurations(cfg), results);
  CHECK(d.configurations[0].replicates == 5);

  const auto serial = run_scenario(cfg, 1);
  CHECK(serial.replicates.size() == run.replicates.size());
  for (std::size_t i = 0; i < run.replicates.size(); ++i) CHECK(serial.replicates[i].estimate == run.replicates[i].estimate);
  CHECK(run.representativity.size() == 2);
  CHECK(run.validity.rows.size() == 6);
}

TEST_CASE("frame enrichment") {
  SuperPopulationSpec spec;
  spec.task = Task::classification;
  spec.classes = 2;
  spec.features = {NormalLaw{0, 1}};
  spec.dependence = {DependenceKind::logistic_threshold, 0.0, {2.0}, {}};
  spec = with_prevalence(spec, {0.8, 0.2});
  const auto pop = realize_population(spec, 200, 4);

  LabeledFrame frame;
  for (std::size_t r = 0; r < 200; r += 10) {
    frame.ids.push_back(pop.id(r));
    frame.labels.push_back(1.0);
  }
  const auto same = enrich_training_frame(frame, pop, 0, 1);
  CHECK(same.ids == frame.ids);
  CHECK(same.labels == frame.labels);

  const auto some = enrich_training_frame(frame, pop, 30, 1);
  CHECK(some.size() == 50);
  CHECK(std::is_sorted(some.ids.begin(), some.ids.end()));
  for (std::size_t i = 0; i < some.size(); ++i) {
    if (!frame.contains(some.ids[i])) CHECK(some.labels[i] == pop.y0(pop.row_of(some.ids[i])));
  }

  const auto full = enrich_training_frame(frame, pop, 180, 1);
  CHECK(full.ids == pop.ids());
  CHECK_THROWS_AS(enrich_training_frame(frame, pop, 181, 1), ConfigError);
}
