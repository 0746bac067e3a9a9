#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <string>

#include "tmle/error.hpp"
#include "tmle/scenario.hpp"

using namespace tmle;
using namespace tmle::harness;

namespace {

const std::string kMinimal = R"(schema_version = 1
seed = 7
task = regression
population.features = [normal(0, 1), uniform(-1, 1)]
population.coefficients = [1, 2]
population.size = 100
training.design.kind = srswor
training.design.size = 50
target.design.kind = poisson
target.design.size = 20
)";

std::string error_of(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("shipped scenarios parse") {
  const std::string dir = TMLE_SCENARIO_DIR;
  const auto def = load_scenario(dir + "/default.scn");
  CHECK(def.population.task == Task::regression);
  CHECK(def.replicates == 200);
  CHECK(def.toggles == Toggles::all());
  CHECK(std::get<Srswor>(def.target_design).size == 500);
  CHECK(def.feature_noise.omit == std::vector<bool>{false, true, false});
  CHECK(def.mode == EstimatorMode::fixed_model);

  const auto drift = load_scenario(dir + "/drift.scn");
  CHECK(drift.population.drift.kind == DriftKind::theta_rotation);
  CHECK(drift.target_population(true).dependence.coefficients != drift.population.dependence.coefficients);
  CHECK(drift.target_population(false).dependence == drift.population.dependence);

  const auto rare = load_scenario(dir + "/rare_event.scn");
  CHECK(rare.population.prevalence[1] == doctest::Approx(0.0022).epsilon(1e-5));
  CHECK(rare.calibration.enabled);
  CHECK(rare.enrichment.batch == 370);
  REQUIRE(rare.confusion.has_value());
  CHECK(rare.confusion->at(1, 0) == 0.01);
  CHECK(rare.training_population_size == 300000);
}

TEST_CASE("defaults and designs") {
  const auto cfg = parse_scenario(kMinimal);
  CHECK(cfg.seed == 7);
  CHECK(cfg.replicates == 200);
  CHECK(cfg.training_population_size == 100);
  CHECK(cfg.split.holdout == 0.25);
  CHECK(cfg.nonresponse.base == 1.0);
  CHECK(cfg.toggles.none());
  CHECK(std::get<PoissonDesign>(cfg.target_design).expected_size == 20.0);
}

TEST_CASE("malformed files name the problem") {
  CHECK(error_of(kMinimal + "population.colour = blue\n").find("line 11") != std::string::npos);
  CHECK(error_of(kMinimal + "seed = 8\n").find("duplicate") != std::string::npos);
  CHECK(error_of(kMinimal + "just words\n").find("line 11") != std::string::npos);
  std::string v2 = kMinimal;
  v2.replace(v2.find("= 1"), 3, "= 2");
  CHECK(error_of(v2).find("schema_version") != std::string::npos);
  CHECK_FALSE(error_of(kMinimal + "training.split.holdout = 1\n").empty());
  CHECK_FALSE(error_of(kMinimal + "measurement.confusion = [[1, 0], [0, 1]]\n").empty());
  CHECK_FALSE(error_of(kMinimal + "target.design.kind = cluster\n").empty());
  CHECK_FALSE(error_of(kMinimal + "toggles.weather = true\n").empty());
  CHECK_THROWS_AS(load_scenario("/nonexistent/file.scn"), ConfigError);
}

TEST_CASE("comments and layout do not change the hash") {
  const auto a = parse_scenario(kMinimal);
  const auto b = parse_scenario("# header\n\n" + kMinimal + "   # trailing\n");
  CHECK(a.canonical == b.canonical);
  CHECK(config_hash(a) == config_hash(b));

  auto c = a;
  c.seed = 8;
  CHECK(config_hash(c) != config_hash(a));
  const auto d = parse_scenario(kMinimal + "tree.max_depth = 3\n");
  CHECK(config_hash(d) != config_hash(a));
}

TEST_CASE("toggle labels") {
  CHECK(Toggles{}.label() == "none");
  Toggles t;
  t.set(ErrorSource::sampling).set(ErrorSource::drift);
  CHECK(t.label() == "sampling+drift");
  CHECK(to_string(ErrorSource::label_error) == "label_error");
}
