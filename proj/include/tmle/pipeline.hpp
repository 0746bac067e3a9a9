#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "tmle/calibration.hpp"
#include "tmle/cart.hpp"
#include "tmle/error.hpp"
#include "tmle/estimator.hpp"
#include "tmle/representativity.hpp"
#include "tmle/scenario.hpp"

namespace tmle::harness {

// More than 1% of the replicate runs failed.
class ReplicateFailures : public Error {
 public:
  using Error::Error;
};

// Confusion counts at threshold 0.5 on the class-1 score (classification),
// or residual sums (regression). Rates follow from the counts; a rate whose
// denominator is zero is reported as 0.
struct MetricSet {
  Task task = Task::regression;
  std::size_t n = 0;
  double tp = 0.0;
  double fp = 0.0;
  double tn = 0.0;
  double fn = 0.0;
  double sum_error = 0.0;
  double sum_squared_error = 0.0;

  double accuracy() const;
  double precision() const;
  double recall() const;
  double f1() const;
  double rmse() const;
  double mean_error() const;
  // accuracy() for classification, rmse() for regression.
  double headline() const;

  // Pools counts and sums.
  MetricSet& operator+=(const MetricSet& other);
};

MetricSet evaluate_metrics(const TreeModel& model, const ObservedDataset& data, double threshold = 0.5);
// Same, for a score already computed per row.
MetricSet evaluate_scores(std::span<const double> scores, const ObservedDataset& data, double threshold = 0.5);

ObservedDataset rows_of(const ObservedDataset& data, std::span<const std::size_t> rows);

// Uniform random split; the test part holds round(holdout * n) rows.
std::pair<ObservedDataset, ObservedDataset> split_train_test(const ObservedDataset& data, double holdout,
                                                             std::uint64_t seed);
// Fold index (0..folds-1) per row, balanced sizes.
std::vector<std::size_t> kfold_assignment(std::size_t rows, std::size_t folds, std::uint64_t seed);

// The frame a sample is drawn from: each unit is left out with probability
// logistic(logit(undercoverage) + tilt * z), z the standardized target, and
// fresh units of `spec` numbered after the largest id are added to make up
// the overcoverage share.
FinitePopulation materialize_frame(const FinitePopulation& pop, const SuperPopulationSpec& spec,
                                   const FrameRules& rules, std::uint64_t seed);

// logistic(logit(base) + tilt * z) per unit of the frame.
std::unordered_map<UnitId, double> response_propensities(const FinitePopulation& frame,
                                                         const NonresponseModel& model);

// Measurement model with only the switched-on sources active.
MeasurementModel measurement_for(const ScenarioConfig& cfg, const Toggles& toggles);

// Configurations of the toggle factorial, in report order: baseline (all
// off), only_<source> for each source the scenario enables, all.
struct Configuration {
  std::string key;
  Toggles toggles;
};
std::vector<Configuration> configurations(const ScenarioConfig& cfg);

struct ReplicateResult {
  std::size_t replicate = 0;
  std::string configuration;
  bool ok = false;
  std::string failure;

  double true_total = 0.0;
  EstimateRecord estimate;
  double ht_estimate = 0.0;
  std::size_t leaf_count = 0;
  std::size_t training_rows = 0;
  std::size_t sample_size = 0;
  // 1 - SSE/SST of the estimation model over the target population.
  double r_squared = 0.0;
  MetricSet internal;
  MetricSet external;

  double error() const { return estimate.point_estimate - true_total; }
};

// One pass through training, testing and application for replicate r,
// drawing every random quantity from streams derived from (seed, r).
// Component errors propagate.
ReplicateResult replicate_once(const ScenarioConfig& cfg, const Toggles& toggles, std::size_t r);

struct ConfigurationSummary {
  std::string key;
  std::string active;
  std::size_t replicates = 0;
  double mean_true_total = 0.0;
  double mean_estimate = 0.0;
  double bias = 0.0;
  // Monte Carlo variance with divisor R, so mse = variance + bias^2.
  double variance = 0.0;
  double mse = 0.0;
  double relative_bias = 0.0;
  // Standard error of the Monte Carlo mean.
  double mc_se = 0.0;
};

struct Attribution {
  // Source name, or "interaction" for the residual.
  std::string source;
  double bias_delta = 0.0;
};

struct DecompositionReport {
  std::vector<ConfigurationSummary> configurations;
  std::vector<Attribution> attribution;
};

struct ValidityRow {
  std::string configuration;
  MetricSet internal;
  MetricSet external;
};

struct ValidityReport {
  Task task = Task::regression;
  std::vector<ValidityRow> rows;
};

struct RepresentativityRow {
  std::string configuration;
  RepresentativityReport report;
};

struct RunResult {
  std::vector<ReplicateResult> replicates;
  DecompositionReport decomposition;
  ValidityReport validity;
  std::vector<Table1Row> table1;
  std::vector<RepresentativityRow> representativity;
  std::size_t failures = 0;
};

// Aggregates over the replicates that succeeded in every configuration.
DecompositionReport decompose(const std::vector<Configuration>& configs, const std::vector<ReplicateResult>& results);

// Training frame against target population (true values) for replicate r.
RepresentativityReport representativity_for(const ScenarioConfig& cfg, const Toggles& toggles, std::size_t r);

// Prevalence-table rows for the rare-event setup of `cfg`: raw threshold count, raw
// probability sum, calibrated probability sum and the calibrated ensemble.
std::vector<Table1Row> run_table1(const ScenarioConfig& cfg);

// Labeled frame for positive-unlabeled learning; labels[i] belongs to ids[i].
struct LabeledFrame {
  std::vector<UnitId> ids;
  std::vector<double> labels;
  std::size_t size() const { return ids.size(); }
  bool contains(UnitId id) const;
};

// Adds a simple random batch of units of `population` outside the frame,
// labeled with their true class.
LabeledFrame enrich_training_frame(const LabeledFrame& frame, const FinitePopulation& population, std::size_t batch,
                                   std::uint64_t seed);

// Validity rows enrichment_0 .. enrichment_k: the initial frame is the
// configured number of random positives plus random unlabeled units taken as
// negatives; each iteration adds one labeled batch and retrains.
std::vector<ValidityRow> run_enrichment(const ScenarioConfig& cfg);

// Full run: factorial over configurations x replicates on `threads` workers,
// then aggregation, the prevalence table and enrichment when enabled. Throws
// ReplicateFailures when more than 1% of runs fail.
RunResult run_scenario(const ScenarioConfig& cfg, std::size_t threads);

}  // namespace tmle::harness
