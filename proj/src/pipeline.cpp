#include "tmle/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <iostream>
#include <mutex>
#include <numeric>
#include <thread>

#include "tmle/numeric.hpp"
#include "tmle/rng.hpp"

namespace tmle::harness {

namespace {

std::uint64_t derive_indexed(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  return rng::derive(rng::derive(seed, purpose), index);
}

// k distinct indices of 0..n-1, ascending (partial Fisher-Yates).
std::vector<std::size_t> choose(std::size_t n, std::size_t k, rng::Stream& stream) {
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(n - i));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  std::sort(pool.begin(), pool.end());
  return pool;
}

std::vector<double> standardized_targets(const FinitePopulation& pop) {
  const auto& y = pop.targets();
  std::vector<double> z(y.size(), 0.0);
  if (y.empty()) return z;
  const double n = static_cast<double>(y.size());
  const double mean = pairwise_sum(y) / n;
  std::vector<double> sq(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) sq[i] = (y[i] - mean) * (y[i] - mean);
  const double sd = std::sqrt(pairwise_sum(sq) / n);
  if (sd > 0.0) {
    for (std::size_t i = 0; i < y.size(); ++i) z[i] = (y[i] - mean) / sd;
  }
  return z;
}

double indicator(const ObservedDataset& data, std::size_t row) {
  return data.task == Task::classification ? (data.y[row] == 1.0 ? 1.0 : 0.0) : data.y[row];
}

double positive_share(const ObservedDataset& data) {
  double pos = 0.0;
  for (double y : data.y) pos += y == 1.0 ? 1.0 : 0.0;
  return pos / static_cast<double>(data.size());
}

// Rows of `data` for the given ids; data rows are ascending by id.
ObservedDataset select_ids(const ObservedDataset& data, const std::vector<UnitId>& ids) {
  std::vector<std::size_t> rows;
  rows.reserve(ids.size());
  const auto& all = data.x.ids();
  for (UnitId id : ids) {
    const auto it = std::lower_bound(all.begin(), all.end(), id);
    if (it == all.end() || *it != id) throw DataError("unit " + std::to_string(raw(id)) + " was not observed");
    rows.push_back(static_cast<std::size_t>(it - all.begin()));
  }
  return rows_of(data, rows);
}

ObservedDataset true_values(const FinitePopulation& pop) {
  MeasurementModel clean;
  clean.features = FeatureNoiseModel::none(pop.dim());
  return observe(pop, clean, 0);
}

// Prior-shift correction of the leaf values when calibration is configured.
TreeModel train(const ScenarioConfig& cfg, const ObservedDataset& data) {
  TreeModel model = fit(data, cfg.tree);
  if (cfg.calibration.enabled && data.task == Task::classification) {
    const CalibrationParams params{positive_share(data), cfg.calibration.target_prevalence};
    if (params.p_train > 0.0 && params.p_train < 1.0) {
      std::vector<double> values(model.leaf_count());
      for (std::size_t m = 0; m < values.size(); ++m) values[m] = calibrate_score(model.leaf_value(m), params);
      model.set_weighted(std::move(values), 0);
    }
  }
  return model;
}

std::vector<double> scores_of(const TreeModel& model, const ObservedDataset& data) {
  std::vector<double> s(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) s[r] = model.predict(data.x.row(r));
  return s;
}

struct TrainingPhase {
  FinitePopulation frame;
  TreeModel model;
  std::size_t rows = 0;
  MetricSet internal;
};

TrainingPhase training_phase(const ScenarioConfig& cfg, const Toggles& toggles, std::uint64_t rs,
                             const MeasurementModel& mm) {
  TrainingPhase out;
  const auto pop =
      realize_population(cfg.population, cfg.training_population_size, rng::derive(rs, "training_population"));
  out.frame = toggles[ErrorSource::frame_coverage] && cfg.frame.training
                  ? materialize_frame(pop, cfg.population, cfg.frame, rng::derive(rs, "training_frame"))
                  : pop;
  const Design design = toggles[ErrorSource::sampling] ? cfg.training_design : Design{Srswor{out.frame.size()}};
  const Sample s = draw(design, out.frame, rng::derive(rs, "training_design"));
  const ObservedDataset data = observe(out.frame, s.ids(), mm, rng::derive(rs, "measure_training"));
  out.rows = data.size();

  if (cfg.split.kind == SplitKind::holdout) {
    auto [fit_part, test_part] = split_train_test(data, cfg.split.holdout, rng::derive(rs, "split"));
    out.model = train(cfg, fit_part);
    out.internal = evaluate_metrics(out.model, test_part);
  } else {
    const auto fold = kfold_assignment(data.size(), cfg.split.folds, rng::derive(rs, "split"));
    out.internal = MetricSet{data.task};
    for (std::size_t f = 0; f < cfg.split.folds; ++f) {
      std::vector<std::size_t> in;
      std::vector<std::size_t> held;
      for (std::size_t r = 0; r < fold.size(); ++r) (fold[r] == f ? held : in).push_back(r);
      out.internal += evaluate_metrics(train(cfg, rows_of(data, in)), rows_of(data, held));
    }
    out.model = train(cfg, data);
  }
  return out;
}

}  // namespace

double MetricSet::accuracy() const { return n ? (tp + tn) / static_cast<double>(n) : 0.0; }
double MetricSet::precision() const { return tp + fp > 0.0 ? tp / (tp + fp) : 0.0; }
double MetricSet::recall() const { return tp + fn > 0.0 ? tp / (tp + fn) : 0.0; }
double MetricSet::f1() const { return 2.0 * tp + fp + fn > 0.0 ? 2.0 * tp / (2.0 * tp + fp + fn) : 0.0; }
double MetricSet::rmse() const { return n ? std::sqrt(sum_squared_error / static_cast<double>(n)) : 0.0; }
double MetricSet::mean_error() const { return n ? sum_error / static_cast<double>(n) : 0.0; }
double MetricSet::headline() const { return task == Task::classification ? accuracy() : rmse(); }

MetricSet& MetricSet::operator+=(const MetricSet& other) {
  task = other.task;
  n += other.n;
  tp += other.tp;
  fp += other.fp;
  tn += other.tn;
  fn += other.fn;
  sum_error += other.sum_error;
  sum_squared_error += other.sum_squared_error;
  return *this;
}

MetricSet evaluate_scores(std::span<const double> scores, const ObservedDataset& data, double threshold) {
  if (data.empty()) throw DataError("metrics of an empty dataset are undefined");
  if (scores.size() != data.size()) throw DataError("one score per row is required");
  MetricSet m;
  m.task = data.task;
  m.n = data.size();
  std::vector<double> e(data.size());
  std::vector<double> e2(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) {
    if (data.task == Task::classification) {
      const bool predicted = scores[r] >= threshold;
      const bool actual = data.y[r] == 1.0;
      (predicted ? (actual ? m.tp : m.fp) : (actual ? m.fn : m.tn)) += 1.0;
    } else {
      e[r] = scores[r] - data.y[r];
      e2[r] = e[r] * e[r];
    }
  }
  m.sum_error = pairwise_sum(e);
  m.sum_squared_error = pairwise_sum(e2);
  return m;
}

MetricSet evaluate_metrics(const TreeModel& model, const ObservedDataset& data, double threshold) {
  if (data.empty()) throw DataError("metrics of an empty dataset are undefined");
  return evaluate_scores(scores_of(model, data), data, threshold);
}

ObservedDataset rows_of(const ObservedDataset& data, std::span<const std::size_t> rows) {
  ObservedDataset out;
  out.x = FeatureMatrix(data.dim());
  out.x.reserve(rows.size());
  out.y.reserve(rows.size());
  out.task = data.task;
  out.classes = data.classes;
  out.provenance = data.provenance;
  for (std::size_t r : rows) out.push_back(data.id(r), data.x.row(r), data.y[r]);
  return out;
}

std::pair<ObservedDataset, ObservedDataset> split_train_test(const ObservedDataset& data, double holdout,
                                                             std::uint64_t seed) {
  if (data.empty()) throw ConfigError("cannot split an empty sample");
  if (!(holdout > 0.0 && holdout < 1.0)) throw ConfigError("holdout fraction must lie in (0, 1)");
  const std::size_t n = data.size();
  const auto k = static_cast<std::size_t>(std::llround(holdout * static_cast<double>(n)));
  if (k == 0 || k == n) {
    throw ConfigError("holdout " + format_double(holdout) + " of " + std::to_string(n) + " rows leaves an empty part");
  }
  rng::Stream stream(seed, 0);
  const auto test = choose(n, k, stream);
  std::vector<std::size_t> rest;
  rest.reserve(n - k);
  std::size_t t = 0;
  for (std::size_t r = 0; r < n; ++r) {
    if (t < test.size() && test[t] == r) {
      ++t;
    } else {
      rest.push_back(r);
    }
  }
  return {rows_of(data, rest), rows_of(data, test)};
}

std::vector<std::size_t> kfold_assignment(std::size_t rows, std::size_t folds, std::uint64_t seed) {
  if (folds < 2) throw ConfigError("k-fold needs at least two folds");
  if (rows < folds) throw ConfigError("fewer rows than folds");
  rng::Stream stream(seed, 0);
  std::vector<std::size_t> order(rows);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t i = 0; i + 1 < rows; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(rows - i));
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> fold(rows);
  for (std::size_t i = 0; i < rows; ++i) fold[order[i]] = i % folds;
  return fold;
}

FinitePopulation materialize_frame(const FinitePopulation& pop, const SuperPopulationSpec& spec,
                                   const FrameRules& rules, std::uint64_t seed) {
  if (!(rules.undercoverage >= 0.0 && rules.undercoverage < 1.0)) throw ConfigError("undercoverage must lie in [0, 1)");
  if (!(rules.overcoverage >= 0.0 && rules.overcoverage < 1.0)) throw ConfigError("overcoverage must lie in [0, 1)");
  std::vector<std::size_t> kept;
  kept.reserve(pop.size());
  if (rules.undercoverage > 0.0) {
    const auto z = standardized_targets(pop);
    const double base = logit(rules.undercoverage);
    for (std::size_t r = 0; r < pop.size(); ++r) {
      rng::Stream stream(seed, raw(pop.id(r)));
      if (!(stream.uniform() < logistic(base + rules.undercoverage_tilt * z[r]))) kept.push_back(r);
    }
  } else {
    for (std::size_t r = 0; r < pop.size(); ++r) kept.push_back(r);
  }
  FinitePopulation frame = subset(pop, kept);
  const auto extra = static_cast<std::size_t>(
      std::llround(rules.overcoverage * static_cast<double>(kept.size()) / (1.0 - rules.overcoverage)));
  if (extra > 0) {
    const std::uint64_t next = pop.empty() ? 1 : raw(pop.ids().back()) + 1;
    frame = merge(frame, realize_population(spec, extra, rng::derive(seed, "overcoverage"), next));
  }
  if (frame.empty()) throw DataError("the frame lost every unit");
  return frame;
}

std::unordered_map<UnitId, double> response_propensities(const FinitePopulation& frame,
                                                         const NonresponseModel& model) {
  if (!(model.base > 0.0 && model.base <= 1.0)) throw ConfigError("response base rate must lie in (0, 1]");
  std::unordered_map<UnitId, double> out;
  out.reserve(frame.size());
  const auto z = standardized_targets(frame);
  for (std::size_t r = 0; r < frame.size(); ++r) {
    out.emplace(frame.id(r), model.base >= 1.0 ? 1.0 : logistic(logit(model.base) + model.tilt * z[r]));
  }
  return out;
}

MeasurementModel measurement_for(const ScenarioConfig& cfg, const Toggles& toggles) {
  MeasurementModel mm;
  const std::size_t dim = cfg.population.dim();
  mm.features = FeatureNoiseModel::none(dim);
  if (toggles[ErrorSource::feature_noise]) mm.features.sd = cfg.feature_noise.sd;
  if (toggles[ErrorSource::model_assumption]) mm.features.omit = cfg.feature_noise.omit;
  if (toggles[ErrorSource::label_error]) {
    mm.labels = cfg.confusion;
    mm.target_sd = cfg.target_sd;
  }
  return mm;
}

std::vector<Configuration> configurations(const ScenarioConfig& cfg) {
  std::vector<Configuration> out{{"baseline", Toggles{}}};
  for (auto s : kErrorSources) {
    if (cfg.toggles[s]) out.push_back({"only_" + to_string(s), Toggles{}.set(s)});
  }
  if (!cfg.toggles.none()) out.push_back({"all", cfg.toggles});
  return out;
}

ReplicateResult replicate_once(const ScenarioConfig& cfg, const Toggles& toggles, std::size_t r) {
  const std::uint64_t rs = rng::derive(cfg.seed, static_cast<std::uint64_t>(r));
  const MeasurementModel mm = measurement_for(cfg, toggles);
  ReplicateResult out;
  out.replicate = r;

  // Training and testing.
  const TrainingPhase tr = training_phase(cfg, toggles, rs, mm);
  out.training_rows = tr.rows;
  out.internal = tr.internal;

  // Application.
  const SuperPopulationSpec spec = cfg.target_population(toggles[ErrorSource::drift]);
  const auto target = realize_population(spec, cfg.target_population_size, rng::derive(rs, "target_population"));
  const FinitePopulation frame =
      toggles[ErrorSource::frame_coverage] && cfg.frame.target
          ? materialize_frame(target, spec, cfg.frame, rng::derive(rs, "target_frame"))
          : target;
  const Design design = toggles[ErrorSource::sampling] ? cfg.target_design : Design{Srswor{frame.size()}};
  Sample s = draw(design, frame, rng::derive(rs, "target_design"));
  if (toggles[ErrorSource::nonresponse]) {
    s = apply_nonresponse(s, response_propensities(frame, cfg.nonresponse), rng::derive(rs, "nonresponse"));
  }
  if (s.empty()) throw EstimationError("the target sample is empty");
  out.sample_size = s.size();

  const ObservedDataset universe = observe(frame, mm, rng::derive(rs, "measure_target"));
  const ObservedDataset sample_data = select_ids(universe, s.ids());

  const TreeModel model = cfg.mode == EstimatorMode::assisting
                              ? design_weighted_leaves(fit(sample_data, cfg.tree), s, sample_data)
                              : tr.model;
  out.leaf_count = model.leaf_count();
  out.estimate = cart_assisted_total(universe.x, s, sample_data, model);
  out.true_total = true_total(target);

  std::vector<double> y(sample_data.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = indicator(sample_data, i);
  out.ht_estimate = ht_total(s, y);

  std::vector<double> truth(frame.size());
  std::vector<double> sq(frame.size());
  for (std::size_t i = 0; i < frame.size(); ++i) {
    truth[i] = spec.task == Task::classification ? (frame.y0(i) == 1.0 ? 1.0 : 0.0) : frame.y0(i);
    const double e = truth[i] - model.predict(universe.x.row(i));
    sq[i] = e * e;
  }
  const double mean = pairwise_sum(truth) / static_cast<double>(truth.size());
  const double sse = pairwise_sum(sq);
  for (std::size_t i = 0; i < truth.size(); ++i) sq[i] = (truth[i] - mean) * (truth[i] - mean);
  const double sst = pairwise_sum(sq);
  out.r_squared = sst > 0.0 ? 1.0 - sse / sst : (sse == 0.0 ? 1.0 : 0.0);

  out.external = evaluate_metrics(tr.model, sample_data);
  out.ok = true;
  return out;
}

DecompositionReport decompose(const std::vector<Configuration>& configs, const std::vector<ReplicateResult>& results) {
  DecompositionReport report;
  const std::size_t c = configs.size();
  const std::size_t replicates = c ? results.size() / c : 0;
  std::vector<std::size_t> paired;
  for (std::size_t r = 0; r < replicates; ++r) {
    bool ok = true;
    for (std::size_t j = 0; j < c; ++j) ok = ok && results[r * c + j].ok;
    if (ok) paired.push_back(r);
  }
  const double n = static_cast<double>(paired.size());
  for (std::size_t j = 0; j < c; ++j) {
    ConfigurationSummary s;
    s.key = configs[j].key;
    s.active = configs[j].toggles.label();
    s.replicates = paired.size();
    if (!paired.empty()) {
      std::vector<double> err;
      std::vector<double> truth;
      std::vector<double> est;
      for (std::size_t r : paired) {
        const auto& rr = results[r * c + j];
        err.push_back(rr.error());
        truth.push_back(rr.true_total);
        est.push_back(rr.estimate.point_estimate);
      }
      s.mean_true_total = pairwise_sum(truth) / n;
      s.mean_estimate = pairwise_sum(est) / n;
      s.bias = pairwise_sum(err) / n;
      std::vector<double> centered(err.size());
      std::vector<double> squared(err.size());
      for (std::size_t i = 0; i < err.size(); ++i) {
        centered[i] = (err[i] - s.bias) * (err[i] - s.bias);
        squared[i] = err[i] * err[i];
      }
      s.variance = pairwise_sum(centered) / n;
      s.mse = pairwise_sum(squared) / n;
      s.relative_bias = s.mean_true_total != 0.0 ? s.bias / s.mean_true_total : 0.0;
      s.mc_se = paired.size() > 1 ? std::sqrt(s.variance / (n - 1.0)) : 0.0;
    }
    report.configurations.push_back(s);
  }

  if (c > 1 && configs.back().key == "all") {
    const double baseline = report.configurations.front().bias;
    double sum = 0.0;
    for (std::size_t j = 1; j + 1 < c; ++j) {
      const double delta = report.configurations[j].bias - baseline;
      sum += delta;
      report.attribution.push_back({configs[j].key.substr(5), delta});
    }
    report.attribution.push_back({"interaction", report.configurations.back().bias - baseline - sum});
  }
  return report;
}

RepresentativityReport representativity_for(const ScenarioConfig& cfg, const Toggles& toggles, std::size_t r) {
  const std::uint64_t rs = rng::derive(cfg.seed, static_cast<std::uint64_t>(r));
  const auto pop =
      realize_population(cfg.population, cfg.training_population_size, rng::derive(rs, "training_population"));
  const FinitePopulation frame = toggles[ErrorSource::frame_coverage] && cfg.frame.training
                                     ? materialize_frame(pop, cfg.population, cfg.frame, rng::derive(rs, "training_frame"))
                                     : pop;
  const SuperPopulationSpec spec = cfg.target_population(toggles[ErrorSource::drift]);
  const auto target = realize_population(spec, cfg.target_population_size, rng::derive(rs, "target_population"));
  const ObservedDataset a = true_values(frame);
  const ObservedDataset b = true_values(target);
  const Binning binning = cfg.representativity_cuts ? *cfg.representativity_cuts : quartile_binning(a);
  return conditional_representativity(a, b, binning);
}

std::vector<Table1Row> run_table1(const ScenarioConfig& cfg) {
  if (cfg.population.task != Task::classification || cfg.population.classes != 2) {
    throw ConfigError("the prevalence table needs a two-class scenario");
  }
  const auto& cal = cfg.calibration;
  const std::uint64_t t = rng::derive(cfg.seed, "table1");
  const MeasurementModel mm = measurement_for(cfg, cfg.toggles);

  // Case-control training sample at the configured positive share.
  const auto pop =
      realize_population(cfg.population, cfg.training_population_size, rng::derive(t, "training_population"));
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t r = 0; r < pop.size(); ++r) (pop.y0(r) == 1.0 ? pos : neg).push_back(r);
  const auto n_pos =
      static_cast<std::size_t>(std::llround(cal.training_positive_share * static_cast<double>(cal.training_size)));
  const std::size_t n_neg = cal.training_size - n_pos;
  if (n_pos > pos.size() || n_neg > neg.size()) {
    throw ConfigError("training population holds " + std::to_string(pos.size()) + " positives and " +
                      std::to_string(neg.size()) + " negatives; the training sample needs " + std::to_string(n_pos) +
                      " and " + std::to_string(n_neg));
  }
  rng::Stream cc(rng::derive(t, "case_control"), 0);
  std::vector<UnitId> ids;
  for (std::size_t i : choose(pos.size(), n_pos, cc)) ids.push_back(pop.id(pos[i]));
  for (std::size_t i : choose(neg.size(), n_neg, cc)) ids.push_back(pop.id(neg[i]));
  std::sort(ids.begin(), ids.end());
  const ObservedDataset training = observe(pop, ids, mm, rng::derive(t, "measure_training"));

  const SuperPopulationSpec spec = cfg.target_population(cfg.toggles[ErrorSource::drift]);
  const auto eval = realize_population(spec, cfg.target_population_size, rng::derive(t, "target_population"));
  const ObservedDataset eval_obs = observe(eval, mm, rng::derive(t, "measure_target"));
  std::vector<double> truth(eval.size());
  for (std::size_t r = 0; r < eval.size(); ++r) truth[r] = eval.y0(r) == 1.0 ? 1.0 : 0.0;
  const double true_pos = true_total(eval);
  const double n_total = static_cast<double>(eval.size());
  const double tau = cal.threshold;

  const TreeModel single = fit(training, cfg.tree);
  const auto raw_scores = scores_of(single, eval_obs);
  const auto calibrated = calibrate_scores(raw_scores, {positive_share(training), cal.target_prevalence});

  // Bootstrap members, each calibrated from its own resample's positive share.
  std::vector<std::vector<double>> members;
  std::vector<CalibrationParams> params;
  for (std::size_t m = 0; m < cal.ensemble_size; ++m) {
    rng::Stream boot(derive_indexed(t, "ensemble", m), 0);
    std::vector<std::size_t> rows(training.size());
    for (auto& row : rows) row = static_cast<std::size_t>(boot.below(training.size()));
    std::sort(rows.begin(), rows.end());
    const ObservedDataset resample = rows_of(training, rows);
    const double share = positive_share(resample);
    if (!(share > 0.0 && share < 1.0)) throw EstimationError("bootstrap resample holds a single class");
    members.push_back(scores_of(fit(resample, cfg.tree), eval_obs));
    params.push_back({share, cal.target_prevalence});
  }
  const auto ensemble = ensemble_calibrated(members, params);

  auto row = [&](std::string method, double est, const std::vector<double>& scores) {
    return Table1Row{std::move(method), true_pos, est, bias_metric(est, true_pos, n_total),
                     threshold_accuracy(scores, truth, tau)};
  };
  return {
      row("threshold", estimate_positive_total(raw_scores, ThresholdCount{tau}), raw_scores),
      row("probability_sum", estimate_positive_total(raw_scores, ProbabilitySum{}), raw_scores),
      row("calibrated_probability_sum", estimate_positive_total(calibrated, ProbabilitySum{}), calibrated),
      row("ensemble_calibrated_probability_sum", estimate_positive_total(ensemble, ProbabilitySum{}), ensemble),
  };
}

bool LabeledFrame::contains(UnitId id) const { return std::binary_search(ids.begin(), ids.end(), id); }

LabeledFrame enrich_training_frame(const LabeledFrame& frame, const FinitePopulation& population, std::size_t batch,
                                   std::uint64_t seed) {
  std::vector<std::size_t> pool;
  for (std::size_t r = 0; r < population.size(); ++r) {
    if (!frame.contains(population.id(r))) pool.push_back(r);
  }
  if (batch > pool.size()) {
    throw ConfigError("enrichment batch of " + std::to_string(batch) + " exceeds the unlabeled pool of " +
                      std::to_string(pool.size()));
  }
  if (batch == 0) return frame;
  rng::Stream stream(seed, 0);
  std::vector<std::pair<UnitId, double>> merged;
  merged.reserve(frame.size() + batch);
  for (std::size_t i = 0; i < frame.size(); ++i) merged.emplace_back(frame.ids[i], frame.labels[i]);
  for (std::size_t i : choose(pool.size(), batch, stream)) {
    merged.emplace_back(population.id(pool[i]), population.y0(pool[i]));
  }
  std::sort(merged.begin(), merged.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  LabeledFrame out;
  for (const auto& [id, label] : merged) {
    out.ids.push_back(id);
    out.labels.push_back(label);
  }
  return out;
}

std::vector<ValidityRow> run_enrichment(const ScenarioConfig& cfg) {
  if (cfg.population.task != Task::classification || cfg.population.classes != 2) {
    throw ConfigError("frame enrichment needs a two-class scenario");
  }
  const auto& en = cfg.enrichment;
  const std::uint64_t t = rng::derive(cfg.seed, "enrichment");
  const MeasurementModel mm = measurement_for(cfg, cfg.toggles);
  const auto pop =
      realize_population(cfg.population, cfg.training_population_size, rng::derive(t, "training_population"));

  std::vector<std::size_t> pos;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    if (pop.y0(r) == 1.0) pos.push_back(r);
  }
  if (en.initial_positives > pos.size()) {
    throw ConfigError("training population holds " + std::to_string(pos.size()) + " positives, enrichment needs " +
                      std::to_string(en.initial_positives));
  }
  rng::Stream init(rng::derive(t, "initial_frame"), 0);
  LabeledFrame labeled;
  for (std::size_t i : choose(pos.size(), en.initial_positives, init)) {
    labeled.ids.push_back(pop.id(pos[i]));
    labeled.labels.push_back(1.0);
  }
  // Unlabeled units taken as negatives.
  std::vector<std::size_t> rest;
  for (std::size_t r = 0; r < pop.size(); ++r) {
    if (!std::binary_search(labeled.ids.begin(), labeled.ids.end(), pop.id(r))) rest.push_back(r);
  }
  if (en.initial_negatives > rest.size()) throw ConfigError("too few unlabeled units for the initial frame");
  std::vector<std::pair<UnitId, double>> merged;
  for (std::size_t i = 0; i < labeled.size(); ++i) merged.emplace_back(labeled.ids[i], 1.0);
  for (std::size_t i : choose(rest.size(), en.initial_negatives, init)) merged.emplace_back(pop.id(rest[i]), 0.0);
  std::sort(merged.begin(), merged.end());
  labeled = {};
  for (const auto& [id, label] : merged) {
    labeled.ids.push_back(id);
    labeled.labels.push_back(label);
  }

  const SuperPopulationSpec spec = cfg.target_population(cfg.toggles[ErrorSource::drift]);
  const auto eval = realize_population(spec, cfg.target_population_size, rng::derive(t, "target_population"));
  const ObservedDataset eval_obs = observe(eval, mm, rng::derive(t, "measure_target"));

  std::vector<ValidityRow> rows;
  for (std::size_t k = 0;; ++k) {
    ObservedDataset data = observe(pop, labeled.ids, mm, rng::derive(t, "measure_training"));
    data.y = labeled.labels;
    auto [fit_part, test_part] = split_train_test(data, cfg.split.holdout, derive_indexed(t, "split", k));
    const TreeModel model = fit(fit_part, cfg.tree);
    rows.push_back({"enrichment_" + std::to_string(k), evaluate_metrics(model, test_part),
                    evaluate_metrics(model, eval_obs)});
    if (k == en.iterations) break;
    labeled = enrich_training_frame(labeled, pop, en.batch, derive_indexed(t, "batch", k));
  }
  return rows;
}

RunResult run_scenario(const ScenarioConfig& cfg, std::size_t threads) {
  cfg.validate();
  const auto configs = configurations(cfg);
  const std::size_t c = configs.size();
  const std::size_t tasks = cfg.replicates * c;

  RunResult out;
  out.replicates.resize(tasks);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < tasks; i = next++) {
      const std::size_t r = i / c;
      const auto& conf = configs[i % c];
      ReplicateResult result;
      try {
        result = replicate_once(cfg, conf.toggles, r);
      } catch (const std::exception& e) {
        result = ReplicateResult{};
        result.replicate = r;
        result.failure = e.what();
      }
      result.configuration = conf.key;
      out.replicates[i] = std::move(result);
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min(threads ? threads : 1, tasks));
  std::vector<std::thread> pool;
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& th : pool) th.join();

  for (const auto& r : out.replicates) {
    if (!r.ok) {
      ++out.failures;
      std::cerr << "replicate " << r.replicate << " (" << r.configuration << ") failed: " << r.failure << "\n";
    }
  }
  if (out.failures * 100 > tasks) {
    throw ReplicateFailures(std::to_string(out.failures) + " of " + std::to_string(tasks) +
                            " replicate runs failed (limit 1%)");
  }

  out.decomposition = decompose(configs, out.replicates);
  out.validity.task = cfg.population.task;
  for (std::size_t j = 0; j < c; ++j) {
    ValidityRow row{configs[j].key, MetricSet{cfg.population.task}, MetricSet{cfg.population.task}};
    for (std::size_t r = 0; r < cfg.replicates; ++r) {
      bool ok = true;
      for (std::size_t k = 0; k < c; ++k) ok = ok && out.replicates[r * c + k].ok;
      if (!ok) continue;
      row.internal += out.replicates[r * c + j].internal;
      row.external += out.replicates[r * c + j].external;
    }
    out.validity.rows.push_back(row);
  }

  for (const auto& conf : configs) {
    if (conf.key != "baseline" && conf.key != "all") continue;
    out.representativity.push_back({conf.key, representativity_for(cfg, conf.toggles, 0)});
  }
  if (cfg.calibration.enabled) out.table1 = run_table1(cfg);
  if (cfg.enrichment.enabled) {
    for (auto& row : run_enrichment(cfg)) out.validity.rows.push_back(std::move(row));
  }
  return out;
}

}  // namespace tmle::harness
