#include "tmle/measurement.hpp"

#include <algorithm>
#include <cmath>

#include "tmle/error.hpp"

namespace tmle {

namespace {
constexpr double kColumnTolerance = 1e-12;
}

TransformationMatrix::TransformationMatrix(std::size_t classes, std::vector<double> row_major)
    : classes_(classes), entries_(std::move(row_major)) {
  if (classes_ == 0) throw MatrixError("transformation matrix needs at least one class");
  if (entries_.size() != classes_ * classes_) {
    throw MatrixError("transformation matrix needs " + std::to_string(classes_ * classes_) + " entries, got " +
                      std::to_string(entries_.size()));
  }
  for (std::size_t j = 0; j < classes_; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < classes_; ++i) {
      const double v = at(i, j);
      if (!(v >= 0.0 && v <= 1.0)) throw MatrixError("transformation matrix entry outside [0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > kColumnTolerance) {
      throw MatrixError("column " + std::to_string(j) + " of the transformation matrix sums to " +
                        std::to_string(sum));
    }
  }
}

TransformationMatrix TransformationMatrix::identity(std::size_t classes) {
  std::vector<double> e(classes * classes, 0.0);
  for (std::size_t i = 0; i < classes; ++i) e[i * classes + i] = 1.0;
  return TransformationMatrix(classes, std::move(e));
}

std::vector<double> TransformationMatrix::column(std::size_t truth) const {
  std::vector<double> c(classes_);
  for (std::size_t i = 0; i < classes_; ++i) c[i] = at(i, truth);
  return c;
}

FeatureNoiseModel FeatureNoiseModel::none(std::size_t dim) {
  return {std::vector<double>(dim, 0.0), std::vector<bool>(dim, false)};
}

std::size_t FeatureNoiseModel::output_dim() const {
  return static_cast<std::size_t>(std::count(omit.begin(), omit.end(), false));
}

void FeatureNoiseModel::validate() const {
  if (omit.size() != sd.size()) throw ConfigError("feature noise model: omit flags and sd lengths differ");
  for (double s : sd) {
    if (!(s >= 0.0)) throw ConfigError("feature noise model: negative standard deviation");
  }
}

std::vector<double> distort_features(std::span<const double> x0, const FeatureNoiseModel& model,
                                     rng::Stream& stream) {
  if (x0.size() != model.input_dim()) {
    throw DataError("feature vector has dimension " + std::to_string(x0.size()) + ", noise model expects " +
                    std::to_string(model.input_dim()));
  }
  std::vector<double> x;
  x.reserve(x0.size());
  for (std::size_t j = 0; j < x0.size(); ++j) {
    // Draw even for omitted features so the retained ones do not depend on
    // which features are dropped.
    const double e = model.sd[j] > 0.0 ? stream.normal(0.0, model.sd[j]) : 0.0;
    if (!model.omit[j]) x.push_back(x0[j] + e);
  }
  return x;
}

std::vector<double> one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) {
    throw DataError("label " + std::to_string(label) + " out of range for " + std::to_string(classes) + " classes");
  }
  std::vector<double> v(classes, 0.0);
  v[label] = 1.0;
  return v;
}

std::size_t misclassify(std::size_t y0, const TransformationMatrix& t, rng::Stream& stream) {
  if (y0 >= t.classes()) throw DataError("true class out of range for the transformation matrix");
  const double u = stream.uniform();
  double cumulative = 0.0;
  for (std::size_t i = 0; i < t.classes(); ++i) {
    cumulative += t.at(i, y0);
    if (u < cumulative) return i;
  }
  // u landed in the rounding gap above the column sum.
  std::size_t last = t.classes() - 1;
  while (last > 0 && t.at(last, y0) == 0.0) --last;
  return last;
}

TransformationMatrix empirical_confusion(std::span<const std::size_t> truth, std::span<const std::size_t> observed,
                                         std::size_t classes) {
  if (truth.size() != observed.size()) throw DataError("true and observed label lists differ in length");
  std::vector<double> counts(classes * classes, 0.0);
  std::vector<double> totals(classes, 0.0);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    if (truth[k] >= classes || observed[k] >= classes) throw DataError("label out of range");
    counts[observed[k] * classes + truth[k]] += 1.0;
    totals[truth[k]] += 1.0;
  }
  for (std::size_t j = 0; j < classes; ++j) {
    if (totals[j] == 0.0) {
      throw EstimationError("true class " + std::to_string(j) + " never occurs; its column is undefined");
    }
    for (std::size_t i = 0; i < classes; ++i) counts[i * classes + j] /= totals[j];
  }
  return TransformationMatrix(classes, std::move(counts));
}

void ObservedDataset::push_back(UnitId id, std::span<const double> features, double target) {
  x.push_back(id, features);
  y.push_back(target);
}

ObservedDataset observe(const FinitePopulation& pop, std::span<const UnitId> units, const MeasurementModel& model,
                        std::uint64_t seed) {
  model.features.validate();
  if (model.features.input_dim() != pop.dim()) {
    throw DataError("noise model dimension does not match the population");
  }
  if (model.labels && model.labels->classes() != pop.classes()) {
    throw MatrixError("transformation matrix class count does not match the population");
  }
  if (!(model.target_sd >= 0.0)) throw ConfigError("negative target noise standard deviation");

  ObservedDataset out;
  out.x = FeatureMatrix(model.features.output_dim());
  out.x.reserve(units.size());
  out.y.reserve(units.size());
  out.task = pop.task();
  out.classes = pop.classes();
  out.provenance.population = pop.source();
  out.provenance.transformation = model.labels ? "T" : "identity";
  for (UnitId id : units) {
    const std::size_t row = pop.row_of(id);
    rng::Stream stream(seed, raw(id));
    const auto x = distort_features(pop.x0(row), model.features, stream);
    double y = pop.y0(row);
    if (pop.task() == Task::classification) {
      if (model.labels) y = static_cast<double>(misclassify(static_cast<std::size_t>(y), *model.labels, stream));
    } else if (model.target_sd > 0.0) {
      y += stream.normal(0.0, model.target_sd);
    }
    out.push_back(id, x, y);
  }
  return out;
}

ObservedDataset observe(const FinitePopulation& pop, const MeasurementModel& model, std::uint64_t seed) {
  return observe(pop, pop.ids(), model, seed);
}

}  // namespace tmle
