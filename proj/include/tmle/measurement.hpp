#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tmle/population.hpp"
#include "tmle/rng.hpp"
#include "tmle/types.hpp"

namespace tmle {

// Misclassification law of observed labels. Entry (i, j) is the probability
// of observing class i when the true class is j, so E[one_hot(y)] equals
// T * one_hot(y0) and every column sums to 1.
class TransformationMatrix {
 public:
  // `row_major` holds classes x classes entries, row = observed class.
  TransformationMatrix(std::size_t classes, std::vector<double> row_major);

  static TransformationMatrix identity(std::size_t classes);

  std::size_t classes() const { return classes_; }
  double at(std::size_t observed, std::size_t truth) const { return entries_[observed * classes_ + truth]; }
  std::vector<double> column(std::size_t truth) const;
  const std::vector<double>& row_major() const { return entries_; }

  bool operator==(const TransformationMatrix&) const = default;

 private:
  std::size_t classes_;
  std::vector<double> entries_;
};

struct FeatureNoiseModel {
  std::vector<double> sd;
  std::vector<bool> omit;

  // Zero noise and no omission over `dim` features.
  static FeatureNoiseModel none(std::size_t dim);
  std::size_t input_dim() const { return sd.size(); }
  std::size_t output_dim() const;
  void validate() const;
};

// x_j = x0_j + N(0, sd_j) on retained features; omitted features dropped.
std::vector<double> distort_features(std::span<const double> x0, const FeatureNoiseModel& model,
                                     rng::Stream& stream);

std::vector<double> one_hot(std::size_t label, std::size_t classes);

// Observed class drawn from column y0 of t.
std::size_t misclassify(std::size_t y0, const TransformationMatrix& t, rng::Stream& stream);

// Column-normalized confusion counts; entry (i, j) = #(observed i, true j) / #(true j).
TransformationMatrix empirical_confusion(std::span<const std::size_t> truth, std::span<const std::size_t> observed,
                                         std::size_t classes);

struct Provenance {
  std::string population;
  std::string sample;
  std::string noise_model;
  std::string transformation;
  bool operator==(const Provenance&) const = default;
};

// Distorted (x, y) rows as seen by the modeller.
struct ObservedDataset {
  FeatureMatrix x;
  std::vector<double> y;
  Task task = Task::regression;
  std::size_t classes = 0;
  Provenance provenance;

  std::size_t size() const { return y.size(); }
  bool empty() const { return y.empty(); }
  std::size_t dim() const { return x.dim(); }
  UnitId id(std::size_t row) const { return x.id(row); }
  void push_back(UnitId id, std::span<const double> features, double target);

  bool operator==(const ObservedDataset&) const = default;
};

// Everything that distorts an observation on the measurement line.
struct MeasurementModel {
  FeatureNoiseModel features;
  // Classification labels.
  std::optional<TransformationMatrix> labels;
  // Regression targets: y = y0 + N(0, target_sd).
  double target_sd = 0.0;
};

// Observes the listed units of `pop`. Unit k uses substream (seed, k), so a
// unit measured twice under one seed yields the same observation.
ObservedDataset observe(const FinitePopulation& pop, std::span<const UnitId> units, const MeasurementModel& model,
                        std::uint64_t seed);
// All units of `pop`.
ObservedDataset observe(const FinitePopulation& pop, const MeasurementModel& model, std::uint64_t seed);

}  // namespace tmle
