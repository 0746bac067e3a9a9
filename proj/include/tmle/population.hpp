#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "tmle/rng.hpp"
#include "tmle/types.hpp"

namespace tmle {

struct UniformLaw {
  double lower = 0.0;
  double upper = 1.0;
  bool operator==(const UniformLaw&) const = default;
};

struct NormalLaw {
  double mean = 0.0;
  double sd = 1.0;
  bool operator==(const NormalLaw&) const = default;
};

// Category index 0..K-1 returned as a double.
struct CategoricalLaw {
  std::vector<double> probabilities;
  bool operator==(const CategoricalLaw&) const = default;
};

using FeatureLaw = std::variant<UniformLaw, NormalLaw, CategoricalLaw>;

double sample_feature(const FeatureLaw& law, rng::Stream& stream);
// Inverse distribution function at u in (0, 1).
double feature_quantile(const FeatureLaw& law, double u);
std::string describe(const FeatureLaw& law);

enum class DependenceKind { linear, piecewise_constant, logistic_threshold };

std::string to_string(DependenceKind kind);
std::optional<DependenceKind> parse_dependence_kind(std::string_view name);

// Score eta(x) = intercept + sum_j coefficients[j] * g_j(x_j), where g_j is
// the identity (linear, logistic_threshold) or the step 1[x_j > cuts[j]]
// (piecewise_constant).
//
// Regression targets are y = f(x) + N(0, noise_sd) with f = eta, except
// logistic_threshold where f = logistic(eta).
//
// Classification targets threshold a latent z = eta(x) + e: e is standard
// logistic for logistic_threshold and N(0, noise_sd) otherwise. The class is
// the number of thresholds strictly below z.
struct Dependence {
  DependenceKind kind = DependenceKind::linear;
  double intercept = 0.0;
  std::vector<double> coefficients;
  std::vector<double> cuts;

  double score(std::span<const double> x) const;
  bool operator==(const Dependence&) const = default;
};

enum class DriftKind { none, mean_shift, scale, theta_rotation };

std::string to_string(DriftKind kind);
std::optional<DriftKind> parse_drift_kind(std::string_view name);

// mean_shift and scale act on one feature law; theta_rotation rotates the
// coefficient pair `plane` by an angle (radians) equal to the magnitude.
struct DriftOperator {
  DriftKind kind = DriftKind::none;
  std::size_t feature = 0;
  std::array<std::size_t, 2> plane{0, 1};
  bool operator==(const DriftOperator&) const = default;
};

// A data-generating distribution F(Y|X)F(X). It is only ever used as a
// sampler; distribution-level comparisons are made on realizations.
struct SuperPopulationSpec {
  std::string name = "population";
  Task task = Task::regression;
  std::size_t classes = 0;
  std::vector<FeatureLaw> features;
  Dependence dependence;
  double noise_sd = 0.0;
  // Classification only: ascending latent thresholds (classes - 1 of them)
  // and the class probabilities they imply.
  std::vector<double> thresholds;
  std::vector<double> prevalence;
  DriftOperator drift;

  std::size_t dim() const { return features.size(); }
  // Regression mean f(x), or the classification latent location eta(x).
  double mean_response(std::span<const double> x) const;
  // Throws ConfigError on any violated invariant.
  void validate() const;

  bool operator==(const SuperPopulationSpec&) const = default;
};

// Solves the thresholds so the spec produces `target_prevalence` (bisection
// on the class distribution function, relative tolerance 1e-6) and returns
// the completed spec.
SuperPopulationSpec with_prevalence(SuperPopulationSpec spec, std::vector<double> target_prevalence);

// Class probabilities implied by the current thresholds.
std::vector<double> implied_prevalence(const SuperPopulationSpec& spec);

// Realized finite population. Units are stored in ascending id order.
class FinitePopulation {
 public:
  FinitePopulation() = default;
  FinitePopulation(Task task, std::size_t classes, std::size_t dim, std::string source,
                   std::uint64_t seed);

  Task task() const { return task_; }
  std::size_t classes() const { return classes_; }
  std::size_t dim() const { return x0_.dim(); }
  std::size_t size() const { return y0_.size(); }
  bool empty() const { return y0_.empty(); }
  const std::string& source() const { return source_; }
  std::uint64_t seed() const { return seed_; }

  UnitId id(std::size_t row) const { return x0_.id(row); }
  const std::vector<UnitId>& ids() const { return x0_.ids(); }
  std::span<const double> x0(std::size_t row) const { return x0_.row(row); }
  double y0(std::size_t row) const { return y0_[row]; }
  const FeatureMatrix& features() const { return x0_; }
  const std::vector<double>& targets() const { return y0_; }

  std::optional<std::size_t> find(UnitId id) const;
  // Throws LookupError for an unknown id.
  std::size_t row_of(UnitId id) const;
  bool contains(UnitId id) const { return find(id).has_value(); }
  // True when ids are exactly 1..N.
  bool contiguous() const;

  void reserve(std::size_t n) {
    x0_.reserve(n);
    y0_.reserve(n);
  }
  // Appends a unit; ids must be strictly increasing.
  void push_back(UnitId id, std::span<const double> x0, double y0);

 private:
  Task task_ = Task::regression;
  std::size_t classes_ = 0;
  FeatureMatrix x0_;
  std::vector<double> y0_;
  std::string source_;
  std::uint64_t seed_ = 0;
};

// Unit k (1..n) is drawn from substream (seed, k), so populations of
// different sizes realized with one seed share their common prefix.
FinitePopulation realize_population(const SuperPopulationSpec& spec, std::size_t n,
                                    std::uint64_t seed, std::uint64_t first_id = 1);

SuperPopulationSpec apply_drift(const SuperPopulationSpec& spec, double magnitude);

// Sum of y0 (regression) or number of units in class 1 (classification).
double true_total(const FinitePopulation& pop);

// The given rows of `pop` (ascending), ids preserved.
FinitePopulation subset(const FinitePopulation& pop, std::span<const std::size_t> rows);
// Union of two populations with disjoint ids, re-sorted by id.
FinitePopulation merge(const FinitePopulation& a, const FinitePopulation& b);

}  // namespace tmle
