#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <variant>
#include <vector>

#include "tmle/population.hpp"
#include "tmle/types.hpp"

namespace tmle {

// Simple random sampling without replacement of `size` units.
struct Srswor {
  std::size_t size = 0;
  bool operator==(const Srswor&) const = default;
};

// Simple random sampling with replacement: `size` independent uniform draws.
struct Srswr {
  std::size_t size = 0;
  bool operator==(const Srswr&) const = default;
};

// Independent Bernoulli selection. Either an explicit probability per
// population row, or an expected size spread equally (no size_feature) or
// proportional to a positive size feature, capped at 1.
struct PoissonDesign {
  std::optional<double> expected_size;
  std::optional<std::size_t> size_feature;
  std::vector<double> probabilities;
  bool operator==(const PoissonDesign&) const = default;
};

// SRSWOR within strata cut from one feature: stratum h holds units with
// cuts[h-1] <= x < cuts[h]; sizes has cuts.size() + 1 entries.
struct Stratified {
  std::size_t feature = 0;
  std::vector<double> cuts;
  std::vector<std::size_t> sizes;
  bool operator==(const Stratified&) const = default;
};

using Design = std::variant<Srswor, Srswr, PoissonDesign, Stratified>;

std::string describe(const Design& design);
bool with_replacement(const Design& design);

struct Draw {
  UnitId unit{};
  double inclusion_probability = 1.0;
  std::uint32_t multiplicity = 1;
  // Single-draw selection probability; with-replacement designs only.
  double selection_probability = 0.0;
  bool operator==(const Draw&) const = default;
};

// Drawn units in ascending id order.
struct Sample {
  std::vector<Draw> draws;
  bool with_replacement = false;
  std::size_t draw_count = 0;
  std::string design;
  std::uint64_t seed = 0;

  std::size_t size() const { return draws.size(); }
  bool empty() const { return draws.empty(); }
  std::vector<UnitId> ids() const;
  // 1/pi_k without replacement; the Hansen-Hurwitz factor m_k/(n p_k) with.
  double expansion_weight(const Draw& draw) const;
  std::optional<std::size_t> find(UnitId id) const;

  bool operator==(const Sample&) const = default;
};

Sample draw(const Design& design, const FinitePopulation& pop, std::uint64_t seed);

// Analytic first-order inclusion probability of unit k.
double inclusion_prob(const Design& design, const FinitePopulation& pop, UnitId k);

// Horvitz-Thompson total (Hansen-Hurwitz for with-replacement samples).
double ht_total(const Sample& sample, const std::unordered_map<UnitId, double>& values);
// Same, with values aligned to sample.draws.
double ht_total(const Sample& sample, std::span<const double> values);

// Keeps each drawn unit independently with its response propensity; the
// inclusion probabilities of the survivors are left unadjusted.
Sample apply_nonresponse(const Sample& sample, const std::unordered_map<UnitId, double>& propensity,
                         std::uint64_t seed);

}  // namespace tmle
