#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tmle/measurement.hpp"
#include "tmle/population.hpp"

namespace tmle {

// Sup-norm distance between the empirical distribution functions of a and b.
double ks_distance(std::span<const double> a, std::span<const double> b);

// Per-feature cut points; the cells are the cartesian product of the
// per-feature intervals (-inf, c0), [c0, c1), ..., [c_last, inf).
struct Binning {
  std::vector<std::vector<double>> cuts;

  std::size_t cell_count() const;
  std::size_t cell_of(std::span<const double> x) const;
  // Interval index per feature, for reporting.
  std::vector<std::size_t> coordinates(std::size_t cell) const;
};

// Quartile cut points of each feature of `data` (duplicates dropped).
Binning quartile_binning(const ObservedDataset& data);

struct CellDistance {
  std::size_t cell = 0;
  std::vector<std::size_t> coordinates;
  std::size_t count_a = 0;
  std::size_t count_b = 0;
  double distance = 0.0;
  bool covered = false;
};

struct RepresentativityReport {
  // KS distance per feature, then for the target.
  std::vector<double> marginal;
  std::vector<CellDistance> cells;
  double undercoverage = 0.0;
  double overcoverage = 0.0;
  double max_distance = 0.0;
  double mean_distance = 0.0;
};

// Within each cell populated in either dataset, the KS distance between the
// target values of a and b. Cells empty on one side are uncovered; the share
// of a's rows in cells b lacks is the undercoverage rate, and the share of
// b's rows in cells a lacks the overcoverage rate. Summary statistics run
// over covered cells.
RepresentativityReport conditional_representativity(const ObservedDataset& a, const ObservedDataset& b,
                                                     const Binning& binning);

struct CoverageRates {
  double undercoverage = 0.0;
  double overcoverage = 0.0;
};

// Set comparison of unit ids: |target \ frame| / |target| and |frame \ target| / |frame|.
CoverageRates coverage_report(const FinitePopulation& frame, const FinitePopulation& target);

}  // namespace tmle
