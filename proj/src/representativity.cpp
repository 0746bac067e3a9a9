#include "tmle/representativity.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "tmle/error.hpp"

namespace tmle {

double ks_distance(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) throw DataError("ks_distance needs two nonempty samples");
  std::vector<double> sa(a.begin(), a.end());
  std::vector<double> sb(b.begin(), b.end());
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  const double na = static_cast<double>(sa.size());
  const double nb = static_cast<double>(sb.size());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  // Step both ECDFs past every copy of the next smallest value, then compare.
  while (i < sa.size() && j < sb.size()) {
    const double v = std::min(sa[i], sb[j]);
    while (i < sa.size() && sa[i] == v) ++i;
    while (j < sb.size() && sb[j] == v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

std::size_t Binning::cell_count() const {
  std::size_t n = 1;
  for (const auto& c : cuts) n *= c.size() + 1;
  return n;
}

std::size_t Binning::cell_of(std::span<const double> x) const {
  if (x.size() != cuts.size()) throw DataError("binning dimension does not match the feature vector");
  std::size_t cell = 0;
  for (std::size_t j = 0; j < cuts.size(); ++j) {
    const auto bin = static_cast<std::size_t>(std::upper_bound(cuts[j].begin(), cuts[j].end(), x[j]) - cuts[j].begin());
    cell = cell * (cuts[j].size() + 1) + bin;
  }
  return cell;
}

std::vector<std::size_t> Binning::coordinates(std::size_t cell) const {
  std::vector<std::size_t> out(cuts.size());
  for (std::size_t j = cuts.size(); j-- > 0;) {
    out[j] = cell % (cuts[j].size() + 1);
    cell /= cuts[j].size() + 1;
  }
  return out;
}

Binning quartile_binning(const ObservedDataset& data) {
  if (data.empty()) throw DataError("quartiles of an empty dataset are undefined");
  Binning binning;
  for (std::size_t j = 0; j < data.dim(); ++j) {
    auto column = data.x.column(j);
    std::sort(column.begin(), column.end());
    std::vector<double> cuts;
    for (double q : {0.25, 0.5, 0.75}) {
      const auto idx = static_cast<std::size_t>(q * static_cast<double>(column.size() - 1) + 0.5);
      const double v = column[idx];
      if (cuts.empty() || v > cuts.back()) cuts.push_back(v);
    }
    binning.cuts.push_back(std::move(cuts));
  }
  return binning;
}

RepresentativityReport conditional_representativity(const ObservedDataset& a, const ObservedDataset& b,
                                                     const Binning& binning) {
  if (a.dim() != b.dim() || a.dim() != binning.cuts.size()) {
    throw ComparisonError("datasets and binning must share one feature space");
  }
  if (a.empty() || b.empty()) throw DataError("representativity needs two nonempty datasets");

  RepresentativityReport report;
  for (std::size_t j = 0; j < a.dim(); ++j) report.marginal.push_back(ks_distance(a.x.column(j), b.x.column(j)));
  report.marginal.push_back(ks_distance(a.y, b.y));

  std::map<std::size_t, std::pair<std::vector<double>, std::vector<double>>> cells;
  for (std::size_t r = 0; r < a.size(); ++r) cells[binning.cell_of(a.x.row(r))].first.push_back(a.y[r]);
  for (std::size_t r = 0; r < b.size(); ++r) cells[binning.cell_of(b.x.row(r))].second.push_back(b.y[r]);

  std::size_t a_uncovered = 0;
  std::size_t b_uncovered = 0;
  std::size_t covered = 0;
  double distance_sum = 0.0;
  for (const auto& [cell, values] : cells) {
    CellDistance cd;
    cd.cell = cell;
    cd.coordinates = binning.coordinates(cell);
    cd.count_a = values.first.size();
    cd.count_b = values.second.size();
    cd.covered = cd.count_a > 0 && cd.count_b > 0;
    if (cd.covered) {
      cd.distance = ks_distance(values.first, values.second);
      report.max_distance = std::max(report.max_distance, cd.distance);
      distance_sum += cd.distance;
      ++covered;
    } else if (cd.count_b == 0) {
      a_uncovered += cd.count_a;
    } else {
      b_uncovered += cd.count_b;
    }
    report.cells.push_back(std::move(cd));
  }
  if (covered == 0) throw ComparisonError("the datasets share no populated cell");
  report.mean_distance = distance_sum / static_cast<double>(covered);
  report.undercoverage = static_cast<double>(a_uncovered) / static_cast<double>(a.size());
  report.overcoverage = static_cast<double>(b_uncovered) / static_cast<double>(b.size());
  return report;
}

CoverageRates coverage_report(const FinitePopulation& frame, const FinitePopulation& target) {
  if (target.empty()) throw DataError("coverage of an empty target population is undefined");
  std::size_t missing = 0;
  for (UnitId id : target.ids()) missing += frame.contains(id) ? 0 : 1;
  std::size_t extra = 0;
  for (UnitId id : frame.ids()) extra += target.contains(id) ? 0 : 1;
  CoverageRates rates;
  rates.undercoverage = static_cast<double>(missing) / static_cast<double>(target.size());
  rates.overcoverage = frame.empty() ? 0.0 : static_cast<double>(extra) / static_cast<double>(frame.size());
  return rates;
}

}  // namespace tmle
