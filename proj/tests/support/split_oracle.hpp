#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

// Exhaustive depth-1 split search on one feature: every midpoint between
// consecutive distinct values, SSE of the two sides by direct summation.
struct OracleSplit {
  bool found = false;
  double threshold = 0.0;
  double sse = std::numeric_limits<double>::infinity();
  // Number of candidate cuts reaching the minimum (within 1e-9).
  std::size_t minimizers = 0;
};

inline double side_sse(const std::vector<double>& x, const std::vector<double>& y, double cut, bool left) {
  double sum = 0.0;
  double n = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i] < cut) == left) {
      sum += y[i];
      n += 1.0;
    }
  }
  if (n == 0.0) return 0.0;
  const double mean = sum / n;
  double sse = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if ((x[i] < cut) == left) sse += (y[i] - mean) * (y[i] - mean);
  }
  return sse;
}

inline double split_sse(const std::vector<double>& x, const std::vector<double>& y, double cut) {
  return side_sse(x, y, cut, true) + side_sse(x, y, cut, false);
}

inline OracleSplit brute_force_split(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> v = x;
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  OracleSplit best;
  std::vector<std::pair<double, double>> candidates;
  for (std::size_t i = 1; i < v.size(); ++i) {
    const double cut = (v[i - 1] + v[i]) / 2.0;
    candidates.emplace_back(cut, split_sse(x, y, cut));
  }
  for (const auto& [cut, sse] : candidates) {
    if (sse < best.sse) {
      best.found = true;
      best.threshold = cut;
      best.sse = sse;
    }
  }
  for (const auto& c : candidates) best.minimizers += c.second <= best.sse + 1e-9 * (1.0 + best.sse);
  return best;
}
