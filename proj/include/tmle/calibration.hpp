#pragma once

#include <span>
#include <string>
#include <variant>
#include <vector>

namespace tmle {

// Positive share of the training data and the assumed population prevalence.
struct CalibrationParams {
  double p_train = 0.5;
  double p_target = 0.5;

  void validate() const;
  // (p_target odds) / (p_train odds).
  double odds_ratio() const;
};

// Prior-shift correction s' = s r / (s r + 1 - s).
double calibrate_score(double score, const CalibrationParams& params);
std::vector<double> calibrate_scores(std::span<const double> scores, const CalibrationParams& params);

struct ThresholdCount {
  double tau = 0.5;
};
struct ProbabilitySum {};
using CountMode = std::variant<ThresholdCount, ProbabilitySum>;

// count(s >= tau) or sum(s).
double estimate_positive_total(std::span<const double> scores, const CountMode& mode);

// Per-unit mean of the members' calibrated scores.
std::vector<double> ensemble_calibrated(const std::vector<std::vector<double>>& member_scores,
                                        std::span<const CalibrationParams> params);

// (est - true) / n_total.
double bias_metric(double est_pos, double true_pos, double n_total);

struct Table1Row {
  std::string method;
  double true_pos = 0.0;
  double est_pos = 0.0;
  double bias = 0.0;
  double accuracy = 0.0;
};

// Share of units whose thresholded score matches the 0/1 truth.
double threshold_accuracy(std::span<const double> scores, std::span<const double> truth, double tau = 0.5);

}  // namespace tmle
