#include "tmle/calibration.hpp"

#include "tmle/error.hpp"
#include "tmle/numeric.hpp"

namespace tmle {

void CalibrationParams::validate() const {
  if (!(p_train > 0.0 && p_train < 1.0)) throw ConfigError("training prevalence must lie in (0, 1)");
  if (!(p_target > 0.0 && p_target < 1.0)) throw ConfigError("target prevalence must lie in (0, 1)");
}

double CalibrationParams::odds_ratio() const {
  return (p_target / (1.0 - p_target)) / (p_train / (1.0 - p_train));
}

double calibrate_score(double score, const CalibrationParams& params) {
  params.validate();
  if (!(score >= 0.0 && score <= 1.0)) throw DataError("score outside [0, 1]");
  if (params.p_train == params.p_target) return score;
  if (score == 0.0 || score == 1.0) return score;
  const double r = params.odds_ratio();
  return score * r / (score * r + (1.0 - score));
}

std::vector<double> calibrate_scores(std::span<const double> scores, const CalibrationParams& params) {
  std::vector<double> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = calibrate_score(scores[i], params);
  return out;
}

double estimate_positive_total(std::span<const double> scores, const CountMode& mode) {
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw DataError("score outside [0, 1]");
  }
  if (const auto* t = std::get_if<ThresholdCount>(&mode)) {
    if (!(t->tau >= 0.0 && t->tau <= 1.0)) throw ConfigError("threshold must lie in [0, 1]");
    double count = 0.0;
    for (double s : scores) count += s >= t->tau ? 1.0 : 0.0;
    return count;
  }
  return pairwise_sum(scores);
}

std::vector<double> ensemble_calibrated(const std::vector<std::vector<double>>& member_scores,
                                        std::span<const CalibrationParams> params) {
  if (member_scores.empty()) throw DataError("an ensemble needs at least one member");
  if (params.size() != member_scores.size()) throw DataError("one calibration per ensemble member is required");
  const std::size_t n = member_scores.front().size();
  std::vector<double> mean(n, 0.0);
  for (std::size_t m = 0; m < member_scores.size(); ++m) {
    if (member_scores[m].size() != n) throw DataError("ensemble members scored different numbers of units");
    const auto calibrated = calibrate_scores(member_scores[m], params[m]);
    for (std::size_t i = 0; i < n; ++i) mean[i] += calibrated[i];
  }
  const double k = static_cast<double>(member_scores.size());
  for (double& v : mean) v /= k;
  return mean;
}

double bias_metric(double est_pos, double true_pos, double n_total) {
  if (!(n_total > 0.0)) throw DataError("bias needs a positive population size");
  return (est_pos - true_pos) / n_total;
}

double threshold_accuracy(std::span<const double> scores, std::span<const double> truth, double tau) {
  if (scores.size() != truth.size()) throw DataError("scores and labels differ in length");
  if (scores.empty()) throw DataError("accuracy of an empty set is undefined");
  double hits = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= tau;
    hits += predicted == (truth[i] == 1.0) ? 1.0 : 0.0;
  }
  return hits / static_cast<double>(scores.size());
}

}  // namespace tmle
