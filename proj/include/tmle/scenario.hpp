#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "tmle/cart.hpp"
#include "tmle/measurement.hpp"
#include "tmle/population.hpp"
#include "tmle/representativity.hpp"
#include "tmle/sampling.hpp"

namespace tmle::harness {

inline constexpr int kSchemaVersion = 1;

enum class ErrorSource : std::size_t {
  feature_noise,
  label_error,
  frame_coverage,
  sampling,
  model_assumption,
  drift,
  nonresponse,
};

inline constexpr std::array kErrorSources = {
    ErrorSource::feature_noise,    ErrorSource::label_error, ErrorSource::frame_coverage, ErrorSource::sampling,
    ErrorSource::model_assumption, ErrorSource::drift,       ErrorSource::nonresponse,
};

std::string to_string(ErrorSource source);

// One switch per error source.
class Toggles {
 public:
  bool operator[](ErrorSource s) const { return on_[static_cast<std::size_t>(s)]; }
  Toggles& set(ErrorSource s, bool value = true) {
    on_[static_cast<std::size_t>(s)] = value;
    return *this;
  }
  bool none() const;
  // Sources that are on, joined by '+'; "none" when empty.
  std::string label() const;

  static Toggles all() {
    Toggles t;
    for (auto s : kErrorSources) t.set(s);
    return t;
  }
  bool operator==(const Toggles&) const = default;

 private:
  std::array<bool, kErrorSources.size()> on_{};
};

enum class SplitKind { holdout, kfold };

struct SplitRule {
  SplitKind kind = SplitKind::holdout;
  double holdout = 0.25;
  std::size_t folds = 5;
};

// Coverage distortions applied when a frame is built from a population.
// Each unit is left off with probability logistic(logit(undercoverage) +
// undercoverage_tilt * z), z the standardized target; then out-of-scope
// units are added until they make up the `overcoverage` share of the frame.
struct FrameRules {
  double undercoverage = 0.0;
  double undercoverage_tilt = 0.0;
  double overcoverage = 0.0;
  bool training = true;
  bool target = true;
};

// Response propensity logistic(logit(base) + tilt * z).
struct NonresponseModel {
  double base = 1.0;
  double tilt = 0.0;
};

enum class EstimatorMode { fixed_model, assisting };

struct CalibrationSettings {
  bool enabled = false;
  double target_prevalence = 0.0;
  double training_positive_share = 0.5;
  // Rows of the case-control training sample.
  std::size_t training_size = 1000;
  std::size_t ensemble_size = 10;
  double threshold = 0.5;
};

struct EnrichmentSettings {
  bool enabled = false;
  std::size_t initial_positives = 110;
  std::size_t initial_negatives = 330;
  std::size_t batch = 370;
  std::size_t iterations = 1;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  std::size_t replicates = 1;
  std::size_t threads = 0;

  SuperPopulationSpec population;
  std::size_t training_population_size = 0;
  std::size_t target_population_size = 0;
  double drift_magnitude = 0.0;

  FrameRules frame;
  Design training_design = Srswor{};
  SplitRule split;
  Design target_design = Srswor{};

  FeatureNoiseModel feature_noise;
  std::optional<TransformationMatrix> confusion;
  double target_sd = 0.0;
  NonresponseModel nonresponse;

  FitConfig tree;
  EstimatorMode mode = EstimatorMode::fixed_model;
  CalibrationSettings calibration;
  EnrichmentSettings enrichment;
  std::optional<Binning> representativity_cuts;

  // Sources the scenario lets the factorial switch on.
  Toggles toggles;

  // Normalized "key = value" listing of the parsed file.
  std::string canonical;

  void validate() const;
  // Target super-population under the given drift switch.
  SuperPopulationSpec target_population(bool drift_on) const;
};

// Throws ConfigError naming the line for malformed input or unknown keys.
ScenarioConfig parse_scenario(std::string_view text);
ScenarioConfig load_scenario(const std::filesystem::path& path);

// FNV-1a over the canonical listing plus seed and replicate count.
std::uint64_t config_hash(const ScenarioConfig& config);

std::string to_string(EstimatorMode mode);

}  // namespace tmle::harness
