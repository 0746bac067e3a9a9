#include "tmle/population.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <sstream>

#include <boost/math/distributions/normal.hpp>

#include "tmle/error.hpp"
#include "tmle/numeric.hpp"

namespace tmle {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

constexpr std::size_t kCalibrationPoints = std::size_t{1} << 18;
constexpr std::uint64_t kCalibrationSeed = rng::tag("tmle/prevalence-calibration");
constexpr double kProbabilityTolerance = 1e-9;

std::size_t categorical_index(const std::vector<double>& probabilities, double u) {
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probabilities.size(); ++i) {
    cumulative += probabilities[i];
    if (u < cumulative) return i;
  }
  return probabilities.size() - 1;
}

void check_probability_vector(const std::vector<double>& p, const std::string& what) {
  if (p.empty()) throw ConfigError(what + " is empty");
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(what + " has an entry outside [0, 1]");
    sum += v;
  }
  if (std::abs(sum - 1.0) > kProbabilityTolerance) {
    throw ConfigError(what + " sums to " + std::to_string(sum) + ", not 1");
  }
}

// Latin hypercube draw of the feature law with a fixed internal seed; the
// latent locations eta(x) of these points stand in for F(X) when solving
// and evaluating class thresholds.
std::vector<double> calibration_scores(const SuperPopulationSpec& spec) {
  const std::size_t m = kCalibrationPoints;
  std::vector<std::vector<double>> columns(spec.dim(), std::vector<double>(m));
  for (std::size_t j = 0; j < spec.dim(); ++j) {
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    rng::Stream stream(kCalibrationSeed, j);
    for (std::size_t i = m - 1; i > 0; --i) std::swap(order[i], order[stream.below(i + 1)]);
    for (std::size_t i = 0; i < m; ++i) {
      const double u = (static_cast<double>(order[i]) + 0.5) / static_cast<double>(m);
      columns[j][i] = feature_quantile(spec.features[j], u);
    }
  }
  std::vector<double> scores(m);
  std::vector<double> x(spec.dim());
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < spec.dim(); ++j) x[j] = columns[j][i];
    scores[i] = spec.dependence.score(x);
  }
  return scores;
}

// P(eta + e <= t) averaged over the calibration points.
double latent_cdf(const SuperPopulationSpec& spec, const std::vector<double>& scores, double t) {
  double total = 0.0;
  if (spec.dependence.kind == DependenceKind::logistic_threshold) {
    for (double eta : scores) total += logistic(t - eta);
  } else if (spec.noise_sd > 0.0) {
    const double scale = spec.noise_sd * std::numbers::sqrt2;
    for (double eta : scores) total += 0.5 * std::erfc(-(t - eta) / scale);
  } else {
    for (double eta : scores) total += eta <= t ? 1.0 : 0.0;
  }
  return total / static_cast<double>(scores.size());
}

double noise_scale(const SuperPopulationSpec& spec) {
  if (spec.dependence.kind == DependenceKind::logistic_threshold) return 1.0;
  return std::max(spec.noise_sd, 1.0);
}

std::size_t class_of(const std::vector<double>& thresholds, double z) {
  std::size_t c = 0;
  while (c < thresholds.size() && z > thresholds[c]) ++c;
  return c;
}

}  // namespace

double sample_feature(const FeatureLaw& law, rng::Stream& stream) {
  return std::visit(
      Overloaded{
          [&](const UniformLaw& u) { return stream.uniform(u.lower, u.upper); },
          [&](const NormalLaw& n) { return stream.normal(n.mean, n.sd); },
          [&](const CategoricalLaw& c) {
            return static_cast<double>(categorical_index(c.probabilities, stream.uniform()));
          }},
      law);
}

double feature_quantile(const FeatureLaw& law, double u) {
  return std::visit(
      Overloaded{[&](const UniformLaw& l) { return l.lower + (l.upper - l.lower) * u; },
                 [&](const NormalLaw& n) {
                   if (n.sd == 0.0) return n.mean;
                   return boost::math::quantile(boost::math::normal(n.mean, n.sd), u);
                 },
                 [&](const CategoricalLaw& c) {
                   return static_cast<double>(categorical_index(c.probabilities, u));
                 }},
      law);
}

std::string describe(const FeatureLaw& law) {
  std::ostringstream out;
  std::visit(Overloaded{[&](const UniformLaw& l) {
                          out << "uniform(" << l.lower << ", " << l.upper << ")";
                        },
                        [&](const NormalLaw& n) { out << "normal(" << n.mean << ", " << n.sd << ")"; },
                        [&](const CategoricalLaw& c) {
                          out << "categorical(";
                          for (std::size_t i = 0; i < c.probabilities.size(); ++i) {
                            out << (i ? ", " : "") << c.probabilities[i];
                          }
                          out << ")";
                        }},
             law);
  return out.str();
}

std::string to_string(DependenceKind kind) {
  switch (kind) {
    case DependenceKind::linear:
      return "linear";
    case DependenceKind::piecewise_constant:
      return "piecewise_constant";
    case DependenceKind::logistic_threshold:
      return "logistic_threshold";
  }
  return "?";
}

std::optional<DependenceKind> parse_dependence_kind(std::string_view name) {
  if (name == "linear") return DependenceKind::linear;
  if (name == "piecewise_constant") return DependenceKind::piecewise_constant;
  if (name == "logistic_threshold") return DependenceKind::logistic_threshold;
  return std::nullopt;
}

std::string to_string(DriftKind kind) {
  switch (kind) {
    case DriftKind::none:
      return "none";
    case DriftKind::mean_shift:
      return "mean_shift";
    case DriftKind::scale:
      return "scale";
    case DriftKind::theta_rotation:
      return "theta_rotation";
  }
  return "?";
}

std::optional<DriftKind> parse_drift_kind(std::string_view name) {
  if (name == "none") return DriftKind::none;
  if (name == "mean_shift") return DriftKind::mean_shift;
  if (name == "scale") return DriftKind::scale;
  if (name == "theta_rotation") return DriftKind::theta_rotation;
  return std::nullopt;
}

double Dependence::score(std::span<const double> x) const {
  double eta = intercept;
  for (std::size_t j = 0; j < coefficients.size(); ++j) {
    if (kind == DependenceKind::piecewise_constant) {
      eta += x[j] > cuts[j] ? coefficients[j] : 0.0;
    } else {
      eta += coefficients[j] * x[j];
    }
  }
  return eta;
}

double SuperPopulationSpec::mean_response(std::span<const double> x) const {
  const double eta = dependence.score(x);
  if (task == Task::regression && dependence.kind == DependenceKind::logistic_threshold) {
    return logistic(eta);
  }
  return eta;
}

void SuperPopulationSpec::validate() const {
  if (features.empty()) throw ConfigError(name + ": at least one feature is required");
  for (std::size_t j = 0; j < features.size(); ++j) {
    const std::string where = name + ": feature " + std::to_string(j);
    std::visit(Overloaded{[&](const UniformLaw& u) {
                            if (!(u.lower < u.upper)) throw ConfigError(where + ": uniform needs lower < upper");
                          },
                          [&](const NormalLaw& n) {
                            if (!(n.sd >= 0.0)) throw ConfigError(where + ": negative standard deviation");
                          },
                          [&](const CategoricalLaw& c) { check_probability_vector(c.probabilities, where); }},
               features[j]);
  }
  if (dependence.coefficients.size() != features.size()) {
    throw ConfigError(name + ": dependence needs one coefficient per feature");
  }
  if (dependence.kind == DependenceKind::piecewise_constant &&
      dependence.cuts.size() != features.size()) {
    throw ConfigError(name + ": piecewise_constant dependence needs one cut per feature");
  }
  if (!(noise_sd >= 0.0)) throw ConfigError(name + ": negative noise standard deviation");
  if (task == Task::regression) {
    if (classes != 0 || !thresholds.empty() || !prevalence.empty()) {
      throw ConfigError(name + ": regression spec must not carry classes or prevalence");
    }
  } else {
    if (classes < 2) throw ConfigError(name + ": classification needs at least 2 classes");
    if (thresholds.size() != classes - 1) {
      throw ConfigError(name + ": expected " + std::to_string(classes - 1) + " class thresholds");
    }
    if (!std::is_sorted(thresholds.begin(), thresholds.end())) {
      throw ConfigError(name + ": class thresholds must be ascending");
    }
    if (prevalence.size() != classes) throw ConfigError(name + ": prevalence needs one entry per class");
    check_probability_vector(prevalence, name + ": prevalence");
  }
  switch (drift.kind) {
    case DriftKind::none:
      break;
    case DriftKind::mean_shift:
    case DriftKind::scale:
      if (drift.feature >= features.size()) throw ConfigError(name + ": drift feature out of range");
      if (std::holds_alternative<CategoricalLaw>(features[drift.feature])) {
        throw ConfigError(name + ": " + to_string(drift.kind) + " drift is undefined for categorical features");
      }
      break;
    case DriftKind::theta_rotation:
      if (drift.plane[0] >= features.size() || drift.plane[1] >= features.size() ||
          drift.plane[0] == drift.plane[1]) {
        throw ConfigError(name + ": theta_rotation needs two distinct coefficient indices");
      }
      break;
  }
}

SuperPopulationSpec with_prevalence(SuperPopulationSpec spec, std::vector<double> target_prevalence) {
  if (spec.task != Task::classification) throw ConfigError(spec.name + ": prevalence applies to classification only");
  if (target_prevalence.size() != spec.classes) {
    throw ConfigError(spec.name + ": prevalence needs one entry per class");
  }
  check_probability_vector(target_prevalence, spec.name + ": prevalence");
  for (double p : target_prevalence) {
    if (p <= 0.0) throw ConfigError(spec.name + ": every class needs positive prevalence");
  }

  const auto scores = calibration_scores(spec);
  const auto [lo_it, hi_it] = std::minmax_element(scores.begin(), scores.end());
  const double pad = 50.0 * noise_scale(spec);

  spec.thresholds.assign(spec.classes - 1, 0.0);
  double cumulative = 0.0;
  for (std::size_t c = 0; c + 1 < spec.classes; ++c) {
    cumulative += target_prevalence[c];
    double lo = *lo_it - pad;
    double hi = *hi_it + pad;
    while (hi - lo > 1e-6 * std::max(1.0, std::abs(0.5 * (lo + hi)))) {
      const double mid = 0.5 * (lo + hi);
      if (latent_cdf(spec, scores, mid) < cumulative) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    spec.thresholds[c] = 0.5 * (lo + hi);
  }
  spec.prevalence = std::move(target_prevalence);
  spec.validate();
  return spec;
}

std::vector<double> implied_prevalence(const SuperPopulationSpec& spec) {
  if (spec.task != Task::classification) throw ConfigError(spec.name + ": prevalence applies to classification only");
  const auto scores = calibration_scores(spec);
  std::vector<double> out(spec.classes);
  double previous = 0.0;
  for (std::size_t c = 0; c + 1 < spec.classes; ++c) {
    const double cdf = latent_cdf(spec, scores, spec.thresholds[c]);
    out[c] = cdf - previous;
    previous = cdf;
  }
  out.back() = 1.0 - previous;
  return out;
}

FinitePopulation::FinitePopulation(Task task, std::size_t classes, std::size_t dim, std::string source,
                                   std::uint64_t seed)
    : task_(task), classes_(classes), x0_(dim), source_(std::move(source)), seed_(seed) {}

std::optional<std::size_t> FinitePopulation::find(UnitId id) const {
  const auto& v = x0_.ids();
  if (contiguous()) {
    const auto k = raw(id);
    if (k >= 1 && k <= v.size()) return static_cast<std::size_t>(k - 1);
    return std::nullopt;
  }
  const auto it = std::lower_bound(v.begin(), v.end(), id);
  if (it == v.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - v.begin());
}

std::size_t FinitePopulation::row_of(UnitId id) const {
  if (auto row = find(id)) return *row;
  throw LookupError("unit " + std::to_string(raw(id)) + " is not in population '" + source_ + "'");
}

bool FinitePopulation::contiguous() const {
  const auto& v = x0_.ids();
  return v.empty() || (raw(v.front()) == 1 && raw(v.back()) == v.size());
}

void FinitePopulation::push_back(UnitId id, std::span<const double> x0, double y0) {
  if (!x0_.ids().empty() && !(x0_.ids().back() < id)) {
    throw DataError("population units must be appended in increasing id order");
  }
  x0_.push_back(id, x0);
  y0_.push_back(y0);
}

FinitePopulation realize_population(const SuperPopulationSpec& spec, std::size_t n, std::uint64_t seed,
                                    std::uint64_t first_id) {
  spec.validate();
  FinitePopulation pop(spec.task, spec.classes, spec.dim(), spec.name, seed);
  pop.reserve(n);
  std::vector<double> x(spec.dim());
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t k = first_id + i;
    rng::Stream stream(seed, k);
    for (std::size_t j = 0; j < spec.dim(); ++j) x[j] = sample_feature(spec.features[j], stream);
    double y = 0.0;
    if (spec.task == Task::regression) {
      y = spec.mean_response(x);
      if (spec.noise_sd > 0.0) y += stream.normal(0.0, spec.noise_sd);
    } else {
      double z = spec.dependence.score(x);
      if (spec.dependence.kind == DependenceKind::logistic_threshold) {
        z += stream.logistic();
      } else if (spec.noise_sd > 0.0) {
        z += stream.normal(0.0, spec.noise_sd);
      }
      y = static_cast<double>(class_of(spec.thresholds, z));
    }
    pop.push_back(unit_id(k), x, y);
  }
  return pop;
}

SuperPopulationSpec apply_drift(const SuperPopulationSpec& spec, double magnitude) {
  if (!(magnitude >= 0.0)) throw ConfigError("drift magnitude must be >= 0");
  spec.validate();
  if (magnitude == 0.0) return spec;

  SuperPopulationSpec out = spec;
  switch (spec.drift.kind) {
    case DriftKind::none:
      throw ConfigError(spec.name + ": no drift operator configured");
    case DriftKind::mean_shift:
      std::visit(Overloaded{[&](UniformLaw& u) {
                              u.lower += magnitude;
                              u.upper += magnitude;
                            },
                            [&](NormalLaw& n) { n.mean += magnitude; },
                            [&](CategoricalLaw&) {}},
                 out.features[spec.drift.feature]);
      break;
    case DriftKind::scale:
      std::visit(Overloaded{[&](UniformLaw& u) {
                              const double centre = 0.5 * (u.lower + u.upper);
                              const double half = 0.5 * (u.upper - u.lower) * (1.0 + magnitude);
                              u.lower = centre - half;
                              u.upper = centre + half;
                            },
                            [&](NormalLaw& n) { n.sd *= 1.0 + magnitude; },
                            [&](CategoricalLaw&) {}},
                 out.features[spec.drift.feature]);
      break;
    case DriftKind::theta_rotation: {
      auto& c = out.dependence.coefficients;
      const auto [i, j] = spec.drift.plane;
      const double a = c[i];
      const double b = c[j];
      c[i] = a * std::cos(magnitude) - b * std::sin(magnitude);
      c[j] = a * std::sin(magnitude) + b * std::cos(magnitude);
      break;
    }
  }
  // Thresholds stay put; the class mix follows the drifted law.
  if (out.task == Task::classification) out.prevalence = implied_prevalence(out);
  return out;
}

double true_total(const FinitePopulation& pop) {
  if (pop.task() == Task::regression) return pairwise_sum(pop.targets());
  double count = 0.0;
  for (double y : pop.targets()) count += y == 1.0 ? 1.0 : 0.0;
  return count;
}

FinitePopulation subset(const FinitePopulation& pop, std::span<const std::size_t> rows) {
  FinitePopulation out(pop.task(), pop.classes(), pop.dim(), pop.source(), pop.seed());
  out.reserve(rows.size());
  for (std::size_t r : rows) out.push_back(pop.id(r), pop.x0(r), pop.y0(r));
  return out;
}

FinitePopulation merge(const FinitePopulation& a, const FinitePopulation& b) {
  if (a.dim() != b.dim() || a.task() != b.task()) {
    throw DataError("cannot merge populations with different feature spaces or tasks");
  }
  FinitePopulation out(a.task(), a.classes(), a.dim(), a.source(), a.seed());
  out.reserve(a.size() + b.size());
  std::size_t i = 0;
  std::size_t j = 0;
  while (i < a.size() || j < b.size()) {
    const bool take_a = j == b.size() || (i < a.size() && a.id(i) < b.id(j));
    if (!take_a && i < a.size() && a.id(i) == b.id(j)) {
      throw DataError("merged populations share unit " + std::to_string(raw(a.id(i))));
    }
    if (take_a) {
      out.push_back(a.id(i), a.x0(i), a.y0(i));
      ++i;
    } else {
      out.push_back(b.id(j), b.x0(j), b.y0(j));
      ++j;
    }
  }
  return out;
}

}  // namespace tmle
