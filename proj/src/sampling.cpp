#include "tmle/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "tmle/error.hpp"
#include "tmle/numeric.hpp"
#include "tmle/rng.hpp"

namespace tmle {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::size_t stratum_of(const Stratified& design, double x) {
  return static_cast<std::size_t>(std::upper_bound(design.cuts.begin(), design.cuts.end(), x) -
                                  design.cuts.begin());
}

std::vector<std::size_t> stratum_counts(const Stratified& design, const FinitePopulation& pop) {
  if (design.feature >= pop.dim()) throw DesignError("stratification feature out of range");
  if (design.sizes.size() != design.cuts.size() + 1) {
    throw DesignError("stratified design needs one sample size per stratum");
  }
  if (!std::is_sorted(design.cuts.begin(), design.cuts.end())) {
    throw DesignError("stratum cut points must be ascending");
  }
  std::vector<std::size_t> counts(design.sizes.size(), 0);
  for (std::size_t r = 0; r < pop.size(); ++r) ++counts[stratum_of(design, pop.x0(r)[design.feature])];
  for (std::size_t h = 0; h < counts.size(); ++h) {
    if (design.sizes[h] > counts[h]) {
      throw DesignError("stratum " + std::to_string(h) + " asks for " + std::to_string(design.sizes[h]) +
                        " units but holds " + std::to_string(counts[h]));
    }
  }
  return counts;
}

// Inclusion probabilities of a Poisson design, one per population row.
std::vector<double> poisson_probabilities(const PoissonDesign& design, const FinitePopulation& pop) {
  const std::size_t n = pop.size();
  std::vector<double> pi;
  if (!design.probabilities.empty()) {
    if (design.probabilities.size() != n) {
      throw DesignError("Poisson design lists " + std::to_string(design.probabilities.size()) +
                        " probabilities for " + std::to_string(n) + " units");
    }
    pi = design.probabilities;
  } else {
    if (!design.expected_size) throw DesignError("Poisson design needs probabilities or an expected size");
    const double target = *design.expected_size;
    if (!(target > 0.0) || target > static_cast<double>(n)) {
      throw DesignError("Poisson expected size must lie in (0, N]");
    }
    std::vector<double> size(n, 1.0);
    if (design.size_feature) {
      if (*design.size_feature >= pop.dim()) throw DesignError("Poisson size feature out of range");
      for (std::size_t r = 0; r < n; ++r) {
        size[r] = pop.x0(r)[*design.size_feature];
        if (!(size[r] > 0.0)) throw DesignError("Poisson size measure must be positive");
      }
    }
    // Proportional to size, with units that would exceed 1 fixed at 1 and
    // the remainder re-spread until no probability exceeds 1.
    pi.assign(n, 0.0);
    std::vector<bool> capped(n, false);
    for (;;) {
      double free_size = 0.0;
      double capped_count = 0.0;
      for (std::size_t r = 0; r < n; ++r) {
        if (capped[r]) {
          capped_count += 1.0;
        } else {
          free_size += size[r];
        }
      }
      const double scale = (target - capped_count) / free_size;
      bool changed = false;
      for (std::size_t r = 0; r < n; ++r) {
        if (capped[r]) {
          pi[r] = 1.0;
        } else if (size[r] * scale >= 1.0) {
          capped[r] = true;
          changed = true;
        } else {
          pi[r] = size[r] * scale;
        }
      }
      if (!changed) break;
    }
  }
  for (double p : pi) {
    if (!(p > 0.0 && p <= 1.0)) throw DesignError("Poisson inclusion probabilities must lie in (0, 1]");
  }
  return pi;
}

// Partial Fisher-Yates choice of `n` of `rows`, returned in ascending order.
std::vector<std::size_t> choose_without_replacement(std::vector<std::size_t> rows, std::size_t n,
                                                    rng::Stream& stream) {
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(stream.below(rows.size() - i));
    std::swap(rows[i], rows[j]);
  }
  rows.resize(n);
  std::sort(rows.begin(), rows.end());
  return rows;
}

}  // namespace

std::string describe(const Design& design) {
  std::ostringstream out;
  std::visit(Overloaded{[&](const Srswor& d) { out << "srswor(" << d.size << ")"; },
                        [&](const Srswr& d) { out << "srswr(" << d.size << ")"; },
                        [&](const PoissonDesign& d) {
                          out << "poisson(";
                          if (!d.probabilities.empty()) {
                            out << "explicit";
                          } else {
                            out << d.expected_size.value_or(0.0);
                            if (d.size_feature) out << ", size=x" << *d.size_feature;
                          }
                          out << ")";
                        },
                        [&](const Stratified& d) {
                          out << "stratified(x" << d.feature << ", sizes=";
                          for (std::size_t h = 0; h < d.sizes.size(); ++h) out << (h ? "/" : "") << d.sizes[h];
                          out << ")";
                        }},
             design);
  return out.str();
}

bool with_replacement(const Design& design) { return std::holds_alternative<Srswr>(design); }

std::vector<UnitId> Sample::ids() const {
  std::vector<UnitId> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d.unit);
  return out;
}

double Sample::expansion_weight(const Draw& d) const {
  if (with_replacement) {
    if (!(d.selection_probability > 0.0)) throw DesignError("zero selection probability");
    return static_cast<double>(d.multiplicity) /
           (static_cast<double>(draw_count) * d.selection_probability);
  }
  if (!(d.inclusion_probability > 0.0)) {
    throw DesignError("zero inclusion probability for unit " + std::to_string(raw(d.unit)));
  }
  return 1.0 / d.inclusion_probability;
}

std::optional<std::size_t> Sample::find(UnitId id) const {
  const auto it = std::lower_bound(draws.begin(), draws.end(), id,
                                   [](const Draw& d, UnitId v) { return d.unit < v; });
  if (it == draws.end() || it->unit != id) return std::nullopt;
  return static_cast<std::size_t>(it - draws.begin());
}

Sample draw(const Design& design, const FinitePopulation& pop, std::uint64_t seed) {
  Sample sample;
  sample.design = describe(design);
  sample.seed = seed;
  sample.with_replacement = with_replacement(design);
  const std::size_t big_n = pop.size();

  std::visit(
      Overloaded{
          [&](const Srswor& d) {
            if (d.size > big_n) {
              throw DesignError("SRSWOR sample size " + std::to_string(d.size) + " exceeds population size " +
                                std::to_string(big_n));
            }
            std::vector<std::size_t> rows(big_n);
            std::iota(rows.begin(), rows.end(), std::size_t{0});
            rng::Stream stream(seed, 0);
            const double pi = big_n == 0 ? 1.0 : static_cast<double>(d.size) / static_cast<double>(big_n);
            for (std::size_t r : choose_without_replacement(std::move(rows), d.size, stream)) {
              sample.draws.push_back({pop.id(r), pi, 1, 0.0});
            }
            sample.draw_count = d.size;
          },
          [&](const Srswr& d) {
            if (d.size > 0 && big_n == 0) throw DesignError("cannot draw from an empty population");
            rng::Stream stream(seed, 0);
            std::map<std::size_t, std::uint32_t> hits;
            for (std::size_t i = 0; i < d.size; ++i) ++hits[static_cast<std::size_t>(stream.below(big_n))];
            const double p = 1.0 / static_cast<double>(big_n);
            const double pi = 1.0 - std::pow(1.0 - p, static_cast<double>(d.size));
            for (const auto& [row, m] : hits) sample.draws.push_back({pop.id(row), pi, m, p});
            sample.draw_count = d.size;
          },
          [&](const PoissonDesign& d) {
            const auto pi = poisson_probabilities(d, pop);
            for (std::size_t r = 0; r < big_n; ++r) {
              rng::Stream stream(seed, raw(pop.id(r)));
              if (stream.uniform() < pi[r]) sample.draws.push_back({pop.id(r), pi[r], 1, 0.0});
            }
            sample.draw_count = sample.draws.size();
          },
          [&](const Stratified& d) {
            const auto counts = stratum_counts(d, pop);
            std::vector<std::vector<std::size_t>> members(counts.size());
            for (std::size_t r = 0; r < big_n; ++r) members[stratum_of(d, pop.x0(r)[d.feature])].push_back(r);
            std::vector<Draw> draws;
            for (std::size_t h = 0; h < members.size(); ++h) {
              if (d.sizes[h] == 0) continue;
              rng::Stream stream(seed, h + 1);
              const double pi = static_cast<double>(d.sizes[h]) / static_cast<double>(counts[h]);
              for (std::size_t r : choose_without_replacement(members[h], d.sizes[h], stream)) {
                draws.push_back({pop.id(r), pi, 1, 0.0});
              }
            }
            std::sort(draws.begin(), draws.end(), [](const Draw& a, const Draw& b) { return a.unit < b.unit; });
            sample.draws = std::move(draws);
            sample.draw_count = sample.draws.size();
          }},
      design);
  return sample;
}

double inclusion_prob(const Design& design, const FinitePopulation& pop, UnitId k) {
  const std::size_t row = pop.row_of(k);
  const double big_n = static_cast<double>(pop.size());
  return std::visit(
      Overloaded{[&](const Srswor& d) {
                   if (d.size > pop.size()) throw DesignError("SRSWOR sample size exceeds population size");
                   return static_cast<double>(d.size) / big_n;
                 },
                 [&](const Srswr& d) { return 1.0 - std::pow(1.0 - 1.0 / big_n, static_cast<double>(d.size)); },
                 [&](const PoissonDesign& d) { return poisson_probabilities(d, pop)[row]; },
                 [&](const Stratified& d) {
                   const auto counts = stratum_counts(d, pop);
                   const std::size_t h = stratum_of(d, pop.x0(row)[d.feature]);
                   return static_cast<double>(d.sizes[h]) / static_cast<double>(counts[h]);
                 }},
      design);
}

double ht_total(const Sample& sample, std::span<const double> values) {
  if (values.size() != sample.size()) {
    throw DataError("ht_total got " + std::to_string(values.size()) + " values for " +
                    std::to_string(sample.size()) + " draws");
  }
  std::vector<double> terms(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) terms[i] = values[i] * sample.expansion_weight(sample.draws[i]);
  return pairwise_sum(terms);
}

double ht_total(const Sample& sample, const std::unordered_map<UnitId, double>& values) {
  std::vector<double> aligned(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto it = values.find(sample.draws[i].unit);
    if (it == values.end()) {
      throw DataError("no value for sampled unit " + std::to_string(raw(sample.draws[i].unit)));
    }
    aligned[i] = it->second;
  }
  return ht_total(sample, aligned);
}

Sample apply_nonresponse(const Sample& sample, const std::unordered_map<UnitId, double>& propensity,
                         std::uint64_t seed) {
  Sample out = sample;
  out.draws.clear();
  for (const auto& d : sample.draws) {
    const auto it = propensity.find(d.unit);
    if (it == propensity.end()) {
      throw ConfigError("no response propensity for unit " + std::to_string(raw(d.unit)));
    }
    const double rho = it->second;
    if (!(rho > 0.0 && rho <= 1.0)) {
      throw ConfigError("response propensity of unit " + std::to_string(raw(d.unit)) + " outside (0, 1]");
    }
    rng::Stream stream(seed, raw(d.unit));
    if (stream.uniform() < rho) out.draws.push_back(d);
  }
  // Hansen-Hurwitz keeps n fixed; respondents are expanded as if complete.
  return out;
}

}  // namespace tmle
