#include <charconv>
#include <cmath>

#include "tmle/error.hpp"
#include "tmle/numeric.hpp"
#include "tmle/types.hpp"

namespace tmle {

std::string to_string(Task task) {
  return task == Task::regression ? "regression" : "classification";
}

void FeatureMatrix::push_back(UnitId id, std::span<const double> x) {
  if (x.size() != dim_) {
    throw DataError("feature vector of dimension " + std::to_string(x.size()) +
                    " pushed into table of dimension " + std::to_string(dim_));
  }
  ids_.push_back(id);
  values_.insert(values_.end(), x.begin(), x.end());
}

std::vector<double> FeatureMatrix::column(std::size_t col) const {
  std::vector<double> out(rows());
  for (std::size_t r = 0; r < rows(); ++r) out[r] = at(r, col);
  return out;
}

double pairwise_sum(std::span<const double> values) {
  constexpr std::size_t kBlock = 16;
  if (values.size() <= kBlock) {
    double s = 0.0;
    for (double v : values) s += v;
    return s;
  }
  const std::size_t half = values.size() / 2;
  return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double logistic(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

std::string format_double(double value) {
  char buffer[64];
  const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
  return std::string(buffer, result.ptr);
}

std::optional<double> parse_double(std::string_view text) {
  double value = 0.0;
  const auto* end = text.data() + text.size();
  const auto result = std::from_chars(text.data(), end, value);
  if (result.ec != std::errc{} || result.ptr != end) return std::nullopt;
  return value;
}

}  // namespace tmle
