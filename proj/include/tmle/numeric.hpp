#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>

namespace tmle {

// Pairwise (cascade) summation; the result depends only on the order of the
// input, so totals are reproducible across platforms.
double pairwise_sum(std::span<const double> values);

double logistic(double x);
double logit(double p);

// Shortest round-trip decimal form, independent of the C locale.
std::string format_double(double value);
std::optional<double> parse_double(std::string_view text);

}  // namespace tmle
