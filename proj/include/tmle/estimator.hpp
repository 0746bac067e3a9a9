#pragma once

#include <cstddef>

#include "tmle/cart.hpp"
#include "tmle/measurement.hpp"
#include "tmle/sampling.hpp"

namespace tmle {

struct EstimateRecord {
  double point_estimate = 0.0;
  // Sum of tree predictions over every unit of the universe.
  double synthetic_term = 0.0;
  // Expanded residual sum over the sample.
  double correction_term = 0.0;
  std::size_t fallback_count = 0;

  bool operator==(const EstimateRecord&) const = default;
};

// CART-assisted difference estimator
//
//   sum_{k in U} yhat_k + sum_{k in s} (y_k - yhat_k) / pi_k,
//
// with yhat_k the model prediction from the features in `universe` (the
// auxiliary information known for every unit of U) and y_k the observed
// target in `sample_data`. Both sums run over ascending unit ids with
// pairwise accumulation. With-replacement samples expand residuals by the
// Hansen-Hurwitz factor instead of 1/pi_k.
EstimateRecord cart_assisted_total(const FeatureMatrix& universe, const Sample& sample,
                                   const ObservedDataset& sample_data, const TreeModel& model);

}  // namespace tmle
