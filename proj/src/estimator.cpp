#include "tmle/estimator.hpp"

#include <algorithm>
#include <unordered_map>
#include <vector>

#include "tmle/error.hpp"
#include "tmle/numeric.hpp"

namespace tmle {

EstimateRecord cart_assisted_total(const FeatureMatrix& universe, const Sample& sample,
                                   const ObservedDataset& sample_data, const TreeModel& model) {
  if (universe.dim() != model.dim()) {
    throw DataError("universe features have dimension " + std::to_string(universe.dim()) + ", model expects " +
                    std::to_string(model.dim()));
  }
  std::vector<std::size_t> order(universe.rows());
  for (std::size_t r = 0; r < order.size(); ++r) order[r] = r;
  if (!std::is_sorted(universe.ids().begin(), universe.ids().end())) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return universe.id(a) < universe.id(b); });
  }
  std::vector<UnitId> ids(order.size());
  std::vector<double> synthetic(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    ids[i] = universe.id(order[i]);
    synthetic[i] = model.predict(universe.row(order[i]));
    if (i > 0 && ids[i] == ids[i - 1]) {
      throw DataError("unit " + std::to_string(raw(ids[i])) + " appears twice in the universe");
    }
  }

  std::unordered_map<UnitId, std::size_t> data_row;
  data_row.reserve(sample_data.size());
  for (std::size_t r = 0; r < sample_data.size(); ++r) data_row.emplace(sample_data.id(r), r);

  const bool classification = model.task() == Task::classification;
  std::vector<double> correction(sample.size());
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const auto& d = sample.draws[i];
    const auto p = std::lower_bound(ids.begin(), ids.end(), d.unit);
    if (p == ids.end() || *p != d.unit) {
      throw DataError("sampled unit " + std::to_string(raw(d.unit)) + " has no features in the universe");
    }
    const auto r = data_row.find(d.unit);
    if (r == data_row.end()) throw DataError("sampled unit " + std::to_string(raw(d.unit)) + " has no observed target");
    double y = sample_data.y[r->second];
    if (classification) y = y == 1.0 ? 1.0 : 0.0;
    correction[i] = (y - synthetic[static_cast<std::size_t>(p - ids.begin())]) * sample.expansion_weight(d);
  }

  EstimateRecord record;
  record.synthetic_term = pairwise_sum(synthetic);
  record.correction_term = pairwise_sum(correction);
  record.point_estimate = record.synthetic_term + record.correction_term;
  record.fallback_count = model.fallback_count();
  return record;
}

}  // namespace tmle
