#pragma once

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "tmle/measurement.hpp"
#include "tmle/sampling.hpp"

namespace tmle {

struct FitConfig {
  std::size_t max_depth = 4;
  std::size_t min_leaf = 5;
  double min_split_improvement = 0.0;

  void validate() const;
};

// Binary regression tree grown by greedy SSE minimization. Classification
// trees are restricted to two classes; their targets are the 0/1 class-1
// indicator, so the leaf mean is the positive proportion (the one-hot SSE is
// exactly twice the indicator SSE and selects the same splits).
class TreeModel {
 public:
  struct Node {
    // Internal nodes: x[feature] < threshold goes left.
    std::optional<std::size_t> feature;
    double threshold = 0.0;
    std::size_t left = 0;
    std::size_t right = 0;
    std::optional<std::size_t> parent;
    // Training mean and row count of the node.
    double value = 0.0;
    std::size_t count = 0;
    // Leaves only: region index m (0..M-1, in preorder).
    std::size_t leaf = 0;

    bool is_leaf() const { return !feature.has_value(); }
    bool operator==(const Node&) const = default;
  };

  TreeModel() = default;
  TreeModel(Task task, std::size_t dim, std::vector<Node> nodes);

  Task task() const { return task_; }
  std::size_t dim() const { return dim_; }
  std::size_t leaf_count() const { return leaf_nodes_.size(); }
  std::size_t depth() const;
  const std::vector<Node>& nodes() const { return nodes_; }
  const Node& leaf_node(std::size_t m) const { return nodes_[leaf_nodes_[m]]; }

  // Region index of the unique leaf containing x.
  std::size_t leaf_of(std::span<const double> x) const;
  double leaf_value(std::size_t m) const;
  // w_m, or the design-weighted value when one has been attached.
  double predict(std::span<const double> x) const;
  // Leaf positive-class proportion; classification trees only.
  double score(std::span<const double> x) const;

  bool design_weighted() const { return !weighted_.empty(); }
  const std::vector<double>& weighted_values() const { return weighted_; }
  // Leaves whose design-weighted value was borrowed from an ancestor.
  std::size_t fallback_count() const { return fallbacks_; }
  void set_weighted(std::vector<double> values, std::size_t fallbacks);

  bool operator==(const TreeModel&) const = default;

 private:
  Task task_ = Task::regression;
  std::size_t dim_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::size_t> leaf_nodes_;
  std::vector<double> weighted_;
  std::size_t fallbacks_ = 0;
};

TreeModel fit(const ObservedDataset& data, const FitConfig& config);

// Leaf values re-estimated by the Hajek ratio (sum y/pi)/(sum 1/pi) over the
// sampled units routed to each leaf. A leaf with no sampled unit takes the
// ratio of its nearest ancestor that has one.
TreeModel design_weighted_leaves(const TreeModel& model, const Sample& sample, const ObservedDataset& data);

// Preorder text form, one tab-separated node per line.
void write_tree(std::ostream& out, const TreeModel& model);
TreeModel read_tree(std::istream& in);

}  // namespace tmle
