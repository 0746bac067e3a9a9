#include "tmle/cart.hpp"

#include <algorithm>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include "tmle/error.hpp"
#include "tmle/numeric.hpp"

namespace tmle {

namespace {

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  double improvement = 0.0;
};

class Grower {
 public:
  Grower(const ObservedDataset& data, const FitConfig& config) : data_(data), config_(config) {
    targets_.resize(data.size());
    for (std::size_t r = 0; r < data.size(); ++r) {
      targets_[r] = data.task == Task::classification ? (data.y[r] == 1.0 ? 1.0 : 0.0) : data.y[r];
    }
  }

  std::vector<TreeModel::Node> grow() {
    std::vector<std::size_t> rows(data_.size());
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    grow(rows, 0, std::nullopt);
    return std::move(nodes_);
  }

 private:
  std::size_t grow(const std::vector<std::size_t>& rows, std::size_t depth, std::optional<std::size_t> parent) {
    const std::size_t index = nodes_.size();
    nodes_.emplace_back();
    double sum = 0.0;
    for (std::size_t r : rows) sum += targets_[r];
    const double mean = sum / static_cast<double>(rows.size());
    nodes_[index].value = mean;
    nodes_[index].count = rows.size();
    nodes_[index].parent = parent;

    if (depth >= config_.max_depth || rows.size() < 2 * config_.min_leaf) return index;
    const auto split = best_split(rows, mean);
    if (!split) return index;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) {
      (data_.x.at(r, split->feature) < split->threshold ? left : right).push_back(r);
    }
    nodes_[index].feature = split->feature;
    nodes_[index].threshold = split->threshold;
    const std::size_t l = grow(left, depth + 1, index);
    nodes_[index].left = l;
    const std::size_t rt = grow(right, depth + 1, index);
    nodes_[index].right = rt;
    return index;
  }

  std::optional<Split> best_split(const std::vector<std::size_t>& rows, double mean) const {
    const std::size_t n = rows.size();
    double parent_sse = 0.0;
    for (std::size_t r : rows) parent_sse += (targets_[r] - mean) * (targets_[r] - mean);
    if (!(parent_sse > 0.0)) return std::nullopt;
    const double tie = 1e-12 * parent_sse;

    std::optional<Split> best;
    // (value, row) pairs; rows arrive ascending, so ties keep row order.
    std::vector<std::pair<double, std::size_t>> order(n);
    for (std::size_t f = 0; f < data_.dim(); ++f) {
      for (std::size_t i = 0; i < n; ++i) order[i] = {data_.x.at(rows[i], f), rows[i]};
      std::sort(order.begin(), order.end());
      // Running sums of centred targets on the left side.
      double left_sum = 0.0;
      double left_sq = 0.0;
      double total_sum = 0.0;
      double total_sq = 0.0;
      for (const auto& [v, r] : order) {
        const double c = targets_[r] - mean;
        total_sum += c;
        total_sq += c * c;
      }
      for (std::size_t i = 1; i < n; ++i) {
        const double c = targets_[order[i - 1].second] - mean;
        left_sum += c;
        left_sq += c * c;
        if (i < config_.min_leaf || n - i < config_.min_leaf) continue;
        const double lo = order[i - 1].first;
        const double hi = order[i].first;
        if (!(lo < hi)) continue;
        const double nl = static_cast<double>(i);
        const double nr = static_cast<double>(n - i);
        const double right_sum = total_sum - left_sum;
        const double right_sq = total_sq - left_sq;
        const double sse = (left_sq - left_sum * left_sum / nl) + (right_sq - right_sum * right_sum / nr);
        const double improvement = parent_sse - sse;
        if (!best || improvement > best->improvement + tie) {
          double threshold = lo + (hi - lo) / 2.0;
          if (!(threshold > lo)) threshold = hi;
          best = Split{f, threshold, improvement};
        }
      }
    }
    if (!best || !(best->improvement > tie) || best->improvement < config_.min_split_improvement) {
      return std::nullopt;
    }
    return best;
  }

  const ObservedDataset& data_;
  const FitConfig& config_;
  std::vector<double> targets_;
  std::vector<TreeModel::Node> nodes_;
};

std::string field(std::istringstream& line, const char* what) {
  std::string token;
  if (!std::getline(line, token, '\t')) throw DataError(std::string("tree text: missing ") + what);
  return token;
}

double number(const std::string& token) {
  auto v = parse_double(token);
  if (!v) throw DataError("tree text: bad number '" + token + "'");
  return *v;
}

std::size_t count(const std::string& token) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(token, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != token.size() || token.empty()) throw DataError("tree text: bad integer '" + token + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace

void FitConfig::validate() const {
  if (min_leaf < 1) throw ConfigError("min_leaf must be at least 1");
  if (!(min_split_improvement >= 0.0)) throw ConfigError("min_split_improvement must be >= 0");
}

TreeModel::TreeModel(Task task, std::size_t dim, std::vector<Node> nodes)
    : task_(task), dim_(dim), nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw DataError("a tree needs at least one node");
  // Region indices follow preorder, which is also the storage order.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].is_leaf()) {
      nodes_[i].leaf = leaf_nodes_.size();
      leaf_nodes_.push_back(i);
    } else if (*nodes_[i].feature >= dim_ || nodes_[i].left >= nodes_.size() || nodes_[i].right >= nodes_.size()) {
      throw DataError("tree node " + std::to_string(i) + " is malformed");
    }
  }
}

std::size_t TreeModel::depth() const {
  std::size_t deepest = 0;
  for (std::size_t leaf : leaf_nodes_) {
    std::size_t d = 0;
    for (auto p = nodes_[leaf].parent; p; p = nodes_[*p].parent) ++d;
    deepest = std::max(deepest, d);
  }
  return deepest;
}

std::size_t TreeModel::leaf_of(std::span<const double> x) const {
  if (x.size() != dim_) {
    throw DataError("feature vector has dimension " + std::to_string(x.size()) + ", tree expects " +
                    std::to_string(dim_));
  }
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) i = x[*nodes_[i].feature] < nodes_[i].threshold ? nodes_[i].left : nodes_[i].right;
  return nodes_[i].leaf;
}

double TreeModel::leaf_value(std::size_t m) const {
  return design_weighted() ? weighted_[m] : nodes_[leaf_nodes_[m]].value;
}

double TreeModel::predict(std::span<const double> x) const { return leaf_value(leaf_of(x)); }

double TreeModel::score(std::span<const double> x) const {
  if (task_ != Task::classification) throw UsageError("score() needs a classification tree");
  return predict(x);
}

void TreeModel::set_weighted(std::vector<double> values, std::size_t fallbacks) {
  if (values.size() != leaf_count()) throw DataError("one design-weighted value per leaf is required");
  weighted_ = std::move(values);
  fallbacks_ = fallbacks;
}

TreeModel fit(const ObservedDataset& data, const FitConfig& config) {
  config.validate();
  if (data.empty()) throw FitError("cannot fit a tree to an empty dataset");
  if (data.dim() == 0) throw FitError("cannot fit a tree without features");
  if (data.size() < config.min_leaf) {
    throw FitError("dataset has " + std::to_string(data.size()) + " rows, fewer than min_leaf");
  }
  if (data.task == Task::classification && data.classes != 2) {
    throw UsageError("classification trees support exactly two classes");
  }
  Grower grower(data, config);
  return TreeModel(data.task, data.dim(), grower.grow());
}

TreeModel design_weighted_leaves(const TreeModel& model, const Sample& sample, const ObservedDataset& data) {
  std::unordered_map<UnitId, std::size_t> row_of;
  row_of.reserve(data.size());
  for (std::size_t r = 0; r < data.size(); ++r) row_of.emplace(data.id(r), r);

  const auto& nodes = model.nodes();
  std::vector<double> numerator(nodes.size(), 0.0);
  std::vector<double> denominator(nodes.size(), 0.0);
  // Weights are rescaled by the first one; the ratio is unchanged and equal
  // weights become exactly 1.
  double reference = 0.0;
  for (const auto& d : sample.draws) {
    const auto it = row_of.find(d.unit);
    if (it == row_of.end()) throw DataError("sampled unit " + std::to_string(raw(d.unit)) + " has no data row");
    const std::size_t r = it->second;
    const double w_raw = sample.expansion_weight(d);
    if (reference == 0.0) reference = w_raw;
    const double w = w_raw / reference;
    const double y = model.task() == Task::classification ? (data.y[r] == 1.0 ? 1.0 : 0.0) : data.y[r];
    const auto x = data.x.row(r);
    std::size_t i = 0;
    for (;;) {
      numerator[i] += w * y;
      denominator[i] += w;
      if (nodes[i].is_leaf()) break;
      i = x[*nodes[i].feature] < nodes[i].threshold ? nodes[i].left : nodes[i].right;
    }
  }
  if (!(denominator[0] > 0.0)) throw EstimationError("no sampled unit reaches the tree");

  std::vector<double> values(model.leaf_count());
  std::size_t fallbacks = 0;
  for (std::size_t node = 0; node < nodes.size(); ++node) {
    if (!nodes[node].is_leaf()) continue;
    const std::size_t m = nodes[node].leaf;
    std::size_t i = node;
    if (!(denominator[i] > 0.0)) {
      ++fallbacks;
      while (!(denominator[i] > 0.0)) i = *nodes[i].parent;
    }
    values[m] = numerator[i] / denominator[i];
  }
  TreeModel out = model;
  out.set_weighted(std::move(values), fallbacks);
  return out;
}

void write_tree(std::ostream& out, const TreeModel& model) {
  out << "tmle-tree\t1\t" << to_string(model.task()) << '\t' << model.dim() << '\t' << model.nodes().size() << '\t'
      << (model.design_weighted() ? 1 : 0) << '\t' << model.fallback_count() << '\n';
  for (std::size_t i = 0; i < model.nodes().size(); ++i) {
    const auto& n = model.nodes()[i];
    out << i << '\t';
    if (n.is_leaf()) {
      out << "leaf\t" << n.leaf << '\t' << format_double(n.value) << '\t' << n.count << '\t'
          << (model.design_weighted() ? format_double(model.weighted_values()[n.leaf]) : "-");
    } else {
      out << "split\t" << *n.feature << '\t' << format_double(n.threshold) << '\t' << format_double(n.value) << '\t'
          << n.count;
    }
    out << '\n';
  }
}

TreeModel read_tree(std::istream& in) {
  std::string text;
  if (!std::getline(in, text)) throw DataError("tree text: missing header");
  std::istringstream header(text);
  if (field(header, "magic") != "tmle-tree" || field(header, "version") != "1") {
    throw DataError("tree text: unrecognised header");
  }
  const std::string task_name = field(header, "task");
  Task task;
  if (task_name == "regression") {
    task = Task::regression;
  } else if (task_name == "classification") {
    task = Task::classification;
  } else {
    throw DataError("tree text: unknown task '" + task_name + "'");
  }
  const std::size_t dim = count(field(header, "dim"));
  const std::size_t size = count(field(header, "node count"));
  const bool weighted = count(field(header, "weighted flag")) == 1;
  const std::size_t fallbacks = count(field(header, "fallbacks"));

  std::vector<TreeModel::Node> nodes(size);
  std::vector<std::pair<std::size_t, double>> weighted_by_leaf;
  // Preorder: a split's left child follows it directly; its right child
  // follows the left subtree. Rebuild the links with an explicit stack.
  std::vector<std::size_t> open;
  for (std::size_t i = 0; i < size; ++i) {
    if (!std::getline(in, text)) throw DataError("tree text: expected " + std::to_string(size) + " nodes");
    std::istringstream line(text);
    if (count(field(line, "index")) != i) throw DataError("tree text: nodes out of order");
    const std::string kind = field(line, "kind");
    auto& node = nodes[i];
    if (!open.empty()) {
      const std::size_t p = open.back();
      node.parent = p;
      if (nodes[p].left == 0) {
        nodes[p].left = i;
      } else {
        nodes[p].right = i;
        open.pop_back();
      }
    } else if (i != 0) {
      throw DataError("tree text: more than one root");
    }
    if (kind == "split") {
      node.feature = count(field(line, "feature"));
      node.threshold = number(field(line, "threshold"));
      node.value = number(field(line, "value"));
      node.count = count(field(line, "count"));
      open.push_back(i);
    } else if (kind == "leaf") {
      const std::size_t m = count(field(line, "leaf"));
      node.value = number(field(line, "value"));
      node.count = count(field(line, "count"));
      const std::string w = field(line, "weighted value");
      if (weighted) weighted_by_leaf.emplace_back(m, number(w));
    } else {
      throw DataError("tree text: unknown node kind '" + kind + "'");
    }
  }
  if (!open.empty()) throw DataError("tree text: incomplete subtree");
  TreeModel model(task, dim, std::move(nodes));
  if (weighted) {
    std::vector<double> values(model.leaf_count());
    for (const auto& [m, v] : weighted_by_leaf) {
      if (m >= values.size()) throw DataError("tree text: leaf index out of range");
      values[m] = v;
    }
    model.set_weighted(std::move(values), fallbacks);
  }
  return model;
}

}  // namespace tmle
