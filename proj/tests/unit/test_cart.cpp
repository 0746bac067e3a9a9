#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numeric>
#include <sstream>
#include <vector>

#include "split_oracle.hpp"
#include "tmle/cart.hpp"
#include "tmle/error.hpp"

using namespace tmle;

namespace {

ObservedDataset dataset(const std::vector<std::vector<double>>& x, const std::vector<double>& y,
                        Task task = Task::regression) {
  ObservedDataset d;
  d.x = FeatureMatrix(x.empty() ? 1 : x[0].size());
  d.task = task;
  d.classes = task == Task::classification ? 2 : 0;
  for (std::size_t i = 0; i < y.size(); ++i) d.push_back(unit_id(i + 1), x[i], y[i]);
  return d;
}

ObservedDataset simulated(std::size_t n, std::uint64_t seed, Task task = Task::regression) {
  rng::Stream s(seed, 0);
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = s.normal(), b = s.uniform(), c = std::floor(4 * s.uniform());
    x.push_back({a, b, c});
    const double eta = 2 * a + (b > 0.5 ? 1.5 : -1.0) + 0.5 * c + s.normal();
    y.push_back(task == Task::classification ? (eta > 0.5 ? 1.0 : 0.0) : eta);
  }
  return dataset(x, y, task);
}

FitConfig depth(std::size_t d, std::size_t min_leaf = 1) { return {d, min_leaf, 0.0}; }

}  // namespace

TEST_CASE("depth zero gives the global mean") {
  const auto d = simulated(200, 1);
  const auto t = fit(d, depth(0));
  CHECK(t.leaf_count() == 1);
  const double mean = std::accumulate(d.y.begin(), d.y.end(), 0.0) / 200.0;
  CHECK(t.predict(d.x.row(0)) == doctest::Approx(mean).epsilon(1e-12));
}

TEST_CASE("depth-1 split agrees with exhaustive search") {
  rng::Stream s(5, 0);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + s.below(15);
    std::vector<std::vector<double>> x;
    std::vector<double> xs, y;
    for (std::size_t i = 0; i < n; ++i) {
      xs.push_back(std::round(s.normal() * 4) / 4);
      x.push_back({xs.back()});
      y.push_back(std::round(s.normal() * 10));
    }
    const auto oracle = brute_force_split(xs, y);
    const auto t = fit(dataset(x, y), depth(1));
    if (t.leaf_count() == 1) {
      CHECK((!oracle.found || oracle.sse >= split_sse(xs, y, -1e300) - 1e-9));
      continue;
    }
    REQUIRE(oracle.found);
    const double chosen = t.nodes()[0].threshold;
    CHECK(split_sse(xs, y, chosen) == doctest::Approx(oracle.sse).epsilon(1e-9));
    if (oracle.minimizers == 1) CHECK(chosen == doctest::Approx(oracle.threshold).epsilon(1e-12));
  }
}

TEST_CASE("constant target stays a single leaf") {
  auto d = simulated(100, 2);
  std::fill(d.y.begin(), d.y.end(), 4.0);
  CHECK(fit(d, depth(6)).leaf_count() == 1);
}

TEST_CASE("routing and leaf means") {
  TreeModel one(Task::regression, 1, {TreeModel::Node{std::nullopt, 0, 0, 0, std::nullopt, 2.5, 1, 0}});
  CHECK(one.predict(std::vector<double>{123.0}) == 2.5);

  std::vector<TreeModel::Node> nodes(3);
  nodes[0].feature = 0;
  nodes[0].threshold = 0.0;
  nodes[0].left = 1;
  nodes[0].right = 2;
  nodes[1].value = 1.0;
  nodes[1].parent = 0;
  nodes[2].value = 3.0;
  nodes[2].parent = 0;
  const TreeModel stump(Task::regression, 1, nodes);
  CHECK(stump.predict(std::vector<double>{-5.0}) == 1.0);
  CHECK(stump.predict(std::vector<double>{0.0}) == 3.0);

  const auto d = simulated(1000, 3);
  const auto t = fit(d, depth(4, 5));
  std::vector<double> sum(t.leaf_count(), 0.0), cnt(t.leaf_count(), 0.0);
  for (std::size_t r = 0; r < d.size(); ++r) {
    const auto m = t.leaf_of(d.x.row(r));
    sum[m] += d.y[r];
    cnt[m] += 1;
  }
  for (std::size_t r = 0; r < d.size(); ++r) {
    const auto m = t.leaf_of(d.x.row(r));
    CHECK(t.predict(d.x.row(r)) == doctest::Approx(sum[m] / cnt[m]).epsilon(1e-12));
  }
  for (std::size_t m = 0; m < t.leaf_count(); ++m) {
    CHECK(t.leaf_node(m).count == static_cast<std::size_t>(cnt[m]));
    CHECK(cnt[m] >= 5);
  }
  CHECK(t.depth() <= 4);
}

TEST_CASE("leaves partition the feature space") {
  const auto t = fit(simulated(500, 4), depth(5, 3));
  rng::Stream s(9, 0);
  for (int i = 0; i < 10000; ++i) {
    const std::vector<double> x{s.normal(0, 3), s.uniform(-1, 2), std::floor(s.uniform(-2, 6))};
    // Exactly one leaf region contains x: walk every leaf's path constraints.
    int containing = 0;
    for (std::size_t m = 0; m < t.leaf_count(); ++m) {
      std::size_t node = 0;
      bool inside = true;
      std::vector<std::size_t> path;
      for (std::size_t k = 0; k < t.nodes().size(); ++k) {
        if (t.nodes()[k].is_leaf() && t.nodes()[k].leaf == m) node = k;
      }
      for (auto child = node; t.nodes()[child].parent; child = *t.nodes()[child].parent) {
        const auto& p = t.nodes()[*t.nodes()[child].parent];
        const bool goes_left = x[*p.feature] < p.threshold;
        inside &= goes_left == (p.left == child);
      }
      containing += inside;
      if (inside) CHECK(t.leaf_of(x) == m);
    }
    CHECK(containing == 1);
  }
}

TEST_CASE("design-weighted leaves") {
  const auto d = simulated(300, 5);
  const auto t = fit(d, depth(3, 5));
  Sample equal;
  for (std::size_t r = 0; r < d.size(); ++r) equal.draws.push_back({d.id(r), 0.3, 1, 0.0});
  const auto w = design_weighted_leaves(t, equal, d);
  CHECK(w.fallback_count() == 0);
  for (std::size_t m = 0; m < t.leaf_count(); ++m) CHECK(w.leaf_value(m) == t.leaf_value(m));

  const auto two = dataset({{0.0}, {1.0}}, {2.0, 4.0});
  const auto single = fit(two, depth(0));
  Sample s;
  s.draws = {{unit_id(1), 0.5, 1, 0.0}, {unit_id(2), 0.25, 1, 0.0}};
  CHECK(design_weighted_leaves(single, s, two).leaf_value(0) == doctest::Approx(10.0 / 3.0).epsilon(1e-15));

  // Sample only reaching the left leaf: the right leaf borrows the root ratio.
  const auto four = dataset({{0.0}, {1.0}, {10.0}, {11.0}}, {1.0, 1.0, 5.0, 5.0});
  const auto stump = fit(four, depth(1));
  REQUIRE(stump.leaf_count() == 2);
  Sample left;
  left.draws = {{unit_id(1), 0.5, 1, 0.0}, {unit_id(2), 0.5, 1, 0.0}};
  const auto fb = design_weighted_leaves(stump, left, four);
  CHECK(fb.fallback_count() == 1);
  CHECK(fb.leaf_value(1) == 1.0);
}

TEST_CASE("classification scores") {
  std::vector<std::vector<double>> x;
  std::vector<double> y;
  for (int i = 0; i < 12; ++i) {
    x.push_back({static_cast<double>(i)});
    y.push_back(i < 3 ? 1.0 : 0.0);
  }
  const auto d = dataset(x, y, Task::classification);
  CHECK(fit(d, depth(0)).score(x[0]) == 0.25);
  const auto pure = fit(d, depth(1));
  CHECK(pure.score(x[0]) == 1.0);

  const auto sim = simulated(2000, 6, Task::classification);
  const auto t = fit(sim, depth(5, 10));
  double mean_score = 0, positives = 0;
  for (std::size_t r = 0; r < sim.size(); ++r) {
    mean_score += t.score(sim.x.row(r));
    positives += sim.y[r];
  }
  CHECK(mean_score / sim.size() == doctest::Approx(positives / sim.size()).epsilon(1e-12));

  CHECK_THROWS_AS(fit(simulated(50, 1), depth(1)).score(x[0]), UsageError);
  auto three = sim;
  three.classes = 3;
  CHECK_THROWS_AS(fit(three, depth(1)), UsageError);
}

TEST_CASE("serialization round trip and determinism") {
  const auto d = simulated(800, 7);
  const auto t = fit(d, depth(4, 5));
  CHECK(fit(d, depth(4, 5)) == t);
  std::stringstream text;
  write_tree(text, t);
  CHECK(read_tree(text) == t);

  Sample s;
  for (std::size_t r = 0; r < d.size(); r += 2) s.draws.push_back({d.id(r), 0.1 + 0.001 * r, 1, 0.0});
  const auto w = design_weighted_leaves(t, s, d);
  std::stringstream text2;
  write_tree(text2, w);
  CHECK(read_tree(text2) == w);

  std::stringstream junk("not a tree\n");
  CHECK_THROWS_AS(read_tree(junk), DataError);
}

TEST_CASE("fit errors") {
  CHECK_THROWS_AS(fit(ObservedDataset{}, depth(1)), FitError);
  CHECK_THROWS_AS(fit(simulated(3, 1), FitConfig{2, 5, 0.0}), FitError);
  CHECK_THROWS_AS(fit(simulated(30, 1), FitConfig{2, 0, 0.0}), ConfigError);
}
