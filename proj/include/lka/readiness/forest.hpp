// Copyright 2026 The lka-audit Authors.
// SPDX-License-Identifier: Apache-2.0
//
// Bagged CART forest with Gini splits. Continuous features split on a
// threshold (x <= t goes left); categorical features split on a level subset
// found by exhaustive enumeration (x in mask goes left).

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lka/error.hpp"
#include "lka/readiness/features.hpp"
#include "lka/rng.hpp"

namespace lka::readiness {

using ClassHistogram = std::array<std::uint32_t, kClassCount>;
using ClassProbabilities = std::array<double, kClassCount>;

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // continuous split
  std::uint32_t left_levels = 0;  // categorical split: bit i set => level i goes left
  std::int32_t left = -1;
  std::int32_t right = -1;
  ClassHistogram histogram{};  // training (bootstrap) counts reaching this node

  bool is_leaf() const { return feature < 0; }
  std::uint32_t count() const { return histogram[0] + histogram[1] + histogram[2]; }
  bool operator==(const TreeNode&) const = default;
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  const TreeNode& leaf_for(const FeatureVector& fv) const {
    std::size_t i = 0;
    while (!nodes[i].is_leaf()) {
      const auto& n = nodes[i];
      const auto f = static_cast<Feature>(n.feature);
      bool go_left;
      if (is_categorical(f))
        go_left = (n.left_levels >> static_cast<unsigned>(fv.value(f))) & 1u;
      else
        go_left = fv.value(f) <= n.threshold;
      i = static_cast<std::size_t>(go_left ? n.left : n.right);
    }
    return nodes[i];
  }

  bool operator==(const DecisionTree&) const = default;
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 8;
  std::size_t min_leaf = 5;
  std::size_t feature_subsample = 0;  // 0: ceil(sqrt(feature count))
  std::uint64_t seed = 42;

  std::size_t resolved_subsample() const {
    if (feature_subsample > 0) return std::min(feature_subsample, kFeatureCount);
    return static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(kFeatureCount))));
  }
  bool operator==(const ForestParams&) const = default;
};

struct ReadinessModel {
  FeatureSchema schema;
  ForestParams params;
  ClassProbabilities class_priors{};
  std::size_t n_train = 0;
  std::vector<DecisionTree> trees;

  bool operator==(const ReadinessModel&) const = default;
};

namespace detail {

inline double weighted_gini(const ClassHistogram& h) {
  const double n = static_cast<double>(h[0]) + h[1] + h[2];
  if (n == 0.0) return 0.0;
  double sq = 0.0;
  for (auto c : h) sq += static_cast<double>(c) * c;
  return n - sq / n;  // n * gini
}

struct Split {
  bool found = false;
  std::int32_t feature = -1;
  double threshold = 0.0;
  std::uint32_t left_levels = 0;
  double child_impurity = 0.0;  // sum of weighted child ginis
};

class TreeBuilder {
 public:
  TreeBuilder(const std::vector<std::array<double, kFeatureCount>>& x, const std::vector<Outcome>& y,
              const FeatureSchema& schema, const ForestParams& params, Rng rng)
      : x_(x), y_(y), schema_(schema), params_(params), rng_(rng) {}

  DecisionTree build(std::vector<std::size_t> sample) {
    tree_.nodes.clear();
    grow(sample, 0);
    return std::move(tree_);
  }

 private:
  ClassHistogram histogram(std::span<const std::size_t> idx) const {
    ClassHistogram h{};
    for (auto i : idx) ++h[static_cast<std::size_t>(y_[i])];
    return h;
  }

  std::int32_t grow(std::vector<std::size_t>& idx, std::size_t depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();
    tree_.nodes[id].histogram = histogram(idx);
    const auto h = tree_.nodes[id].histogram;
    const bool pure = (h[0] == idx.size()) || (h[1] == idx.size()) || (h[2] == idx.size());
    if (pure || depth >= params_.max_depth || idx.size() < 2 * params_.min_leaf) return id;

    const Split s = best_split(idx, h);
    if (!s.found) return id;

    std::vector<std::size_t> left, right;
    const auto f = static_cast<Feature>(s.feature);
    for (auto i : idx) {
      const double v = x_[i][static_cast<std::size_t>(s.feature)];
      const bool go_left =
          is_categorical(f) ? ((s.left_levels >> static_cast<unsigned>(v)) & 1u) != 0 : v <= s.threshold;
      (go_left ? left : right).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();

    tree_.nodes[id].feature = s.feature;
    tree_.nodes[id].threshold = s.threshold;
    tree_.nodes[id].left_levels = s.left_levels;
    const auto l = grow(left, depth + 1);
    const auto r = grow(right, depth + 1);
    tree_.nodes[id].left = l;
    tree_.nodes[id].right = r;
    return id;
  }

  Split best_split(const std::vector<std::size_t>& idx, const ClassHistogram& parent) {
    std::array<std::size_t, kFeatureCount> order;
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t mtry = params_.resolved_subsample();
    for (std::size_t i = 0; i < mtry; ++i) std::swap(order[i], order[i + rng_.index(kFeatureCount - i)]);

    const double parent_impurity = weighted_gini(parent);
    Split best;
    best.child_impurity = parent_impurity - 1e-12;
    for (std::size_t k = 0; k < mtry; ++k) {
      const auto f = static_cast<Feature>(order[k]);
      if (is_categorical(f))
        categorical_split(idx, f, best);
      else
        continuous_split(idx, f, best);
    }
    return best;
  }

  void continuous_split(const std::vector<std::size_t>& idx, Feature f, Split& best) const {
    const auto col = static_cast<std::size_t>(f);
    std::vector<std::pair<double, Outcome>> v;
    v.reserve(idx.size());
    for (auto i : idx) v.emplace_back(x_[i][col], y_[i]);
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.first < b.first; });

    ClassHistogram left{}, right{};
    for (const auto& [value, cls] : v) ++right[static_cast<std::size_t>(cls)];
    const std::size_t n = v.size();
    for (std::size_t i = 0; i + 1 < n; ++i) {
      const auto c = static_cast<std::size_t>(v[i].second);
      ++left[c];
      --right[c];
      if (i + 1 < params_.min_leaf || n - i - 1 < params_.min_leaf) continue;
      if (!(v[i].first < v[i + 1].first)) continue;
      const double impurity = weighted_gini(left) + weighted_gini(right);
      if (impurity < best.child_impurity) {
        double t = 0.5 * (v[i].first + v[i + 1].first);
        if (!(t < v[i + 1].first)) t = v[i].first;
        best = {true, static_cast<std::int32_t>(f), t, 0u, impurity};
      }
    }
  }

  void categorical_split(const std::vector<std::size_t>& idx, Feature f, Split& best) const {
    const auto col = static_cast<std::size_t>(f);
    const std::size_t levels = schema_.level_count(f);
    std::vector<ClassHistogram> per_level(levels, ClassHistogram{});
    for (auto i : idx) ++per_level[static_cast<std::size_t>(x_[i][col])][static_cast<std::size_t>(y_[i])];
    std::vector<std::size_t> present;
    for (std::size_t l = 0; l < levels; ++l)
      if (per_level[l][0] + per_level[l][1] + per_level[l][2] > 0) present.push_back(l);
    if (present.size() < 2) return;

    // Subsets that contain the first present level, excluding the full set.
    const std::size_t m = present.size();
    for (std::uint32_t sub = 0; sub < (1u << (m - 1)) - 1; ++sub) {
      const std::uint32_t chosen = (sub << 1) | 1u;
      ClassHistogram left{}, right{};
      std::uint32_t mask = 0;
      for (std::size_t j = 0; j < m; ++j) {
        auto& side = ((chosen >> j) & 1u) ? left : right;
        if ((chosen >> j) & 1u) mask |= 1u << present[j];
        for (std::size_t c = 0; c < kClassCount; ++c) side[c] += per_level[present[j]][c];
      }
      const std::size_t nl = left[0] + left[1] + left[2];
      const std::size_t nr = right[0] + right[1] + right[2];
      if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
      const double impurity = weighted_gini(left) + weighted_gini(right);
      if (impurity < best.child_impurity) best = {true, static_cast<std::int32_t>(f), 0.0, mask, impurity};
    }
  }

  const std::vector<std::array<double, kFeatureCount>>& x_;
  const std::vector<Outcome>& y_;
  const FeatureSchema& schema_;
  const ForestParams& params_;
  Rng rng_;
  DecisionTree tree_;
};

}  // namespace detail

/// Trains a bagged forest. Bootstrap samples are stratified by class; the
/// per-tree seeds and bootstrap indices are drawn sequentially from `seed`.
inline ReadinessModel train(std::span<const LabeledExample> data, const ForestParams& params = {},
                            const FeatureSchema& schema = {}) {
  if (data.empty()) throw DomainError("train: empty data");
  if (params.n_trees == 0 || params.max_depth == 0 || params.min_leaf == 0)
    throw DomainError("train: n_trees, max_depth and min_leaf must be positive");
  if (data.size() < 2 * params.min_leaf) throw DomainError("train: fewer than 2 * min_leaf examples");
  schema.validate();

  std::vector<std::array<double, kFeatureCount>> x(data.size());
  std::vector<Outcome> y(data.size());
  std::array<std::vector<std::size_t>, kClassCount> by_class;
  for (std::size_t i = 0; i < data.size(); ++i) {
    validate(data[i].features, schema);
    for (std::size_t f = 0; f < kFeatureCount; ++f) x[i][f] = data[i].features.value(static_cast<Feature>(f));
    y[i] = data[i].outcome;
    by_class[static_cast<std::size_t>(y[i])].push_back(i);
  }
  const auto classes_present =
      std::count_if(by_class.begin(), by_class.end(), [](const auto& v) { return !v.empty(); });
  if (classes_present < 2) throw DomainError("train: need at least 2 outcome classes");

  ReadinessModel model;
  model.schema = schema;
  model.params = params;
  model.n_train = data.size();
  for (std::size_t c = 0; c < kClassCount; ++c)
    model.class_priors[c] = static_cast<double>(by_class[c].size()) / static_cast<double>(data.size());

  Rng rng(params.seed);
  model.trees.reserve(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) {
    std::vector<std::size_t> sample;
    sample.reserve(data.size());
    for (const auto& members : by_class)
      for (std::size_t k = 0; k < members.size(); ++k) sample.push_back(members[rng.index(members.size())]);
    detail::TreeBuilder builder(x, y, schema, params, Rng(rng.next()));
    model.trees.push_back(builder.build(std::move(sample)));
  }
  return model;
}

struct Prediction {
  Outcome outcome = Outcome::normal;
  ClassProbabilities probabilities{};
};

namespace detail {

/// Index of the largest entry; ties go to the lower class.
template <class Array>
std::size_t argmax(const Array& a) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < a.size(); ++i)
    if (a[i] > a[best]) best = i;
  return best;
}

}  // namespace detail

inline Prediction predict(const ReadinessModel& model, const FeatureVector& fv) {
  if (model.trees.empty()) throw DomainError("predict: model has no trees");
  std::array<std::size_t, kClassCount> votes{};
  Prediction p;
  for (const auto& tree : model.trees) {
    const auto& leaf = tree.leaf_for(fv);
    const double n = leaf.count();
    ++votes[detail::argmax(leaf.histogram)];
    for (std::size_t c = 0; c < kClassCount; ++c) p.probabilities[c] += leaf.histogram[c] / n;
  }
  double total = 0.0;
  for (double v : p.probabilities) total += v;
  for (double& v : p.probabilities) v /= total;
  p.outcome = static_cast<Outcome>(detail::argmax(votes));
  return p;
}

// ---------------------------------------------------------------------------
// Interpretation

struct ImportanceReport {
  std::array<double, kFeatureCount> scores{};

  /// Features by decreasing importance; ties keep model order.
  std::vector<Feature> ranking() const {
    std::vector<Feature> r(kFeatureCount);
    for (std::size_t i = 0; i < kFeatureCount; ++i) r[i] = static_cast<Feature>(i);
    std::stable_sort(r.begin(), r.end(), [this](Feature a, Feature b) {
      return scores[static_cast<std::size_t>(a)] > scores[static_cast<std::size_t>(b)];
    });
    return r;
  }

  std::size_t rank_of(Feature f) const {
    const auto r = ranking();
    return static_cast<std::size_t>(std::find(r.begin(), r.end(), f) - r.begin());
  }
};

/// Mean decrease in Gini impurity, each tree weighted by its sample count,
/// normalized to sum to one.
inline ImportanceReport variable_importance(const ReadinessModel& model) {
  ImportanceReport rep;
  for (const auto& tree : model.trees) {
    const double root_n = tree.nodes.empty() ? 0.0 : tree.nodes[0].count();
    if (root_n == 0.0) continue;
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) continue;
      const auto& l = tree.nodes[static_cast<std::size_t>(node.left)];
      const auto& r = tree.nodes[static_cast<std::size_t>(node.right)];
      const double gain =
          detail::weighted_gini(node.histogram) - detail::weighted_gini(l.histogram) - detail::weighted_gini(r.histogram);
      rep.scores[static_cast<std::size_t>(node.feature)] += std::max(0.0, gain) / root_n;
    }
  }
  double total = 0.0;
  for (double s : rep.scores) total += s;
  if (total > 0.0)
    for (double& s : rep.scores) s /= total;
  else
    rep.scores.fill(1.0 / static_cast<double>(kFeatureCount));
  return rep;
}

struct DependencePoint {
  double value = 0.0;
  ClassProbabilities probabilities{};
};

inline std::vector<DependencePoint> partial_dependence(const ReadinessModel& model, Feature feature,
                                                       std::span<const double> grid,
                                                       std::span<const FeatureVector> background) {
  if (grid.empty()) throw DomainError("partial_dependence: empty grid");
  if (background.empty()) throw DomainError("partial_dependence: empty background");
  std::vector<DependencePoint> out;
  out.reserve(grid.size());
  for (double g : grid) {
    DependencePoint pt{g, {}};
    for (FeatureVector fv : background) {
      fv.set(feature, g);
      const auto p = predict(model, fv);
      for (std::size_t c = 0; c < kClassCount; ++c) pt.probabilities[c] += p.probabilities[c];
    }
    for (double& v : pt.probabilities) v /= static_cast<double>(background.size());
    out.push_back(pt);
  }
  return out;
}

inline std::vector<DependencePoint> partial_dependence(const ReadinessModel& model, std::string_view feature,
                                                       std::span<const double> grid,
                                                       std::span<const FeatureVector> background) {
  const auto f = feature_from_name(feature);
  if (!f) throw DomainError("partial_dependence: unknown feature '" + std::string(feature) + "'");
  return partial_dependence(model, *f, grid, background);
}

/// Midpoint of the grid interval where the class probability climbs the most.
inline double steepest_rise(std::span<const DependencePoint> curve, Outcome cls) {
  if (curve.size() < 2) throw DomainError("steepest_rise: need at least 2 grid points");
  const auto c = static_cast<std::size_t>(cls);
  double best = -std::numeric_limits<double>::infinity(), at = curve.front().value;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const double rise = curve[i + 1].probabilities[c] - curve[i].probabilities[c];
    if (rise > best) {
      best = rise;
      at = 0.5 * (curve[i].value + curve[i + 1].value);
    }
  }
  return at;
}

// ---------------------------------------------------------------------------
// Evaluation

struct Metrics {
  double accuracy = 0.0;
  std::array<double, kClassCount> precision{};
  std::array<double, kClassCount> recall{};
  std::array<std::array<std::size_t, kClassCount>, kClassCount> confusion{};  // [true][predicted]
  std::size_t n = 0;
};

/// Multiclass metrics from (true, predicted) pairs. Precision or recall of a
/// class that is never predicted or never present is reported as 0.
inline Metrics compute_metrics(std::span<const std::pair<Outcome, Outcome>> pairs) {
  if (pairs.empty()) throw DomainError("evaluate: empty test set");
  Metrics m;
  m.n = pairs.size();
  for (const auto& [truth, pred] : pairs) ++m.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
  std::size_t correct = 0;
  for (std::size_t c = 0; c < kClassCount; ++c) {
    correct += m.confusion[c][c];
    std::size_t predicted = 0, actual = 0;
    for (std::size_t k = 0; k < kClassCount; ++k) {
      predicted += m.confusion[k][c];
      actual += m.confusion[c][k];
    }
    m.precision[c] = predicted ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(predicted) : 0.0;
    m.recall[c] = actual ? static_cast<double>(m.confusion[c][c]) / static_cast<double>(actual) : 0.0;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  return m;
}

inline Metrics evaluate(const ReadinessModel& model, std::span<const LabeledExample> test) {
  std::vector<std::pair<Outcome, Outcome>> pairs;
  pairs.reserve(test.size());
  for (const auto& ex : test) pairs.emplace_back(ex.outcome, predict(model, ex.features).outcome);
  return compute_metrics(pairs);
}

}  // namespace lka::readiness
