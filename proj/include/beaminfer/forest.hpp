// SPDX-License-Identifier: Apache-2.0
//
// beaminfer - beam inference from partial L1-RSRP measurements
// Copyright (C) 2026 The beaminfer authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#ifndef BEAMINFER_FOREST_HPP
#define BEAMINFER_FOREST_HPP

#include "beaminfer/common.hpp"

#include <algorithm>
#include <cmath>
#include <iosfwd>
#include <numeric>
#include <span>
#include <vector>

// CART regression trees (variance-reduction splits, mean leaves) and bagged
// random forests built on them.

namespace beaminfer {

struct TreeParams {
    std::size_t mtry = 0;       // candidate features per node; 0 = ceil(features / 3)
    std::size_t min_leaf = 5;   // minimum samples on each side of a split
    std::size_t max_depth = 0;  // 0 = unlimited
};

struct ForestParams {
    std::size_t n_trees = 100;
    std::size_t mtry = 0;
    std::size_t min_leaf = 5;
    std::size_t max_depth = 0;
    bool bootstrap = true;  // false only for tests: every tree sees the full sample

    TreeParams tree() const noexcept { return {mtry, min_leaf, max_depth}; }
};

/// Internal node when feature >= 0 (x[feature] <= threshold goes left), leaf otherwise.
struct TreeNode {
    std::int32_t feature = -1;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double threshold = 0.0;
    double prediction = 0.0;  // mean target of the samples reaching this node
    std::uint32_t count = 0;

    bool is_leaf() const noexcept { return feature < 0; }
    friend bool operator==(const TreeNode &, const TreeNode &) = default;
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
    std::size_t num_features = 0;

    double predict(std::span<const double> x) const
    {
        if (x.size() != num_features)
            throw ArgumentError("tree predict: expected " + std::to_string(num_features) + " features, got " +
                                std::to_string(x.size()));
        return nodes[leaf_of(x)].prediction;
    }

    std::size_t leaf_of(std::span<const double> x) const noexcept
    {
        std::size_t i = 0;
        while (!nodes[i].is_leaf())
            i = static_cast<std::size_t>(x[static_cast<std::size_t>(nodes[i].feature)] <= nodes[i].threshold ? nodes[i].left
                                                                                                                : nodes[i].right);
        return i;
    }

    /// Same traversal reading features straight from row r of a matrix.
    std::size_t leaf_of_row(const Matrix &m, std::size_t r) const noexcept
    {
        std::size_t i = 0;
        while (!nodes[i].is_leaf())
            i = static_cast<std::size_t>(m(r, static_cast<std::size_t>(nodes[i].feature)) <= nodes[i].threshold
                                             ? nodes[i].left
                                             : nodes[i].right);
        return i;
    }

    std::size_t depth() const
    {
        std::vector<std::size_t> d(nodes.size(), 0);
        std::size_t best = 0;
        for (std::size_t i = 0; i < nodes.size(); ++i) {
            best = std::max(best, d[i]);
            if (!nodes[i].is_leaf()) {
                d[static_cast<std::size_t>(nodes[i].left)] = d[i] + 1;
                d[static_cast<std::size_t>(nodes[i].right)] = d[i] + 1;
            }
        }
        return best;
    }

    friend bool operator==(const RegressionTree &, const RegressionTree &) = default;
};

namespace detail {

inline std::size_t resolve_mtry(std::size_t mtry, std::size_t n_features)
{
    if (n_features == 0) throw ArgumentError("no candidate features");
    if (mtry == 0) return (n_features + 2) / 3;
    if (mtry > n_features)
        throw ArgumentError("mtry " + std::to_string(mtry) + " exceeds feature count " + std::to_string(n_features));
    return mtry;
}

class TreeGrower {
public:
    TreeGrower(const Matrix &x, std::span<const double> y, std::vector<std::size_t> samples,
               std::vector<std::size_t> features, const TreeParams &params, std::uint64_t seed)
        : x_(x), y_(y), samples_(std::move(samples)), features_(std::move(features)), params_(params), rng_(seed)
    {
        mtry_ = resolve_mtry(params.mtry, features_.size());
        if (params_.min_leaf == 0) params_.min_leaf = 1;
        buf_.resize(samples_.size());
    }

    RegressionTree grow()
    {
        RegressionTree tree;
        tree.num_features = x_.cols();
        nodes_.push_back({});
        std::vector<Task> stack{{0, 0, samples_.size(), 0}};
        while (!stack.empty()) {
            const Task t = stack.back();
            stack.pop_back();
            split_node(t, stack);
        }
        tree.nodes = std::move(nodes_);
        return tree;
    }

private:
    struct Task {
        std::size_t node, begin, end, depth;
    };
    struct Pair {
        double x, y;
    };

    void split_node(const Task &t, std::vector<Task> &stack)
    {
        const std::size_t n = t.end - t.begin;
        double sum = 0.0, lo = y_[samples_[t.begin]], hi = lo;
        for (std::size_t i = t.begin; i < t.end; ++i) {
            const double v = y_[samples_[i]];
            sum += v;
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        const double mean = sum / static_cast<double>(n);
        nodes_[t.node].prediction = mean;
        nodes_[t.node].count = static_cast<std::uint32_t>(n);
        if (n < 2 * params_.min_leaf || lo == hi || (params_.max_depth != 0 && t.depth >= params_.max_depth)) return;

        int best_feature = -1;
        double best_threshold = 0.0, best_gain = 0.0;
        for (std::size_t k = 0; k < mtry_; ++k) {
            std::swap(features_[k], features_[uniform_index(rng_, k, features_.size() - 1)]);
            const std::size_t f = features_[k];
            const auto col = x_.col(f);
            double xlo = col[samples_[t.begin]], xhi = xlo;
            for (std::size_t i = t.begin; i < t.end; ++i) {
                const std::size_t s = samples_[i];
                buf_[i - t.begin] = {col[s], y_[s] - mean};
                xlo = std::min(xlo, col[s]);
                xhi = std::max(xhi, col[s]);
            }
            if (xlo == xhi) continue;
            std::sort(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(n),
                      [](const Pair &a, const Pair &b) { return a.x < b.x; });
            // centered targets: total sum is ~0, gain = sL^2/nL + sR^2/nR - s^2/n
            double total = 0.0;
            for (std::size_t i = 0; i < n; ++i) total += buf_[i].y;
            const double parent = total * total / static_cast<double>(n);
            double left = 0.0;
            for (std::size_t i = 0; i + 1 < n; ++i) {
                left += buf_[i].y;
                if (buf_[i].x == buf_[i + 1].x) continue;
                const std::size_t nl = i + 1, nr = n - nl;
                if (nl < params_.min_leaf || nr < params_.min_leaf) continue;
                const double right = total - left;
                const double gain = left * left / static_cast<double>(nl) + right * right / static_cast<double>(nr) - parent;
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = static_cast<int>(f);
                    double thr = 0.5 * (buf_[i].x + buf_[i + 1].x);
                    if (!(thr < buf_[i + 1].x)) thr = buf_[i].x;
                    best_threshold = thr;
                }
            }
        }
        if (best_feature < 0 || !(best_gain > 1e-12 * (hi - lo) * (hi - lo))) return;

        const auto col = x_.col(static_cast<std::size_t>(best_feature));
        const auto mid_it = std::partition(samples_.begin() + static_cast<std::ptrdiff_t>(t.begin),
                                           samples_.begin() + static_cast<std::ptrdiff_t>(t.end),
                                           [&](std::size_t s) { return col[s] <= best_threshold; });
        const auto mid = static_cast<std::size_t>(mid_it - samples_.begin());
        const std::size_t left_id = nodes_.size();
        nodes_.push_back({});
        nodes_.push_back({});
        auto &node = nodes_[t.node];
        node.feature = best_feature;
        node.threshold = best_threshold;
        node.left = static_cast<std::int32_t>(left_id);
        node.right = static_cast<std::int32_t>(left_id + 1);
        stack.push_back({left_id + 1, mid, t.end, t.depth + 1});
        stack.push_back({left_id, t.begin, mid, t.depth + 1});
    }

    const Matrix &x_;
    std::span<const double> y_;
    std::vector<std::size_t> samples_;
    std::vector<std::size_t> features_;
    TreeParams params_;
    Rng rng_;
    std::size_t mtry_ = 1;
    std::vector<Pair> buf_;
    std::vector<TreeNode> nodes_;
};

inline void check_training_inputs(const Matrix &x, std::span<const double> y, std::span<const std::size_t> rows,
                                  std::span<const std::size_t> features)
{
    if (rows.empty() || x.rows() == 0) throw ArgumentError("cannot fit on an empty sample");
    if (y.size() != x.rows()) throw ArgumentError("target length does not match row count");
    for (std::size_t f : features) {
        if (f >= x.cols()) throw ArgumentError("feature index out of range");
        const auto col = x.col(f);
        for (std::size_t r : rows)
            if (!std::isfinite(col[r])) throw ArgumentError("non-finite feature value in training data");
    }
    for (std::size_t r : rows) {
        if (r >= x.rows()) throw ArgumentError("row index out of range");
        if (!std::isfinite(y[r])) throw ArgumentError("non-finite target in training data");
    }
}

inline std::vector<std::size_t> iota_vector(std::size_t n)
{
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

} // namespace detail

/// Grows one tree on the given rows (duplicates allowed) using only `features`.
/// `y` is indexed by row of `x`.
inline RegressionTree fit_tree(const Matrix &x, std::span<const double> y, std::span<const std::size_t> rows,
                               std::span<const std::size_t> features, const TreeParams &params, std::uint64_t seed)
{
    detail::check_training_inputs(x, y, rows, features);
    return detail::TreeGrower(x, y, {rows.begin(), rows.end()}, {features.begin(), features.end()}, params, seed).grow();
}

inline RegressionTree fit_tree(const Matrix &x, std::span<const double> y, const TreeParams &params, std::uint64_t seed)
{
    if (x.rows() == 0) throw ArgumentError("cannot fit on an empty sample");
    const auto rows = detail::iota_vector(x.rows());
    const auto features = detail::iota_vector(x.cols());
    return fit_tree(x, y, rows, features, params, seed);
}

struct Forest {
    std::vector<RegressionTree> trees;
    std::vector<std::uint64_t> per_tree_seed;
    ForestParams params{};
    std::size_t num_features = 0;

    /// Mean of the tree predictions, summed in tree-index order.
    double predict(std::span<const double> x) const
    {
        if (x.size() != num_features)
            throw ArgumentError("forest predict: expected " + std::to_string(num_features) + " features, got " +
                                std::to_string(x.size()));
        if (trees.empty()) throw StateError("forest has no trees");
        double s = 0.0;
        for (const auto &t : trees) s += t.nodes[t.leaf_of(x)].prediction;
        return s / static_cast<double>(trees.size());
    }

    double predict_row(const Matrix &m, std::size_t r) const
    {
        if (m.cols() != num_features) throw ArgumentError("forest predict: matrix width mismatch");
        if (trees.empty()) throw StateError("forest has no trees");
        double s = 0.0;
        for (const auto &t : trees) s += t.nodes[t.leaf_of_row(m, r)].prediction;
        return s / static_cast<double>(trees.size());
    }

    friend bool operator==(const Forest &a, const Forest &b)
    {
        return a.trees == b.trees && a.per_tree_seed == b.per_tree_seed && a.num_features == b.num_features;
    }
};

/// Bagged forest: tree t uses seed derive_seed(seed, t) for both its bootstrap
/// draw and its feature sampling, so training order does not matter.
inline Forest fit_forest(const Matrix &x, std::span<const double> y, std::span<const std::size_t> rows,
                         std::span<const std::size_t> features, const ForestParams &params, std::uint64_t seed)
{
    if (params.n_trees == 0) throw ArgumentError("n_trees must be >= 1");
    detail::check_training_inputs(x, y, rows, features);
    detail::resolve_mtry(params.mtry, features.size());
    Forest forest;
    forest.params = params;
    forest.num_features = x.cols();
    forest.per_tree_seed.resize(params.n_trees);
    for (std::size_t t = 0; t < params.n_trees; ++t) forest.per_tree_seed[t] = derive_seed(seed, t);
    forest.trees.resize(params.n_trees);
    parallel_for(params.n_trees, [&](std::size_t t) {
        std::vector<std::size_t> sample(rows.begin(), rows.end());
        if (params.bootstrap) {
            Rng boot(derive_seed(forest.per_tree_seed[t], 0xb007));
            for (auto &s : sample) s = rows[uniform_index(boot, 0, rows.size() - 1)];
        }
        forest.trees[t] = detail::TreeGrower(x, y, std::move(sample), {features.begin(), features.end()},
                                             params.tree(), forest.per_tree_seed[t])
                              .grow();
    });
    return forest;
}

inline Forest fit_forest(const Matrix &x, std::span<const double> y, const ForestParams &params, std::uint64_t seed)
{
    if (x.rows() == 0) throw ArgumentError("cannot fit on an empty sample");
    const auto rows = detail::iota_vector(x.rows());
    const auto features = detail::iota_vector(x.cols());
    return fit_forest(x, y, rows, features, params, seed);
}

inline double predict(const Forest &forest, std::span<const double> x) { return forest.predict(x); }

// ---- Checkpoints --------------------------------------------------------
// Versioned little-endian dump of the node arrays; round-trips exactly.

inline constexpr std::uint32_t kForestMagic = 0x52464942;  // "BIFR"
inline constexpr std::uint32_t kForestVersion = 1;

inline void write_forest(BinaryWriter &w, const Forest &f)
{
    w.put(kForestMagic);
    w.put(kForestVersion);
    w.put<std::uint64_t>(f.num_features);
    w.put<std::uint64_t>(f.params.n_trees);
    w.put<std::uint64_t>(f.params.mtry);
    w.put<std::uint64_t>(f.params.min_leaf);
    w.put<std::uint64_t>(f.params.max_depth);
    w.put<std::uint8_t>(f.params.bootstrap ? 1 : 0);
    w.put<std::uint64_t>(f.trees.size());
    for (std::size_t t = 0; t < f.trees.size(); ++t) {
        w.put<std::uint64_t>(f.per_tree_seed[t]);
        w.put<std::uint64_t>(f.trees[t].nodes.size());
        for (const auto &n : f.trees[t].nodes) {
            w.put(n.feature);
            w.put(n.left);
            w.put(n.right);
            w.put(n.threshold);
            w.put(n.prediction);
            w.put(n.count);
        }
    }
}

inline Forest read_forest(BinaryReader &r)
{
    r.expect_magic(kForestMagic, kForestVersion, "forest checkpoint");
    Forest f;
    f.num_features = r.get<std::uint64_t>();
    f.params.n_trees = r.get<std::uint64_t>();
    f.params.mtry = r.get<std::uint64_t>();
    f.params.min_leaf = r.get<std::uint64_t>();
    f.params.max_depth = r.get<std::uint64_t>();
    f.params.bootstrap = r.get<std::uint8_t>() != 0;
    const auto n_trees = r.get<std::uint64_t>();
    for (std::uint64_t t = 0; t < n_trees; ++t) {
        f.per_tree_seed.push_back(r.get<std::uint64_t>());
        RegressionTree tree;
        tree.num_features = f.num_features;
        const auto n_nodes = r.get<std::uint64_t>();
        if (n_nodes == 0) throw IoError("forest checkpoint: empty tree");
        tree.nodes.resize(n_nodes);
        for (auto &n : tree.nodes) {
            n.feature = r.get<std::int32_t>();
            n.left = r.get<std::int32_t>();
            n.right = r.get<std::int32_t>();
            n.threshold = r.get<double>();
            n.prediction = r.get<double>();
            n.count = r.get<std::uint32_t>();
            if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || static_cast<std::uint64_t>(n.left) >= n_nodes ||
                                 static_cast<std::uint64_t>(n.right) >= n_nodes ||
                                 static_cast<std::size_t>(n.feature) >= f.num_features))
                throw IoError("forest checkpoint: corrupt node");
        }
        f.trees.push_back(std::move(tree));
    }
    return f;
}

} // namespace beaminfer

#endif
