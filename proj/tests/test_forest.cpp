// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beaminfer authors

#include "beaminfer/forest.hpp"
#include "beaminfer/rf_impute.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <sstream>

using namespace beaminfer;

namespace {

struct Regression {
    Matrix x;
    std::vector<double> y;
};

// y = sin(3 x0) + x1^2 + noise; x2 is irrelevant.
Regression noisy_regression(std::size_t n, std::uint64_t seed, double noise = 0.3)
{
    Rng rng(seed);
    Regression d{Matrix(n, 3), std::vector<double>(n)};
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < 3; ++c) d.x(i, c) = 2 * uniform_unit(rng) - 1;
        d.y[i] = std::sin(3 * d.x(i, 0)) + d.x(i, 1) * d.x(i, 1) + noise * standard_normal(rng);
    }
    return d;
}

double truth_fn(double a, double b) { return std::sin(3 * a) + b * b; }

// Exhaustive best single split on one feature minimising the summed squared error.
double brute_force_threshold(const std::vector<double> &x, const std::vector<double> &y, std::size_t min_leaf)
{
    std::vector<double> u = x;
    std::sort(u.begin(), u.end());
    u.erase(std::unique(u.begin(), u.end()), u.end());
    double best_sse = INFINITY, best_t = NAN;
    for (std::size_t k = 0; k + 1 < u.size(); ++k) {
        const double t = 0.5 * (u[k] + u[k + 1]);
        double sl = 0, sr = 0;
        std::size_t nl = 0, nr = 0;
        for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= t ? (sl += y[i], ++nl) : (sr += y[i], ++nr));
        if (nl < min_leaf || nr < min_leaf) continue;
        const double ml = sl / nl, mr = sr / nr;
        double sse = 0;
        for (std::size_t i = 0; i < x.size(); ++i) sse += std::pow(y[i] - (x[i] <= t ? ml : mr), 2);
        if (sse < best_sse) best_sse = sse, best_t = t;
    }
    return best_t;
}

// Recursive descent written independently of RegressionTree::leaf_of.
double descend(const RegressionTree &t, std::size_t node, std::span<const double> x)
{
    const auto &n = t.nodes[node];
    if (n.feature < 0) return n.prediction;
    return descend(t, static_cast<std::size_t>(x[n.feature] <= n.threshold ? n.left : n.right), x);
}

} // namespace

TEST(Tree, ConstantTargetIsSingleLeaf)
{
    Matrix x(10, 2);
    for (std::size_t i = 0; i < 10; ++i) x(i, 0) = i, x(i, 1) = -double(i);
    const std::vector<double> y(10, 4.25);
    const auto t = fit_tree(x, y, TreeParams{0, 1, 0}, 1);
    ASSERT_EQ(t.nodes.size(), 1u);
    EXPECT_EQ(t.nodes[0].prediction, 4.25);
}

TEST(Tree, TwoClusterSplitMatchesBruteForce)
{
    Matrix x(4, 1);
    const std::vector<double> xs{1, 2, 10, 11}, y{0, 0, 1, 1};
    for (std::size_t i = 0; i < 4; ++i) x(i, 0) = xs[i];
    const auto t = fit_tree(x, y, TreeParams{1, 1, 0}, 3);
    ASSERT_FALSE(t.nodes[0].is_leaf());
    EXPECT_EQ(t.depth(), 1u);
    EXPECT_EQ(t.nodes[0].threshold, brute_force_threshold(xs, y, 1));
    EXPECT_GT(t.nodes[0].threshold, 2.0);
    EXPECT_LT(t.nodes[0].threshold, 10.0);
    EXPECT_EQ(t.predict(std::vector<double>{0.0}), 0.0);
    EXPECT_EQ(t.predict(std::vector<double>{50.0}), 1.0);
}

TEST(Tree, RootSplitMatchesBruteForceOnRandomData)
{
    for (std::uint64_t s = 0; s < 20; ++s) {
        Rng rng(s);
        const std::size_t n = 5 + s;
        std::vector<double> xs(n), y(n);
        Matrix x(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            xs[i] = x(i, 0) = uniform_unit(rng);
            y[i] = standard_normal(rng);
        }
        const std::size_t min_leaf = 1 + s % 3;
        const auto t = fit_tree(x, y, TreeParams{1, min_leaf, 1}, s);
        const double expect = brute_force_threshold(xs, y, min_leaf);
        if (std::isnan(expect)) {
            EXPECT_TRUE(t.nodes[0].is_leaf());
        } else {
            ASSERT_FALSE(t.nodes[0].is_leaf());
            EXPECT_DOUBLE_EQ(t.nodes[0].threshold, expect);
        }
    }
}

TEST(Tree, LeafPredictionIsMeanOfItsTargets)
{
    const auto d = noisy_regression(300, 4);
    const auto t = fit_tree(d.x, d.y, TreeParams{0, 5, 0}, 8);
    std::vector<double> sum(t.nodes.size(), 0.0);
    std::vector<std::size_t> cnt(t.nodes.size(), 0);
    for (std::size_t i = 0; i < 300; ++i) {
        const auto leaf = t.leaf_of(d.x.row(i));
        sum[leaf] += d.y[i];
        ++cnt[leaf];
    }
    for (std::size_t k = 0; k < t.nodes.size(); ++k) {
        if (!t.nodes[k].is_leaf()) continue;
        ASSERT_GT(cnt[k], 0u);
        EXPECT_GE(cnt[k], 5u);
        EXPECT_NEAR(t.nodes[k].prediction, sum[k] / cnt[k], 1e-12);
        EXPECT_EQ(t.nodes[k].count, cnt[k]);
    }
}

TEST(Tree, MaxDepthIsRespected)
{
    const auto d = noisy_regression(400, 2);
    for (std::size_t md : {1u, 2u, 5u}) EXPECT_LE(fit_tree(d.x, d.y, TreeParams{0, 1, md}, 1).depth(), md);
}

TEST(Forest, SingleTreeWithoutBootstrapEqualsFitTree)
{
    const auto d = noisy_regression(200, 5);
    ForestParams p;
    p.n_trees = 1;
    p.bootstrap = false;
    p.mtry = 2;
    const auto f = fit_forest(d.x, d.y, p, 99);
    const auto t = fit_tree(d.x, d.y, p.tree(), f.per_tree_seed[0]);
    EXPECT_TRUE(f.trees[0] == t);
}

TEST(Forest, PredictionIsMeanOfTreesAndMatchesDescent)
{
    const auto d = noisy_regression(150, 6);
    ForestParams p;
    p.n_trees = 3;
    const auto f = fit_forest(d.x, d.y, p, 1);
    Rng rng(1);
    for (int k = 0; k < 5; ++k) {
        const std::vector<double> x{uniform_unit(rng), uniform_unit(rng), uniform_unit(rng)};
        const double by_hand = (descend(f.trees[0], 0, x) + descend(f.trees[1], 0, x) + descend(f.trees[2], 0, x)) / 3.0;
        EXPECT_NEAR(f.predict(x), by_hand, 1e-12);
        for (const auto &t : f.trees) EXPECT_EQ(t.predict(x), descend(t, 0, x));
    }
}

TEST(Forest, PredictionsStayInTrainingRange)
{
    const auto d = noisy_regression(200, 7);
    ForestParams p;
    p.n_trees = 20;
    const auto f = fit_forest(d.x, d.y, p, 3);
    const auto [lo, hi] = std::minmax_element(d.y.begin(), d.y.end());
    Rng rng(2);
    for (int k = 0; k < 200; ++k) {
        const std::vector<double> x{4 * uniform_unit(rng) - 2, 4 * uniform_unit(rng) - 2, 4 * uniform_unit(rng) - 2};
        const double v = f.predict(x);
        EXPECT_TRUE(std::isfinite(v));
        EXPECT_GE(v, *lo);
        EXPECT_LE(v, *hi);
    }
    Matrix cx(10, 1);
    for (std::size_t i = 0; i < 10; ++i) cx(i, 0) = i;
    const auto cf = fit_forest(cx, std::vector<double>(10, -3.5), p, 1);
    EXPECT_EQ(cf.predict(std::vector<double>{42.0}), -3.5);
}

TEST(Forest, HundredTreesBeatOneTreeOnHeldOutData)
{
    int wins = 0;
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto train = noisy_regression(200, 100 + s), test = noisy_regression(200, 200 + s);
        ForestParams big, one;
        big.n_trees = 100;
        one.n_trees = 1;
        const auto fb = fit_forest(train.x, train.y, big, s), fo = fit_forest(train.x, train.y, one, s);
        double eb = 0, eo = 0;
        for (std::size_t i = 0; i < 200; ++i) {
            const auto row = test.x.row(i);
            eb += std::pow(fb.predict(row) - test.y[i], 2);
            eo += std::pow(fo.predict(row) - test.y[i], 2);
        }
        wins += eb <= eo;
    }
    EXPECT_GE(wins, 8);
}

TEST(Forest, BaggingReducesPredictionVariance)
{
    // Variance over 10 training seeds at fixed query points.
    Rng qrng(77);
    int lower = 0;
    for (int q = 0; q < 10; ++q) {
        const std::vector<double> x{2 * uniform_unit(qrng) - 1, 2 * uniform_unit(qrng) - 1, 0.0};
        std::vector<double> pb, ps;
        for (std::uint64_t s = 0; s < 10; ++s) {
            const auto train = noisy_regression(200, 300 + s);
            ForestParams big, one;
            big.n_trees = 100;
            one.n_trees = 1;
            pb.push_back(fit_forest(train.x, train.y, big, s).predict(x));
            ps.push_back(fit_forest(train.x, train.y, one, s).predict(x));
        }
        auto var = [](const std::vector<double> &v) {
            double m = 0, s = 0;
            for (double a : v) m += a;
            m /= v.size();
            for (double a : v) s += (a - m) * (a - m);
            return s / v.size();
        };
        lower += var(pb) < var(ps);
    }
    EXPECT_GE(lower, 8);
}

TEST(Forest, DeterministicAndOrderInvariant)
{
    const auto d = noisy_regression(150, 9);
    ForestParams p;
    p.n_trees = 8;
    const auto a = fit_forest(d.x, d.y, p, 5), b = fit_forest(d.x, d.y, p, 5);
    EXPECT_TRUE(a == b);
    auto r = a;
    std::reverse(r.trees.begin(), r.trees.end());
    const std::vector<double> x{0.1, -0.4, 0.3};
    EXPECT_NEAR(a.predict(x), r.predict(x), 1e-12);
    EXPECT_FALSE(fit_forest(d.x, d.y, p, 6) == a);
}

TEST(Forest, Errors)
{
    const auto d = noisy_regression(20, 1);
    ForestParams p;
    p.n_trees = 0;
    EXPECT_THROW(fit_forest(d.x, d.y, p, 1), ArgumentError);
    p.n_trees = 2;
    const auto f = fit_forest(d.x, d.y, p, 1);
    EXPECT_THROW(f.predict(std::vector<double>{1.0}), ArgumentError);
    EXPECT_THROW(fit_tree(Matrix(0, 2), std::vector<double>{}, TreeParams{}, 1), ArgumentError);
    Matrix bad = d.x;
    bad(3, 1) = kMissing;
    EXPECT_THROW(fit_forest(bad, d.y, p, 1), ArgumentError);
}

TEST(Forest, CheckpointRoundTrip)
{
    const auto d = noisy_regression(100, 3);
    ForestParams p;
    p.n_trees = 5;
    const auto f = fit_forest(d.x, d.y, p, 2);
    std::stringstream ss;
    BinaryWriter w(ss);
    write_forest(w, f);
    BinaryReader r(ss);
    const auto g = read_forest(r);
    EXPECT_TRUE(f == g);
    const std::vector<double> x{0.2, 0.3, 0.4};
    EXPECT_EQ(f.predict(x), g.predict(x));
}

// ---- RF imputation ------------------------------------------------------

namespace {

// Column 1 is column 0 + 3 dB exactly; column 2 is noise.
Matrix affine_training(std::size_t n, std::uint64_t seed, double p_missing)
{
    Rng rng(seed);
    Matrix m(n, 3);
    for (std::size_t i = 0; i < n; ++i) {
        const double a = -100 + 40 * uniform_unit(rng);
        m(i, 0) = a;
        m(i, 1) = a + 3.0;
        m(i, 2) = -90 + 5 * standard_normal(rng);
        if (uniform_unit(rng) < p_missing) m(i, 1 + uniform_index(rng, 0, 1)) = kMissing;
    }
    return m;
}

} // namespace

TEST(RfImpute, UnmaskedRowIsReturnedUnchanged)
{
    const auto train = affine_training(100, 1, 0.2);
    const std::vector<double> row{-80, -77, -90};
    ForestParams p;
    p.n_trees = 10;
    EXPECT_EQ(rf_impute(train, row, Mask{0, 0, 0}, p, 1).grid, row);
    const auto imp = RfImputer::fit(train, p, 1);
    EXPECT_EQ(imp.impute(row, Mask{0, 0, 0}).grid, row);
}

TEST(RfImpute, RecoversAffineColumnRelation)
{
    const auto train = affine_training(400, 2, 0.2);
    ForestParams p;
    p.n_trees = 50;
    p.min_leaf = 1;
    p.mtry = 2;
    const auto imp = RfImputer::fit(train, p, 3);
    Rng rng(4);
    for (int k = 0; k < 20; ++k) {
        const double a = -95 + 30 * uniform_unit(rng);
        const std::vector<double> row{a, kMissing, -90};
        const Mask mask{0, 1, 0};
        EXPECT_NEAR(rf_impute(train, row, mask, p, 5).grid[1], a + 3.0, 0.5);
        EXPECT_NEAR(imp.impute(row, mask).grid[1], a + 3.0, 0.5);
    }
}

TEST(RfImpute, AllMaskedRowGivesTrainingColumnMeans)
{
    const auto train = affine_training(80, 5, 0.3);
    ForestParams p;
    p.n_trees = 5;
    const auto means = column_means(train).means;
    const std::vector<double> row(3, kMissing);
    EXPECT_EQ(rf_impute(train, row, Mask{1, 1, 1}, p, 1).grid, means);
}

TEST(RfImpute, ColumnWithoutObservationsFallsBackToGlobalMean)
{
    Matrix train(10, 2);
    double s = 0;
    for (std::size_t i = 0; i < 10; ++i) {
        train(i, 0) = -70.0 - double(i);
        s += train(i, 0);
        train(i, 1) = kMissing;
    }
    ForestParams p;
    p.n_trees = 3;
    const auto r = rf_impute(train, std::vector<double>{-75, kMissing}, Mask{0, 1}, p, 1);
    EXPECT_DOUBLE_EQ(r.grid[1], s / 10);
    EXPECT_EQ(r.fallback_columns, (std::vector<std::size_t>{1}));
    const auto imp = RfImputer::fit(train, p, 1);
    const auto q = imp.impute(std::vector<double>{-75, kMissing}, Mask{0, 1});
    EXPECT_DOUBLE_EQ(q.grid[1], s / 10);
    EXPECT_EQ(q.fallback_columns, (std::vector<std::size_t>{1}));
    EXPECT_THROW(column_means(Matrix(3, 2, kMissing)), ImputationError);
}

TEST(RfImpute, ImputerCheckpointRoundTrip)
{
    const auto train = affine_training(120, 6, 0.3);
    ForestParams p;
    p.n_trees = 4;
    const auto imp = RfImputer::fit(train, p, 9);
    const auto path = (std::filesystem::temp_directory_path() / "beaminfer_test_rf.bin").string();
    imp.save(path);
    const auto back = RfImputer::load(path);
    EXPECT_TRUE(back == imp);
    const std::vector<double> row{-81, kMissing, kMissing};
    EXPECT_EQ(back.impute(row, Mask{0, 1, 1}).grid, imp.impute(row, Mask{0, 1, 1}).grid);
    EXPECT_THROW(imp.impute(std::vector<double>{1.0}, Mask{0}), ArgumentError);
}
