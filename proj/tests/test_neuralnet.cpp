// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beaminfer authors

#include "beaminfer/neuralnet.hpp"
#include "support/gradcheck.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace beaminfer;
using namespace beaminfer::nn;

namespace {

MatrixXd random_matrix(Eigen::Index r, Eigen::Index c, Rng &rng, double scale = 1.0)
{
    MatrixXd m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = scale * standard_normal(rng);
    return m;
}

} // namespace

TEST(Forward, IdentityLayerAndActivations)
{
    NetParams net = make_network({3, 3}, {Activation::none}, 1);
    net.layers[0].weights = MatrixXd::Identity(3, 3);
    VectorXd x(3);
    x << 1.5, -2, 0.25;
    EXPECT_EQ(forward(net, x), x);
    EXPECT_EQ(leaky_relu(-1.0), -0.2);
    EXPECT_EQ(leaky_relu(3.0), 3.0);
    EXPECT_EQ(sigmoid(0.0), 0.5);
}

TEST(Forward, HandComputedTwoLayerNet)
{
    NetParams net = make_network({2, 2, 1}, {Activation::leaky_relu, Activation::none}, 1);
    net.layers[0].weights << 1, 2, 3, -1;
    net.layers[0].bias << 0.5, -0.5;
    net.layers[1].weights << 1, -2;
    net.layers[1].bias << 0.1;
    VectorXd x(2);
    x << 1, -1;
    // hidden pre-activation (-0.5, 3.5) -> (-0.1, 3.5); output -0.1 - 7 + 0.1
    EXPECT_NEAR(forward(net, x)(0), -7.0, 1e-12);
    EXPECT_THROW(forward(net, VectorXd(VectorXd::Zero(3))), ArgumentError);
}

TEST(Forward, DeterministicAndGlorotBounded)
{
    const NetParams a = make_network({20, 30, 4}, {Activation::leaky_relu, Activation::sigmoid}, 9);
    const NetParams b = make_network({20, 30, 4}, {Activation::leaky_relu, Activation::sigmoid}, 9);
    EXPECT_TRUE(a == b);
    const double lim = std::sqrt(6.0 / 50.0);
    EXPECT_LE(a.layers[0].weights.cwiseAbs().maxCoeff(), lim);
    EXPECT_EQ(a.layers[0].bias, VectorXd::Zero(30));
    Rng rng(1);
    const MatrixXd x = random_matrix(20, 5, rng);
    EXPECT_EQ(forward(a, x), forward(b, x));
}

TEST(Backward, FiniteDifferencesOnRandomNetworks)
{
    Rng rng(42);
    const Activation acts[] = {Activation::leaky_relu, Activation::sigmoid, Activation::none};
    for (int cfg = 0; cfg < 10; ++cfg) {
        const std::size_t depth = 1 + cfg % 3;
        std::vector<std::size_t> widths{5};
        std::vector<Activation> a;
        for (std::size_t l = 0; l < depth; ++l) {
            widths.push_back(cfg == 0 && l == 0 ? 8 : 2 + uniform_index(rng, 0, 6));
            a.push_back(acts[(cfg + l) % 3]);
        }
        if (cfg == 0) widths.back() = 3;
        NetParams net = make_network(widths, a, 100 + cfg);
        for (auto &l : net.layers) l.bias = random_matrix(l.bias.size(), 1, rng, 0.1);
        MatrixXd x = random_matrix(5, 1 + cfg % 4, rng);
        while (gradcheck::kink_distance(net, x) < gradcheck::kKinkMargin) x = random_matrix(5, x.cols(), rng);
        const MatrixXd r = random_matrix(widths.back(), x.cols(), rng);
        EXPECT_LT(gradcheck::check_network(net, x, r), gradcheck::kTolerance) << "config " << cfg;
    }
}

TEST(Backward, ZeroUpstreamLinearityAndStaleCache)
{
    Rng rng(3);
    NetParams net = make_network({4, 6, 2}, {Activation::leaky_relu, Activation::none}, 5);
    const MatrixXd x = random_matrix(4, 3, rng);
    ForwardCache cache;
    forward(net, x, &cache);
    const auto zero = backward(net, cache, MatrixXd::Zero(2, 3));
    for (const auto &l : zero.layers) {
        EXPECT_EQ(l.weights.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(l.bias.cwiseAbs().maxCoeff(), 0.0);
    }
    const MatrixXd r = random_matrix(2, 3, rng);
    const auto g1 = backward(net, cache, r);
    auto g2 = backward(net, cache, 2.0 * r);
    for (std::size_t l = 0; l < net.layers.size(); ++l)
        EXPECT_LT((g2.layers[l].weights - 2.0 * g1.layers[l].weights).cwiseAbs().maxCoeff(), 1e-12);

    auto adam = make_adam(net, 1e-3);
    adam_step(net, g1, adam);
    EXPECT_THROW(backward(net, cache, r), ContractError);
    NetParams other = net;
    ForwardCache c2;
    forward(other, x, &c2);
    EXPECT_THROW(backward(net, c2, r), ContractError);
}

TEST(Losses, SmoothL1ValuesAndGradients)
{
    MatrixXd p(1, 3), t(1, 3);
    p << 0.5, 2.0, 7.0;
    t << 0.0, 0.0, 7.0;
    BoolMatrix sel(1, 3);
    sel << true, false, false;
    EXPECT_DOUBLE_EQ(smooth_l1(p, t, sel).value, 0.125);
    sel << false, true, false;
    EXPECT_DOUBLE_EQ(smooth_l1(p, t, sel).value, 1.5);
    EXPECT_DOUBLE_EQ(smooth_l1(p, t, sel).gradient(0, 1), 1.0);
    sel << true, false, true;
    EXPECT_DOUBLE_EQ(smooth_l1(p, t, sel).gradient(0, 0), 0.5 / 2);
    sel << false, false, true;
    EXPECT_EQ(smooth_l1(p, t, sel).value, 0.0);
    sel.setConstant(false);
    EXPECT_THROW(smooth_l1(p, t, sel), LossError);

    Rng rng(7);
    for (int cfg = 0; cfg < 10; ++cfg) {
        MatrixXd pred = random_matrix(4, 3, rng, 2.0);
        const MatrixXd target = random_matrix(4, 3, rng, 2.0);
        BoolMatrix s(4, 3);
        for (Eigen::Index i = 0; i < s.size(); ++i) s.data()[i] = uniform_unit(rng) < 0.6;
        s(0, 0) = true;
        const auto res = smooth_l1(pred, target, s);
        EXPECT_LT(gradcheck::check_entries(pred, res.gradient, [&] { return smooth_l1(pred, target, s).value; }),
                  gradcheck::kTolerance);
    }
}

TEST(Losses, BinaryCrossEntropy)
{
    MatrixXd half = MatrixXd::Constant(2, 3, 0.5), labels(2, 3);
    labels << 1, 0, 1, 0, 0, 1;
    EXPECT_NEAR(bce(half, labels).value, std::log(2.0), 1e-15);
    EXPECT_LT(bce(labels, labels).value, 1e-5);
    EXPECT_LT(bce(labels, labels).value, 1e-5);
    MatrixXd p(1, 1), y(1, 1);
    p << 0.3;
    y << 1;
    const double l0 = bce(p, y).value;
    EXPECT_LT(bce(p, y).gradient(0, 0), 0.0);
    p << 0.4;
    EXPECT_LT(bce(p, y).value, l0);
    p << 0.0;
    EXPECT_TRUE(std::isfinite(bce(p, y).value));

    Rng rng(8);
    for (int cfg = 0; cfg < 10; ++cfg) {
        MatrixXd prob(3, 2), lab(3, 2);
        for (Eigen::Index i = 0; i < prob.size(); ++i) {
            prob.data()[i] = 0.05 + 0.9 * uniform_unit(rng);
            lab.data()[i] = uniform_unit(rng) < 0.5 ? 0.0 : 1.0;
        }
        const auto res = bce(prob, lab);
        EXPECT_LT(gradcheck::check_entries(prob, res.gradient, [&] { return bce(prob, lab).value; }), gradcheck::kTolerance);
    }
}

TEST(Losses, ChainedThroughSigmoidNetwork)
{
    Rng rng(9);
    for (int cfg = 0; cfg < 10; ++cfg) {
        NetParams net = make_network({6, 5, 1}, {Activation::leaky_relu, Activation::sigmoid}, 200 + cfg);
        const MatrixXd x = random_matrix(6, 4, rng);
        MatrixXd lab(1, 4);
        for (Eigen::Index i = 0; i < 4; ++i) lab(0, i) = i % 2;
        ForwardCache cache;
        const MatrixXd out = forward(net, x, &cache);
        const auto g = backward(net, cache, bce(out, lab).gradient);
        auto f = [&] { return bce(forward(net, x), lab).value; };
        for (std::size_t l = 0; l < net.layers.size(); ++l) {
            EXPECT_LT(gradcheck::check_entries(net.layers[l].weights, g.layers[l].weights, f), gradcheck::kTolerance);
            EXPECT_LT(gradcheck::check_entries(net.layers[l].bias, g.layers[l].bias, f), gradcheck::kTolerance);
        }
    }
}

TEST(Adam, ZeroGradientAndFirstStep)
{
    NetParams net = make_network({3, 2}, {Activation::none}, 1);
    const NetParams before = net;
    auto s = make_adam(net, 1e-3);
    Gradients zero;
    zero.layers.push_back({MatrixXd::Zero(2, 3), VectorXd::Zero(2)});
    adam_step(net, zero, s);
    EXPECT_EQ(s.t, 1u);
    EXPECT_TRUE(net == before);

    NetParams n2 = before;
    auto s2 = make_adam(n2, 1e-3);
    Gradients g;
    g.layers.push_back({MatrixXd::Constant(2, 3, 0.37), VectorXd::Constant(2, -4.0)});
    adam_step(n2, g, s2);
    EXPECT_NEAR((before.layers[0].weights - n2.layers[0].weights).maxCoeff(), 1e-3, 1e-9);
    EXPECT_NEAR((n2.layers[0].bias - before.layers[0].bias).minCoeff(), 1e-3, 1e-9);

    NetParams n3 = before;
    auto s3 = make_adam(n3, 1e-3);
    adam_step(n3, g, s3);
    EXPECT_TRUE(n2 == n3);
}

TEST(Adam, LinearRegressionLossDropsTenfold)
{
    Rng rng(10);
    const MatrixXd x = random_matrix(4, 64, rng);
    MatrixXd w(1, 4);
    w << 0.5, -1.0, 2.0, 0.3;
    const MatrixXd y = w * x;
    NetParams net = make_network({4, 1}, {Activation::none}, 3);
    auto s = make_adam(net, 0.05);
    BoolMatrix all = BoolMatrix::Constant(1, 64, true);
    const double initial = smooth_l1(forward(net, x), y, all).value;
    for (int step = 0; step < 200; ++step) {
        ForwardCache c;
        const MatrixXd out = forward(net, x, &c);
        adam_step(net, backward(net, c, smooth_l1(out, y, all).gradient), s);
    }
    EXPECT_LT(smooth_l1(forward(net, x), y, all).value, initial / 10);
}

TEST(Checkpoint, ParamsRoundTripExactly)
{
    const NetParams net = make_network({7, 5, 2}, {Activation::leaky_relu, Activation::sigmoid}, 4);
    std::stringstream ss;
    BinaryWriter w(ss);
    write_params(w, net);
    BinaryReader r(ss);
    const NetParams back = read_params(r);
    EXPECT_TRUE(back == net);
    EXPECT_EQ(back.parameter_count(), 7u * 5 + 5 + 5 * 2 + 2);
}
