// SPDX-License-Identifier: Apache-2.0
// Copyright (C) 2026 The beaminfer authors

#include "beaminfer/cgan.hpp"
#include "beaminfer/scenario.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

using namespace beaminfer;

namespace {

ScenarioConfig small_grid(std::size_t ues, std::uint64_t seed)
{
    ScenarioConfig s;
    s.num_aps = 2;
    s.beams_per_ap = 8;
    s.ue_count = ues;
    s.seed = seed;
    return s;
}

GanConfig small_gan(std::size_t width, std::uint64_t seed)
{
    GanConfig c;
    c.latent_dim = 8;
    c.gen_hidden = {32, 32};
    c.disc_hidden = {16};
    c.gen_out = width;
    c.batch_size = 16;
    c.seed = seed;
    return c;
}

MaskedDataset masked(const ScenarioConfig &s, double p, std::uint64_t seed)
{
    return oversample(generate_scenario(s), 1, p, seed);
}

// Layer-width arithmetic for a dense stack: sum of in*out + out.
std::size_t dense_count(const std::vector<std::size_t> &w)
{
    std::size_t n = 0;
    for (std::size_t i = 0; i + 1 < w.size(); ++i) n += w[i] * w[i + 1] + w[i + 1];
    return n;
}

// Mean smooth-L1 (beta 1) at hidden slots, written out directly.
double hidden_smooth_l1(const nn::NetParams &gen, const MaskedDataset &rows, const Normalizer &norm, const GanConfig &cfg,
                        std::uint64_t seed)
{
    Rng rng(seed);
    double sum = 0;
    std::size_t n = 0;
    for (const auto &row : rows.rows) {
        std::vector<std::size_t> obs;
        for (std::size_t j = 0; j < row.mask.size(); ++j)
            if (!row.mask[j]) obs.push_back(j);
        Mask m = row.mask;
        const auto hide = static_cast<std::size_t>(std::llround(0.2 * obs.size()));
        for (auto h : sample_without_replacement(obs.size(), hide, rng)) m[obs[h]] = 1;
        nn::VectorXd z(static_cast<Eigen::Index>(cfg.latent_dim));
        for (auto &v : z) v = standard_normal(rng);
        nn::VectorXd cond(static_cast<Eigen::Index>(m.size()));
        for (std::size_t j = 0; j < m.size(); ++j)
            cond(static_cast<Eigen::Index>(j)) = m[j] ? 0.0 : norm.transform(row.observed[j], j);
        const auto y = gen_forward(gen, z, cond, m);
        for (std::size_t j = 0; j < m.size(); ++j)
            if (m[j] && !row.mask[j]) {
                const double d = std::abs(y(static_cast<Eigen::Index>(j)) - norm.transform(row.truth[j], j));
                sum += d < 1.0 ? 0.5 * d * d : d - 0.5;
                ++n;
            }
    }
    return sum / static_cast<double>(n);
}

} // namespace

TEST(CganArchitecture, DefaultWidths)
{
    GanConfig c;
    EXPECT_EQ(c.generator_widths(), (std::vector<std::size_t>{740, 128, 256, 256, 128, 320}));
    EXPECT_EQ(c.discriminator_widths(), (std::vector<std::size_t>{960, 64, 64, 64, 1}));
}

TEST(CganArchitecture, ParameterCountsClosedForm)
{
    GanConfig c;
    const auto gen = make_generator(c, 1);
    const auto disc = make_discriminator(c, 2);
    const std::size_t gen_expected = 740 * 128 + 128 + 128 * 256 + 256 + 256 * 256 + 256 + 256 * 128 + 128 + 128 * 320 + 320;
    const std::size_t disc_expected = 960 * 64 + 64 + 2 * (64 * 64 + 64) + 64 + 1;
    EXPECT_EQ(gen.parameter_count(), gen_expected);
    EXPECT_EQ(disc.parameter_count(), disc_expected);
    EXPECT_EQ(gen.parameter_count(), dense_count(c.generator_widths()));
    ASSERT_EQ(gen.layers.size(), 5u);
    for (std::size_t i = 0; i + 1 < gen.layers.size(); ++i) EXPECT_EQ(gen.layers[i].activation, nn::Activation::leaky_relu);
    EXPECT_EQ(gen.layers.back().activation, nn::Activation::none);
    EXPECT_EQ(disc.layers.back().activation, nn::Activation::sigmoid);
}

TEST(CganConfig, RejectsBadValues)
{
    GanConfig c;
    c.batch_size = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = GanConfig{};
    c.submask_fraction = 1.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = GanConfig{};
    c.gen_hidden = {128, 0};
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(Normalizer, RoundTripAndDegenerateColumns)
{
    Matrix m(4, 3);
    const double vals[4][3] = {{1, 5, -90}, {2, 5, -80}, {3, 5, kMissing}, {kMissing, 5, -70}};
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t j = 0; j < 3; ++j) m(i, j) = vals[i][j];
    const auto n = Normalizer::fit(m);
    EXPECT_DOUBLE_EQ(n.mean[0], 2.0);
    EXPECT_DOUBLE_EQ(n.stddev[0], std::sqrt(2.0 / 3.0));
    EXPECT_DOUBLE_EQ(n.mean[1], 5.0);
    EXPECT_DOUBLE_EQ(n.stddev[1], 1.0);  // constant column
    EXPECT_DOUBLE_EQ(n.mean[2], -80.0);
    Rng rng(3);
    for (int t = 0; t < 1000; ++t) {
        const double v = -150 + 200 * uniform_unit(rng);
        for (std::size_t c = 0; c < 3; ++c) EXPECT_NEAR(n.inverse(n.transform(v, c), c), v, 1e-9);
    }
}

TEST(Normalizer, UnobservedColumnUsesGlobalStatistics)
{
    Matrix m(2, 2);
    m(0, 0) = 1;
    m(1, 0) = 3;
    m(0, 1) = kMissing;
    m(1, 1) = kMissing;
    const auto n = Normalizer::fit(m);
    EXPECT_DOUBLE_EQ(n.mean[1], 2.0);
    EXPECT_DOUBLE_EQ(n.stddev[1], 1.0);
    Matrix empty(2, 2);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) empty(i, j) = kMissing;
    EXPECT_THROW(Normalizer::fit(empty), ArgumentError);
}

TEST(GenForward, DefaultInputWidthAndDeterminism)
{
    GanConfig c;
    const auto gen = make_generator(c, 9);
    EXPECT_EQ(gen.input_dim(), 740u);
    Rng rng(1);
    nn::VectorXd z(100), cond(320);
    for (auto &v : z) v = standard_normal(rng);
    for (auto &v : cond) v = standard_normal(rng);
    Mask m(320, 0);
    for (std::size_t j = 0; j < 320; j += 3) m[j] = 1;
    const auto a = gen_forward(gen, z, cond, m);
    const auto b = gen_forward(gen, z, cond, m);
    EXPECT_EQ(a.size(), 320);
    EXPECT_TRUE(a == b);
    EXPECT_THROW(gen_forward(gen, nn::VectorXd::Zero(99), cond, m), ArgumentError);
    EXPECT_THROW(gen_forward(gen, z, nn::VectorXd::Zero(319), m), ArgumentError);
}

TEST(Pretrain, ConstantGridReconstructsConstant)
{
    auto s = small_grid(256, 4);
    auto ds = masked(s, 0.5, 5);
    const double c = -77.0;
    for (auto &row : ds.rows)
        for (std::size_t j = 0; j < row.truth.size(); ++j) {
            row.truth[j] = c;
            if (!row.mask[j]) row.observed[j] = c;
        }
    auto cfg = small_gan(ds.width(), 6);
    const auto norm = Normalizer::fit(observed_matrix(ds));
    const auto pre = pretrain_generator(ds, norm, cfg);
    ASSERT_EQ(pre.loss_curve.size(), 50u);
    // c normalizes to 0 (std replaced by 1 on constant columns)
    EXPECT_DOUBLE_EQ(norm.transform(c, 0), 0.0);
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
        const auto &row = ds.rows[t];
        nn::VectorXd z(static_cast<Eigen::Index>(cfg.latent_dim));
        for (auto &v : z) v = standard_normal(rng);
        nn::VectorXd cond = nn::VectorXd::Zero(static_cast<Eigen::Index>(ds.width()));
        const auto y = gen_forward(pre.generator, z, cond, row.mask);
        for (std::size_t j = 0; j < ds.width(); ++j)
            if (row.mask[j]) EXPECT_NEAR(y(static_cast<Eigen::Index>(j)), 0.0, 0.1);
    }
}

TEST(Pretrain, LossFiniteAndDecreasing)
{
    const auto ds = masked(small_grid(128, 11), 0.5, 12);
    const auto cfg = small_gan(ds.width(), 13);
    const auto norm = Normalizer::fit(observed_matrix(ds));
    const auto pre = pretrain_generator(ds, norm, cfg);
    ASSERT_EQ(pre.loss_curve.size(), 50u);
    for (double l : pre.loss_curve) EXPECT_TRUE(std::isfinite(l));
    EXPECT_LT(pre.loss_curve.back(), pre.loss_curve.front());
}

TEST(Pretrain, ImprovesHeldOutReconstructionAcrossSeeds)
{
    for (std::uint64_t seed : {21u, 22u, 23u}) {
        const auto s = small_grid(240, seed);
        const auto all = masked(s, 0.5, seed + 100);
        MaskedDataset train = all, held = all;
        train.rows.assign(all.rows.begin(), all.rows.begin() + 200);
        held.rows.assign(all.rows.begin() + 200, all.rows.end());
        auto cfg = small_gan(all.width(), seed);
        const auto norm = Normalizer::fit(observed_matrix(train));
        auto cfg0 = cfg;
        cfg0.pretrain_epochs = 0;
        const auto before = pretrain_generator(train, norm, cfg0);
        const auto after = pretrain_generator(train, norm, cfg);
        const double l0 = hidden_smooth_l1(before.generator, held, norm, cfg, 99);
        const double l1 = hidden_smooth_l1(after.generator, held, norm, cfg, 99);
        EXPECT_LT(l1, l0) << "seed " << seed;
    }
}

TEST(Pretrain, EmptyTrainingSetThrows)
{
    MaskedDataset ds;
    ds.config = small_grid(1, 1);
    GanConfig cfg = small_gan(ds.width(), 1);
    Normalizer n;
    n.mean.assign(ds.width(), 0.0);
    n.stddev.assign(ds.width(), 1.0);
    EXPECT_THROW(pretrain_generator(ds, n, cfg), ArgumentError);
    EXPECT_THROW(train_cgan(ds, cfg), ArgumentError);
}

TEST(TrainGan, EpochCountsAndFiniteCurves)
{
    const auto ds = masked(small_grid(48, 31), 0.8, 32);
    const auto cfg = small_gan(ds.width(), 33);
    const auto model = train_cgan(ds, cfg);
    EXPECT_EQ(model.pretrain_loss.size(), 50u);
    EXPECT_EQ(model.gen_loss.size(), 200u);
    EXPECT_EQ(model.disc_loss.size(), 200u);
    for (std::size_t e = 0; e < 200; ++e) {
        EXPECT_TRUE(std::isfinite(model.gen_loss[e]));
        EXPECT_TRUE(std::isfinite(model.disc_loss[e]));
    }
    EXPECT_TRUE(model.generator.all_finite());
    EXPECT_TRUE(model.discriminator.all_finite());

    const auto dir = std::filesystem::temp_directory_path() / "beaminfer_test_cgan";
    std::filesystem::create_directories(dir);
    const auto curve = (dir / "curve.csv").string();
    write_training_curve(model, curve);
    std::ifstream is(curve);
    std::string line;
    std::getline(is, line);
    EXPECT_EQ(line, "phase,epoch,pretrain_loss,gen_loss,disc_loss");
    std::size_t pre = 0, gan = 0;
    while (std::getline(is, line)) {
        if (line.rfind("pretrain,", 0) == 0) ++pre;
        if (line.rfind("gan,", 0) == 0) ++gan;
    }
    EXPECT_EQ(pre, 50u);
    EXPECT_EQ(gan, 200u);

    const auto ckpt = (dir / "cgan.bin").string();
    model.save(ckpt);
    const auto back = CganModel::load(ckpt);
    EXPECT_TRUE(back.generator == model.generator);
    EXPECT_TRUE(back.discriminator == model.discriminator);
    EXPECT_EQ(back.normalizer, model.normalizer);
    EXPECT_EQ(back.gen_loss, model.gen_loss);
    EXPECT_EQ(back.config.generator_widths(), cfg.generator_widths());
    EXPECT_EQ(back.config.discriminator_widths(), cfg.discriminator_widths());
    std::filesystem::remove_all(dir);
}

TEST(TrainGan, UntrainedDiscriminatorNearChance)
{
    const auto ds = masked(small_grid(64, 41), 0.8, 42);
    GanConfig cfg = small_gan(ds.width(), 43);
    const auto norm = Normalizer::fit(observed_matrix(ds));
    const auto gen = make_generator(cfg, 44);
    const auto disc = make_discriminator(cfg, 45);
    std::vector<std::size_t> idx(ds.rows.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    const double acc = discriminator_accuracy(disc, gen, ds, idx, norm, cfg, 46);
    EXPECT_NEAR(acc, 0.5, 0.2);
}

TEST(TrainGan, DeterministicForFixedSeed)
{
    const auto ds = masked(small_grid(32, 51), 0.8, 52);
    auto cfg = small_gan(ds.width(), 53);
    cfg.pretrain_epochs = 5;
    cfg.gan_epochs = 5;
    const auto a = train_cgan(ds, cfg);
    const auto b = train_cgan(ds, cfg);
    EXPECT_TRUE(a.generator == b.generator);
    EXPECT_TRUE(a.discriminator == b.discriminator);
    EXPECT_EQ(a.gen_loss, b.gen_loss);
}

TEST(CganImpute, PassthroughBandAndReproducibility)
{
    const auto s = small_grid(96, 61);
    const auto ds = masked(s, 0.8, 62);
    auto cfg = small_gan(ds.width(), 63);
    cfg.gan_epochs = 20;
    const auto model = train_cgan(ds, cfg);
    const double lo = s.noise_floor_dbm - 20, hi = s.tx_power_dbm + 20;
    for (std::size_t r = 0; r < 30; ++r) {
        const auto &row = ds.rows[r];
        const auto out = cgan_impute(model.generator, row, model.normalizer, 100 + r);
        const auto again = cgan_impute(model.generator, row, model.normalizer, 100 + r);
        EXPECT_EQ(out, again);
        for (std::size_t j = 0; j < out.size(); ++j) {
            ASSERT_TRUE(std::isfinite(out[j]));
            EXPECT_GE(out[j], lo);
            EXPECT_LE(out[j], hi);
            if (!row.mask[j]) EXPECT_EQ(out[j], row.observed[j]);
        }
    }
}

TEST(CganImpute, NoMaskReturnsTruth)
{
    const auto s = small_grid(4, 71);
    const auto ds = masked(s, 0.0, 72);
    const auto cfg = small_gan(ds.width(), 73);
    Normalizer n;
    n.mean.assign(ds.width(), 0.0);
    n.stddev.assign(ds.width(), 1.0);
    const auto gen = make_generator(cfg, 74);
    for (const auto &row : ds.rows) EXPECT_EQ(cgan_impute(gen, row, n, 1), row.truth);
    Mask short_mask(ds.width() - 1, 0);
    EXPECT_THROW(cgan_impute(gen, ds.rows[0].observed, short_mask, n, 1), ArgumentError);
}
