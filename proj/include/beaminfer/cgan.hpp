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

#ifndef BEAMINFER_CGAN_HPP
#define BEAMINFER_CGAN_HPP

#include "beaminfer/common.hpp"
#include "beaminfer/dataio.hpp"
#include "beaminfer/neuralnet.hpp"

#include <numeric>
#include <string>
#include <vector>

// Conditional GAN imputer.
//
// Generator:     [z (latent) | condition | mask]            -> full grid
// Discriminator: [candidate grid | condition | mask]        -> P(real)
//
// The condition is the z-scored observed grid with zeros at masked slots and
// the mask is 1.0 at masked slots. Hidden layers use LeakyReLU(0.2); the
// generator output is linear and the discriminator output is a sigmoid.

namespace beaminfer {

struct GanConfig {
    std::size_t latent_dim = 100;
    std::vector<std::size_t> gen_hidden{128, 256, 256, 128};
    std::size_t gen_out = 320;
    std::vector<std::size_t> disc_hidden{64, 64, 64};
    std::size_t pretrain_epochs = 50;
    double pretrain_lr = 1e-3;
    std::size_t gan_epochs = 200;
    double gan_lr = 1e-5;
    std::size_t batch_size = 64;
    double submask_fraction = 0.2;  // observed entries hidden per sample during pretraining
    std::uint64_t seed = 7;

    void validate() const
    {
        if (latent_dim == 0 || gen_out == 0 || batch_size == 0) throw ConfigError("cgan: dimensions must be >= 1");
        for (auto w : gen_hidden)
            if (w == 0) throw ConfigError("cgan: zero-width generator layer");
        for (auto w : disc_hidden)
            if (w == 0) throw ConfigError("cgan: zero-width discriminator layer");
        if (!(submask_fraction >= 0.0 && submask_fraction < 1.0)) throw ConfigError("cgan: submask_fraction must lie in [0, 1)");
        if (!(pretrain_lr > 0.0) || !(gan_lr > 0.0)) throw ConfigError("cgan: learning rates must be positive");
    }

    std::vector<std::size_t> generator_widths() const
    {
        std::vector<std::size_t> w{latent_dim + 2 * gen_out};
        w.insert(w.end(), gen_hidden.begin(), gen_hidden.end());
        w.push_back(gen_out);
        return w;
    }

    std::vector<std::size_t> discriminator_widths() const
    {
        std::vector<std::size_t> w{3 * gen_out};
        w.insert(w.end(), disc_hidden.begin(), disc_hidden.end());
        w.push_back(1);
        return w;
    }
};

inline nn::NetParams make_generator(const GanConfig &cfg, std::uint64_t seed)
{
    std::vector<nn::Activation> acts(cfg.gen_hidden.size(), nn::Activation::leaky_relu);
    acts.push_back(nn::Activation::none);
    return nn::make_network(cfg.generator_widths(), acts, seed);
}

inline nn::NetParams make_discriminator(const GanConfig &cfg, std::uint64_t seed)
{
    std::vector<nn::Activation> acts(cfg.disc_hidden.size(), nn::Activation::leaky_relu);
    acts.push_back(nn::Activation::sigmoid);
    return nn::make_network(cfg.discriminator_widths(), acts, seed);
}

/// Per-column z-score fit on observed training entries.
struct Normalizer {
    std::vector<double> mean;
    std::vector<double> stddev;

    static Normalizer fit(const Matrix &observed)
    {
        Normalizer n;
        const auto means = column_means_or_global(observed);
        n.mean = means;
        n.stddev.assign(observed.cols(), 1.0);
        double g_ss = 0.0;
        std::size_t g_n = 0;
        std::vector<std::size_t> counts(observed.cols(), 0);
        for (std::size_t c = 0; c < observed.cols(); ++c) {
            double ss = 0.0;
            for (double v : observed.col(c))
                if (!is_missing(v)) {
                    ss += (v - means[c]) * (v - means[c]);
                    ++counts[c];
                }
            g_ss += ss;
            g_n += counts[c];
            if (counts[c] > 0) n.stddev[c] = std::sqrt(ss / static_cast<double>(counts[c]));
        }
        const double g_std = g_n > 0 ? std::sqrt(g_ss / static_cast<double>(g_n)) : 1.0;
        for (std::size_t c = 0; c < observed.cols(); ++c) {
            if (counts[c] == 0) n.stddev[c] = g_std;
            if (n.stddev[c] < 1e-9) n.stddev[c] = 1.0;
        }
        return n;
    }

    std::size_t width() const noexcept { return mean.size(); }
    double transform(double v, std::size_t c) const noexcept { return (v - mean[c]) / stddev[c]; }
    double inverse(double v, std::size_t c) const noexcept { return v * stddev[c] + mean[c]; }

    friend bool operator==(const Normalizer &, const Normalizer &) = default;

private:
    static std::vector<double> column_means_or_global(const Matrix &m)
    {
        std::vector<double> out(m.cols(), 0.0);
        std::vector<bool> has(m.cols(), false);
        double g = 0.0;
        std::size_t gn = 0;
        for (std::size_t c = 0; c < m.cols(); ++c) {
            double s = 0.0;
            std::size_t n = 0;
            for (double v : m.col(c))
                if (!is_missing(v)) {
                    s += v;
                    ++n;
                }
            g += s;
            gn += n;
            if (n > 0) {
                out[c] = s / static_cast<double>(n);
                has[c] = true;
            }
        }
        if (gn == 0) throw ArgumentError("normalizer: no observed entries");
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (!has[c]) out[c] = g / static_cast<double>(gn);
        return out;
    }
};

namespace detail {

/// Writes [z | condition | mask] for one sample into column `col` of `in`.
inline void fill_generator_input(nn::MatrixXd &in, Eigen::Index col, std::span<const double> observed, const Mask &mask,
                                 const Normalizer &norm, std::size_t latent_dim, Rng &z_rng)
{
    const std::size_t w = norm.width();
    for (std::size_t i = 0; i < latent_dim; ++i) in(static_cast<Eigen::Index>(i), col) = standard_normal(z_rng);
    for (std::size_t j = 0; j < w; ++j) {
        const auto cond_row = static_cast<Eigen::Index>(latent_dim + j);
        const auto mask_row = static_cast<Eigen::Index>(latent_dim + w + j);
        in(cond_row, col) = mask[j] ? 0.0 : norm.transform(observed[j], j);
        in(mask_row, col) = mask[j] ? 1.0 : 0.0;
    }
}

} // namespace detail

/// Generator forward for one sample; returns the full normalized grid.
inline nn::VectorXd gen_forward(const nn::NetParams &gen, const nn::VectorXd &z, const nn::VectorXd &condition,
                                const Mask &mask)
{
    const auto w = static_cast<Eigen::Index>(mask.size());
    if (condition.size() != w || static_cast<std::size_t>(z.size() + 2 * w) != gen.input_dim())
        throw ArgumentError("gen_forward: input dimensions do not match the generator");
    nn::VectorXd x(z.size() + 2 * w);
    x << z, condition, Eigen::Map<const Eigen::Matrix<std::uint8_t, Eigen::Dynamic, 1>>(mask.data(), w).cast<double>();
    return nn::forward(gen, x);
}

struct PretrainResult {
    nn::NetParams generator;
    std::vector<double> loss_curve;  // one mean smooth-L1 per epoch
};

/// Self-supervised pretraining: each epoch hides a fresh random
/// `submask_fraction` of every sample's observed entries and trains the
/// generator to reproduce the observed values (smooth L1 over observed slots).
inline PretrainResult pretrain_generator(const MaskedDataset &train, const Normalizer &norm, const GanConfig &cfg)
{
    cfg.validate();
    if (train.rows.empty()) throw ArgumentError("pretrain_generator: empty training set");
    if (train.width() != cfg.gen_out || norm.width() != cfg.gen_out)
        throw ArgumentError("pretrain_generator: dataset width does not match gen_out");
    PretrainResult out;
    out.generator = make_generator(cfg, derive_seed(cfg.seed, 1));
    auto adam = nn::make_adam(out.generator, cfg.pretrain_lr);
    const std::size_t n = train.rows.size(), w = cfg.gen_out;
    const auto in_dim = static_cast<Eigen::Index>(cfg.latent_dim + 2 * w);
    std::vector<std::size_t> order(n);
    std::vector<std::size_t> observed_idx;
    for (std::size_t epoch = 0; epoch < cfg.pretrain_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 2, epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, n - start);
            nn::MatrixXd input(in_dim, static_cast<Eigen::Index>(b));
            nn::MatrixXd target = nn::MatrixXd::Zero(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(b));
            nn::BoolMatrix selected = nn::BoolMatrix::Constant(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(b), false);
            for (std::size_t k = 0; k < b; ++k) {
                const auto &row = train.rows[order[start + k]];
                Mask input_mask = row.mask;
                observed_idx.clear();
                for (std::size_t j = 0; j < w; ++j)
                    if (!row.mask[j]) observed_idx.push_back(j);
                const auto hide = static_cast<std::size_t>(std::llround(cfg.submask_fraction * static_cast<double>(observed_idx.size())));
                for (std::size_t h : sample_without_replacement(observed_idx.size(), std::min(hide, observed_idx.size()), rng))
                    input_mask[observed_idx[h]] = 1;
                detail::fill_generator_input(input, static_cast<Eigen::Index>(k), row.observed, input_mask, norm,
                                             cfg.latent_dim, rng);
                for (std::size_t j : observed_idx) {
                    target(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = norm.transform(row.observed[j], j);
                    selected(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) = true;
                }
            }
            if (selected.count() == 0) continue;
            nn::ForwardCache cache;
            const nn::MatrixXd pred = nn::forward(out.generator, input, &cache);
            const auto loss = nn::smooth_l1(pred, target, selected);
            const auto grads = nn::backward(out.generator, cache, loss.gradient);
            nn::adam_step(out.generator, grads, adam);
            loss_sum += loss.value;
            ++batches;
        }
        out.loss_curve.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    }
    return out;
}

struct GanTrainResult {
    nn::NetParams generator;
    nn::NetParams discriminator;
    std::vector<double> gen_loss;   // per epoch
    std::vector<double> disc_loss;  // per epoch
};

namespace detail {

struct GanBatch {
    nn::MatrixXd gen_input;  // [z | cond | mask]
    nn::MatrixXd real;       // normalized truth
    nn::MatrixXd cond;       // normalized observed, 0 at masked
    nn::MatrixXd mask;       // 1.0 at masked
};

inline GanBatch make_gan_batch(const MaskedDataset &data, std::span<const std::size_t> idx, const Normalizer &norm,
                               const GanConfig &cfg, Rng &rng)
{
    const auto w = static_cast<Eigen::Index>(cfg.gen_out);
    const auto b = static_cast<Eigen::Index>(idx.size());
    GanBatch batch;
    batch.gen_input.resize(static_cast<Eigen::Index>(cfg.latent_dim) + 2 * w, b);
    batch.real.resize(w, b);
    for (Eigen::Index k = 0; k < b; ++k) {
        const auto &row = data.rows[idx[static_cast<std::size_t>(k)]];
        fill_generator_input(batch.gen_input, k, row.observed, row.mask, norm, cfg.latent_dim, rng);
        for (Eigen::Index j = 0; j < w; ++j) batch.real(j, k) = norm.transform(row.truth[static_cast<std::size_t>(j)], static_cast<std::size_t>(j));
    }
    batch.cond = batch.gen_input.middleRows(static_cast<Eigen::Index>(cfg.latent_dim), w);
    batch.mask = batch.gen_input.bottomRows(w);
    return batch;
}

/// Observed values at unmasked slots, generator values at masked slots.
inline nn::MatrixXd complete(const nn::MatrixXd &generated, const GanBatch &batch)
{
    return (batch.mask.array() > 0.5).select(generated, batch.cond);
}

inline nn::MatrixXd disc_input(const nn::MatrixXd &candidate, const GanBatch &batch)
{
    nn::MatrixXd in(candidate.rows() * 3, candidate.cols());
    in << candidate, batch.cond, batch.mask;
    return in;
}

} // namespace detail

/// Adversarial phase. Per batch: one discriminator step on real (truth) and
/// fake (generator-completed) grids, then one non-saturating generator step
/// that maximizes log D(fake).
inline GanTrainResult train_gan(const MaskedDataset &train, const Normalizer &norm, const nn::NetParams &pretrained,
                                const GanConfig &cfg)
{
    cfg.validate();
    if (train.rows.empty()) throw ArgumentError("train_gan: empty training set");
    if (pretrained.output_dim() != cfg.gen_out || train.width() != cfg.gen_out)
        throw ArgumentError("train_gan: generator width does not match the dataset");
    GanTrainResult out;
    out.generator = pretrained;
    out.discriminator = make_discriminator(cfg, derive_seed(cfg.seed, 3));
    auto adam_g = nn::make_adam(out.generator, cfg.gan_lr);
    auto adam_d = nn::make_adam(out.discriminator, cfg.gan_lr);
    const std::size_t n = train.rows.size();
    const auto w = static_cast<Eigen::Index>(cfg.gen_out);
    std::vector<std::size_t> order(n);
    for (std::size_t epoch = 0; epoch < cfg.gan_epochs; ++epoch) {
        Rng rng(derive_seed(cfg.seed, 4, epoch));
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::shuffle(order.begin(), order.end(), rng);
        double g_sum = 0.0, d_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size) {
            const std::size_t b = std::min(cfg.batch_size, n - start);
            const auto batch = detail::make_gan_batch(train, std::span(order).subspan(start, b), norm, cfg, rng);
            const auto bi = static_cast<Eigen::Index>(b);

            // discriminator step
            nn::ForwardCache g_cache;
            const nn::MatrixXd generated = nn::forward(out.generator, batch.gen_input, &g_cache);
            const nn::MatrixXd fake = detail::complete(generated, batch);
            nn::MatrixXd d_in(3 * w, 2 * bi);
            d_in << detail::disc_input(batch.real, batch), detail::disc_input(fake, batch);
            nn::MatrixXd labels(1, 2 * bi);
            labels << nn::MatrixXd::Ones(1, bi), nn::MatrixXd::Zero(1, bi);
            nn::ForwardCache d_cache;
            const auto d_loss = nn::bce(nn::forward(out.discriminator, d_in, &d_cache), labels);
            nn::adam_step(out.discriminator, nn::backward(out.discriminator, d_cache, d_loss.gradient), adam_d);

            // generator step through the updated discriminator
            nn::ForwardCache d2_cache;
            const auto g_loss = nn::bce(nn::forward(out.discriminator, detail::disc_input(fake, batch), &d2_cache),
                                        nn::MatrixXd::Ones(1, bi));
            const auto d_grads = nn::backward(out.discriminator, d2_cache, g_loss.gradient);
            const nn::MatrixXd d_fake = d_grads.input.topRows(w).cwiseProduct(batch.mask);
            nn::adam_step(out.generator, nn::backward(out.generator, g_cache, d_fake), adam_g);

            g_sum += g_loss.value;
            d_sum += d_loss.value;
            ++batches;
        }
        out.gen_loss.push_back(g_sum / static_cast<double>(batches));
        out.disc_loss.push_back(d_sum / static_cast<double>(batches));
    }
    return out;
}

/// Fraction of real samples scored > 0.5 plus fake samples scored <= 0.5.
inline double discriminator_accuracy(const nn::NetParams &disc, const nn::NetParams &gen, const MaskedDataset &data,
                                     std::span<const std::size_t> idx, const Normalizer &norm, const GanConfig &cfg,
                                     std::uint64_t seed)
{
    Rng rng(seed);
    const auto batch = detail::make_gan_batch(data, idx, norm, cfg, rng);
    const auto fake = detail::complete(nn::forward(gen, batch.gen_input), batch);
    const auto p_real = nn::forward(disc, detail::disc_input(batch.real, batch));
    const auto p_fake = nn::forward(disc, detail::disc_input(fake, batch));
    const double correct = static_cast<double>((p_real.array() > 0.5).count() + (p_fake.array() <= 0.5).count());
    return correct / static_cast<double>(2 * idx.size());
}

/// Observed values pass through; masked slots get the denormalized generator
/// output for latent draw Rng(z_seed).
inline std::vector<double> cgan_impute(const nn::NetParams &gen, std::span<const double> observed, const Mask &mask,
                                       const Normalizer &norm, std::uint64_t z_seed)
{
    const std::size_t w = norm.width();
    if (observed.size() != w || mask.size() != w || gen.output_dim() != w)
        throw ArgumentError("cgan_impute: row width does not match the model");
    std::vector<double> out(observed.begin(), observed.end());
    if (std::none_of(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; })) return out;
    const std::size_t latent = gen.input_dim() - 2 * w;
    nn::MatrixXd in(static_cast<Eigen::Index>(gen.input_dim()), 1);
    Rng rng(z_seed);
    detail::fill_generator_input(in, 0, observed, mask, norm, latent, rng);
    const nn::MatrixXd y = nn::forward(gen, in);
    for (std::size_t j = 0; j < w; ++j)
        if (mask[j]) out[j] = norm.inverse(y(static_cast<Eigen::Index>(j), 0), j);
    return out;
}

inline std::vector<double> cgan_impute(const nn::NetParams &gen, const MaskedSample &row, const Normalizer &norm,
                                       std::uint64_t z_seed)
{
    return cgan_impute(gen, row.observed, row.mask, norm, z_seed);
}

/// Trained imputer: configuration, normalizer, both networks and the curves.
struct CganModel {
    GanConfig config{};
    Normalizer normalizer{};
    nn::NetParams generator;
    nn::NetParams discriminator;
    std::vector<double> pretrain_loss;
    std::vector<double> gen_loss;
    std::vector<double> disc_loss;

    static constexpr std::uint32_t kMagic = 0x47464942;  // "BIFG"
    static constexpr std::uint32_t kVersion = 1;

    void save(const std::string &path) const
    {
        auto os = open_output(path, true);
        BinaryWriter w(os);
        w.put(kMagic);
        w.put(kVersion);
        w.put<std::uint64_t>(config.latent_dim);
        w.put<std::uint64_t>(config.gen_out);
        w.put_doubles(normalizer.mean);
        w.put_doubles(normalizer.stddev);
        nn::write_params(w, generator);
        nn::write_params(w, discriminator);
        w.put_doubles(pretrain_loss);
        w.put_doubles(gen_loss);
        w.put_doubles(disc_loss);
        if (!os) throw IoError("write failed: " + path);
    }

    static CganModel load(const std::string &path)
    {
        auto is = open_input(path, true);
        BinaryReader r(is);
        r.expect_magic(kMagic, kVersion, "cgan checkpoint");
        CganModel m;
        m.config.latent_dim = r.get<std::uint64_t>();
        m.config.gen_out = r.get<std::uint64_t>();
        m.normalizer.mean = r.get_doubles();
        m.normalizer.stddev = r.get_doubles();
        m.generator = nn::read_params(r);
        m.discriminator = nn::read_params(r);
        m.pretrain_loss = r.get_doubles();
        m.gen_loss = r.get_doubles();
        m.disc_loss = r.get_doubles();
        if (m.normalizer.width() != m.config.gen_out || m.generator.output_dim() != m.config.gen_out ||
            m.generator.input_dim() != m.config.latent_dim + 2 * m.config.gen_out)
            throw IoError("cgan checkpoint: inconsistent dimensions");
        m.config.gen_hidden.clear();
        for (std::size_t l = 0; l + 1 < m.generator.layers.size(); ++l) m.config.gen_hidden.push_back(m.generator.layers[l].out());
        m.config.disc_hidden.clear();
        for (std::size_t l = 0; l + 1 < m.discriminator.layers.size(); ++l)
            m.config.disc_hidden.push_back(m.discriminator.layers[l].out());
        return m;
    }
};

/// Full schedule: normalizer fit, pretraining, adversarial training.
inline CganModel train_cgan(const MaskedDataset &train, const GanConfig &cfg)
{
    CganModel m;
    m.config = cfg;
    m.normalizer = Normalizer::fit(observed_matrix(train));
    auto pre = pretrain_generator(train, m.normalizer, cfg);
    m.pretrain_loss = std::move(pre.loss_curve);
    auto gan = train_gan(train, m.normalizer, pre.generator, cfg);
    m.generator = std::move(gan.generator);
    m.discriminator = std::move(gan.discriminator);
    m.gen_loss = std::move(gan.gen_loss);
    m.disc_loss = std::move(gan.disc_loss);
    return m;
}

/// Curve CSV: one row per executed epoch, phase = pretrain | gan.
inline void write_training_curve(const CganModel &m, const std::string &path)
{
    auto os = open_output(path);
    os << "phase,epoch,pretrain_loss,gen_loss,disc_loss\n";
    for (std::size_t e = 0; e < m.pretrain_loss.size(); ++e)
        os << "pretrain," << e + 1 << ',' << format_double(m.pretrain_loss[e]) << ",,\n";
    for (std::size_t e = 0; e < m.gen_loss.size(); ++e)
        os << "gan," << e + 1 << ",," << format_double(m.gen_loss[e]) << ',' << format_double(m.disc_loss[e]) << '\n';
    if (!os) throw IoError("write failed: " + path);
}

} // namespace beaminfer

#endif
