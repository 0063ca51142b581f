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

#ifndef BEAMINFER_PIPELINE_HPP
#define BEAMINFER_PIPELINE_HPP

#include "beaminfer/cgan.hpp"
#include "beaminfer/common.hpp"
#include "beaminfer/dataio.hpp"
#include "beaminfer/missforest.hpp"
#include "beaminfer/rf_impute.hpp"
#include "beaminfer/scenario.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

// Two-stage directed beam search.
//
// Stage 1: the UE reports the sounded (unmasked) beams; an imputer predicts
//          the rest of the grid.
// Stage 2: the k unmeasured beams with the highest prediction are scanned.
// Decision: best measured value among the Stage-1 and Stage-2 beams.

namespace beaminfer {

enum class ModelKind { rf, mf, cgan, mean, random };

inline const char *to_string(ModelKind m)
{
    switch (m) {
    case ModelKind::rf: return "rf";
    case ModelKind::mf: return "mf";
    case ModelKind::cgan: return "cgan";
    case ModelKind::mean: return "mean";
    case ModelKind::random: return "random";
    }
    return "?";
}

inline ModelKind model_from_string(const std::string &s)
{
    if (s == "rf") return ModelKind::rf;
    if (s == "mf") return ModelKind::mf;
    if (s == "cgan") return ModelKind::cgan;
    if (s == "mean") return ModelKind::mean;
    if (s == "random") return ModelKind::random;
    throw ArgumentError("unknown model '" + s + "' (valid: rf, mf, cgan, mean, random)");
}

struct SearchOutcome {
    std::size_t ue_id = 0;
    ModelKind model = ModelKind::mean;
    double p = 0.0;
    std::size_t k = 0;
    std::size_t sounded = 0;  // x = M*N - round(p*M*N)
    std::vector<std::size_t> stage1_indices;
    std::vector<std::size_t> stage2_indices;
    std::size_t chosen = 0;  // flat index
    BeamIndex chosen_beam{};
    double achieved_rsrp = 0.0;
    double true_best_rsrp = 0.0;
    double gap = 0.0;  // true_best - achieved, >= 0
    bool truncated = false;  // k exceeded the masked count
};

// ---- Candidate selection -------------------------------------------------

struct TopK {
    std::vector<std::size_t> flat;  // descending by prediction, ties by lowest index
    bool truncated = false;

    std::vector<BeamIndex> beams(std::size_t beams_per_ap) const
    {
        std::vector<BeamIndex> out;
        for (auto f : flat) out.push_back(BeamIndex::from_flat(f, beams_per_ap));
        return out;
    }
};

/// The k masked slots with the highest predicted value. k above the masked
/// count is truncated and flagged.
inline TopK select_topk(std::span<const double> predicted, const Mask &mask, std::size_t k)
{
    if (predicted.size() != mask.size()) throw ArgumentError("select_topk: prediction/mask width mismatch");
    if (k == 0) throw ArgumentError("select_topk: k must be >= 1");
    std::vector<std::size_t> masked;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i]) masked.push_back(i);
    TopK out;
    if (k > masked.size()) {
        out.truncated = true;
        k = masked.size();
    }
    auto key = [&](std::size_t i) {
        return std::isnan(predicted[i]) ? -std::numeric_limits<double>::infinity() : predicted[i];
    };
    std::partial_sort(masked.begin(), masked.begin() + static_cast<std::ptrdiff_t>(k), masked.end(),
                      [&](std::size_t a, std::size_t b) {
                          const double ka = key(a), kb = key(b);
                          return ka > kb || (ka == kb && a < b);
                      });
    out.flat.assign(masked.begin(), masked.begin() + static_cast<std::ptrdiff_t>(k));
    return out;
}

/// Simulated Stage-2 scan: reads the truth at the candidates and picks the
/// best measured beam over Stage-1 observations and Stage-2 reports.
inline SearchOutcome stage2_resolve(const MaskedSample &row, std::span<const std::size_t> candidates,
                                    std::size_t beams_per_ap)
{
    const std::size_t w = row.truth.size();
    SearchOutcome o;
    o.ue_id = row.source_row;
    for (std::size_t i = 0; i < w; ++i)
        if (!row.mask[i]) o.stage1_indices.push_back(i);
    o.sounded = o.stage1_indices.size();
    for (std::size_t c : candidates) {
        if (c >= w || !row.mask[c]) throw ArgumentError("stage2_resolve: candidate " + std::to_string(c) + " is not a masked beam");
        o.stage2_indices.push_back(c);
    }
    std::vector<std::size_t> pool = o.stage1_indices;
    pool.insert(pool.end(), o.stage2_indices.begin(), o.stage2_indices.end());
    if (pool.empty()) throw ArgumentError("stage2_resolve: nothing was measured");
    std::sort(pool.begin(), pool.end());
    std::size_t best = pool.front();
    for (std::size_t i : pool)
        if (row.truth[i] > row.truth[best]) best = i;
    o.chosen = best;
    o.chosen_beam = BeamIndex::from_flat(best, beams_per_ap);
    o.achieved_rsrp = row.truth[best];
    o.true_best_rsrp = row.truth[argmax_index(row.truth)];
    o.gap = o.true_best_rsrp - o.achieved_rsrp;
    return o;
}

/// Random search: k masked beams drawn uniformly without replacement. The
/// draw order is fixed by the seed, so larger k scans a superset.
inline SearchOutcome random_baseline(const MaskedSample &row, std::size_t k, std::uint64_t seed, std::size_t beams_per_ap)
{
    std::vector<std::size_t> masked;
    for (std::size_t i = 0; i < row.mask.size(); ++i)
        if (row.mask[i]) masked.push_back(i);
    bool truncated = false;
    if (k > masked.size()) {
        truncated = true;
        k = masked.size();
    }
    Rng rng(seed);
    std::vector<std::size_t> picks;
    for (std::size_t i : sample_without_replacement(masked.size(), k, rng)) picks.push_back(masked[i]);
    auto o = stage2_resolve(row, picks, beams_per_ap);
    o.model = ModelKind::random;
    o.k = k;
    o.truncated = truncated;
    return o;
}

// ---- Stage 1 ------------------------------------------------------------

struct MfArtifacts {
    Matrix train_observed;  // masked training rows, kMissing at gaps
    MissForestParams params{};
    std::uint64_t seed = 0;
};

/// Everything Stage 1 needs, by model.
struct TrainedModels {
    std::vector<double> column_means;  // mean baseline, from training observations
    std::optional<RfImputer> rf;
    std::optional<MfArtifacts> mf;
    std::optional<CganModel> cgan;

    void require(ModelKind m) const
    {
        const bool ok = (m == ModelKind::rf && rf) || (m == ModelKind::mf && mf) || (m == ModelKind::cgan && cgan) ||
                        (m == ModelKind::mean && !column_means.empty()) || m == ModelKind::random;
        if (!ok) throw StateError(std::string("model '") + to_string(m) + "' is not trained");
    }
};

inline std::vector<double> mean_impute(const MaskedSample &row, std::span<const double> means)
{
    if (means.size() != row.observed.size()) throw ArgumentError("mean_impute: width mismatch");
    std::vector<double> out = row.observed;
    for (std::size_t j = 0; j < out.size(); ++j)
        if (row.mask[j]) out[j] = means[j];
    return out;
}

/// MissForest over the training rows and the given rows jointly; returns the
/// completed grids of the given rows.
inline std::vector<std::vector<double>> mf_impute_rows(const MfArtifacts &mf, std::span<const MaskedSample> rows)
{
    const std::size_t n_train = mf.train_observed.rows();
    const std::size_t w = mf.train_observed.cols();
    Matrix joint(n_train + rows.size(), w);
    for (std::size_t c = 0; c < w; ++c) {
        const auto src = mf.train_observed.col(c);
        std::copy(src.begin(), src.end(), joint.col(c).begin());
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].observed.size() != w) throw ArgumentError("mf: row width mismatch");
        joint.set_row(n_train + i, rows[i].observed);
    }
    const auto result = mf_impute(joint, mf.params, mf.seed);
    std::vector<std::vector<double>> out(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        out[i] = result.matrix.row(n_train + i);
        for (std::size_t j = 0; j < w; ++j)
            if (!rows[i].mask[j]) out[i][j] = rows[i].observed[j];
    }
    return out;
}

/// Predicted full grid for one row; equals the observed values at unmasked slots.
inline std::vector<double> stage1_infer(const MaskedSample &row, ModelKind model, const TrainedModels &trained,
                                        std::uint64_t z_seed = 0)
{
    trained.require(model);
    switch (model) {
    case ModelKind::mean: return mean_impute(row, trained.column_means);
    case ModelKind::rf: return trained.rf->impute(row.observed, row.mask).grid;
    case ModelKind::mf: return mf_impute_rows(*trained.mf, std::span(&row, 1)).front();
    case ModelKind::cgan: return cgan_impute(trained.cgan->generator, row, trained.cgan->normalizer, z_seed);
    case ModelKind::random: break;
    }
    throw ArgumentError("the random baseline has no stage-1 inference");
}

/// Stage 1 for a batch; MF imputes the whole batch in one joint run. The
/// c-GAN latent seed of each row is derive_seed(z_seed, source_row).
inline std::vector<std::vector<double>> stage1_infer_batch(std::span<const MaskedSample> rows, ModelKind model,
                                                           const TrainedModels &trained, std::uint64_t z_seed)
{
    trained.require(model);
    if (model == ModelKind::mf) return mf_impute_rows(*trained.mf, rows);
    std::vector<std::vector<double>> out(rows.size());
    parallel_for(rows.size(), [&](std::size_t i) {
        out[i] = stage1_infer(rows[i], model, trained, derive_seed(z_seed, rows[i].source_row));
    });
    return out;
}

// ---- Sweep --------------------------------------------------------------

struct SweepDiagnostics {
    std::size_t passthrough_violations = 0;  // imputed grid differs from an observed entry
    std::size_t rows = 0;
};

inline std::uint64_t p_key(double p) { return std::bit_cast<std::uint64_t>(p); }

/// Full factorial over (model, p, k) on the test rows. The sounded set of a
/// (row, p) pair is the same for every model. Output is ordered by
/// (row, model, p, k) in the order the lists were given.
inline std::vector<SearchOutcome> run_sweep(const Dataset &test, const std::vector<ModelKind> &models,
                                            const std::vector<double> &ps, const std::vector<std::size_t> &ks,
                                            const TrainedModels &trained, std::uint64_t seed,
                                            SweepDiagnostics *diag = nullptr)
{
    if (models.empty() || ps.empty() || ks.empty()) throw ArgumentError("run_sweep: empty factor list");
    if (test.rows.empty()) throw ArgumentError("run_sweep: empty test set");
    for (auto m : models) trained.require(m);
    const std::size_t n_rows = test.rows.size(), n_models = models.size(), n_ps = ps.size(), n_ks = ks.size();
    const std::size_t n_per_row = n_models * n_ps * n_ks;
    std::vector<SearchOutcome> out(n_rows * n_per_row);
    const std::size_t bpa = test.beams_per_ap();
    if (diag) *diag = {0, n_rows};

    for (std::size_t pi = 0; pi < n_ps; ++pi) {
        std::vector<MaskedSample> masked(n_rows);
        for (std::size_t r = 0; r < n_rows; ++r)
            masked[r] = apply_mask(test.rows[r], ps[pi], derive_seed(seed, test.rows[r].ue_id, p_key(ps[pi])));
        for (std::size_t mi = 0; mi < n_models; ++mi) {
            const ModelKind model = models[mi];
            std::vector<std::vector<double>> grids;
            if (model != ModelKind::random) {
                grids = stage1_infer_batch(masked, model, trained, derive_seed(seed, 0x2a));
                if (diag)
                    for (std::size_t r = 0; r < n_rows; ++r)
                        for (std::size_t j = 0; j < grids[r].size(); ++j)
                            if (!masked[r].mask[j] && grids[r][j] != masked[r].observed[j]) ++diag->passthrough_violations;
            }
            for (std::size_t r = 0; r < n_rows; ++r) {
                const std::uint64_t random_seed = derive_seed(seed, 0x7a, test.rows[r].ue_id, p_key(ps[pi]));
                for (std::size_t ki = 0; ki < n_ks; ++ki) {
                    SearchOutcome o;
                    if (model == ModelKind::random) {
                        o = random_baseline(masked[r], ks[ki], random_seed, bpa);
                    } else {
                        const auto top = select_topk(grids[r], masked[r].mask, ks[ki]);
                        o = stage2_resolve(masked[r], top.flat, bpa);
                        o.truncated = top.truncated;
                    }
                    o.model = model;
                    o.p = ps[pi];
                    o.k = ks[ki];
                    out[r * n_per_row + (mi * n_ps + pi) * n_ks + ki] = std::move(o);
                }
            }
        }
    }
    return out;
}

// ---- Outcome table ------------------------------------------------------

namespace detail {

inline std::string join_indices(std::span<const std::size_t> v)
{
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(v[i]);
    }
    return s;
}

inline std::vector<std::size_t> parse_indices(const std::string &s)
{
    std::vector<std::size_t> out;
    if (s.empty()) return out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ';')) out.push_back(static_cast<std::size_t>(std::stoull(tok)));
    return out;
}

} // namespace detail

inline constexpr const char *kOutcomeHeader =
    "ue_id,model,p,k,sounded,stage1_indices,stage2_indices,chosen_flat,chosen_ap,chosen_beam,achieved_rsrp,true_best_rsrp,gap,"
    "truncated";

inline void write_outcomes(const std::vector<SearchOutcome> &outcomes, const std::string &path)
{
    auto os = open_output(path);
    os << kOutcomeHeader << '\n';
    for (const auto &o : outcomes) {
        os << o.ue_id << ',' << to_string(o.model) << ',' << format_double(o.p) << ',' << o.k << ',' << o.sounded << ','
           << detail::join_indices(o.stage1_indices) << ',' << detail::join_indices(o.stage2_indices) << ',' << o.chosen
           << ',' << o.chosen_beam.ap << ',' << o.chosen_beam.beam << ',' << format_double(o.achieved_rsrp) << ','
           << format_double(o.true_best_rsrp) << ',' << format_double(o.gap) << ',' << (o.truncated ? 1 : 0) << '\n';
    }
    if (!os) throw IoError("write failed: " + path);
}

inline std::vector<SearchOutcome> read_outcomes(const std::string &path)
{
    auto is = open_input(path);
    std::string line;
    if (!std::getline(is, line) || line != kOutcomeHeader) throw IoError("not an outcome table: " + path);
    std::vector<SearchOutcome> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != 14) throw IoError("malformed outcome row in " + path);
        SearchOutcome o;
        try {
            o.ue_id = std::stoull(c[0]);
            o.model = model_from_string(c[1]);
            o.p = parse_double(c[2]);
            o.k = std::stoull(c[3]);
            o.sounded = std::stoull(c[4]);
            o.stage1_indices = detail::parse_indices(c[5]);
            o.stage2_indices = detail::parse_indices(c[6]);
            o.chosen = std::stoull(c[7]);
            o.chosen_beam = {std::stoull(c[8]), std::stoull(c[9])};
            o.achieved_rsrp = parse_double(c[10]);
            o.true_best_rsrp = parse_double(c[11]);
            o.gap = parse_double(c[12]);
            o.truncated = c[13] == "1";
        } catch (const std::logic_error &e) {
            throw IoError("malformed outcome row in " + path + ": " + e.what());
        }
        out.push_back(std::move(o));
    }
    return out;
}

} // namespace beaminfer

#endif
