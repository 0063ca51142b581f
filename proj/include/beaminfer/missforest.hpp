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

#ifndef BEAMINFER_MISSFOREST_HPP
#define BEAMINFER_MISSFOREST_HPP

#include "beaminfer/common.hpp"
#include "beaminfer/forest.hpp"
#include "beaminfer/rf_impute.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <vector>

// Iterative random-forest imputation (MissForest) over a continuous matrix.
//
//  1. fill every gap with its column mean;
//  2. visit the columns with gaps in ascending order of missingness, fit a
//     forest on the rows where the column is observed (all other columns as
//     features, current fills included) and overwrite the gaps;
//  3. after each full pass compute
//         delta = sum (new - old)^2 / sum new^2   over the imputed cells;
//  4. stop when delta increases (returning the pass before the increase)
//     or when max_iter passes have run.

namespace beaminfer {

struct MeanInit {
    Matrix matrix;
    std::vector<std::size_t> fallback_columns;
};

/// Step 1: mean fill. Observed entries are untouched.
inline MeanInit mean_mode_init(const Matrix &m)
{
    auto means = column_means(m);
    return {fill_missing(m, means.means), std::move(means.fallback_columns)};
}

struct MissForestParams {
    ForestParams forest{};
    std::size_t max_iter = 10;
};

struct MissForestResult {
    Matrix matrix;
    std::vector<double> diff_history;  // one entry per completed pass
    std::size_t iterations_used = 0;   // pass whose matrix was returned (0 = mean fill)
    bool stopped_on_increase = false;
    std::vector<std::size_t> fallback_columns;
};

/// Called after each pass with (pass number, matrix after the pass, delta).
using MissForestObserver = std::function<void(std::size_t, const Matrix &, double)>;

inline MissForestResult mf_impute(const Matrix &input, const MissForestParams &params, std::uint64_t seed,
                                  const MissForestObserver &observer = {})
{
    MissForestResult out;
    std::vector<std::vector<std::size_t>> missing_rows(input.cols()), observed(input.cols());
    std::size_t total_missing = 0;
    for (std::size_t c = 0; c < input.cols(); ++c) {
        const auto col = input.col(c);
        for (std::size_t r = 0; r < col.size(); ++r) (is_missing(col[r]) ? missing_rows[c] : observed[c]).push_back(r);
        total_missing += missing_rows[c].size();
    }
    if (total_missing == 0) {
        out.matrix = input;
        return out;
    }
    auto init = mean_mode_init(input);
    out.fallback_columns = init.fallback_columns;
    Matrix current = std::move(init.matrix);

    std::vector<std::size_t> order;
    for (std::size_t c = 0; c < input.cols(); ++c)
        if (!missing_rows[c].empty() && !observed[c].empty()) order.push_back(c);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return missing_rows[a].size() < missing_rows[b].size(); });

    std::vector<std::size_t> all_features(input.cols());
    std::iota(all_features.begin(), all_features.end(), std::size_t{0});

    Matrix previous = current;
    for (std::size_t iter = 1; iter <= params.max_iter; ++iter) {
        previous = current;
        for (std::size_t c : order) {
            std::vector<std::size_t> features;
            features.reserve(input.cols() - 1);
            for (std::size_t f : all_features)
                if (f != c) features.push_back(f);
            if (features.empty()) continue;
            ForestParams fp = params.forest;
            fp.mtry = std::min(fp.mtry, features.size());
            const Forest forest = fit_forest(current, current.col(c), observed[c], features, fp, derive_seed(seed, iter, c));
            std::vector<double> preds(missing_rows[c].size());
            parallel_for(preds.size(), [&](std::size_t k) {
                preds[k] = forest.predict_row(current, missing_rows[c][k]);
            });
            auto col = current.col(c);
            for (std::size_t k = 0; k < preds.size(); ++k) col[missing_rows[c][k]] = preds[k];
        }
        double num = 0.0, den = 0.0;
        for (std::size_t c = 0; c < input.cols(); ++c)
            for (std::size_t r : missing_rows[c]) {
                const double d = current(r, c) - previous(r, c);
                num += d * d;
                den += current(r, c) * current(r, c);
            }
        const double delta = den > 0.0 ? num / den : 0.0;
        out.diff_history.push_back(delta);
        if (observer) observer(iter, current, delta);
        if (out.diff_history.size() >= 2 && delta > out.diff_history[out.diff_history.size() - 2]) {
            out.matrix = std::move(previous);
            out.iterations_used = iter - 1;
            out.stopped_on_increase = true;
            return out;
        }
        out.iterations_used = iter;
    }
    out.matrix = std::move(current);
    return out;
}

} // namespace beaminfer

#endif
