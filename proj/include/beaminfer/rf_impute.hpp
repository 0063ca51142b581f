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

#ifndef BEAMINFER_RF_IMPUTE_HPP
#define BEAMINFER_RF_IMPUTE_HPP

#include "beaminfer/common.hpp"
#include "beaminfer/forest.hpp"

#include <fstream>
#include <string>
#include <vector>

namespace beaminfer {

// ---- Column-mean fill ---------------------------------------------------

struct ColumnMeans {
    std::vector<double> means;
    std::vector<std::size_t> fallback_columns;  // no observed entry; global mean used
};

/// Per-column mean of observed entries. Columns with nothing observed get the
/// global mean of all observed entries; a matrix with nothing observed at all
/// is an ImputationError.
inline ColumnMeans column_means(const Matrix &m)
{
    ColumnMeans out;
    out.means.assign(m.cols(), 0.0);
    std::vector<bool> has(m.cols(), false);
    double global = 0.0;
    std::size_t global_n = 0;
    for (std::size_t c = 0; c < m.cols(); ++c) {
        double s = 0.0;
        std::size_t n = 0;
        for (double v : m.col(c))
            if (!is_missing(v)) {
                s += v;
                ++n;
            }
        global += s;
        global_n += n;
        if (n > 0) {
            out.means[c] = s / static_cast<double>(n);
            has[c] = true;
        }
    }
    if (global_n == 0) throw ImputationError("matrix has no observed entries");
    for (std::size_t c = 0; c < m.cols(); ++c)
        if (!has[c]) {
            out.means[c] = global / static_cast<double>(global_n);
            out.fallback_columns.push_back(c);
        }
    return out;
}

inline Matrix fill_missing(Matrix m, std::span<const double> fill)
{
    for (std::size_t c = 0; c < m.cols(); ++c)
        for (double &v : m.col(c))
            if (is_missing(v)) v = fill[c];
    return m;
}

// ---- Imputation results -------------------------------------------------

struct RfImputation {
    std::vector<double> grid;
    std::vector<std::size_t> fallback_columns;  // masked columns predicted by a mean, not a forest
};

namespace detail {

inline std::vector<std::size_t> observed_rows(const Matrix &m, std::size_t c)
{
    std::vector<std::size_t> rows;
    const auto col = m.col(c);
    for (std::size_t r = 0; r < col.size(); ++r)
        if (!is_missing(col[r])) rows.push_back(r);
    return rows;
}

inline void check_row(std::span<const double> observed, const Mask &mask, std::size_t width)
{
    if (observed.size() != width || mask.size() != width)
        throw ArgumentError("row width " + std::to_string(observed.size()) + " does not match model width " +
                            std::to_string(width));
    for (std::size_t j = 0; j < width; ++j)
        if (!mask[j] && !std::isfinite(observed[j])) throw ArgumentError("observed entry is not finite");
}

} // namespace detail

/// Direct per-row imputation: every masked column j of the row is predicted
/// from the row's observed columns by a forest fit on the training rows where
/// j is observed. Training-side gaps are pre-filled with column means.
inline RfImputation rf_impute(const Matrix &train, std::span<const double> observed, const Mask &mask,
                              const ForestParams &params, std::uint64_t seed)
{
    detail::check_row(observed, mask, train.cols());
    RfImputation out;
    out.grid.assign(observed.begin(), observed.end());
    std::vector<std::size_t> features;
    for (std::size_t j = 0; j < mask.size(); ++j)
        if (!mask[j]) features.push_back(j);
    if (features.size() == mask.size()) return out;

    const auto means = column_means(train);
    const Matrix filled = fill_missing(train, means.means);
    std::vector<double> x(observed.begin(), observed.end());
    for (std::size_t j = 0; j < mask.size(); ++j)
        if (mask[j]) x[j] = means.means[j];

    for (std::size_t j = 0; j < mask.size(); ++j) {
        if (!mask[j]) continue;
        const auto rows = detail::observed_rows(train, j);
        if (rows.empty()) {
            out.grid[j] = means.means[j];
            out.fallback_columns.push_back(j);
            continue;
        }
        if (features.empty()) {
            out.grid[j] = means.means[j];
            continue;
        }
        ForestParams p = params;
        p.mtry = std::min(p.mtry, features.size());
        const Forest f = fit_forest(filled, filled.col(j), rows, features, p, derive_seed(seed, j));
        out.grid[j] = f.predict(x);
    }
    return out;
}

/// Pre-trained form of RF imputation: one forest per target column, trained
/// on every other column of the mean-filled training matrix. At inference the
/// row's masked slots are mean-filled and each masked column is predicted.
class RfImputer {
public:
    static RfImputer fit(const Matrix &train, const ForestParams &params, std::uint64_t seed)
    {
        if (train.rows() == 0) throw ArgumentError("RF imputer: empty training matrix");
        RfImputer m;
        auto means = column_means(train);
        m.means_ = std::move(means.means);
        m.fallback_ = std::vector<bool>(train.cols(), false);
        for (std::size_t c : means.fallback_columns) m.fallback_[c] = true;
        const Matrix filled = fill_missing(train, m.means_);
        m.forests_.resize(train.cols());
        parallel_for(train.cols(), [&](std::size_t j) {
            const auto rows = detail::observed_rows(train, j);
            if (rows.empty()) return;
            std::vector<std::size_t> features;
            for (std::size_t c = 0; c < train.cols(); ++c)
                if (c != j) features.push_back(c);
            if (features.empty()) return;
            ForestParams p = params;
            p.mtry = std::min(p.mtry, features.size());
            m.forests_[j] = fit_forest(filled, filled.col(j), rows, features, p, derive_seed(seed, j));
        });
        return m;
    }

    std::size_t width() const noexcept { return means_.size(); }
    const std::vector<double> &means() const noexcept { return means_; }
    const Forest &forest(std::size_t column) const { return forests_.at(column); }

    RfImputation impute(std::span<const double> observed, const Mask &mask) const
    {
        detail::check_row(observed, mask, width());
        RfImputation out;
        out.grid.assign(observed.begin(), observed.end());
        std::vector<double> x(observed.begin(), observed.end());
        for (std::size_t j = 0; j < width(); ++j)
            if (mask[j]) x[j] = means_[j];
        for (std::size_t j = 0; j < width(); ++j) {
            if (!mask[j]) continue;
            if (forests_[j].trees.empty()) {
                out.grid[j] = means_[j];
                if (fallback_[j]) out.fallback_columns.push_back(j);
            } else {
                out.grid[j] = forests_[j].predict(x);
            }
        }
        return out;
    }

    static constexpr std::uint32_t kMagic = 0x4d464942;  // "BIFM"
    static constexpr std::uint32_t kVersion = 1;

    void save(const std::string &path) const
    {
        auto os = open_output(path, true);
        BinaryWriter w(os);
        w.put(kMagic);
        w.put(kVersion);
        w.put_doubles(means_);
        for (std::size_t j = 0; j < width(); ++j) {
            w.put<std::uint8_t>(fallback_[j] ? 1 : 0);
            w.put<std::uint8_t>(forests_[j].trees.empty() ? 0 : 1);
            if (!forests_[j].trees.empty()) write_forest(w, forests_[j]);
        }
        if (!os) throw IoError("write failed: " + path);
    }

    static RfImputer load(const std::string &path)
    {
        auto is = open_input(path, true);
        BinaryReader r(is);
        r.expect_magic(kMagic, kVersion, "RF imputer checkpoint");
        RfImputer m;
        m.means_ = r.get_doubles();
        m.fallback_.resize(m.means_.size());
        m.forests_.resize(m.means_.size());
        for (std::size_t j = 0; j < m.width(); ++j) {
            m.fallback_[j] = r.get<std::uint8_t>() != 0;
            if (r.get<std::uint8_t>() != 0) {
                m.forests_[j] = read_forest(r);
                if (m.forests_[j].num_features != m.width()) throw IoError("RF imputer checkpoint: width mismatch");
            }
        }
        return m;
    }

    friend bool operator==(const RfImputer &a, const RfImputer &b)
    {
        return a.means_ == b.means_ && a.fallback_ == b.fallback_ && a.forests_ == b.forests_;
    }

private:
    std::vector<double> means_;
    std::vector<bool> fallback_;
    std::vector<Forest> forests_;
};

} // namespace beaminfer

#endif
