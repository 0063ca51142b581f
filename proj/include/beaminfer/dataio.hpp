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

#ifndef BEAMINFER_DATAIO_HPP
#define BEAMINFER_DATAIO_HPP

#include "beaminfer/common.hpp"
#include "beaminfer/scenario.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace beaminfer {

// ---- Masked data --------------------------------------------------------

struct MaskedSample {
    std::vector<double> observed;  // kMissing where mask[i] == 1
    Mask mask;
    std::vector<double> truth;
    std::size_t source_row = 0;    // ue_id of the originating RsrpSample
    UePose pose{};

    std::size_t masked_count() const noexcept
    {
        std::size_t n = 0;
        for (auto m : mask) n += m;
        return n;
    }
};

enum class SplitTag { unsplit, train, test };

inline const char *to_string(SplitTag t)
{
    switch (t) {
    case SplitTag::train: return "train";
    case SplitTag::test: return "test";
    default: return "unsplit";
    }
}

inline SplitTag split_tag_from_string(const std::string &s)
{
    if (s == "train") return SplitTag::train;
    if (s == "test") return SplitTag::test;
    if (s == "unsplit") return SplitTag::unsplit;
    throw IoError("unknown split tag '" + s + "'");
}

struct MaskedDataset {
    ScenarioConfig config{};
    std::vector<MaskedSample> rows;
    SplitTag split = SplitTag::unsplit;
    double mask_fraction = 0.0;
    std::size_t oversample_factor = 1;
    std::uint64_t mask_seed = 0;

    std::size_t width() const noexcept { return config.total_beams(); }
};

/// Number of masked entries for fraction p: round(p * width).
inline std::size_t masked_count(double p, std::size_t width)
{
    return static_cast<std::size_t>(std::llround(p * static_cast<double>(width)));
}

inline MaskedSample apply_mask(const RsrpSample &row, double p, std::uint64_t seed)
{
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("masking fraction must lie in [0, 1]");
    const std::size_t n = row.grid.size();
    MaskedSample out;
    out.truth = row.grid;
    out.observed = row.grid;
    out.mask.assign(n, 0);
    out.source_row = row.ue_id;
    out.pose = row.pose;
    Rng rng(seed);
    for (std::size_t idx : sample_without_replacement(n, masked_count(p, n), rng)) {
        out.mask[idx] = 1;
        out.observed[idx] = kMissing;
    }
    return out;
}

/// Re-masks an existing sample with a fresh pattern at fraction p.
inline MaskedSample remask(const MaskedSample &row, double p, std::uint64_t seed)
{
    RsrpSample base{row.source_row, row.pose, row.truth};
    return apply_mask(base, p, seed);
}

/// Each row is replicated `factor` times; replica j of row i uses stream
/// derive_seed(seed, i, j). Output order is (row, replica).
inline MaskedDataset oversample(const Dataset &ds, std::size_t factor, double p, std::uint64_t seed)
{
    if (factor == 0) throw ArgumentError("oversample factor must be >= 1");
    if (!(p >= 0.0 && p <= 1.0)) throw ArgumentError("masking fraction must lie in [0, 1]");
    MaskedDataset out;
    out.config = ds.config;
    out.mask_fraction = p;
    out.oversample_factor = factor;
    out.mask_seed = seed;
    out.rows.resize(ds.rows.size() * factor);
    parallel_for(ds.rows.size(), [&](std::size_t i) {
        for (std::size_t j = 0; j < factor; ++j)
            out.rows[i * factor + j] = apply_mask(ds.rows[i], p, derive_seed(seed, i, j));
    });
    return out;
}

/// Chooses the test side for `n` sources: round(test_fraction * n) of them,
/// clamped to [1, n - 1].
inline std::vector<bool> choose_test_sources(std::size_t n, double test_fraction, std::uint64_t seed)
{
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ArgumentError("test_fraction must lie in (0, 1)");
    if (n < 2) throw SplitError("split needs at least 2 distinct source rows");
    auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
    n_test = std::clamp<std::size_t>(n_test, 1, n - 1);
    Rng rng(seed);
    std::vector<bool> is_test(n, false);
    for (std::size_t i : sample_without_replacement(n, n_test, rng)) is_test[i] = true;
    return is_test;
}

namespace detail {

template <typename Row, typename KeyFn>
std::pair<std::vector<Row>, std::vector<Row>> split_rows(const std::vector<Row> &rows, KeyFn key,
                                                          double test_fraction, std::uint64_t seed)
{
    // distinct sources, ascending
    std::vector<std::size_t> sources;
    for (const auto &r : rows) sources.push_back(key(r));
    std::sort(sources.begin(), sources.end());
    sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
    const auto is_test = choose_test_sources(sources.size(), test_fraction, seed);
    std::pair<std::vector<Row>, std::vector<Row>> out;
    for (const auto &r : rows) {
        const auto pos = static_cast<std::size_t>(std::lower_bound(sources.begin(), sources.end(), key(r)) - sources.begin());
        (is_test[pos] ? out.second : out.first).push_back(r);
    }
    return out;
}

} // namespace detail

/// Train/test split by source row; returns (train, test).
inline std::pair<Dataset, Dataset> split(const Dataset &ds, double test_fraction, std::uint64_t seed)
{
    auto [tr, te] = detail::split_rows(ds.rows, [](const RsrpSample &r) { return r.ue_id; }, test_fraction, seed);
    Dataset train{ds.config, ds.ap_positions, std::move(tr)};
    Dataset test{ds.config, ds.ap_positions, std::move(te)};
    return {std::move(train), std::move(test)};
}

inline std::pair<MaskedDataset, MaskedDataset> split(const MaskedDataset &ds, double test_fraction, std::uint64_t seed)
{
    auto [tr, te] = detail::split_rows(ds.rows, [](const MaskedSample &r) { return r.source_row; }, test_fraction, seed);
    MaskedDataset train = ds, test = ds;
    train.rows = std::move(tr);
    train.split = SplitTag::train;
    test.rows = std::move(te);
    test.split = SplitTag::test;
    return {std::move(train), std::move(test)};
}

/// rows x width matrix of observed values (kMissing at masked slots).
inline Matrix observed_matrix(const MaskedDataset &ds)
{
    Matrix m(ds.rows.size(), ds.width());
    for (std::size_t r = 0; r < ds.rows.size(); ++r) m.set_row(r, ds.rows[r].observed);
    return m;
}

inline Matrix truth_matrix(const MaskedDataset &ds)
{
    Matrix m(ds.rows.size(), ds.width());
    for (std::size_t r = 0; r < ds.rows.size(); ++r) m.set_row(r, ds.rows[r].truth);
    return m;
}

// ---- JSON for the scenario config ---------------------------------------

inline nlohmann::json to_json(const ScenarioConfig &c)
{
    nlohmann::json aps = nlohmann::json::array();
    for (const auto &p : c.ap_positions) aps.push_back({p.x, p.y});
    return {
        {"num_aps", c.num_aps},
        {"beams_per_ap", c.beams_per_ap},
        {"area", {c.area.x_min, c.area.y_min, c.area.x_max, c.area.y_max}},
        {"ap_positions", c.ap_positions.empty() ? nlohmann::json("auto-grid") : aps},
        {"ue_count", c.ue_count},
        {"carrier_freq_ghz", c.carrier_freq_ghz},
        {"shadowing_sigma_db", c.shadowing_sigma_db},
        {"ue_antenna", to_string(c.ue_antenna)},
        {"ue_antenna_gain_db", c.ue_antenna_gain_db},
        {"ue_beamwidth_deg", c.ue_beamwidth_deg},
        {"beamwidth_deg", c.beamwidth_deg},
        {"beam_gain_db", c.beam_gain_db},
        {"tx_power_dbm", c.tx_power_dbm},
        {"noise_floor_dbm", c.noise_floor_dbm},
        {"seed", c.seed},
    };
}

/// Missing keys keep their defaults; unknown keys are rejected.
inline ScenarioConfig scenario_from_json(const nlohmann::json &j)
{
    if (!j.is_object()) throw ConfigError("scenario must be an object");
    ScenarioConfig c;
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string &k = it.key();
            const auto &v = it.value();
            if (k == "num_aps") c.num_aps = v.get<std::size_t>();
            else if (k == "beams_per_ap") c.beams_per_ap = v.get<std::size_t>();
            else if (k == "area") {
                const auto a = v.get<std::vector<double>>();
                if (a.size() != 4) throw ConfigError("area must be [x_min, y_min, x_max, y_max]");
                c.area = {a[0], a[1], a[2], a[3]};
            } else if (k == "ap_positions") {
                c.ap_positions.clear();
                if (!v.is_string()) {
                    for (const auto &p : v) {
                        const auto xy = p.get<std::vector<double>>();
                        if (xy.size() != 2) throw ConfigError("ap position must be [x, y]");
                        c.ap_positions.push_back({xy[0], xy[1]});
                    }
                } else if (v.get<std::string>() != "auto-grid") {
                    throw ConfigError("ap_positions must be a list of points or \"auto-grid\"");
                }
            } else if (k == "ue_count") c.ue_count = v.get<std::size_t>();
            else if (k == "carrier_freq_ghz") c.carrier_freq_ghz = v.get<double>();
            else if (k == "shadowing_sigma_db") c.shadowing_sigma_db = v.get<double>();
            else if (k == "ue_antenna") c.ue_antenna = ue_antenna_from_string(v.get<std::string>());
            else if (k == "ue_antenna_gain_db") c.ue_antenna_gain_db = v.get<double>();
            else if (k == "ue_beamwidth_deg") c.ue_beamwidth_deg = v.get<double>();
            else if (k == "beamwidth_deg") c.beamwidth_deg = v.get<double>();
            else if (k == "beam_gain_db") c.beam_gain_db = v.get<double>();
            else if (k == "tx_power_dbm") c.tx_power_dbm = v.get<double>();
            else if (k == "noise_floor_dbm") c.noise_floor_dbm = v.get<double>();
            else if (k == "seed") c.seed = v.get<std::uint64_t>();
            else throw ConfigError("unknown scenario key '" + k + "'");
        }
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError(std::string("scenario: ") + e.what());
    }
    return c;
}

// ---- Files --------------------------------------------------------------
// A dataset lives at <stem>.json (metadata) + <stem>.csv with columns
// ue_id, x, y, azimuth, rsrp_0 ... rsrp_{MN-1}. Values are written with 17
// significant digits so a parse reproduces them bit-exactly.

namespace detail {

inline void write_csv_header(std::ostream &os, std::size_t width)
{
    os << "ue_id,x,y,azimuth";
    for (std::size_t i = 0; i < width; ++i) os << ",rsrp_" << i;
    os << '\n';
}

inline void write_csv_row(std::ostream &os, std::size_t id, const UePose &pose, std::span<const double> values)
{
    os << id << ',' << format_double(pose.position.x) << ',' << format_double(pose.position.y) << ','
       << format_double(pose.azimuth_deg);
    for (double v : values) os << ',' << format_double(v);
    os << '\n';
}

struct CsvRow {
    std::size_t id;
    UePose pose;
    std::vector<double> values;
};

inline std::vector<CsvRow> read_csv_rows(const std::string &path, std::size_t width)
{
    auto is = open_input(path);
    std::string line;
    if (!std::getline(is, line)) throw IoError("empty file: " + path);
    if (split_csv_line(line).size() != width + 4) throw IoError("unexpected column count in header of " + path);
    std::vector<CsvRow> rows;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (cells.size() != width + 4) throw IoError("unexpected column count in " + path);
        CsvRow r;
        r.id = static_cast<std::size_t>(std::stoull(cells[0]));
        r.pose.position = {parse_double(cells[1]), parse_double(cells[2])};
        r.pose.azimuth_deg = parse_double(cells[3]);
        r.values.resize(width);
        for (std::size_t i = 0; i < width; ++i) r.values[i] = parse_double(cells[4 + i]);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline nlohmann::json read_json_file(const std::string &path)
{
    auto is = open_input(path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception &e) {
        throw IoError("malformed JSON in " + path + ": " + e.what());
    }
}

inline void write_json_file(const std::string &path, const nlohmann::json &j)
{
    auto os = open_output(path);
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write failed: " + path);
}

} // namespace detail

inline void write_dataset(const Dataset &ds, const std::string &stem)
{
    nlohmann::json aps = nlohmann::json::array();
    for (const auto &p : ds.ap_positions) aps.push_back({p.x, p.y});
    detail::write_json_file(stem + ".json", {{"format_version", Dataset::kFormatVersion},
                                             {"num_aps", ds.num_aps()},
                                             {"beams_per_ap", ds.beams_per_ap()},
                                             {"seed", ds.config.seed},
                                             {"rows", ds.rows.size()},
                                             {"resolved_ap_positions", aps},
                                             {"config", to_json(ds.config)}});
    auto os = open_output(stem + ".csv");
    detail::write_csv_header(os, ds.width());
    for (const auto &r : ds.rows) detail::write_csv_row(os, r.ue_id, r.pose, r.grid);
    if (!os) throw IoError("write failed: " + stem + ".csv");
}

inline Dataset read_dataset(const std::string &stem)
{
    const auto meta = detail::read_json_file(stem + ".json");
    Dataset ds;
    try {
        if (meta.at("format_version").get<int>() != Dataset::kFormatVersion)
            throw IoError("unsupported dataset format version in " + stem + ".json");
        ds.config = scenario_from_json(meta.at("config"));
        for (const auto &p : meta.at("resolved_ap_positions")) ds.ap_positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    } catch (const nlohmann::json::exception &e) {
        throw IoError("malformed dataset metadata " + stem + ".json: " + e.what());
    }
    for (auto &r : detail::read_csv_rows(stem + ".csv", ds.width())) {
        for (double v : r.values)
            if (is_missing(v)) throw IoError("missing value in full dataset " + stem + ".csv");
        ds.rows.push_back({r.id, r.pose, std::move(r.values)});
    }
    return ds;
}

/// Masked set: <stem>.csv with empty cells at masked slots, <stem>_truth.csv
/// with full grids, and <stem>_manifest.json with p, factor, seed and split.
inline void write_masked_dataset(const MaskedDataset &ds, const std::string &stem)
{
    detail::write_json_file(stem + "_manifest.json", {{"format_version", Dataset::kFormatVersion},
                                                      {"num_aps", ds.config.num_aps},
                                                      {"beams_per_ap", ds.config.beams_per_ap},
                                                      {"mask_fraction", ds.mask_fraction},
                                                      {"oversample_factor", ds.oversample_factor},
                                                      {"mask_seed", ds.mask_seed},
                                                      {"split", to_string(ds.split)},
                                                      {"rows", ds.rows.size()},
                                                      {"config", to_json(ds.config)}});
    auto obs = open_output(stem + ".csv");
    auto tru = open_output(stem + "_truth.csv");
    detail::write_csv_header(obs, ds.width());
    detail::write_csv_header(tru, ds.width());
    for (const auto &r : ds.rows) {
        detail::write_csv_row(obs, r.source_row, r.pose, r.observed);
        detail::write_csv_row(tru, r.source_row, r.pose, r.truth);
    }
    if (!obs || !tru) throw IoError("write failed: " + stem);
}

inline MaskedDataset read_masked_dataset(const std::string &stem)
{
    const auto meta = detail::read_json_file(stem + "_manifest.json");
    MaskedDataset ds;
    try {
        ds.config = scenario_from_json(meta.at("config"));
        ds.mask_fraction = meta.at("mask_fraction").get<double>();
        ds.oversample_factor = meta.at("oversample_factor").get<std::size_t>();
        ds.mask_seed = meta.at("mask_seed").get<std::uint64_t>();
        ds.split = split_tag_from_string(meta.at("split").get<std::string>());
    } catch (const nlohmann::json::exception &e) {
        throw IoError("malformed manifest " + stem + "_manifest.json: " + e.what());
    }
    auto obs = detail::read_csv_rows(stem + ".csv", ds.width());
    auto tru = detail::read_csv_rows(stem + "_truth.csv", ds.width());
    if (obs.size() != tru.size()) throw IoError("observed/truth row count mismatch for " + stem);
    ds.rows.resize(obs.size());
    for (std::size_t i = 0; i < obs.size(); ++i) {
        auto &r = ds.rows[i];
        r.source_row = obs[i].id;
        r.pose = obs[i].pose;
        r.observed = std::move(obs[i].values);
        r.truth = std::move(tru[i].values);
        r.mask.assign(ds.width(), 0);
        for (std::size_t k = 0; k < ds.width(); ++k) {
            if (is_missing(r.observed[k])) r.mask[k] = 1;
            else if (r.observed[k] != r.truth[k]) throw IoError("observed value disagrees with truth in " + stem);
        }
    }
    return ds;
}

} // namespace beaminfer

#endif
