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

#ifndef BEAMINFER_SCENARIO_HPP
#define BEAMINFER_SCENARIO_HPP

#include "beaminfer/common.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

// Synthetic D-MIMO deployment: M access points with N azimuth beams each,
// UEs dropped uniformly in a rectangle, and one L1-RSRP value per (UE, beam).
// The channel is parametric: free-space path loss, Gaussian main lobes and
// per-link log-normal shadowing.

namespace beaminfer {

struct Point {
    double x = 0.0;
    double y = 0.0;
    friend bool operator==(const Point &, const Point &) = default;
};

struct Rect {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 150.0;
    double y_max = 100.0;

    double width() const noexcept { return x_max - x_min; }
    double height() const noexcept { return y_max - y_min; }
    friend bool operator==(const Rect &, const Rect &) = default;
};

enum class UeAntenna { omni, directional };

inline const char *to_string(UeAntenna a) { return a == UeAntenna::omni ? "omni" : "directional"; }

inline UeAntenna ue_antenna_from_string(const std::string &s)
{
    if (s == "omni") return UeAntenna::omni;
    if (s == "directional") return UeAntenna::directional;
    throw ConfigError("unknown ue_antenna '" + s + "' (expected omni|directional)");
}

struct ScenarioConfig {
    std::size_t num_aps = 10;           // M
    std::size_t beams_per_ap = 32;      // N
    Rect area{};                        // meters
    std::vector<Point> ap_positions{};  // empty: auto-grid over the area
    std::size_t ue_count = 1500;
    double carrier_freq_ghz = 28.0;
    double shadowing_sigma_db = 4.0;
    UeAntenna ue_antenna = UeAntenna::omni;
    double ue_antenna_gain_db = 9.0;
    double ue_beamwidth_deg = 60.0;
    double beamwidth_deg = 12.0;        // AP beam 3 dB width
    double beam_gain_db = 20.0;         // AP beam peak gain
    double tx_power_dbm = 30.0;
    double noise_floor_dbm = -110.0;
    std::uint64_t seed = 1;

    std::size_t total_beams() const noexcept { return num_aps * beams_per_ap; }

    void validate() const
    {
        if (num_aps < 1) throw ConfigError("num_aps must be >= 1");
        if (beams_per_ap < 2) throw ConfigError("beams_per_ap must be >= 2");
        if (total_beams() == 0) throw ConfigError("total beam count is zero");
        if (!(area.width() > 0.0) || !(area.height() > 0.0)) throw ConfigError("scenario area has zero extent");
        if (ue_count == 0) throw ConfigError("ue_count must be >= 1");
        if (!ap_positions.empty() && ap_positions.size() != num_aps)
            throw ConfigError("ap_positions has " + std::to_string(ap_positions.size()) + " entries, expected num_aps = " +
                              std::to_string(num_aps));
        if (!(shadowing_sigma_db >= 0.0)) throw ConfigError("shadowing_sigma must be >= 0");
        if (!(beamwidth_deg > 0.0 && beamwidth_deg < 180.0)) throw ConfigError("beamwidth must lie in (0, 180) degrees");
        if (!(ue_beamwidth_deg > 0.0 && ue_beamwidth_deg < 360.0)) throw ConfigError("ue_beamwidth must lie in (0, 360) degrees");
        if (!(carrier_freq_ghz > 0.0)) throw ConfigError("carrier_freq must be positive");
    }

    friend bool operator==(const ScenarioConfig &, const ScenarioConfig &) = default;
};

struct BeamIndex {
    std::size_t ap = 0;
    std::size_t beam = 0;

    std::size_t flat(std::size_t beams_per_ap) const noexcept { return ap * beams_per_ap + beam; }

    static BeamIndex from_flat(std::size_t flat, std::size_t beams_per_ap) noexcept
    {
        return {flat / beams_per_ap, flat % beams_per_ap};
    }

    friend bool operator==(const BeamIndex &, const BeamIndex &) = default;
};

struct UePose {
    Point position{};
    double azimuth_deg = 0.0;
};

struct RsrpSample {
    std::size_t ue_id = 0;
    UePose pose{};
    std::vector<double> grid;  // flat index = ap * N + beam, dBm
};

/// A generated (or loaded) measurement set. All rows share (M, N).
struct Dataset {
    static constexpr int kFormatVersion = 1;

    ScenarioConfig config{};
    std::vector<Point> ap_positions;  // resolved positions
    std::vector<RsrpSample> rows;

    std::size_t num_aps() const noexcept { return config.num_aps; }
    std::size_t beams_per_ap() const noexcept { return config.beams_per_ap; }
    std::size_t width() const noexcept { return config.total_beams(); }
};

// ---- Channel model ------------------------------------------------------

inline constexpr double kMinDistanceM = 1.0;
inline constexpr double kLobeFloorDb = 30.0;
inline constexpr double kSpeedOfLight = 299792458.0;

/// dB drop of a Gaussian lobe per (offset / 3dB-width)^2: 10*log10(e) * 4 ln 2.
inline const double kGaussianLobeDbPerUnit = 10.0 * std::numbers::log10e * 4.0 * std::numbers::ln2;

/// Wraps an angle to [-180, 180).
inline double wrap_degrees(double a)
{
    double w = std::fmod(a + 180.0, 360.0);
    if (w < 0.0) w += 360.0;
    return w - 180.0;
}

inline double bearing_degrees(const Point &from, const Point &to)
{
    return std::atan2(to.y - from.y, to.x - from.x) * 180.0 / std::numbers::pi;
}

inline double distance_m(const Point &a, const Point &b) { return std::hypot(a.x - b.x, a.y - b.y); }

/// Free-space path loss 20*log10(4*pi*d*f/c); d is clamped to 1 m.
inline double free_space_path_loss_db(double distance, double carrier_freq_ghz)
{
    const double d = std::max(distance, kMinDistanceM);
    return 20.0 * std::log10(4.0 * std::numbers::pi * d * carrier_freq_ghz * 1e9 / kSpeedOfLight);
}

/// Gaussian main lobe in dB relative to peak, floored at -30 dB.
inline double gaussian_lobe_db(double offset_deg, double beamwidth_deg)
{
    const double u = wrap_degrees(offset_deg) / beamwidth_deg;
    return -std::min(kGaussianLobeDbPerUnit * u * u, kLobeFloorDb);
}

inline double beam_boresight_deg(std::size_t beam, std::size_t beams_per_ap)
{
    return 360.0 * static_cast<double>(beam) / static_cast<double>(beams_per_ap);
}

inline double ap_beam_gain_db(const ScenarioConfig &cfg, double offset_deg)
{
    return cfg.beam_gain_db + gaussian_lobe_db(offset_deg, cfg.beamwidth_deg);
}

inline double ue_gain_db(const ScenarioConfig &cfg, double offset_deg)
{
    if (cfg.ue_antenna == UeAntenna::omni) return 0.0;
    return cfg.ue_antenna_gain_db + gaussian_lobe_db(offset_deg, cfg.ue_beamwidth_deg);
}

/// RSRP = TxPower - PL(d) + G_beam(dtheta) + G_ue(dphi) + shadow, clamped below at the noise floor.
inline double rsrp_of(const ScenarioConfig &cfg, const Point &ap_pos, const BeamIndex &beam, const UePose &ue,
                      double shadow_db)
{
    const double d = distance_m(ap_pos, ue.position);
    const double ap_to_ue = bearing_degrees(ap_pos, ue.position);
    const double ue_to_ap = bearing_degrees(ue.position, ap_pos);
    const double beam_offset = ap_to_ue - beam_boresight_deg(beam.beam, cfg.beams_per_ap);
    const double ue_offset = ue_to_ap - ue.azimuth_deg;
    const double v = cfg.tx_power_dbm - free_space_path_loss_db(d, cfg.carrier_freq_ghz) +
                     ap_beam_gain_db(cfg, beam_offset) + ue_gain_db(cfg, ue_offset) + shadow_db;
    return std::max(v, cfg.noise_floor_dbm);
}

/// Explicit positions if given, else an auto-grid: ceil(sqrt(M)) columns,
/// cells filled row-major, APs at cell centers.
inline std::vector<Point> resolve_ap_positions(const ScenarioConfig &cfg)
{
    if (!cfg.ap_positions.empty()) return cfg.ap_positions;
    const auto cols = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(cfg.num_aps))));
    const std::size_t rows = (cfg.num_aps + cols - 1) / cols;
    std::vector<Point> out;
    out.reserve(cfg.num_aps);
    for (std::size_t i = 0; i < cfg.num_aps; ++i) {
        const std::size_t r = i / cols, c = i % cols;
        out.push_back({cfg.area.x_min + cfg.area.width() * (static_cast<double>(c) + 0.5) / static_cast<double>(cols),
                       cfg.area.y_min + cfg.area.height() * (static_cast<double>(r) + 0.5) / static_cast<double>(rows)});
    }
    return out;
}

/// Lowest flat index among the maxima.
inline std::size_t argmax_index(std::span<const double> v)
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = i;
    return best;
}

/// Computes the full grid of one UE given its per-AP shadowing draws.
inline std::vector<double> rsrp_grid(const ScenarioConfig &cfg, std::span<const Point> aps, const UePose &ue,
                                     std::span<const double> shadow_per_ap)
{
    std::vector<double> grid(cfg.total_beams());
    for (std::size_t m = 0; m < cfg.num_aps; ++m)
        for (std::size_t b = 0; b < cfg.beams_per_ap; ++b)
            grid[m * cfg.beams_per_ap + b] = rsrp_of(cfg, aps[m], {m, b}, ue, shadow_per_ap[m]);
    return grid;
}

/// One row per UE, each drawn from its own stream derive_seed(seed, row).
/// Shadowing is drawn once per (UE, AP) link and shared by that AP's beams.
inline Dataset generate_scenario(const ScenarioConfig &cfg)
{
    cfg.validate();
    Dataset ds;
    ds.config = cfg;
    ds.ap_positions = resolve_ap_positions(cfg);
    ds.rows.resize(cfg.ue_count);
    parallel_for(cfg.ue_count, [&](std::size_t i) {
        Rng rng(derive_seed(cfg.seed, i));
        RsrpSample s;
        s.ue_id = i;
        s.pose.position.x = cfg.area.x_min + cfg.area.width() * uniform_unit(rng);
        s.pose.position.y = cfg.area.y_min + cfg.area.height() * uniform_unit(rng);
        s.pose.azimuth_deg = 360.0 * uniform_unit(rng);
        std::vector<double> shadow(cfg.num_aps);
        for (auto &v : shadow) v = cfg.shadowing_sigma_db * standard_normal(rng);
        s.grid = rsrp_grid(cfg, ds.ap_positions, s.pose, shadow);
        ds.rows[i] = std::move(s);
    });
    return ds;
}

} // namespace beaminfer

#endif
