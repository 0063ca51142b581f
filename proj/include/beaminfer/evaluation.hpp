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

#ifndef BEAMINFER_EVALUATION_HPP
#define BEAMINFER_EVALUATION_HPP

#include "beaminfer/common.hpp"
#include "beaminfer/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

namespace beaminfer {

// ---- Metrics ------------------------------------------------------------

/// 1-Wasserstein distance between two empirical distributions (raw dB).
inline double wasserstein1(std::vector<double> a, std::vector<double> b)
{
    if (a.empty() || b.empty()) throw ArgumentError("wasserstein1: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    if (a.size() == b.size()) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
        return s / static_cast<double>(a.size());
    }
    // Integral of |F_a - F_b| between consecutive merged support points.
    const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
    std::size_t ia = 0, ib = 0;
    double x = std::min(a.front(), b.front()), total = 0.0;
    while (ia < a.size() || ib < b.size()) {
        const double next = ib >= b.size() || (ia < a.size() && a[ia] <= b[ib]) ? a[ia] : b[ib];
        total += std::abs(static_cast<double>(ia) / na - static_cast<double>(ib) / nb) * (next - x);
        x = next;
        while (ia < a.size() && a[ia] == x) ++ia;
        while (ib < b.size() && b[ib] == x) ++ib;
    }
    return total;
}

/// Right-continuous empirical CDF as (value, F) steps; duplicates collapse.
inline std::vector<std::pair<double, double>> cdf_points(std::vector<double> samples)
{
    if (samples.empty()) throw ArgumentError("cdf_points: empty sample");
    std::sort(samples.begin(), samples.end());
    const double n = static_cast<double>(samples.size());
    std::vector<std::pair<double, double>> out;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (i + 1 < samples.size() && samples[i + 1] == samples[i]) continue;
        out.emplace_back(samples[i], static_cast<double>(i + 1) / n);
    }
    return out;
}

/// W1 from two step CDFs given as (value, F) points.
inline double w1_from_cdf_points(const std::vector<std::pair<double, double>> &a,
                                 const std::vector<std::pair<double, double>> &b)
{
    if (a.empty() || b.empty()) throw ArgumentError("w1_from_cdf_points: empty CDF");
    std::size_t ia = 0, ib = 0;
    double fa = 0.0, fb = 0.0, x = std::min(a.front().first, b.front().first), total = 0.0;
    while (ia < a.size() || ib < b.size()) {
        const double next = ib >= b.size() || (ia < a.size() && a[ia].first <= b[ib].first) ? a[ia].first : b[ib].first;
        total += std::abs(fa - fb) * (next - x);
        x = next;
        if (ia < a.size() && a[ia].first == x) fa = a[ia++].second;
        if (ib < b.size() && b[ib].first == x) fb = b[ib++].second;
    }
    return total;
}

/// Nearest-rank percentile: the ceil(q/100 * n)-th order statistic.
inline double nearest_rank(const std::vector<double> &sorted, int q)
{
    if (sorted.empty()) throw ArgumentError("nearest_rank: empty sample");
    if (q <= 0 || q > 100) throw ArgumentError("percentile must be in (0, 100]");
    const std::size_t n = sorted.size();
    const std::size_t rank = std::max<std::size_t>(1, (static_cast<std::size_t>(q) * n + 99) / 100);
    return sorted[rank - 1];
}

inline std::map<int, double> gap_percentiles(const std::vector<SearchOutcome> &outcomes,
                                             const std::vector<int> &percentiles = {50, 90, 95, 99})
{
    if (outcomes.empty()) throw ArgumentError("gap_percentiles: no outcomes");
    std::vector<double> gaps;
    gaps.reserve(outcomes.size());
    for (const auto &o : outcomes) gaps.push_back(o.gap);
    std::sort(gaps.begin(), gaps.end());
    std::map<int, double> out;
    for (int q : percentiles) out[q] = nearest_rank(gaps, q);
    return out;
}

// ---- Report -------------------------------------------------------------

inline const std::vector<int> kReportPercentiles{50, 90, 95, 99};

struct EvalCell {
    ModelKind model{};
    double p = 0.0;
    std::size_t k = 0;
    double w1 = 0.0;
    double mean_gap = 0.0;
    std::map<int, double> gap_percentiles;
    std::vector<double> true_best;  // sorted
    std::vector<double> achieved;   // sorted
    std::size_t n = 0;
    std::size_t truncated = 0;
};

struct EvalReport {
    std::vector<ModelKind> models;
    std::vector<double> ps;
    std::vector<std::size_t> ks;
    std::vector<EvalCell> cells;  // ordered by (model, p, k)

    const EvalCell &cell(ModelKind m, double p, std::size_t k) const
    {
        for (const auto &c : cells)
            if (c.model == m && c.p == p && c.k == k) return c;
        throw ReportError(std::string("no report cell for model=") + to_string(m) + " p=" + format_label(p) +
                          " k=" + std::to_string(k));
    }
};

inline EvalReport build_report(const std::vector<SearchOutcome> &outcomes, const std::vector<ModelKind> &models,
                               const std::vector<double> &ps, const std::vector<std::size_t> &ks)
{
    EvalReport rep{models, ps, ks, {}};
    std::map<std::tuple<int, double, std::size_t>, std::vector<const SearchOutcome *>> groups;
    for (const auto &o : outcomes) groups[{static_cast<int>(o.model), o.p, o.k}].push_back(&o);
    rep.cells.resize(models.size() * ps.size() * ks.size());
    std::size_t idx = 0;
    for (auto m : models)
        for (double p : ps)
            for (std::size_t k : ks) {
                auto it = groups.find({static_cast<int>(m), p, k});
                if (it == groups.end())
                    throw ReportError(std::string("missing factorial cell: model=") + to_string(m) +
                                      " p=" + format_label(p) + " k=" + std::to_string(k));
                EvalCell &c = rep.cells[idx++];
                c.model = m;
                c.p = p;
                c.k = k;
                std::vector<double> gaps;
                for (const auto *o : it->second) {
                    c.true_best.push_back(o->true_best_rsrp);
                    c.achieved.push_back(o->achieved_rsrp);
                    gaps.push_back(o->gap);
                    c.mean_gap += o->gap;
                    c.truncated += o->truncated ? 1 : 0;
                }
                c.n = gaps.size();
                c.mean_gap /= static_cast<double>(c.n);
                std::sort(c.true_best.begin(), c.true_best.end());
                std::sort(c.achieved.begin(), c.achieved.end());
                std::sort(gaps.begin(), gaps.end());
                c.w1 = wasserstein1(c.true_best, c.achieved);
                for (int q : kReportPercentiles) c.gap_percentiles[q] = nearest_rank(gaps, q);
            }
    return rep;
}

namespace detail {

inline std::string fixed(double v, int digits)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

inline std::string xml_escape(const std::string &s)
{
    std::string out;
    for (char ch : s) {
        switch (ch) {
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '&': out += "&amp;"; break;
        default: out += ch;
        }
    }
    return out;
}

struct Series {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> points;
};

// Step-CDF overlay with axes, ticks and a legend.
inline std::string render_cdf_svg(const std::string &title, const std::vector<Series> &series)
{
    constexpr double W = 720, H = 480, L = 70, R = 170, T = 40, B = 55;
    double lo = series.front().points.front().first, hi = lo;
    for (const auto &s : series)
        for (const auto &[v, f] : s.points) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    lo = std::floor(lo / 10.0) * 10.0;
    hi = std::ceil(hi / 10.0) * 10.0;
    if (hi <= lo) hi = lo + 10.0;
    const double pw = W - L - R, ph = H - T - B;
    auto sx = [&](double v) { return L + (v - lo) / (hi - lo) * pw; };
    auto sy = [&](double f) { return T + (1.0 - f) * ph; };

    std::string s;
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + fixed(W, 0) + "\" height=\"" + fixed(H, 0) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + fixed(L + pw / 2, 1) + "\" y=\"24\" text-anchor=\"middle\" font-size=\"14\">" + xml_escape(title) +
         "</text>\n";
    s += "<rect x=\"" + fixed(L, 1) + "\" y=\"" + fixed(T, 1) + "\" width=\"" + fixed(pw, 1) + "\" height=\"" +
         fixed(ph, 1) + "\" fill=\"none\" stroke=\"black\"/>\n";
    const double span = hi - lo;
    const double step = span <= 50 ? 5.0 : span <= 100 ? 10.0 : 20.0;
    for (double v = lo; v <= hi + 1e-9; v += step) {
        s += "<line x1=\"" + fixed(sx(v), 1) + "\" y1=\"" + fixed(T + ph, 1) + "\" x2=\"" + fixed(sx(v), 1) + "\" y2=\"" +
             fixed(T + ph + 5, 1) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + fixed(sx(v), 1) + "\" y=\"" + fixed(T + ph + 18, 1) + "\" text-anchor=\"middle\">" +
             fixed(v, 0) + "</text>\n";
    }
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        s += "<line x1=\"" + fixed(L - 5, 1) + "\" y1=\"" + fixed(sy(f), 1) + "\" x2=\"" + fixed(L, 1) + "\" y2=\"" +
             fixed(sy(f), 1) + "\" stroke=\"black\"/>\n";
        s += "<text x=\"" + fixed(L - 8, 1) + "\" y=\"" + fixed(sy(f) + 4, 1) + "\" text-anchor=\"end\">" + fixed(f, 1) +
             "</text>\n";
    }
    s += "<text x=\"" + fixed(L + pw / 2, 1) + "\" y=\"" + fixed(H - 12, 1) +
         "\" text-anchor=\"middle\">L1-RSRP (dBm)</text>\n";
    s += "<text x=\"18\" y=\"" + fixed(T + ph / 2, 1) + "\" text-anchor=\"middle\" transform=\"rotate(-90 18 " +
         fixed(T + ph / 2, 1) + ")\">CDF</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto &ser = series[i];
        std::string pts = fixed(sx(lo), 2) + "," + fixed(sy(0.0), 2);
        double prev_f = 0.0;
        for (const auto &[v, f] : ser.points) {
            pts += " " + fixed(sx(v), 2) + "," + fixed(sy(prev_f), 2);
            pts += " " + fixed(sx(v), 2) + "," + fixed(sy(f), 2);
            prev_f = f;
        }
        pts += " " + fixed(sx(hi), 2) + "," + fixed(sy(prev_f), 2);
        s += "<polyline fill=\"none\" stroke=\"" + ser.color + "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
        const double ly = T + 14 + 18 * static_cast<double>(i);
        s += "<line x1=\"" + fixed(W - R + 12, 1) + "\" y1=\"" + fixed(ly, 1) + "\" x2=\"" + fixed(W - R + 36, 1) +
             "\" y2=\"" + fixed(ly, 1) + "\" stroke=\"" + ser.color + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + fixed(W - R + 42, 1) + "\" y=\"" + fixed(ly + 4, 1) + "\">" + xml_escape(ser.label) +
             "</text>\n";
    }
    s += "</svg>\n";
    return s;
}

inline const char *series_color(std::size_t i)
{
    static const char *palette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
    return palette[i % std::size(palette)];
}

inline void write_text(const std::filesystem::path &path, const std::string &text)
{
    auto os = open_output(path.string());
    os << text;
    if (!os) throw IoError("write failed: " + path.string());
}

} // namespace detail

inline std::string cdf_file_stem(ModelKind m, double p) { return std::string("cdf_") + to_string(m) + "_" + format_label(p); }

/// Writes w1.csv, w1_table_p<p>.csv, percentiles.csv and one CDF CSV/SVG
/// pair per (model, p) into dir.
inline void write_report(const EvalReport &rep, const std::string &dir)
{
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create report directory " + dir + ": " + ec.message());
    const fs::path root(dir);

    std::string w1 = "model,p,k,w1_db,n\n";
    std::string pct = "model,p,k,n,mean_gap_db";
    for (int q : kReportPercentiles) pct += ",p" + std::to_string(q) + "_db";
    pct += ",truncated\n";
    for (const auto &c : rep.cells) {
        w1 += std::string(to_string(c.model)) + "," + format_label(c.p) + "," + std::to_string(c.k) + "," +
              format_double(c.w1) + "," + std::to_string(c.n) + "\n";
        pct += std::string(to_string(c.model)) + "," + format_label(c.p) + "," + std::to_string(c.k) + "," +
               std::to_string(c.n) + "," + format_double(c.mean_gap);
        for (int q : kReportPercentiles) pct += "," + format_double(c.gap_percentiles.at(q));
        pct += "," + std::to_string(c.truncated) + "\n";
    }
    detail::write_text(root / "w1.csv", w1);
    detail::write_text(root / "percentiles.csv", pct);

    // One Table-1 shaped table per p: rows k, columns models.
    for (double p : rep.ps) {
        std::string t = "k";
        for (auto m : rep.models) t += std::string(",") + to_string(m);
        t += "\n";
        for (std::size_t k : rep.ks) {
            t += std::to_string(k);
            for (auto m : rep.models) t += "," + detail::fixed(rep.cell(m, p, k).w1, 2);
            t += "\n";
        }
        detail::write_text(root / ("w1_table_p" + format_label(p) + ".csv"), t);
    }

    for (auto m : rep.models)
        for (double p : rep.ps) {
            const auto &first = rep.cell(m, p, rep.ks.front());
            std::vector<detail::Series> series;
            series.push_back({"true best", "black", cdf_points(first.true_best)});
            for (std::size_t i = 0; i < rep.ks.size(); ++i) {
                const auto &c = rep.cell(m, p, rep.ks[i]);
                series.push_back({"top-" + std::to_string(c.k), detail::series_color(i), cdf_points(c.achieved)});
            }
            std::string csv = "series,value,cdf\n";
            for (std::size_t i = 0; i < series.size(); ++i) {
                const std::string name = i == 0 ? "true_best" : "k" + std::to_string(rep.ks[i - 1]);
                for (const auto &[v, f] : series[i].points) csv += name + "," + format_double(v) + "," + format_double(f) + "\n";
            }
            const std::string stem = cdf_file_stem(m, p);
            detail::write_text(root / (stem + ".csv"), csv);
            detail::write_text(root / (stem + ".svg"),
                               detail::render_cdf_svg(std::string(to_string(m)) + ", p = " + format_label(p), series));
        }
}

/// Reads a CDF CSV back as series name -> (value, F) points.
inline std::map<std::string, std::vector<std::pair<double, double>>> read_cdf_csv(const std::string &path)
{
    auto is = open_input(path);
    std::string line;
    if (!std::getline(is, line) || line != "series,value,cdf") throw IoError("not a CDF table: " + path);
    std::map<std::string, std::vector<std::pair<double, double>>> out;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto c = split_csv_line(line);
        if (c.size() != 3) throw IoError("malformed CDF row in " + path);
        out[c[0]].emplace_back(parse_double(c[1]), parse_double(c[2]));
    }
    return out;
}

} // namespace beaminfer

#endif
