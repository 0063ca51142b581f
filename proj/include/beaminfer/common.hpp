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

#ifndef BEAMINFER_COMMON_HPP
#define BEAMINFER_COMMON_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <exception>
#include <fstream>
#include <limits>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <type_traits>
#include <vector>

namespace beaminfer {

// ---- Errors -------------------------------------------------------------
// Each error class carries the process exit code the CLI reports for it.

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 1; }
};

class ConfigError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class ArgumentError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class StateError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 3; }
};

class IoError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 4; }
};

class ImputationError : public Error { using Error::Error; };
class SplitError : public Error { using Error::Error; };
class LossError : public Error { using Error::Error; };
class ReportError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };

// ---- Missing values -----------------------------------------------------

/// In-memory marker for an unobserved measurement. No legal dB value is NaN.
inline constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

inline bool is_missing(double v) noexcept { return std::isnan(v); }

/// 1 = masked (unobserved), 0 = observed.
using Mask = std::vector<std::uint8_t>;

// ---- Seeds --------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of indices.
template <typename... Ts>
std::uint64_t derive_seed(std::uint64_t base, Ts... idx) noexcept
{
    std::uint64_t s = splitmix64(base);
    ((s = splitmix64(s ^ static_cast<std::uint64_t>(idx))), ...);
    return s;
}

using Rng = std::mt19937_64;

inline std::size_t uniform_index(Rng &rng, std::size_t lo, std::size_t hi)
{
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline double uniform_unit(Rng &rng)
{
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double standard_normal(Rng &rng)
{
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

/// Draws `count` distinct indices from [0, n) uniformly (partial Fisher-Yates), in draw order.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t count, Rng &rng)
{
    if (count > n) throw ArgumentError("sample_without_replacement: count exceeds population");
    std::vector<std::size_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = i;
    for (std::size_t i = 0; i < count; ++i)
        std::swap(pool[i], pool[uniform_index(rng, i, n - 1)]);
    pool.resize(count);
    return pool;
}

// ---- Matrix -------------------------------------------------------------

/// Dense column-major matrix of doubles. Columns are the features of the
/// tabular learners, so per-column access is contiguous.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double &operator()(std::size_t r, std::size_t c) noexcept { return data_[c * rows_ + r]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return data_[c * rows_ + r]; }

    std::span<double> col(std::size_t c) noexcept { return {data_.data() + c * rows_, rows_}; }
    std::span<const double> col(std::size_t c) const noexcept { return {data_.data() + c * rows_, rows_}; }

    std::vector<double> row(std::size_t r) const
    {
        std::vector<double> out(cols_);
        for (std::size_t c = 0; c < cols_; ++c) out[c] = (*this)(r, c);
        return out;
    }

    void set_row(std::size_t r, std::span<const double> values)
    {
        if (values.size() != cols_) throw ArgumentError("Matrix::set_row: width mismatch");
        for (std::size_t c = 0; c < cols_; ++c) (*this)(r, c) = values[c];
    }

    const std::vector<double> &data() const noexcept { return data_; }

    friend bool operator==(const Matrix &a, const Matrix &b)
    {
        if (a.rows_ != b.rows_ || a.cols_ != b.cols_) return false;
        // bitwise, so NaN markers compare equal to themselves
        return std::memcmp(a.data_.data(), b.data_.data(), a.data_.size() * sizeof(double)) == 0;
    }

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

// ---- Threads ------------------------------------------------------------

/// Worker thread cap: BEAMINFER_THREADS if set, else the hardware concurrency.
inline std::size_t worker_threads()
{
    if (const char *env = std::getenv("BEAMINFER_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<std::size_t>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

namespace detail {
inline bool &in_parallel_region() noexcept
{
    thread_local bool flag = false;
    return flag;
}
} // namespace detail

/// Runs fn(i) for i in [0, n). Each index writes only its own output slot, so
/// results do not depend on the schedule. Nested calls run serially.
template <typename Fn>
void parallel_for(std::size_t n, Fn &&fn)
{
    const std::size_t threads = detail::in_parallel_region() ? 1 : std::min(worker_threads(), n);
    if (threads <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    pool.reserve(threads);
    for (std::size_t t = 0; t < threads; ++t) {
        pool.emplace_back([&, t] {
            detail::in_parallel_region() = true;
            try {
                for (std::size_t i = t; i < n; i += threads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto &th : pool) th.join();
    for (auto &e : errors)
        if (e) std::rethrow_exception(e);
}

// ---- Text helpers -------------------------------------------------------

/// Shortest-safe decimal form that parses back to the identical double.
inline std::string format_double(double v)
{
    if (is_missing(v)) return {};
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Compact form for labels and file names (0.95 -> "0.95").
inline std::string format_label(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%g", v);
    return buf;
}

inline double parse_double(const std::string &s)
{
    if (s.empty()) return kMissing;
    char *end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0') throw IoError("cannot parse number '" + s + "'");
    return v;
}

inline std::vector<std::string> split_csv_line(const std::string &line)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

// ---- Binary checkpoint streams -----------------------------------------

class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream &os) : os_(os) {}

    template <typename T>
    void put(const T &v)
    {
        static_assert(std::is_trivially_copyable_v<T>);
        os_.write(reinterpret_cast<const char *>(&v), sizeof(T));
    }

    void put_doubles(std::span<const double> v)
    {
        put<std::uint64_t>(v.size());
        os_.write(reinterpret_cast<const char *>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    }

    void put_string(const std::string &s)
    {
        put<std::uint64_t>(s.size());
        os_.write(s.data(), static_cast<std::streamsize>(s.size()));
    }

private:
    std::ostream &os_;
};

class BinaryReader {
public:
    explicit BinaryReader(std::istream &is) : is_(is) {}

    template <typename T>
    T get()
    {
        static_assert(std::is_trivially_copyable_v<T>);
        T v{};
        is_.read(reinterpret_cast<char *>(&v), sizeof(T));
        if (!is_) throw IoError("checkpoint truncated");
        return v;
    }

    std::vector<double> get_doubles()
    {
        const auto n = get<std::uint64_t>();
        if (n > (std::uint64_t{1} << 34)) throw IoError("checkpoint corrupt: array too large");
        std::vector<double> v(static_cast<std::size_t>(n));
        is_.read(reinterpret_cast<char *>(v.data()), static_cast<std::streamsize>(n * sizeof(double)));
        if (!is_) throw IoError("checkpoint truncated");
        return v;
    }

    std::string get_string()
    {
        const auto n = get<std::uint64_t>();
        if (n > (1u << 20)) throw IoError("checkpoint corrupt: string too large");
        std::string s(static_cast<std::size_t>(n), '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        if (!is_) throw IoError("checkpoint truncated");
        return s;
    }

    void expect_magic(std::uint32_t magic, std::uint32_t version, const char *what)
    {
        if (get<std::uint32_t>() != magic) throw IoError(std::string(what) + ": bad magic");
        const auto v = get<std::uint32_t>();
        if (v != version) throw IoError(std::string(what) + ": unsupported version " + std::to_string(v));
    }

private:
    std::istream &is_;
};

inline std::ofstream open_output(const std::string &path, bool binary = false)
{
    std::ofstream os(path, binary ? std::ios::binary : std::ios::out);
    if (!os) throw IoError("cannot open for writing: " + path);
    return os;
}

inline std::ifstream open_input(const std::string &path, bool binary = false)
{
    std::ifstream is(path, binary ? std::ios::binary : std::ios::in);
    if (!is) throw IoError("cannot open for reading: " + path);
    return is;
}

} // namespace beaminfer

#endif
