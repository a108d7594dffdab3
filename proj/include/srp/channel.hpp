// SPDX-License-Identifier: Apache-2.0
//
// srpsim: subband-to-RB precoder upsampling simulator
// Copyright (C) 2026 The srpsim authors
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

#pragma once

#include "dsp.hpp"
#include "errors.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace srp::channel
{

// RMS delay-spread classes. Bounds are inclusive upward: 500 ns is medium, 1000 ns is high.
enum class DsCluster
{
    low,
    medium,
    high
};

enum class Scenario
{
    low,
    medium,
    high,
    mixed
};

inline constexpr double low_ds_bound = 500e-9;
inline constexpr double high_ds_bound = 1000e-9;

inline DsCluster classify_ds(double rms_ds)
{
    if (rms_ds < low_ds_bound)
        return DsCluster::low;
    if (rms_ds < high_ds_bound)
        return DsCluster::medium;
    return DsCluster::high;
}

inline std::string to_string(DsCluster c)
{
    switch (c)
    {
    case DsCluster::low: return "low";
    case DsCluster::medium: return "medium";
    case DsCluster::high: return "high";
    }
    return "?";
}

inline std::string to_string(Scenario s)
{
    switch (s)
    {
    case Scenario::low: return "low";
    case Scenario::medium: return "medium";
    case Scenario::high: return "high";
    case Scenario::mixed: return "mixed";
    }
    return "?";
}

inline Scenario scenario_from_string(const std::string &s)
{
    if (s == "low")
        return Scenario::low;
    if (s == "medium")
        return Scenario::medium;
    if (s == "high")
        return Scenario::high;
    if (s == "mixed")
        return Scenario::mixed;
    throw ConfigError("unknown DS scenario '" + s + "' (expected low|medium|high|mixed)");
}

inline DsCluster cluster_from_string(const std::string &s)
{
    if (s == "low")
        return DsCluster::low;
    if (s == "medium")
        return DsCluster::medium;
    if (s == "high")
        return DsCluster::high;
    throw ConfigError("unknown DS cluster '" + s + "'");
}

// Generator configuration. Defaults are desk scale; the UL carrier and UL grid are assumptions
// (UL uses the DL RB grid shifted to its own carrier, so UL and DL delay bins coincide).
struct SimConfig
{
    std::size_t n_ant = 16;
    std::size_t n_rb = 48;
    double rb_bandwidth = 20e6 / 96.0;
    double dl_carrier = 2.14e9;
    double ul_carrier = 1.95e9;
    std::size_t min_paths = 8;
    std::size_t max_paths = 20;
    Scenario scenario = Scenario::mixed;
    std::uint64_t seed = 1;
    // Relative significance threshold for multipath components in PDP metrics.
    double eta = 0.1;
    std::size_t max_retries = 1000;
    // Path delays are confined to this fraction of the unambiguous delay window n_rb * bin_width.
    double max_delay_fraction = 0.9;
    double angle_range_deg = 60.0;
    double shadowing_db = 3.0;

    double bin_width() const { return 1.0 / (static_cast<double>(n_rb) * rb_bandwidth); }
    double delay_window() const { return static_cast<double>(n_rb) * bin_width(); }

    void validate() const
    {
        if (n_ant < 2)
            throw ConfigError("n_ant must be >= 2");
        if (n_rb < 2)
            throw ConfigError("n_rb must be >= 2");
        if (!(rb_bandwidth > 0.0) || !(dl_carrier > 0.0) || !(ul_carrier > 0.0))
            throw ConfigError("rb_bandwidth and carriers must be positive");
        if (min_paths < 1 || max_paths < min_paths)
            throw ConfigError("n_paths_range must satisfy 1 <= min <= max");
        if (!(eta > 0.0 && eta < 1.0))
            throw ConfigError("eta must lie in (0, 1)");
        if (!(max_delay_fraction > 0.0 && max_delay_fraction <= 1.0))
            throw ConfigError("max_delay_fraction must lie in (0, 1]");
        if (max_retries == 0)
            throw ConfigError("max_retries must be positive");
    }
};

inline void to_json(nlohmann::json &j, const SimConfig &c)
{
    j = nlohmann::json{{"n_ant", c.n_ant},
                       {"n_rb", c.n_rb},
                       {"rb_bandwidth", c.rb_bandwidth},
                       {"dl_carrier", c.dl_carrier},
                       {"ul_carrier", c.ul_carrier},
                       {"n_paths_range", {c.min_paths, c.max_paths}},
                       {"ds_scenario", to_string(c.scenario)},
                       {"seed", c.seed},
                       {"eta", c.eta},
                       {"max_retries", c.max_retries},
                       {"max_delay_fraction", c.max_delay_fraction},
                       {"angle_range_deg", c.angle_range_deg},
                       {"shadowing_db", c.shadowing_db}};
}

inline void from_json(const nlohmann::json &j, SimConfig &c)
{
    SimConfig d;
    c.n_ant = j.value("n_ant", d.n_ant);
    c.n_rb = j.value("n_rb", d.n_rb);
    c.rb_bandwidth = j.value("rb_bandwidth", d.rb_bandwidth);
    c.dl_carrier = j.value("dl_carrier", d.dl_carrier);
    c.ul_carrier = j.value("ul_carrier", d.ul_carrier);
    if (j.contains("n_paths_range"))
    {
        const auto r = j.at("n_paths_range").get<std::vector<std::size_t>>();
        if (r.size() != 2)
            throw ConfigError("n_paths_range must be [min, max]");
        c.min_paths = r[0];
        c.max_paths = r[1];
    }
    else
    {
        c.min_paths = d.min_paths;
        c.max_paths = d.max_paths;
    }
    c.scenario = scenario_from_string(j.value("ds_scenario", to_string(d.scenario)));
    c.seed = j.value("seed", d.seed);
    c.eta = j.value("eta", d.eta);
    c.max_retries = j.value("max_retries", d.max_retries);
    c.max_delay_fraction = j.value("max_delay_fraction", d.max_delay_fraction);
    c.angle_range_deg = j.value("angle_range_deg", d.angle_range_deg);
    c.shadowing_db = j.value("shadowing_db", d.shadowing_db);
}

struct Path
{
    double delay = 0.0; // seconds
    double angle = 0.0; // radians from broadside
    cd dl_gain;
    cd ul_gain;
};

// Multipath set shared by UL and DL: delays and angles are common, complex gains independent.
struct PathSet
{
    std::vector<Path> paths; // sorted by ascending delay

    // Power-weighted RMS delay spread using DL gain powers.
    double rms_delay_spread() const
    {
        double p0 = 0.0, p1 = 0.0, p2 = 0.0;
        for (const auto &p : paths)
        {
            const double w = std::norm(p.dl_gain);
            p0 += w;
            p1 += w * p.delay;
            p2 += w * p.delay * p.delay;
        }
        if (!(p0 > 0.0))
            return 0.0;
        const double m = p1 / p0;
        return std::sqrt(std::max(p2 / p0 - m * m, 0.0));
    }
};

// Per-RB channels, row f holding h_f (RB f, N_a antennas).
struct ChannelPair
{
    CMat dl;
    CMat ul;
    PathSet paths;
    std::size_t ue = 0;
};

struct Pdp
{
    std::vector<double> p;  // power per delay bin
    double bin_width = 1.0; // seconds

    std::size_t size() const noexcept { return p.size(); }
    double total() const
    {
        double s = 0.0;
        for (double v : p)
            s += v;
        return s;
    }
};

struct PdpMetrics
{
    double max_excess_delay = 0.0;
    double mean_excess_delay = 0.0;
    double rms_ds = 0.0;
};

// Half-wavelength ULA response, unit-modulus entries.
inline CVec steering_vector(std::size_t n_ant, double angle)
{
    CVec a(static_cast<Eigen::Index>(n_ant));
    const double k = std::numbers::pi * std::sin(angle);
    for (std::size_t n = 0; n < n_ant; ++n)
        a(static_cast<Eigen::Index>(n)) = std::polar(1.0, k * static_cast<double>(n));
    return a;
}

// h_f = sum_p gain_p a(theta_p) exp(-j 2 pi f_f tau_p) with f_f the RB-f center frequency.
inline CMat synthesize(const PathSet &paths, std::size_t n_rb, std::size_t n_ant, double rb_bandwidth, double carrier,
                       bool use_dl_gain)
{
    CMat h = CMat::Zero(static_cast<Eigen::Index>(n_rb), static_cast<Eigen::Index>(n_ant));
    const double first_rb = -0.5 * static_cast<double>(n_rb) + 0.5;
    for (const auto &p : paths.paths)
    {
        const CVec a = steering_vector(n_ant, p.angle);
        const cd g = use_dl_gain ? p.dl_gain : p.ul_gain;
        // Carrier phase reduced modulo one cycle before adding the in-band part.
        const double carrier_cycles = std::fmod(carrier * p.delay, 1.0);
        for (std::size_t f = 0; f < n_rb; ++f)
        {
            const double cycles = carrier_cycles + (first_rb + static_cast<double>(f)) * rb_bandwidth * p.delay;
            const cd phase = std::polar(1.0, -2.0 * std::numbers::pi * cycles);
            h.row(static_cast<Eigen::Index>(f)) += (g * phase) * a.transpose();
        }
    }
    return h;
}

inline ChannelPair paths_to_csi(const PathSet &paths, const SimConfig &cfg)
{
    ChannelPair out;
    out.dl = synthesize(paths, cfg.n_rb, cfg.n_ant, cfg.rb_bandwidth, cfg.dl_carrier, true);
    out.ul = synthesize(paths, cfg.n_rb, cfg.n_ant, cfg.rb_bandwidth, cfg.ul_carrier, false);
    out.paths = paths;
    return out;
}

// Antenna-averaged power of the unitary frequency->delay transform of each antenna's RB track.
inline Pdp compute_pdp(const CMat &csi, double rb_bandwidth)
{
    const auto n_rb = static_cast<std::size_t>(csi.rows());
    Pdp pdp;
    pdp.bin_width = 1.0 / (static_cast<double>(n_rb) * rb_bandwidth);
    pdp.p.assign(n_rb, 0.0);
    if (csi.cols() == 0)
        return pdp;
    const CMat x = to_delay(csi);
    const double inv = 1.0 / static_cast<double>(csi.cols());
    for (std::size_t t = 0; t < n_rb; ++t)
        pdp.p[t] = x.row(static_cast<Eigen::Index>(t)).squaredNorm() * inv;
    return pdp;
}

inline PdpMetrics pdp_metrics(const Pdp &pdp, double eta)
{
    if (!(eta > 0.0 && eta < 1.0))
        throw ConfigError("pdp_metrics: eta must lie in (0, 1)");
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, peak = 0.0;
    for (std::size_t t = 0; t < pdp.p.size(); ++t)
    {
        const double v = pdp.p[t];
        const double td = static_cast<double>(t);
        s0 += v;
        s1 += td * v;
        s2 += td * td * v;
        peak = std::max(peak, v);
    }
    if (!(s0 > 0.0))
        throw NumericalError("pdp_metrics: zero-energy PDP");
    std::size_t first = pdp.p.size(), last = 0;
    for (std::size_t t = 0; t < pdp.p.size(); ++t)
        if (pdp.p[t] >= eta * peak)
        {
            first = std::min(first, t);
            last = t;
        }
    PdpMetrics m;
    m.max_excess_delay = static_cast<double>(last - first) * pdp.bin_width;
    const double mean = s1 / s0;
    m.mean_excess_delay = mean * pdp.bin_width;
    m.rms_ds = std::sqrt(std::max(s2 / s0 - mean * mean, 0.0)) * pdp.bin_width;
    return m;
}

// Independent generator for one UE derived from the dataset seed.
inline std::mt19937_64 ue_stream(std::uint64_t seed, std::uint64_t ue)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(ue), static_cast<std::uint32_t>(ue >> 32), 0x5eedu};
    return std::mt19937_64(seq);
}

struct SampledPaths
{
    PathSet paths;
    DsCluster target = DsCluster::low;
    std::size_t attempts = 0;
};

namespace detail
{

// Range of the mean excess delay (seconds) drawn per attempt for each target class.
inline std::array<double, 2> delay_scale_range(DsCluster c)
{
    switch (c)
    {
    case DsCluster::low: return {30e-9, 400e-9};
    case DsCluster::medium: return {300e-9, 1000e-9};
    case DsCluster::high: return {800e-9, 2500e-9};
    }
    return {30e-9, 400e-9};
}

} // namespace detail

// Draws a path set whose RMS delay spread (both path-power based and from the DL PDP) falls in
// the scenario's class. Rejection sampling with cfg.max_retries attempts.
inline SampledPaths sample_paths(const SimConfig &cfg, std::mt19937_64 &rng)
{
    cfg.validate();
    SampledPaths out;
    if (cfg.scenario == Scenario::mixed)
        out.target = static_cast<DsCluster>(std::uniform_int_distribution<int>(0, 2)(rng));
    else
        out.target = static_cast<DsCluster>(static_cast<int>(cfg.scenario));

    const auto scale = detail::delay_scale_range(out.target);
    const double max_delay = cfg.max_delay_fraction * cfg.delay_window();
    const double max_angle = cfg.angle_range_deg * std::numbers::pi / 180.0;
    std::uniform_int_distribution<std::size_t> n_dist(cfg.min_paths, cfg.max_paths);
    std::uniform_real_distribution<double> scale_dist(scale[0], scale[1]);
    std::uniform_real_distribution<double> angle_dist(-max_angle, max_angle);
    std::normal_distribution<double> normal(0.0, 1.0);

    for (std::size_t attempt = 1; attempt <= cfg.max_retries; ++attempt)
    {
        const std::size_t n = n_dist(rng);
        const double mu = scale_dist(rng);
        std::exponential_distribution<double> excess(1.0 / mu);
        PathSet ps;
        ps.paths.resize(n);
        for (std::size_t p = 0; p < n; ++p)
            ps.paths[p].delay = p == 0 ? 0.0 : std::min(excess(rng), max_delay);
        std::sort(ps.paths.begin(), ps.paths.end(), [](const Path &a, const Path &b) { return a.delay < b.delay; });
        for (auto &p : ps.paths)
        {
            const double shadow = std::pow(10.0, cfg.shadowing_db * normal(rng) / 10.0);
            const double power = std::exp(-p.delay / mu) * shadow;
            const double sd = std::sqrt(power / 2.0);
            p.angle = angle_dist(rng);
            const double a = normal(rng), b = normal(rng), c = normal(rng), d = normal(rng);
            p.dl_gain = cd(sd * a, sd * b);
            p.ul_gain = cd(sd * c, sd * d);
        }
        if (classify_ds(ps.rms_delay_spread()) != out.target)
            continue;
        const CMat dl = synthesize(ps, cfg.n_rb, cfg.n_ant, cfg.rb_bandwidth, cfg.dl_carrier, true);
        const Pdp pdp = compute_pdp(dl, cfg.rb_bandwidth);
        if (!(pdp.total() > 0.0) || classify_ds(pdp_metrics(pdp, cfg.eta).rms_ds) != out.target)
            continue;
        out.paths = std::move(ps);
        out.attempts = attempt;
        return out;
    }
    throw ConfigError("scenario unreachable with current n_paths_range (" + to_string(out.target) + " DS after " +
                      std::to_string(cfg.max_retries) + " attempts)");
}

} // namespace srp::channel
