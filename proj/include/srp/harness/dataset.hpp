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

#include "../channel.hpp"
#include "../dsp.hpp"
#include "../errors.hpp"

#include <json.hpp>

#include <array>
#include <bit>
#include <cstring>
#include <exception>
#include <filesystem>
#include <fstream>
#include <string>
#include <thread>
#include <vector>

namespace srp::harness
{

inline constexpr const char *dataset_format = "srp.dataset";
inline constexpr int dataset_version = 1;

// Independent DL/UL channel draws. CSI is held at float32 precision so that the in-memory
// dataset equals its on-disk form.
struct Dataset
{
    channel::SimConfig config;
    std::vector<CMat> dl; // N_RB x N_a each
    std::vector<CMat> ul;
    std::vector<double> rms_ds; // DL PDP RMS delay spread, seconds
    std::vector<channel::DsCluster> cluster;

    std::size_t size() const noexcept { return dl.size(); }
    channel::Pdp ul_pdp(std::size_t ue) const { return channel::compute_pdp(ul[ue], config.rb_bandwidth); }
    channel::Pdp dl_pdp(std::size_t ue) const { return channel::compute_pdp(dl[ue], config.rb_bandwidth); }
};

// Runs fn(i) for i in [0, count) on up to `threads` workers. Results must be written to
// per-index slots; the first exception (lowest worker) is rethrown.
template <class Fn> void parallel_for(std::size_t count, std::size_t threads, Fn &&fn)
{
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < threads; ++w)
            pool.emplace_back([&, w] {
                try
                {
                    for (std::size_t i = w; i < count; i += threads)
                        fn(i);
                }
                catch (...)
                {
                    errors[w] = std::current_exception();
                }
            });
    }
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

inline double dl_rms_ds(const CMat &dl, const channel::SimConfig &cfg)
{
    return channel::pdp_metrics(channel::compute_pdp(dl, cfg.rb_bandwidth), cfg.eta).rms_ds;
}

// Each UE draws from its own seeded stream, so the result does not depend on `threads`.
// A draw is repeated until the label of the stored (float32) DL channel matches the class the
// path sampler aimed for.
inline Dataset generate_dataset(const channel::SimConfig &cfg, std::size_t n_ue, std::size_t threads = 1)
{
    cfg.validate();
    if (n_ue == 0)
        throw ConfigError("generate_dataset: n_ue must be positive");
    Dataset ds;
    ds.config = cfg;
    ds.dl.resize(n_ue);
    ds.ul.resize(n_ue);
    ds.rms_ds.resize(n_ue);
    ds.cluster.resize(n_ue);
    parallel_for(n_ue, threads, [&](std::size_t ue) {
        auto rng = channel::ue_stream(cfg.seed, ue);
        for (std::size_t attempt = 0; attempt < cfg.max_retries; ++attempt)
        {
            const auto drawn = channel::sample_paths(cfg, rng);
            const auto pair = channel::paths_to_csi(drawn.paths, cfg);
            CMat dl = round_to_f32(pair.dl);
            const double rms = dl_rms_ds(dl, cfg);
            if (channel::classify_ds(rms) != drawn.target)
                continue;
            ds.dl[ue] = std::move(dl);
            ds.ul[ue] = round_to_f32(pair.ul);
            ds.rms_ds[ue] = rms;
            ds.cluster[ue] = drawn.target;
            return;
        }
        throw ConfigError("generate_dataset: UE " + std::to_string(ue) + " could not be drawn in its DS class");
    });
    return ds;
}

inline std::array<std::size_t, 3> cluster_counts(const std::vector<channel::DsCluster> &labels)
{
    std::array<std::size_t, 3> c{0, 0, 0};
    for (auto l : labels)
        ++c[static_cast<std::size_t>(l)];
    return c;
}

// Labels by DL RMS delay spread.
inline std::vector<channel::DsCluster> cluster_by_ds(const Dataset &ds)
{
    std::vector<channel::DsCluster> out;
    out.reserve(ds.size());
    for (double r : ds.rms_ds)
        out.push_back(channel::classify_ds(r));
    return out;
}

namespace detail
{

inline void write_c64(const std::filesystem::path &path, const std::vector<CMat> &mats)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot open " + path.string() + " for writing");
    std::vector<char> buf;
    for (const auto &m : mats)
    {
        buf.resize(static_cast<std::size_t>(m.size()) * 8);
        std::size_t k = 0;
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                for (float v : {static_cast<float>(m(r, c).real()), static_cast<float>(m(r, c).imag())})
                {
                    auto bits = std::bit_cast<std::uint32_t>(v);
                    for (int b = 0; b < 4; ++b)
                        buf[k++] = static_cast<char>((bits >> (8 * b)) & 0xffu);
                }
        f.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    }
    if (!f)
        throw DataError("write failed: " + path.string());
}

inline std::vector<CMat> read_c64(const std::filesystem::path &path, std::size_t n_ue, std::size_t n_rb,
                                  std::size_t n_ant)
{
    std::ifstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot open " + path.string());
    const std::size_t per = n_rb * n_ant * 8;
    f.seekg(0, std::ios::end);
    const auto bytes = static_cast<std::size_t>(f.tellg());
    if (bytes != per * n_ue)
        throw DataError(path.string() + ": expected " + std::to_string(per * n_ue) + " bytes, found " +
                        std::to_string(bytes));
    f.seekg(0);
    std::vector<CMat> out(n_ue);
    std::vector<unsigned char> buf(per);
    for (auto &m : out)
    {
        f.read(reinterpret_cast<char *>(buf.data()), static_cast<std::streamsize>(per));
        if (!f)
            throw DataError("read failed: " + path.string());
        m.resize(static_cast<Eigen::Index>(n_rb), static_cast<Eigen::Index>(n_ant));
        std::size_t k = 0;
        auto next = [&] {
            std::uint32_t bits = 0;
            for (int b = 0; b < 4; ++b)
                bits |= static_cast<std::uint32_t>(buf[k++]) << (8 * b);
            return static_cast<double>(std::bit_cast<float>(bits));
        };
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
            {
                const double re = next();
                const double im = next();
                m(r, c) = cd(re, im);
            }
        if (!m.allFinite())
            throw DataError(path.string() + ": non-finite CSI value");
    }
    return out;
}

} // namespace detail

inline void save_dataset(const std::filesystem::path &dir, const Dataset &ds)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw DataError("cannot create dataset directory " + dir.string() + ": " + ec.message());
    const auto counts = cluster_counts(ds.cluster);
    nlohmann::json labels = nlohmann::json::array();
    for (auto c : ds.cluster)
        labels.push_back(channel::to_string(c));
    nlohmann::json meta{{"format", dataset_format},
                        {"version", dataset_version},
                        {"config", ds.config},
                        {"seed", ds.config.seed},
                        {"n_ue", ds.size()},
                        {"layout", "[ue][rb][ant] complex float32 little-endian interleaved (re, im)"},
                        {"files", {{"dl", "dl.c64"}, {"ul", "ul.c64"}}},
                        {"ds_histogram", {{"low", counts[0]}, {"medium", counts[1]}, {"high", counts[2]}}},
                        {"labels", labels}};
    std::ofstream f(dir / "meta.json");
    if (!f)
        throw DataError("cannot write " + (dir / "meta.json").string());
    f << meta.dump(2) << '\n';
    detail::write_c64(dir / "dl.c64", ds.dl);
    detail::write_c64(dir / "ul.c64", ds.ul);
}

inline Dataset load_dataset(const std::filesystem::path &dir)
{
    std::ifstream f(dir / "meta.json");
    if (!f)
        throw DataError("cannot open " + (dir / "meta.json").string());
    nlohmann::json meta;
    try
    {
        f >> meta;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw DataError((dir / "meta.json").string() + ": " + e.what());
    }
    if (meta.value("format", "") != dataset_format || meta.value("version", 0) != dataset_version)
        throw DataError((dir / "meta.json").string() + ": not a version-1 srp dataset");
    Dataset ds;
    try
    {
        ds.config = meta.at("config").get<channel::SimConfig>();
    }
    catch (const nlohmann::json::exception &e)
    {
        throw DataError((dir / "meta.json").string() + ": bad config: " + e.what());
    }
    const auto n_ue = meta.at("n_ue").get<std::size_t>();
    ds.dl = detail::read_c64(dir / "dl.c64", n_ue, ds.config.n_rb, ds.config.n_ant);
    ds.ul = detail::read_c64(dir / "ul.c64", n_ue, ds.config.n_rb, ds.config.n_ant);
    for (const auto &m : ds.dl)
    {
        ds.rms_ds.push_back(dl_rms_ds(m, ds.config));
        ds.cluster.push_back(channel::classify_ds(ds.rms_ds.back()));
    }
    return ds;
}

// Contiguous 8:1:1 train/validation/test split.
struct Split
{
    std::vector<std::size_t> train, val, test;
};

inline Split split_811(std::size_t n)
{
    if (n < 3)
        throw ConfigError("dataset too small to split 8:1:1 (need at least 3 channels)");
    std::size_t n_val = std::max<std::size_t>(1, n / 10);
    std::size_t n_test = std::max<std::size_t>(1, n / 10);
    const std::size_t n_train = n - n_val - n_test;
    Split s;
    for (std::size_t i = 0; i < n; ++i)
        (i < n_train ? s.train : i < n_train + n_val ? s.val : s.test).push_back(i);
    return s;
}

} // namespace srp::harness
