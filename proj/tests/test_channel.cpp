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

#include "srp/channel.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

using namespace srp;
using namespace srp::channel;
using Catch::Approx;

namespace
{

SimConfig small_config()
{
    SimConfig c;
    c.n_ant = 8;
    c.n_rb = 32;
    return c;
}

PathSet single_path(double delay, double angle = 0.3)
{
    PathSet ps;
    ps.paths.push_back({delay, angle, cd(0.8, -0.6), cd(-0.2, 0.9)});
    return ps;
}

} // namespace

TEST_CASE("low scenario draws stay below 500 ns", "[channel]")
{
    SimConfig cfg;
    cfg.scenario = Scenario::low;
    for (std::uint64_t ue = 0; ue < 50; ++ue)
    {
        auto rng = ue_stream(9, ue);
        const auto s = sample_paths(cfg, rng);
        CHECK(s.paths.rms_delay_spread() < 500e-9);
        const auto pdp = compute_pdp(paths_to_csi(s.paths, cfg).dl, cfg.rb_bandwidth);
        CHECK(pdp_metrics(pdp, cfg.eta).rms_ds < 500e-9);
    }
}

TEST_CASE("each scenario lands in its delay-spread class", "[channel]")
{
    for (auto sc : {Scenario::low, Scenario::medium, Scenario::high})
    {
        SimConfig cfg;
        cfg.scenario = sc;
        auto rng = ue_stream(4, 1);
        const auto s = sample_paths(cfg, rng);
        CHECK(static_cast<int>(s.target) == static_cast<int>(sc));
        CHECK(classify_ds(s.paths.rms_delay_spread()) == s.target);
    }
}

TEST_CASE("a single path has zero delay spread", "[channel]")
{
    SimConfig cfg;
    cfg.min_paths = cfg.max_paths = 1;
    cfg.scenario = Scenario::low;
    auto rng = ue_stream(1, 0);
    const auto s = sample_paths(cfg, rng);
    REQUIRE(s.paths.paths.size() == 1);
    REQUIRE(s.paths.rms_delay_spread() == 0.0);
}

TEST_CASE("unreachable scenario reports the path-count range", "[channel]")
{
    SimConfig cfg;
    cfg.min_paths = cfg.max_paths = 1;
    cfg.scenario = Scenario::high;
    cfg.max_retries = 20;
    auto rng = ue_stream(1, 0);
    try
    {
        sample_paths(cfg, rng);
        FAIL("expected ConfigError");
    }
    catch (const ConfigError &e)
    {
        REQUIRE(std::string(e.what()).find("scenario unreachable with current n_paths_range") != std::string::npos);
    }
}

TEST_CASE("path sampling is deterministic per seed and UE", "[channel]")
{
    SimConfig cfg;
    auto r1 = ue_stream(42, 3), r2 = ue_stream(42, 3);
    const auto a = sample_paths(cfg, r1), b = sample_paths(cfg, r2);
    REQUIRE(a.paths.paths.size() == b.paths.paths.size());
    for (std::size_t i = 0; i < a.paths.paths.size(); ++i)
    {
        CHECK(a.paths.paths[i].delay == b.paths.paths[i].delay);
        CHECK(a.paths.paths[i].angle == b.paths.paths[i].angle);
        CHECK(a.paths.paths[i].dl_gain == b.paths.paths[i].dl_gain);
        CHECK(a.paths.paths[i].ul_gain == b.paths.paths[i].ul_gain);
    }
}

TEST_CASE("zero-delay path is frequency-flat", "[channel]")
{
    const auto cfg = small_config();
    const auto h = paths_to_csi(single_path(0.0), cfg).dl;
    for (Eigen::Index f = 1; f < h.rows(); ++f)
        for (Eigen::Index a = 0; a < h.cols(); ++a)
            CHECK(std::abs(h(f, a)) == Approx(std::abs(h(0, a))).margin(1e-12));
}

TEST_CASE("one-bin delay gives a 2 pi / N phase ramp per RB", "[channel]")
{
    const auto cfg = small_config();
    const auto h = paths_to_csi(single_path(cfg.bin_width()), cfg).dl;
    const double expect = -2.0 * std::numbers::pi / static_cast<double>(cfg.n_rb);
    for (Eigen::Index f = 1; f < h.rows(); ++f)
        for (Eigen::Index a = 0; a < h.cols(); ++a)
            CHECK(std::arg(h(f, a) / h(f - 1, a)) == Approx(expect).margin(1e-9));
}

TEST_CASE("two taps half a window apart give a period-2 comb", "[channel]")
{
    const auto cfg = small_config();
    PathSet ps;
    ps.paths.push_back({0.0, 0.2, cd(1.0, 0.0), cd(1.0, 0.0)});
    ps.paths.push_back({0.5 * static_cast<double>(cfg.n_rb) * cfg.bin_width(), 0.2, cd(0.5, 0.2), cd(0.5, 0.2)});
    const auto h = paths_to_csi(ps, cfg).dl;
    for (Eigen::Index f = 2; f < h.rows(); ++f)
        CHECK(h.row(f).squaredNorm() == Approx(h.row(f - 2).squaredNorm()).epsilon(1e-9));
    CHECK(std::abs(h.row(0).squaredNorm() - h.row(1).squaredNorm()) > 1e-3);
}

TEST_CASE("PDP of an on-grid tap peaks at its bin", "[channel]")
{
    const auto cfg = small_config();
    const auto pdp = compute_pdp(paths_to_csi(single_path(5 * cfg.bin_width()), cfg).dl, cfg.rb_bandwidth);
    const auto peak = std::max_element(pdp.p.begin(), pdp.p.end()) - pdp.p.begin();
    REQUIRE(peak == 5);
    for (std::size_t t = 0; t < pdp.size(); ++t)
        if (t != 5)
            CHECK(pdp.p[t] < 1e-20);
    REQUIRE(pdp.bin_width == Approx(1.0 / (32 * cfg.rb_bandwidth)));
}

TEST_CASE("PDP of a zero channel is zero", "[channel]")
{
    const auto pdp = compute_pdp(CMat::Zero(16, 4), 1e5);
    for (double v : pdp.p)
        REQUIRE(v == 0.0);
}

TEST_CASE("PDP conserves energy", "[channel]")
{
    for (int trial = 0; trial < 20; ++trial)
    {
        const CMat h = CMat::Random(24, 5);
        const auto pdp = compute_pdp(h, 1e5);
        REQUIRE(pdp.total() == Approx(h.squaredNorm() / 5.0).epsilon(1e-9));
    }
}

TEST_CASE("PDP metrics match hand-computed values", "[channel]")
{
    SECTION("two equal taps")
    {
        const Pdp pdp{{0.5, 0.0, 0.5}, 1.0};
        const auto m = pdp_metrics(pdp, 0.1);
        CHECK(m.mean_excess_delay == Approx(1.0));
        CHECK(m.rms_ds == Approx(1.0));
        CHECK(m.max_excess_delay == Approx(2.0));
    }
    SECTION("six-bin profile")
    {
        const Pdp pdp{{0.1, 0.5, 0.05, 0.3, 0.0, 0.2}, 100e-9};
        const auto m = pdp_metrics(pdp, 0.1);
        CHECK(m.max_excess_delay == Approx(5e-07).margin(1e-20));
        CHECK(m.mean_excess_delay == Approx(2.1739130434782612e-07).epsilon(1e-12));
        CHECK(m.rms_ds == Approx(1.6057552445755983e-07).epsilon(1e-12));
    }
    SECTION("delta profile")
    {
        const Pdp pdp{{0.0, 0.0, 3.0, 0.0}, 1e-7};
        const auto m = pdp_metrics(pdp, 0.1);
        CHECK(m.max_excess_delay == 0.0);
        CHECK(m.rms_ds == 0.0);
        CHECK(m.mean_excess_delay == Approx(2e-7));
    }
}

TEST_CASE("PDP metrics are scale invariant and reject empty profiles", "[channel]")
{
    Pdp pdp{{0.2, 1.0, 0.3, 0.05, 0.4}, 50e-9};
    const auto a = pdp_metrics(pdp, 0.1);
    for (auto &v : pdp.p)
        v *= 37.5;
    const auto b = pdp_metrics(pdp, 0.1);
    CHECK(a.max_excess_delay == b.max_excess_delay);
    CHECK(a.mean_excess_delay == Approx(b.mean_excess_delay).epsilon(1e-14));
    CHECK(a.rms_ds == Approx(b.rms_ds).epsilon(1e-12));
    REQUIRE_THROWS_AS(pdp_metrics(Pdp{{0, 0, 0}, 1.0}, 0.1), NumericalError);
    REQUIRE_THROWS_AS(pdp_metrics(pdp, 1.5), ConfigError);
}

TEST_CASE("UL and DL share significant delay bins on on-grid paths", "[channel]")
{
    const auto cfg = small_config();
    PathSet ps;
    for (int d : {0, 3, 7, 12})
        ps.paths.push_back({d * cfg.bin_width(), 0.1 * d, cd(1.0, 0.1 * d), cd(0.3 * d - 1.0, 0.7)});
    const auto pair = paths_to_csi(ps, cfg);
    const auto dl = compute_pdp(pair.dl, cfg.rb_bandwidth), ul = compute_pdp(pair.ul, cfg.rb_bandwidth);
    const double dmax = *std::max_element(dl.p.begin(), dl.p.end());
    const double umax = *std::max_element(ul.p.begin(), ul.p.end());
    for (std::size_t t = 0; t < dl.size(); ++t)
        CHECK((dl.p[t] >= 1e-3 * dmax) == (ul.p[t] >= 1e-3 * umax));
}

TEST_CASE("cluster boundaries are inclusive upward", "[channel]")
{
    CHECK(classify_ds(0.0) == DsCluster::low);
    CHECK(classify_ds(499e-9) == DsCluster::low);
    CHECK(classify_ds(500e-9) == DsCluster::medium);
    CHECK(classify_ds(700e-9) == DsCluster::medium);
    CHECK(classify_ds(1000e-9) == DsCluster::high);
}

TEST_CASE("SimConfig round-trips through JSON and validates", "[channel]")
{
    SimConfig c;
    c.n_ant = 128;
    c.n_rb = 96;
    c.scenario = Scenario::high;
    c.min_paths = 3;
    c.max_paths = 9;
    const nlohmann::json j = c;
    const auto back = j.get<SimConfig>();
    CHECK(back.n_ant == 128);
    CHECK(back.n_rb == 96);
    CHECK(back.scenario == Scenario::high);
    CHECK(back.min_paths == 3);
    CHECK(back.max_paths == 9);
    c.n_ant = 1;
    REQUIRE_THROWS_AS(c.validate(), ConfigError);
}
