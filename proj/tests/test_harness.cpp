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

#include "srp/harness/dataset.hpp"
#include "srp/harness/experiment.hpp"
#include "srp/harness/metrics.hpp"
#include "srp/harness/pipeline.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>

using namespace srp;
using namespace srp::harness;
using Catch::Approx;

namespace
{

std::string slurp(const std::filesystem::path &p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

std::filesystem::path scratch(const std::string &name)
{
    const auto dir = std::filesystem::temp_directory_path() / ("srp_test_harness_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

channel::SimConfig small_sim()
{
    channel::SimConfig c;
    c.n_ant = 8;
    c.n_rb = 48;
    c.seed = 77;
    return c;
}

CMat oracle_h()
{
    CMat h(2, 3);
    h << cd(1, 1), cd(0.5, 0), cd(0, -1), cd(2, 0), cd(0, 1), cd(0.3, -0.2);
    return h;
}

CMat oracle_w()
{
    CMat w(2, 3);
    const double s = 1.0 / std::sqrt(3.0);
    w << cd(0.6, 0), cd(0, 0.8), cd(0, 0), cd(s, 0), cd(s, 0), cd(s, 0);
    return w;
}

} // namespace

TEST_CASE("normalized gain and capacity match hand-computed oracles", "[harness]")
{
    const auto g = normalized_gain(oracle_w(), oracle_h());
    CHECK(g.ng == Approx(0.4857803924424682).epsilon(1e-14));
    CHECK(g.g == Approx(2 * 0.4857803924424682).epsilon(1e-14));
    const double snr[] = {-3, 0, 10};
    const double expect[] = {0.6284333153616042, 1.029562250897792, 3.349062926151423};
    for (int k = 0; k < 3; ++k)
        CHECK(capacity(oracle_w(), oracle_h(), snr[k]) == Approx(expect[k]).epsilon(1e-13));
    // Precoder scale does not matter.
    CHECK(capacity(oracle_w() * cd(0, 5), oracle_h(), 0.0) == Approx(expect[1]).epsilon(1e-13));
    REQUIRE_THROWS_AS(capacity(CMat::Zero(2, 3), oracle_h(), 0.0), NumericalError);
    REQUIRE_THROWS_AS(capacity(oracle_w(), CMat::Ones(3, 3), 0.0), ConfigError);
}

TEST_CASE("capacity grows with SNR and the ratio can be undefined", "[harness]")
{
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 1.0);
    CMat h(12, 4), w(12, 4);
    for (Eigen::Index i = 0; i < h.size(); ++i)
    {
        h.data()[i] = cd(n(rng), n(rng));
        w.data()[i] = cd(n(rng), n(rng));
    }
    double prev = -1.0;
    for (double s = -20; s <= 30; s += 2.5)
    {
        const double c = capacity(w, h, s);
        CHECK(c > prev);
        prev = c;
    }
    CHECK_FALSE(capacity_ratio(1.0, 0.0).has_value());
    CHECK(*capacity_ratio(3.0, 2.0) == 1.5);
    CMat orth = CMat::Zero(1, 2), hh = CMat::Zero(1, 2);
    orth(0, 0) = 1.0;
    hh(0, 1) = 1.0;
    CHECK_FALSE(capacity_ratio(1.0, capacity(orth, hh, 10.0)).has_value());
}

TEST_CASE("contiguous 8:1:1 split", "[harness]")
{
    const auto s = split_811(512);
    REQUIRE(s.train.size() == 410);
    REQUIRE(s.val.size() == 51);
    REQUIRE(s.test.size() == 51);
    CHECK(s.train.front() == 0);
    CHECK(s.val.front() == 410);
    CHECK(s.test.front() == 461);
    CHECK(s.test.back() == 511);
    const auto t = split_811(3);
    CHECK((t.train.size() == 1 && t.val.size() == 1 && t.test.size() == 1));
    REQUIRE_THROWS_AS(split_811(2), ConfigError);
}

TEST_CASE("dataset generation is deterministic across thread counts", "[harness]")
{
    const auto cfg = small_sim();
    const auto a = generate_dataset(cfg, 24, 1);
    const auto b = generate_dataset(cfg, 24, 4);
    const auto dir = scratch("det");
    save_dataset(dir / "a", a);
    save_dataset(dir / "b", b);
    for (const char *f : {"meta.json", "dl.c64", "ul.c64"})
    {
        INFO(f);
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    }
    CHECK(std::filesystem::file_size(dir / "a" / "dl.c64") == 24 * 48 * 8 * 8);

    const auto c = load_dataset(dir / "a");
    REQUIRE(c.size() == 24);
    for (std::size_t i = 0; i < 24; ++i)
    {
        CHECK((c.dl[i] - a.dl[i]).norm() == 0.0);
        CHECK((c.ul[i] - a.ul[i]).norm() == 0.0);
        CHECK(c.cluster[i] == a.cluster[i]);
        CHECK(c.rms_ds[i] == a.rms_ds[i]);
    }
    auto other = cfg;
    other.seed = 78;
    CHECK((generate_dataset(other, 2, 1).dl[0] - a.dl[0]).norm() > 0.0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("dataset loading reports damaged files", "[harness]")
{
    const auto dir = scratch("bad");
    REQUIRE_THROWS_AS(load_dataset(dir / "missing"), DataError);
    save_dataset(dir / "d", generate_dataset(small_sim(), 4, 1));
    std::filesystem::resize_file(dir / "d" / "ul.c64", 100);
    REQUIRE_THROWS_AS(load_dataset(dir / "d"), DataError);
    save_dataset(dir / "e", generate_dataset(small_sim(), 4, 1));
    {
        std::ofstream out(dir / "e" / "meta.json");
        out << "{not json";
    }
    REQUIRE_THROWS_AS(load_dataset(dir / "e"), DataError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("512-channel mixed dataset bookkeeping", "[harness]")
{
    channel::SimConfig cfg;
    cfg.seed = 5;
    const auto ds = generate_dataset(cfg, 512, 4);
    REQUIRE(ds.size() == 512);
    const auto counts = cluster_counts(ds.cluster);
    CHECK(counts[0] + counts[1] + counts[2] == 512);
    for (auto c : counts)
        CHECK(c > 100);
    for (std::size_t i = 0; i < ds.size(); ++i)
    {
        CHECK(channel::classify_ds(ds.rms_ds[i]) == ds.cluster[i]);
        CHECK(ds.rms_ds[i] == dl_rms_ds(ds.dl[i], cfg));
        CHECK((round_to_f32(ds.dl[i]) - ds.dl[i]).norm() == 0.0);
    }
    CHECK(cluster_by_ds(ds) == ds.cluster);
}

TEST_CASE("feedback overhead follows the scheme", "[harness]")
{
    const auto ds = generate_dataset(small_sim(), 1, 1);
    const auto cb = codebook::build_codebook(8, 4);
    SchemeSpec e;
    e.m_v = 12;
    e.r = 4;
    const auto fe = make_feedback(ds.dl[0], e, cb);
    CHECK(fe.overhead.coefficients == codebook::kept_count(4, 12, 4));
    CHECK(fe.sp.domain == upsample::Domain::beam);
    CHECK(fe.sp.m() == 12);
    CHECK(fe.sp.offset == 0.0);
    CHECK(e.label() == "etype2_modified_mv=12_r=4_L=4");

    SchemeSpec t;
    t.kind = SchemeKind::type2;
    t.n3 = 6;
    const auto ft = make_feedback(ds.dl[0], t, cb);
    CHECK(ft.overhead.coefficients == 24);
    CHECK(ft.sp.m() == 6);
    CHECK(ft.sp.offset == 3.5);
    CHECK(ft.sp.domain == upsample::Domain::antenna);

    SchemeSpec tr = e;
    tr.variant = codebook::EType2Variant::truncated;
    tr.n3 = 24;
    tr.m_v = 8;
    const auto fr = make_feedback(ds.dl[0], tr, cb);
    CHECK(fr.sp.m() == 24);
    CHECK(fr.sp.offset == 0.5);
}

TEST_CASE("evaluation outputs are deterministic and the random switch is linear", "[harness]")
{
    const auto ds = generate_dataset(small_sim(), 40, 2);
    const auto theta = upsample::init_srpnet(upsample::SrpnetConfig{}, 3);
    EvalConfig cfg;
    cfg.snr_db = {-5, 0, 10};
    SchemeSpec t2;
    t2.kind = SchemeKind::type2;
    t2.n3 = 12;
    cfg.schemes = {t2};
    cfg.sw.lambdas = {1e-5, 1e-3};
    cfg.sw.train.epochs = 200;
    cfg.sw.train.patience = 50;

    const auto r1 = run_experiment(cfg, ds, &theta, 1);
    const auto r3 = run_experiment(cfg, ds, &theta, 3);
    CHECK(fig4_csv(r1) == fig4_csv(r3));
    CHECK(fig5_csv(r1) == fig5_csv(r3));
    CHECK(fig6_csv(r1) == fig6_csv(r3));
    CHECK(report_json(r1).dump() == report_json(r3).dump());

    // Primary scheme prepended, three upsamplers per scheme.
    REQUIRE(r1.schemes.size() == 6);
    CHECK(r1.schemes[0].scheme == cfg.primary.label());
    CHECK(r1.eval_index.size() == 4);

    // Deterministic and zero-initialized SRPNet coincide up to the learned-mask clamp.
    const auto &srp = r1.schemes[1];
    const auto &det = r1.schemes[2];
    REQUIRE(srp.upsampler == Upsampler::srpnet);
    REQUIRE(det.upsampler == Upsampler::srpnet_det);
    for (std::size_t i = 0; i < srp.per_channel_ng.size(); ++i)
        CHECK(srp.per_channel_ng[i] == Approx(det.per_channel_ng[i]).margin(1e-4));

    std::vector<SwitchPoint> random;
    for (const auto &p : r1.fig6)
    {
        CHECK(p.mean_complexity >= 1.0 - 1e-12);
        CHECK(p.mean_complexity <= 1000.0 + 1e-9);
        if (p.kind == "random")
            random.push_back(p);
        else
            CHECK(p.mean_ng >= p.random_line_ng - 1e-12);
    }
    REQUIRE(random.size() == 11);
    const double g_itp = r1.schemes[0].clusters[3].mean_ng;
    const double g_srp = r1.schemes[1].clusters[3].mean_ng;
    CHECK(random.front().mean_complexity == 1.0);
    CHECK(random.back().mean_complexity == 1000.0);
    CHECK(random.front().mean_ng == Approx(g_itp).epsilon(1e-12));
    CHECK(random.back().mean_ng == Approx(g_srp).epsilon(1e-12));
    for (const auto &p : random)
    {
        const double frac = (p.mean_complexity - 1.0) / 999.0;
        CHECK(p.mean_ng == Approx(g_itp + frac * (g_srp - g_itp)).epsilon(1e-12));
        CHECK(p.mean_ng == Approx(p.random_line_ng).epsilon(1e-12));
    }

    const auto dir = scratch("eval");
    write_report(dir / "a", r1);
    write_report(dir / "b", r3);
    for (const char *f : {"fig4.csv", "fig5.csv", "fig6.csv", "report.json"})
        CHECK(slurp(dir / "a" / f) == slurp(dir / "b" / f));
    CHECK(slurp(dir / "a" / "fig4.csv").rfind("snr_db,cluster,scheme,upsampler,baseline,capacity_ratio", 0) == 0);
    std::filesystem::remove_all(dir);
}

TEST_CASE("evaluation config errors", "[harness]")
{
    EvalConfig cfg;
    cfg.split = "train";
    REQUIRE_THROWS_AS(cfg.validate(), ConfigError);
    EvalConfig missing;
    REQUIRE_THROWS_AS(run_experiment(missing), ConfigError);
    missing.dataset = "/nonexistent/dataset";
    REQUIRE_THROWS_AS(run_experiment(missing), DataError);

    const auto dir = scratch("cfg");
    save_dataset(dir / "d", generate_dataset(small_sim(), 5, 1));
    EvalConfig no_ckpt;
    no_ckpt.dataset = (dir / "d").string();
    REQUIRE_THROWS_AS(run_experiment(no_ckpt), ConfigError);
    no_ckpt.srpnet_checkpoint = (dir / "none.ckpt.json").string();
    REQUIRE_THROWS_AS(run_experiment(no_ckpt), DataError);
    std::filesystem::remove_all(dir);

    const auto j = nlohmann::json::parse(R"({"split": "val", "snr_db": [0], "switch": {"lambdas": [0.5]}})");
    const auto parsed = j.get<EvalConfig>();
    CHECK(parsed.split == "val");
    CHECK(parsed.sw.lambdas == std::vector<double>{0.5});
}
