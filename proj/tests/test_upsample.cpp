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

#include "srp/upsample.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

using namespace srp;
using namespace srp::upsample;
using Catch::Approx;

namespace
{

CMat random_mat(std::size_t r, std::size_t c, std::mt19937_64 &rng)
{
    std::normal_distribution<double> g(0.0, 1.0);
    CMat m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = cd(g(rng), g(rng));
    return m;
}

SampledPrecoders sample_rows(const CMat &h, std::size_t m, std::size_t offset)
{
    const auto n = static_cast<std::size_t>(h.rows());
    SampledPrecoders sp;
    sp.n_rb = n;
    sp.offset = static_cast<double>(offset);
    sp.values.resize(static_cast<Eigen::Index>(m), h.cols());
    for (std::size_t k = 0; k < m; ++k)
        sp.values.row(static_cast<Eigen::Index>(k)) = h.row(static_cast<Eigen::Index>(offset + k * (n / m)));
    return sp;
}

channel::Pdp pdp_of(std::vector<double> p) { return channel::Pdp{std::move(p), 1.0}; }

} // namespace

TEST_CASE("unitary DFT convention", "[upsample]")
{
    CMat x(4, 1);
    x << cd(1, 0), cd(0, 2), cd(3, 0), cd(-1, 0);
    const CMat d = to_delay(x);
    const cd expect[] = {cd(1.5, 1), cd(-2, 0.5), cd(2.5, -1), cd(0, -0.5)};
    for (int i = 0; i < 4; ++i)
        CHECK(std::abs(d(i, 0) - expect[i]) < 1e-14);
    REQUIRE((to_freq(d) - x).norm() < 1e-14);
}

TEST_CASE("linear interpolation examples", "[upsample]")
{
    SampledPrecoders sp;
    sp.n_rb = 4;
    sp.values.resize(2, 1);
    sp.values << cd(1, 0), cd(3, 0);
    const CMat out = interpolate_linear_raw(sp);
    CHECK(std::abs(out(0, 0) - cd(1, 0)) < 1e-15);
    CHECK(std::abs(out(1, 0) - cd(2, 0)) < 1e-15);
    CHECK(std::abs(out(2, 0) - cd(3, 0)) < 1e-15);
    CHECK(std::abs(out(3, 0) - cd(3, 0)) < 1e-15);

    SampledPrecoders half = sp;
    half.offset = 1.0;
    half.values << cd(0, 1), cd(0, 3);
    const CMat o2 = interpolate_linear_raw(half);
    CHECK(std::abs(o2(0, 0) - cd(0, 1)) < 1e-15);
    CHECK(std::abs(o2(2, 0) - cd(0, 2)) < 1e-15);

    SampledPrecoders flat;
    flat.n_rb = 12;
    flat.offset = 1.5;
    flat.values = CMat::Constant(4, 3, cd(0.3, -0.7));
    const auto w = interpolate_linear(flat);
    for (Eigen::Index f = 0; f < 12; ++f)
        CHECK((w.values.row(f) - w.values.row(0)).norm() < 1e-14);
    CHECK(w.values.row(0).norm() == Approx(1.0));

    SampledPrecoders one;
    one.n_rb = 4;
    one.values = CMat::Ones(1, 2);
    REQUIRE_THROWS_AS(interpolate_linear(one), ConfigError);
    one.values = CMat::Ones(3, 2);
    REQUIRE_THROWS_AS(interpolate_linear(one), ConfigError);
}

TEST_CASE("initial upsample tiles the folded delay profile", "[upsample]")
{
    // Unit tap at delay 5 of an 8-bin profile, sampled every other RB.
    CMat tap = CMat::Zero(8, 1);
    tap(5, 0) = 1.0;
    const CMat h = to_freq(tap);
    const CMat e = initial_upsample(sample_rows(h, 4, 0));
    const double expect[] = {0, 1, 0, 0, 0, 1, 0, 0};
    for (int i = 0; i < 8; ++i)
        CHECK(std::abs(e(i, 0)) == Approx(expect[i]).margin(1e-14));
}

TEST_CASE("sampling folds the delay domain", "[upsample]")
{
    std::mt19937_64 rng(5);
    for (std::size_t m : {2, 4, 8})
    {
        const std::size_t n = 16, t = n / m;
        const CMat h = random_mat(n, 3, rng);
        const CMat x = to_delay(h);
        const auto sp = sample_rows(h, m, 0);
        const CMat xs = to_delay(sp.values);
        for (std::size_t r = 0; r < m; ++r)
        {
            Eigen::RowVectorXcd acc = Eigen::RowVectorXcd::Zero(3);
            for (std::size_t k = 0; k < t; ++k)
                acc += x.row(static_cast<Eigen::Index>(r + k * m));
            CHECK((xs.row(static_cast<Eigen::Index>(r)) - acc / std::sqrt(double(t))).norm() < 1e-12);
        }
    }
}

TEST_CASE("uniform mask returns the samples at their positions", "[upsample]")
{
    std::mt19937_64 rng(6);
    for (std::size_t offset : {0, 1, 3})
    {
        const CMat h = random_mat(16, 2, rng);
        const auto sp = sample_rows(h, 4, offset);
        const CMat f = apply_bpf_raw(initial_upsample(sp), Bpf{std::vector<double>(16, 0.25)});
        for (std::size_t k = 0; k < 4; ++k)
            CHECK((f.row(static_cast<Eigen::Index>(offset + 4 * k)) - sp.values.row(static_cast<Eigen::Index>(k))).norm() <
                  1e-12);
    }
}

TEST_CASE("reciprocity mask examples", "[upsample]")
{
    const auto lin = reciprocity_bpf(pdp_of({1, 2, 3, 4, 5, 6, 7, 8}), 4);
    const double expect[] = {1.0 / 6, 0.25, 0.3, 1.0 / 3, 5.0 / 6, 0.75, 0.7, 2.0 / 3};
    for (int i = 0; i < 8; ++i)
        CHECK(lin.mask[i] == Approx(expect[i]).epsilon(1e-14));

    std::vector<double> delta(8, 0.0);
    delta[5] = 2.5;
    const auto d = reciprocity_bpf(pdp_of(delta), 4);
    CHECK(d.mask[5] == 1.0);
    CHECK(d.mask[1] == 0.0);
    for (int i : {0, 2, 3, 4, 6, 7})
        CHECK(d.mask[i] == 0.5);

    const auto z = reciprocity_bpf(pdp_of(std::vector<double>(12, 0.0)), 3);
    for (double v : z.mask)
        CHECK(v == 0.25);

    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> p(24);
    for (auto &v : p)
        v = u(rng);
    const auto r = reciprocity_bpf(pdp_of(p), 6);
    for (std::size_t c = 0; c < 6; ++c)
    {
        double s = 0;
        for (std::size_t k = 0; k < 4; ++k)
        {
            s += r.mask[c + 6 * k];
            CHECK(r.mask[c + 6 * k] >= 0.0);
            CHECK(r.mask[c + 6 * k] <= 1.0);
        }
        CHECK(s == Approx(1.0).epsilon(1e-14));
    }
    REQUIRE_THROWS_AS(reciprocity_bpf(pdp_of(p), 5), ConfigError);
}

TEST_CASE("ideal mask reconstructs sparse on-grid channels", "[upsample]")
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g(0.0, 1.0);
    const std::size_t n = 32, m = 8, d = 4;
    for (int trial = 0; trial < 20; ++trial)
    {
        // One tap per residue class, at a random replica.
        CMat x = CMat::Zero(n, d);
        for (std::size_t r = 0; r < m; ++r)
        {
            if (trial % 2 == 1 && r % 3 == 0)
                continue;
            const std::size_t k = static_cast<std::size_t>(rng() % (n / m));
            for (std::size_t a = 0; a < d; ++a)
                x(static_cast<Eigen::Index>(r + k * m), static_cast<Eigen::Index>(a)) = cd(g(rng), g(rng));
        }
        const CMat h = to_freq(x);
        const auto sp = sample_rows(h, m, 0);
        const auto pdp = channel::compute_pdp(h, 1.0);
        const CMat rec = apply_bpf_raw(initial_upsample(sp), reciprocity_bpf(pdp, m));
        CHECK((rec - h).norm() <= 1e-9 * h.norm());
        const auto w = deterministic_upsample(sp, pdp);
        CHECK(loss_neg_gain(w, h) < 1e-12);
    }
}

TEST_CASE("zero mask is a numerical failure", "[upsample]")
{
    std::mt19937_64 rng(1);
    const auto sp = sample_rows(random_mat(8, 2, rng), 4, 0);
    Bpf zero{std::vector<double>(8, 0.0)};
    REQUIRE_THROWS_AS(apply_bpf(initial_upsample(sp), zero, sp), NumericalError);
    REQUIRE_THROWS_AS(apply_bpf(initial_upsample(sp), Bpf{std::vector<double>(4, 1.0)}, sp), ConfigError);
}

TEST_CASE("beam-domain samples map through the beam matrix", "[upsample]")
{
    std::mt19937_64 rng(3);
    SampledPrecoders sp;
    sp.n_rb = 8;
    sp.domain = Domain::beam;
    sp.values = random_mat(4, 2, rng);
    sp.beams = random_mat(6, 2, rng);
    REQUIRE(sp.n_ant() == 6);
    const CMat a = sp.to_antenna(sp.values);
    REQUIRE((a - sp.values * sp.beams.transpose() / 2.0).norm() < 1e-14);
    sp.beams = random_mat(6, 3, rng);
    REQUIRE_THROWS_AS(sp.validate(), ConfigError);
}

TEST_CASE("negative-gain loss", "[upsample]")
{
    std::mt19937_64 rng(13);
    const CMat h = random_mat(16, 4, rng);
    CHECK(loss_neg_gain(h, h) == Approx(0.0).margin(1e-14));
    CHECK(loss_neg_gain(h * cd(0.0, 3.0), h) == Approx(0.0).margin(1e-14));

    CMat e0 = CMat::Zero(2, 2), e1 = CMat::Zero(2, 2);
    e0.col(0).setOnes();
    e1.col(1).setOnes();
    CHECK(loss_neg_gain(e0, e1) == 1.0);

    const CMat w = random_mat(16, 4, rng);
    double acc = 0;
    for (Eigen::Index f = 0; f < 16; ++f)
    {
        cd ip = 0;
        for (Eigen::Index a = 0; a < 4; ++a)
            ip += std::conj(h(f, a)) * w(f, a);
        acc += std::abs(ip) / (h.row(f).norm() * w.row(f).norm());
    }
    CHECK(loss_neg_gain(w, h) == Approx(1.0 - acc / 16).epsilon(1e-13));
    CMat ws = w;
    for (Eigen::Index f = 0; f < 16; ++f)
        ws.row(f) *= std::polar(0.1 + f, 0.3 * f);
    CHECK(loss_neg_gain(ws, h) == Approx(loss_neg_gain(w, h)).epsilon(1e-13));
}
