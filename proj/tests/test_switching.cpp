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

#include "srp/numerics/gradcheck.hpp"
#include "srp/switching.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

using namespace srp;
using namespace srp::switching;
using Catch::Approx;

namespace
{

channel::Pdp make_pdp(std::vector<double> p, double bw = 1e-7) { return {std::move(p), bw}; }

// PDPs whose late-tap energy share e sets the SRPNet advantage: ng_srp - ng_itp = 0.3 e.
std::vector<SwitchSample> synthetic_samples(std::size_t count, std::uint64_t seed, double min_advantage = 0.0)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SwitchSample> out;
    for (std::size_t i = 0; i < count; ++i)
    {
        std::vector<double> p(16, 0.0);
        const double late = u(rng);
        for (std::size_t t = 0; t < 8; ++t)
            p[t] = (1.0 - late) * (0.5 + u(rng)) / 8.0;
        for (std::size_t t = 8; t < 16; ++t)
            p[t] = late * (0.5 + u(rng)) / 8.0;
        double s = 0;
        for (double v : p)
            s += v;
        double e = 0;
        for (std::size_t t = 0; t < 16; ++t)
        {
            p[t] /= s;
            if (t >= 8)
                e += p[t];
        }
        const double itp = 0.6 + 0.1 * u(rng);
        out.push_back({p, itp + min_advantage + 0.3 * e, itp});
    }
    return out;
}

double srp_fraction(const std::vector<SwitchSample> &set, const LearnedSwitchParams &p)
{
    double n = 0;
    for (const auto &s : set)
        n += learned_switch_forward(make_pdp(s.pdp, 1.0), p).s;
    return n / static_cast<double>(set.size());
}

} // namespace

TEST_CASE("threshold switch examples", "[switching]")
{
    const auto two = make_pdp({0.5, 0.0, 0.5}, 1.0);
    for (auto m : {Metric::max_excess, Metric::mean_excess, Metric::rms_ds})
    {
        const double v = metric_value(channel::pdp_metrics(two, 0.1), m);
        const auto at = threshold_switch(two, m, v);
        CHECK(at.s == 1);
        CHECK(at.complexity_charged == 1000.0);
        CHECK(threshold_switch(two, m, std::nextafter(v, 10.0)).s == 0);
        CHECK(threshold_switch(two, m, 0.0).s == 1);
        const auto delta = make_pdp({3.0, 0.0, 0.0, 0.0});
        const auto d = threshold_switch(delta, m, 1e-12);
        CHECK(d.s == 0);
        CHECK(d.s_soft == 0.0);
        CHECK(d.complexity_charged == 1.0);
        CHECK(d.metric_used == m);
    }
    REQUIRE_THROWS_AS(threshold_switch(make_pdp({0.0, 0.0}), Metric::rms_ds, 1.0), NumericalError);
    REQUIRE_THROWS_AS(threshold_switch(two, Metric::learned, 1.0), ConfigError);
}

TEST_CASE("threshold decisions are invariant to PDP scaling", "[switching]")
{
    std::mt19937_64 rng(3);
    std::exponential_distribution<double> e(1.0);
    for (int trial = 0; trial < 200; ++trial)
    {
        std::vector<double> p(24);
        for (auto &v : p)
            v = e(rng);
        const auto a = make_pdp(p);
        for (auto &v : p)
            v *= 1e-6;
        const auto b = make_pdp(p);
        for (auto m : {Metric::max_excess, Metric::mean_excess, Metric::rms_ds})
            for (double thres : {2e-7, 6e-7, 1.1e-6})
                CHECK(threshold_switch(a, m, thres).s == threshold_switch(b, m, thres).s);
    }
}

TEST_CASE("learned switch forward examples", "[switching]")
{
    const auto pdp = make_pdp({1.0, 2.0, 0.5, 0.0});
    LearnedSwitchParams p{std::vector<double>(4, 0.0), 0.0, 0.0};
    const auto half = learned_switch_forward(pdp, p);
    CHECK(half.s_soft == 0.5);
    CHECK(half.s == 1);
    CHECK(half.complexity_charged == 1000.0);

    p.b = 50.0;
    p.f = {-3.0, 2.0, -1.0, 4.0};
    CHECK(learned_switch_forward(pdp, p).s == 1);
    CHECK(learned_switch_forward(make_pdp({0.0, 0.0, 0.0, 1.0}), p).s == 1);
    p.b = -50.0;
    CHECK(learned_switch_forward(pdp, p).s == 0);
    CHECK(learned_switch_forward(pdp, p).complexity_charged == 1.0);

    p.b = 0.1;
    const auto a = learned_switch_forward(pdp, p);
    const auto b = learned_switch_forward(make_pdp({7.0, 14.0, 3.5, 0.0}), p);
    CHECK(a.s == b.s);
    CHECK(a.s_soft == Approx(b.s_soft).epsilon(1e-15));
    // z = 0.1 + (-3 * 1 + 2 * 2 - 1 * 0.5) / 3.5
    CHECK(a.s_soft == Approx(1.0 / (1.0 + std::exp(-(0.1 + 0.5 / 3.5)))).epsilon(1e-15));

    REQUIRE_THROWS_AS(learned_switch_forward(make_pdp({1.0, 2.0}), p), ConfigError);
    REQUIRE_THROWS_AS(learned_switch_forward(make_pdp({0.0, 0.0, 0.0, 0.0}), p), NumericalError);
}

TEST_CASE("gain and cost blends", "[switching]")
{
    const auto one = gain_cost(1.0, 0.9, 0.7);
    CHECK(one.g == 0.9);
    CHECK(one.c == 1000.0);
    const auto zero = gain_cost(0.0, 0.9, 0.7);
    CHECK(zero.g == 0.7);
    CHECK(zero.c == 1.0);
    const auto half = gain_cost(0.5, 0.9, 0.7);
    CHECK(half.c == 500.5);
    CHECK(half.g == Approx(0.8));
}

TEST_CASE("switch objective gradients match finite differences", "[switching]")
{
    const auto samples = synthetic_samples(40, 5);
    std::mt19937_64 rng(6);
    std::normal_distribution<double> g(0.0, 2.0);
    for (int init = 0; init < 10; ++init)
    {
        const SwitchBatch batch = make_switch_batch(samples, 1e-4, SwitchTrainConfig{});
        LearnedSwitchParams p{std::vector<double>(16), g(rng), 1e-4};
        for (auto &v : p.f)
            v = g(rng);
        const nn::GraphFn fn = [&](nn::Tape &t, const std::vector<nn::Var> &v) {
            return switch_loss_graph(t, v, batch);
        };
        const auto rep = nn::grad_check(fn, switch_param_list(p));
        INFO(rep.diagnostic << " " << rep.max_rel_error);
        CHECK(rep.passed);
        CHECK(rep.max_rel_error <= 1e-6);
    }
}

TEST_CASE("cost-free training selects SRPNet", "[switching]")
{
    const auto train = synthetic_samples(200, 10, 0.01);
    const auto val = synthetic_samples(100, 11, 0.01);
    const auto res = train_switch(train, val, 0.0);
    CHECK(srp_fraction(val, res.params) >= 0.99);
}

TEST_CASE("cost-dominated training selects interpolation", "[switching]")
{
    const auto train = synthetic_samples(200, 12);
    const auto val = synthetic_samples(100, 13);
    const auto res = train_switch(train, val, 1.0);
    CHECK(srp_fraction(val, res.params) <= 0.01);
}

TEST_CASE("complexity is non-increasing along the lambda grid", "[switching]")
{
    const auto train = synthetic_samples(300, 20);
    const auto val = synthetic_samples(150, 21);
    double prev = 2.0;
    for (double lambda : {1e-5, 5e-5, 1e-4, 5e-4, 1e-3})
    {
        const auto res = train_switch(train, val, lambda);
        const double frac = srp_fraction(val, res.params);
        INFO("lambda " << lambda << " srp fraction " << frac);
        CHECK(frac <= prev);
        prev = frac;
        // Never below the random-switch line at matched complexity.
        double g = 0, g_itp = 0, g_srp = 0;
        for (const auto &s : val)
        {
            const auto d = learned_switch_forward(make_pdp(s.pdp, 1.0), res.params);
            g += gain_cost(d.s, s.ng_srp, s.ng_itp).g;
            g_itp += s.ng_itp;
            g_srp += s.ng_srp;
        }
        const double n = static_cast<double>(val.size());
        CHECK(g / n >= (frac * g_srp + (1 - frac) * g_itp) / n - 1e-12);
    }
}

TEST_CASE("max excess delay detects aliasing at the Nyquist delay", "[switching]")
{
    // N_RB = 32, M = 8: delays of 8 bins or more alias.
    std::mt19937_64 rng(30);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double bw = 1.0 / (32 * 180e3);
    std::size_t correct = 0, total = 0;
    for (int trial = 0; trial < 400; ++trial)
    {
        const bool aliased = trial % 2 == 1;
        CMat x = CMat::Zero(32, 4);
        x(0, 0) = 1.0;
        const int taps = 1 + static_cast<int>(rng() % 3);
        for (int k = 0; k < taps; ++k)
        {
            const auto t = static_cast<Eigen::Index>(aliased ? 8 + rng() % 16 : 1 + rng() % 7);
            x(t, static_cast<Eigen::Index>(rng() % 4)) = std::polar(0.5 + u(rng), 6.28 * u(rng));
        }
        const auto pdp = channel::compute_pdp(to_freq(x), 180e3);
        REQUIRE(pdp.bin_width == Approx(bw));
        const auto d = threshold_switch(pdp, Metric::max_excess, 8 * pdp.bin_width);
        correct += static_cast<std::size_t>(d.s == (aliased ? 1 : 0));
        ++total;
    }
    CHECK(static_cast<double>(correct) / static_cast<double>(total) >= 0.95);
}

TEST_CASE("switch checkpoints round-trip", "[switching]")
{
    const auto dir = std::filesystem::temp_directory_path() / "srp_test_switch_ckpt";
    std::filesystem::create_directories(dir);
    LearnedSwitchParams p{{0.25, -1.5, 3.0}, 0.125, 5e-4};
    save_switch(dir / "s.ckpt.json", p, SwitchTrainConfig{});
    const auto q = load_switch(dir / "s.ckpt.json");
    CHECK(q.f == p.f);
    CHECK(q.b == p.b);
    CHECK(q.lambda == p.lambda);
    std::filesystem::remove_all(dir);
    REQUIRE(metric_from_string(to_string(Metric::mean_excess)) == Metric::mean_excess);
    REQUIRE_THROWS_AS(metric_from_string("median"), ConfigError);
}
