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

#include "autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace srp::nn
{

// Builds a scalar loss on the given tape from parameter handles (same order as the ParamList).
using GraphFn = std::function<Var(Tape &, const std::vector<Var> &)>;

struct GradCheckOptions
{
    // Fourth-order five-point central stencil; truncation error O(step^4).
    double step = 1e-4;
    // Initial step of the Richardson refinement applied to coordinates that miss the tolerance.
    double ridders_step = 1e-3;
    double tol = 1e-6;
    // Denominator floor of the relative error; absolute errors below tol * abs_floor always pass.
    double abs_floor = 1e-6;
};

struct GradCheckReport
{
    bool passed = false;
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    std::size_t checked = 0;
    // Coordinates whose perturbations switched a ReLU; finite differences are invalid there.
    std::size_t kink_skipped = 0;
    std::string diagnostic;
};

// Compares reverse-mode gradients with finite differences for every parameter entry.
inline GradCheckReport grad_check(const GraphFn &graph, const ParamList &params, const GradCheckOptions &opt = {})
{
    GradCheckReport rep;

    Tape tape;
    auto vars = tape.parameters(params);
    Var loss = graph(tape, vars);
    if (auto nd = tape.nondifferentiable_ops(); !nd.empty())
    {
        rep.diagnostic = "non-differentiable op in graph: " + nd.front();
        return rep;
    }
    tape.backward(loss);
    const ParamList analytic = tape.gradients();
    const auto base_signature = tape.activation_signature();

    auto eval = [&](const ParamList &p, std::vector<std::uint8_t> &sig) {
        Tape t(false);
        auto v = t.parameters(p);
        const double val = graph(t, v).value().item();
        sig = t.activation_signature();
        return val;
    };

    ParamList probe = params;
    std::vector<std::uint8_t> sig;
    // Central difference of span h around the current value; nullopt if a ReLU switched.
    const auto central = [&](double &x, double h) -> std::optional<double> {
        const double orig = x;
        x = orig + h;
        const double fp = eval(probe, sig);
        const bool kp = sig != base_signature;
        x = orig - h;
        const double fm = eval(probe, sig);
        const bool km = sig != base_signature;
        x = orig;
        if (kp || km)
            return std::nullopt;
        return (fp - fm) / (2.0 * h);
    };
    const auto five_point = [&](double &x) -> std::optional<double> {
        const auto d1 = central(x, opt.step);
        const auto d2 = central(x, 2.0 * opt.step);
        if (!d1 || !d2)
            return std::nullopt;
        return (4.0 * *d1 - *d2) / 3.0;
    };
    // Ridders' extrapolation of central differences over a shrinking step sequence.
    const auto ridders = [&](double &x) -> std::optional<double> {
        constexpr int ntab = 20;
        constexpr double con = 1.4, con2 = con * con, safe = 2.0;
        double a[ntab][ntab];
        double h = opt.ridders_step, err = INFINITY;
        std::optional<double> best;
        int rows = 0;
        for (int i = 0; i < ntab; ++i, h /= con)
        {
            const auto d = central(x, h);
            if (!d)
            {
                rows = 0; // restart the tableau below the kink
                continue;
            }
            a[0][rows] = *d;
            double fac = con2;
            for (int j = 1; j <= rows; ++j)
            {
                a[j][rows] = (a[j - 1][rows] * fac - a[j - 1][rows - 1]) / (fac - 1.0);
                fac *= con2;
                const double e = std::max(std::abs(a[j][rows] - a[j - 1][rows]), std::abs(a[j][rows] - a[j - 1][rows - 1]));
                if (e <= err)
                {
                    err = e;
                    best = a[j][rows];
                }
            }
            if (rows > 0 && best && std::abs(a[rows][rows] - a[rows - 1][rows - 1]) >= safe * err)
                break;
            ++rows;
        }
        return best;
    };
    for (std::size_t k = 0; k < probe.size(); ++k)
    {
        auto &p = probe[k].value;
        for (std::size_t i = 0; i < p.size(); ++i)
        {
            const double orig = p[i];
            const auto stencil = five_point(p[i]);
            p[i] = orig;
            if (!stencil)
            {
                ++rep.kink_skipped;
                continue;
            }
            double numeric = *stencil;
            {
                const double a = analytic[k].value[i];
                if (std::abs(a - numeric) > 0.1 * opt.tol * std::max({std::abs(a), std::abs(numeric), opt.abs_floor}))
                {
                    // Strongly curved coordinates: refine with Richardson extrapolation.
                    const auto refined = ridders(p[i]);
                    p[i] = orig;
                    if (refined)
                        numeric = *refined;
                }
            }
            const double a = analytic[k].value[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), opt.abs_floor});
            const double rel = std::abs(a - numeric) / denom;
            ++rep.checked;
            if (!std::isfinite(rel) || rel > rep.max_rel_error)
            {
                rep.max_rel_error = std::isfinite(rel) ? rel : INFINITY;
                rep.worst_param = probe[k].name;
                rep.worst_index = i;
            }
        }
    }
    rep.passed = rep.checked > 0 && rep.max_rel_error <= opt.tol;
    if (rep.checked == 0)
        rep.diagnostic = "no coordinate could be checked";
    else if (!rep.passed)
        rep.diagnostic = "max relative error " + std::to_string(rep.max_rel_error) + " at " + rep.worst_param + "[" +
                         std::to_string(rep.worst_index) + "]";
    return rep;
}

} // namespace srp::nn
