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

#include "../dsp.hpp"
#include "../errors.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace srp::harness
{

struct GainResult
{
    double g = 0.0;  // sum over RBs, in [0, N_RB]
    double ng = 0.0; // per-RB mean, in [0, 1]
};

inline GainResult normalized_gain(const CMat &w, const CMat &h)
{
    const Eigen::VectorXd per = per_rb_gain(w, h);
    return {per.sum(), per.mean()};
}

// Mean spectral efficiency over RBs, (1/N_RB) sum_f log2(1 + rho |h_f^H w_f|^2), w rows unit norm.
inline double capacity(const CMat &w, const CMat &h, double snr_db)
{
    if (w.rows() != h.rows() || w.cols() != h.cols())
        throw ConfigError("capacity: precoder and channel shapes differ");
    const double rho = std::pow(10.0, snr_db / 10.0);
    double acc = 0.0;
    for (Eigen::Index f = 0; f < w.rows(); ++f)
    {
        const double nw = w.row(f).norm();
        if (!(nw > 0.0))
            throw NumericalError("capacity: zero precoder at RB " + std::to_string(f));
        const cd ip = h.row(f).conjugate().cwiseProduct(w.row(f)).sum() / nw;
        acc += std::log2(1.0 + rho * std::norm(ip));
    }
    return acc / static_cast<double>(w.rows());
}

// num / den, or nullopt ("undefined") when the baseline capacity is zero.
inline std::optional<double> capacity_ratio(double num, double den)
{
    if (!(den > 0.0))
        return std::nullopt;
    return num / den;
}

} // namespace srp::harness
