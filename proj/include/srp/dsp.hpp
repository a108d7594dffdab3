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

#include "errors.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <string>

namespace srp
{

using cd = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RVec = Eigen::VectorXd;

// Unitary DFT matrix F[r, c] = exp(sign * j 2 pi r c / n) / sqrt(n). The exponent is reduced
// modulo n in integers so large products do not lose phase accuracy.
inline CMat dft_matrix(std::size_t n, int sign)
{
    CMat f(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n));
    const double s = sign >= 0 ? 1.0 : -1.0;
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t c = 0; c < n; ++c)
        {
            const double ang = s * 2.0 * std::numbers::pi * static_cast<double>((r * c) % n) / static_cast<double>(n);
            f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = std::polar(scale, ang);
        }
    return f;
}

// Frequency -> delay along rows. With h[f] = g exp(-j 2 pi f d / n), tap d lands on row d.
inline CMat to_delay(const CMat &x) { return dft_matrix(static_cast<std::size_t>(x.rows()), +1) * x; }

// Delay -> frequency along rows; inverse of to_delay.
inline CMat to_freq(const CMat &x) { return dft_matrix(static_cast<std::size_t>(x.rows()), -1) * x; }

// Rounds every entry to float32 precision (the on-disk representation).
inline CMat round_to_f32(const CMat &x)
{
    CMat y = x;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        y.data()[i] = cd(static_cast<float>(y.data()[i].real()), static_cast<float>(y.data()[i].imag()));
    return y;
}

// Row-wise L2 normalization; returns false if any row is zero (that row is left untouched).
inline bool normalize_rows(CMat &x)
{
    bool ok = true;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
    {
        const double n = x.row(r).norm();
        if (n > 0.0)
            x.row(r) /= n;
        else
            ok = false;
    }
    return ok;
}

// |h_f^H w_f| / (|h_f| |w_f|) per RB for row-wise precoders w and channels h (both N_RB x N_a).
inline Eigen::VectorXd per_rb_gain(const CMat &w, const CMat &h)
{
    if (w.rows() != h.rows() || w.cols() != h.cols())
        throw std::invalid_argument("per_rb_gain: precoder " + std::to_string(w.rows()) + "x" + std::to_string(w.cols()) +
                                    " vs channel " + std::to_string(h.rows()) + "x" + std::to_string(h.cols()));
    Eigen::VectorXd g(w.rows());
    for (Eigen::Index f = 0; f < w.rows(); ++f)
    {
        const double hn = h.row(f).norm();
        const double wn = w.row(f).norm();
        if (!(hn > 0.0) || !(wn > 0.0))
            throw NumericalError("per_rb_gain: zero " + std::string(hn > 0.0 ? "precoder" : "channel") + " row " +
                                    std::to_string(f));
        g(f) = std::abs(h.row(f).conjugate().cwiseProduct(w.row(f)).sum()) / (hn * wn);
    }
    return g;
}

} // namespace srp
