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

#include "channel.hpp"
#include "dsp.hpp"
#include "errors.hpp"

#include <cmath>
#include <numbers>
#include <string>
#include <vector>

namespace srp::upsample
{

enum class Domain
{
    antenna, // values are antenna-domain precoders (D = N_a)
    beam     // values are beam coefficients c; precoder = beams * c / D
};

// Uniformly spaced frequency samples of precoders. Sample k sits at RB position offset + k * stride,
// stride = n_rb / M. The offset may be fractional (SB centers).
struct SampledPrecoders
{
    CMat values; // M x D
    std::size_t n_rb = 0;
    double offset = 0.0;
    Domain domain = Domain::antenna;
    CMat beams; // N_a x D, beam domain only

    std::size_t m() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t d() const noexcept { return static_cast<std::size_t>(values.cols()); }
    std::size_t stride() const { return n_rb / m(); }
    std::size_t n_ant() const
    {
        return domain == Domain::beam ? static_cast<std::size_t>(beams.rows()) : d();
    }
    double position(std::size_t k) const { return offset + static_cast<double>(k * stride()); }

    void validate() const
    {
        if (values.rows() == 0 || values.cols() == 0)
            throw ConfigError("SampledPrecoders: empty sample matrix");
        if (n_rb == 0 || n_rb % m() != 0)
            throw ConfigError("SampledPrecoders: sample count M (" + std::to_string(m()) + ") must divide N_RB (" +
                              std::to_string(n_rb) + ")");
        if (offset < 0.0 || offset >= static_cast<double>(stride()))
            throw ConfigError("SampledPrecoders: offset must lie in [0, stride)");
        if (domain == Domain::beam && static_cast<std::size_t>(beams.cols()) != d())
            throw ConfigError("SampledPrecoders: beam matrix has " + std::to_string(beams.cols()) +
                              " columns, values have " + std::to_string(d()));
    }

    // Maps rows of domain coefficients (rows x D) to antenna-domain precoders (rows x N_a).
    CMat to_antenna(const CMat &coeffs) const
    {
        if (domain == Domain::antenna)
            return coeffs;
        return coeffs * beams.transpose() / static_cast<double>(d());
    }
};

// RB-level precoders, row f = w_f.
struct RbPrecoders
{
    CMat values; // N_RB x N_a
    bool unit_norm = false;
};

// Real delay-domain mask in [0, 1], one entry per delay bin.
struct Bpf
{
    std::vector<double> mask;
};

inline RbPrecoders finalize(const CMat &antenna_precoders)
{
    RbPrecoders out{antenna_precoders, true};
    if (!normalize_rows(out.values))
        throw NumericalError("cannot normalize RB precoders: zero row (degenerate mask or samples)");
    return out;
}

// Linear interpolation of real and imaginary parts between sample positions, endpoint hold
// outside. Returns N_RB x D in the sample domain, before normalization.
inline CMat interpolate_linear_raw(const SampledPrecoders &sp)
{
    sp.validate();
    const std::size_t m = sp.m();
    if (m < 2)
        throw ConfigError("interpolate_linear: need at least 2 samples");
    CMat out(static_cast<Eigen::Index>(sp.n_rb), sp.values.cols());
    std::size_t seg = 0;
    for (std::size_t f = 0; f < sp.n_rb; ++f)
    {
        const double x = static_cast<double>(f);
        const auto row = static_cast<Eigen::Index>(f);
        if (x <= sp.position(0))
        {
            out.row(row) = sp.values.row(0);
            continue;
        }
        if (x >= sp.position(m - 1))
        {
            out.row(row) = sp.values.row(static_cast<Eigen::Index>(m - 1));
            continue;
        }
        while (sp.position(seg + 1) < x)
            ++seg;
        const double x0 = sp.position(seg), x1 = sp.position(seg + 1);
        const double a = (x - x0) / (x1 - x0);
        out.row(row) = (1.0 - a) * sp.values.row(static_cast<Eigen::Index>(seg)) +
                       a * sp.values.row(static_cast<Eigen::Index>(seg + 1));
    }
    return out;
}

inline RbPrecoders interpolate_linear(const SampledPrecoders &sp)
{
    return finalize(sp.to_antenna(interpolate_linear_raw(sp)));
}

// DFT-tiling initial upsampling. Each column is taken to the M-point delay domain and tiled over
// the T = N_RB / M aliasing replicas: e[tau] = sqrt(T) x_s[tau mod M] exp(j 2 pi offset tau / N_RB).
// Returns N_RB x D with delay along rows.
inline CMat initial_upsample(const SampledPrecoders &sp)
{
    sp.validate();
    const std::size_t m = sp.m(), n = sp.n_rb;
    const double t = static_cast<double>(n / m);
    const CMat xs = to_delay(sp.values);
    CMat e(static_cast<Eigen::Index>(n), xs.cols());
    for (std::size_t tau = 0; tau < n; ++tau)
    {
        const cd shift = sp.offset == 0.0
                             ? cd(1.0, 0.0)
                             : std::polar(1.0, 2.0 * std::numbers::pi * sp.offset * static_cast<double>(tau) /
                                                   static_cast<double>(n));
        e.row(static_cast<Eigen::Index>(tau)) = std::sqrt(t) * shift * xs.row(static_cast<Eigen::Index>(tau % m));
    }
    return e;
}

// Deterministic UL-reciprocity mask: within every residue class {t + kM}, replicas are weighted
// by their share of UL power. Empty classes get the uniform weight 1/T.
inline Bpf reciprocity_bpf(const channel::Pdp &ul_pdp, std::size_t m)
{
    const std::size_t n = ul_pdp.size();
    if (m == 0 || n == 0 || n % m != 0)
        throw ConfigError("reciprocity_bpf: sample count M (" + std::to_string(m) + ") must divide the PDP length (" +
                          std::to_string(n) + ")");
    const std::size_t t = n / m;
    Bpf bpf;
    bpf.mask.assign(n, 0.0);
    for (std::size_t r = 0; r < m; ++r)
    {
        double s = 0.0;
        for (std::size_t k = 0; k < t; ++k)
            s += ul_pdp.p[r + k * m];
        for (std::size_t k = 0; k < t; ++k)
            bpf.mask[r + k * m] = s > 0.0 ? ul_pdp.p[r + k * m] / s : 1.0 / static_cast<double>(t);
    }
    return bpf;
}

// Masks the extended delay tensor and returns to frequency: N_RB x D in the sample domain.
inline CMat apply_bpf_raw(const CMat &extended, const Bpf &bpf)
{
    if (static_cast<std::size_t>(extended.rows()) != bpf.mask.size())
        throw ConfigError("apply_bpf: mask length " + std::to_string(bpf.mask.size()) + " vs " +
                          std::to_string(extended.rows()) + " delay bins");
    CMat masked = extended;
    for (Eigen::Index tau = 0; tau < masked.rows(); ++tau)
        masked.row(tau) *= bpf.mask[static_cast<std::size_t>(tau)];
    return to_freq(masked);
}

inline RbPrecoders apply_bpf(const CMat &extended, const Bpf &bpf, const SampledPrecoders &sp)
{
    return finalize(sp.to_antenna(apply_bpf_raw(extended, bpf)));
}

// initial_upsample -> reciprocity_bpf -> apply_bpf.
inline RbPrecoders deterministic_upsample(const SampledPrecoders &sp, const channel::Pdp &ul_pdp)
{
    return apply_bpf(initial_upsample(sp), reciprocity_bpf(ul_pdp, sp.m()), sp);
}

// 1 - mean_f |h_f^H w_f| / (|h_f| |w_f|).
inline double loss_neg_gain(const CMat &w, const CMat &h) { return 1.0 - per_rb_gain(w, h).mean(); }

inline double loss_neg_gain(const RbPrecoders &w, const CMat &h) { return loss_neg_gain(w.values, h); }

} // namespace srp::upsample
