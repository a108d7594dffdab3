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

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <vector>

namespace srp::codebook
{

// Oversampled DFT beams: column m = exp(j 2 pi n m / (O N_a)) / sqrt(N_a).
struct BeamCodebook
{
    CMat beams;
    std::size_t n_ant = 0;
    std::size_t oversampling = 1;

    std::size_t size() const noexcept { return static_cast<std::size_t>(beams.cols()); }
    CVec beam(std::size_t m) const { return beams.col(static_cast<Eigen::Index>(m)); }
};

inline BeamCodebook build_codebook(std::size_t n_ant, std::size_t oversampling = 4)
{
    if (n_ant < 2)
        throw ConfigError("build_codebook: n_ant must be >= 2");
    if (oversampling < 1)
        throw ConfigError("build_codebook: oversampling must be >= 1");
    BeamCodebook cb;
    cb.n_ant = n_ant;
    cb.oversampling = oversampling;
    const std::size_t n_beams = n_ant * oversampling;
    cb.beams.resize(static_cast<Eigen::Index>(n_ant), static_cast<Eigen::Index>(n_beams));
    const double scale = 1.0 / std::sqrt(static_cast<double>(n_ant));
    for (std::size_t n = 0; n < n_ant; ++n)
        for (std::size_t m = 0; m < n_beams; ++m)
        {
            const double ang =
                2.0 * std::numbers::pi * static_cast<double>((n * m) % n_beams) / static_cast<double>(n_beams);
            cb.beams(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(m)) = std::polar(scale, ang);
        }
    return cb;
}

// Subband partition of the bandwidth part.
struct SbGrid
{
    std::size_t n_rb = 0;
    std::size_t n_rbpsb = 1;

    std::size_t n_sb() const { return n_rb / n_rbpsb; }
    // RB position represented by an SB average (the SB center).
    double center_offset() const { return 0.5 * static_cast<double>(n_rbpsb - 1); }

    void validate() const
    {
        if (n_rb == 0 || n_rbpsb == 0)
            throw ConfigError("SbGrid: n_rb and n_rbpsb must be positive");
        if (n_rb % n_rbpsb != 0)
            throw ConfigError("SbGrid: n_rbpsb (" + std::to_string(n_rbpsb) + ") must divide n_rb (" +
                              std::to_string(n_rb) + ")");
    }
};

// SB channel = arithmetic mean of its member RB channels.
inline CMat sb_reduce(const CMat &csi, const SbGrid &grid)
{
    grid.validate();
    if (static_cast<std::size_t>(csi.rows()) != grid.n_rb)
        throw ConfigError("sb_reduce: csi has " + std::to_string(csi.rows()) + " RBs, grid expects " +
                          std::to_string(grid.n_rb));
    const auto n_sb = static_cast<Eigen::Index>(grid.n_sb());
    const auto step = static_cast<Eigen::Index>(grid.n_rbpsb);
    CMat out(n_sb, csi.cols());
    for (Eigen::Index s = 0; s < n_sb; ++s)
        out.row(s) = csi.middleRows(s * step, step).colwise().mean();
    return out;
}

// |h^H w| for every codebook column.
inline Eigen::VectorXd beam_scores(const CVec &h, const BeamCodebook &cb)
{
    return (cb.beams.adjoint() * h).cwiseAbs();
}

// Indices of the k largest scores, ties to the lower index; returned in selection order.
inline std::vector<std::size_t> top_k_indices(const Eigen::VectorXd &scores, std::size_t k)
{
    std::vector<std::size_t> idx(static_cast<std::size_t>(scores.size()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
        return scores(static_cast<Eigen::Index>(a)) > scores(static_cast<Eigen::Index>(b));
    });
    idx.resize(std::min(k, idx.size()));
    return idx;
}

// Type I: w = argmax_w |h^H w| over the codebook; ties to the lowest index.
inline std::size_t select_type1(const CVec &h, const BeamCodebook &cb)
{
    if (h.size() != static_cast<Eigen::Index>(cb.n_ant))
        throw ConfigError("select_type1: channel length does not match codebook");
    if (!(h.norm() > 0.0))
        throw NumericalError("select_type1: zero channel vector");
    const auto scores = beam_scores(h, cb);
    std::size_t best = 0;
    for (Eigen::Index m = 1; m < scores.size(); ++m)
        if (scores(m) > scores(static_cast<Eigen::Index>(best)))
            best = static_cast<std::size_t>(m);
    return best;
}

enum class Criterion
{
    original, // matched (conjugate-projection) combining
    modified  // least-squares fit to the normalized channel
};

inline std::string to_string(Criterion c) { return c == Criterion::original ? "original" : "modified"; }

inline Criterion criterion_from_string(const std::string &s)
{
    if (s == "original")
        return Criterion::original;
    if (s == "modified")
        return Criterion::modified;
    throw ConfigError("unknown criterion '" + s + "' (expected original|modified)");
}

inline CMat gather_beams(const BeamCodebook &cb, const std::vector<std::size_t> &idx)
{
    CMat b(static_cast<Eigen::Index>(cb.n_ant), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i)
        b.col(static_cast<Eigen::Index>(i)) = cb.beams.col(static_cast<Eigen::Index>(idx[i]));
    return b;
}

inline constexpr double ridge = 1e-12;

// Least-squares solver for argmin_c |y - B c| shared across many right-hand sides.
class BeamLeastSquares
{
public:
    explicit BeamLeastSquares(const CMat &b) : b_(b), qr_(b)
    {
        regularized_ = qr_.rank() < b.cols();
        if (regularized_)
        {
            CMat gram = b.adjoint() * b;
            gram.diagonal().array() += ridge;
            ridge_ = gram.ldlt();
        }
    }

    bool regularized() const noexcept { return regularized_; }

    CVec solve(const CVec &y) const
    {
        if (regularized_)
            return ridge_.solve(b_.adjoint() * y);
        return qr_.solve(y);
    }

private:
    CMat b_;
    Eigen::ColPivHouseholderQR<CMat> qr_;
    Eigen::LDLT<CMat> ridge_;
    bool regularized_ = false;
};

struct Type2Selection
{
    std::vector<std::size_t> beams;
    CVec alpha;
    bool regularized = false;
};

// Type II: L strongest beams, combining w = sum_i alpha_i w_i / L.
inline Type2Selection select_type2(const CVec &h, const BeamCodebook &cb, std::size_t n_beams, Criterion criterion)
{
    if (h.size() != static_cast<Eigen::Index>(cb.n_ant))
        throw ConfigError("select_type2: channel length does not match codebook");
    if (n_beams < 1 || n_beams > cb.size())
        throw ConfigError("select_type2: L must lie in [1, codebook size]");
    const double hn = h.norm();
    if (!(hn > 0.0))
        throw NumericalError("select_type2: zero channel vector");
    Type2Selection sel;
    sel.beams = top_k_indices(beam_scores(h, cb), n_beams);
    const CMat b = gather_beams(cb, sel.beams);
    const double l = static_cast<double>(n_beams);
    if (criterion == Criterion::original)
        sel.alpha = l * (b.adjoint() * h) / hn;
    else
    {
        BeamLeastSquares ls(b);
        sel.alpha = l * ls.solve(h / hn);
        sel.regularized = ls.regularized();
    }
    return sel;
}

inline CVec type2_precoder(const BeamCodebook &cb, const Type2Selection &sel)
{
    return gather_beams(cb, sel.beams) * sel.alpha / static_cast<double>(sel.beams.size());
}

// ---- reports --------------------------------------------------------------------------------

struct TypeIReport
{
    SbGrid grid;
    std::vector<std::size_t> beams; // PMI per SB
};

struct TypeIIReport
{
    SbGrid grid;
    std::size_t n_beams = 1;
    Criterion criterion = Criterion::modified;
    std::vector<std::vector<std::size_t>> beams; // per SB, L indices
    std::vector<CVec> alpha;                     // per SB, L coefficients
};

enum class EType2Variant
{
    truncated, // per-SB coefficients, keep the first M_v delay taps
    modified   // uniform RB sampling with M_v samples, full M_v-point delay transform
};

inline std::string to_string(EType2Variant v) { return v == EType2Variant::truncated ? "truncated" : "modified"; }

inline EType2Variant variant_from_string(const std::string &s)
{
    if (s == "truncated")
        return EType2Variant::truncated;
    if (s == "modified")
        return EType2Variant::modified;
    throw ConfigError("unknown eType II variant '" + s + "' (expected truncated|modified)");
}

struct DelayEntry
{
    std::size_t beam = 0; // position in the wideband beam list
    std::size_t tap = 0;  // delay tap < M_v
    cd value;
};

struct ETypeIIReport
{
    std::vector<std::size_t> beams; // L wideband beam indices
    EType2Variant variant = EType2Variant::modified;
    std::size_t m_v = 1;
    double r = 1.0;
    std::size_t n_rb = 0;
    std::size_t n_rbpsb = 1;      // SB size (truncated variant)
    std::size_t sample_offset = 0; // first sampled RB (modified variant)
    std::vector<DelayEntry> entries;

    std::size_t n_beams() const noexcept { return beams.size(); }
    std::size_t n_sb() const { return n_rb / n_rbpsb; }
    // Number of frequency samples the decoder reconstructs.
    std::size_t n_samples() const { return variant == EType2Variant::modified ? m_v : n_sb(); }
    std::size_t sample_stride() const { return variant == EType2Variant::modified ? n_rb / m_v : n_rbpsb; }
    double sample_position_offset() const
    {
        return variant == EType2Variant::modified ? static_cast<double>(sample_offset)
                                                  : 0.5 * static_cast<double>(n_rbpsb - 1);
    }
};

// Number of delay-domain coefficients kept after compression by R: ceil(L M_v / R), at least 1.
inline std::size_t kept_count(std::size_t n_beams, std::size_t m_v, double r)
{
    if (!(r >= 1.0))
        throw ConfigError("compression factor R must be >= 1");
    const double total = static_cast<double>(n_beams * m_v);
    const auto k = static_cast<std::size_t>(std::ceil(total / r - 1e-12));
    return std::clamp<std::size_t>(k, 1, n_beams * m_v);
}

// Strongest k entries of an L x M_v delay matrix; ties by (beam, tap) lexicographic order.
inline std::vector<DelayEntry> top_k_entries(const CMat &delay, std::size_t k)
{
    std::vector<DelayEntry> all;
    all.reserve(static_cast<std::size_t>(delay.size()));
    for (Eigen::Index b = 0; b < delay.rows(); ++b)
        for (Eigen::Index t = 0; t < delay.cols(); ++t)
            all.push_back({static_cast<std::size_t>(b), static_cast<std::size_t>(t), delay(b, t)});
    std::stable_sort(all.begin(), all.end(),
                     [](const DelayEntry &a, const DelayEntry &b) { return std::abs(a.value) > std::abs(b.value); });
    all.resize(std::min(k, all.size()));
    std::sort(all.begin(), all.end(),
              [](const DelayEntry &a, const DelayEntry &b) { return a.beam != b.beam ? a.beam < b.beam : a.tap < b.tap; });
    return all;
}

// L beams maximizing sum_f |h_f^H w|^2 over all rows of csi.
inline std::vector<std::size_t> select_wideband_beams(const CMat &csi, const BeamCodebook &cb, std::size_t n_beams)
{
    if (n_beams < 1 || n_beams > cb.size())
        throw ConfigError("wideband beam count L must lie in [1, codebook size]");
    const CMat proj = csi.conjugate() * cb.beams; // (rows x beams): h_f^H w
    const Eigen::VectorXd power = proj.cwiseAbs2().colwise().sum().transpose();
    return top_k_indices(power, n_beams);
}

struct ETypeIIConfig
{
    std::size_t n_beams = 4;
    std::size_t m_v = 12;
    double r = 1.0;
    EType2Variant variant = EType2Variant::modified;
    std::size_t sample_offset = 0;
};

inline ETypeIIReport encode_etype2(const CMat &csi, const BeamCodebook &cb, const SbGrid &grid, const ETypeIIConfig &cfg)
{
    grid.validate();
    const auto n_rb = static_cast<std::size_t>(csi.rows());
    if (n_rb != grid.n_rb || static_cast<std::size_t>(csi.cols()) != cb.n_ant)
        throw ConfigError("encode_etype2: csi shape does not match grid/codebook");
    if (cfg.m_v < 1)
        throw ConfigError("encode_etype2: M_v must be >= 1");
    if (cfg.variant == EType2Variant::modified)
    {
        if (n_rb % cfg.m_v != 0)
            throw ConfigError("encode_etype2: M_v (" + std::to_string(cfg.m_v) + ") must divide N_RB (" +
                              std::to_string(n_rb) + ") for the modified variant");
        if (cfg.sample_offset >= n_rb / cfg.m_v)
            throw ConfigError("encode_etype2: sample offset must be smaller than the stride N_RB / M_v");
    }
    else if (cfg.m_v > grid.n_sb())
        throw ConfigError("encode_etype2: M_v (" + std::to_string(cfg.m_v) + ") must not exceed N_3 (" +
                          std::to_string(grid.n_sb()) + ") for the truncated variant");
    const std::size_t keep = kept_count(cfg.n_beams, cfg.m_v, cfg.r);

    ETypeIIReport rep;
    rep.beams = select_wideband_beams(csi, cb, cfg.n_beams);
    rep.variant = cfg.variant;
    rep.m_v = cfg.m_v;
    rep.r = cfg.r;
    rep.n_rb = n_rb;
    rep.n_rbpsb = grid.n_rbpsb;
    rep.sample_offset = cfg.variant == EType2Variant::modified ? cfg.sample_offset : 0;

    const CMat b = gather_beams(cb, rep.beams);
    const BeamLeastSquares ls(b);
    const double l = static_cast<double>(cfg.n_beams);

    // Frequency samples (rows) on which the per-sample coefficients are computed.
    CMat freq;
    if (cfg.variant == EType2Variant::modified)
    {
        const std::size_t stride = n_rb / cfg.m_v;
        freq.resize(static_cast<Eigen::Index>(cfg.m_v), csi.cols());
        for (std::size_t k = 0; k < cfg.m_v; ++k)
            freq.row(static_cast<Eigen::Index>(k)) = csi.row(static_cast<Eigen::Index>(cfg.sample_offset + k * stride));
    }
    else
        freq = sb_reduce(csi, grid);

    CMat coeff(freq.rows(), static_cast<Eigen::Index>(cfg.n_beams));
    for (Eigen::Index f = 0; f < freq.rows(); ++f)
    {
        const CVec h = freq.row(f).transpose();
        const double hn = h.norm();
        if (!(hn > 0.0))
            throw NumericalError("encode_etype2: zero channel at sample " + std::to_string(f));
        coeff.row(f) = (l * ls.solve(h / hn)).transpose();
    }
    const CMat delay_full = to_delay(coeff).transpose(); // L x n_samples
    const CMat delay = delay_full.leftCols(static_cast<Eigen::Index>(cfg.m_v));
    rep.entries = top_k_entries(delay, keep);
    return rep;
}

struct ETypeIIDecoded
{
    CMat delay;   // L x M_v, unreported entries zero
    CMat samples; // n_samples x L, frequency-domain beam coefficients
    CMat beams;   // N_a x L
};

inline ETypeIIDecoded decode_etype2(const ETypeIIReport &rep, const BeamCodebook &cb)
{
    const std::size_t l = rep.n_beams();
    if (l == 0)
        throw DataError("decode_etype2: report has no beams");
    for (auto b : rep.beams)
        if (b >= cb.size())
            throw DataError("decode_etype2: beam index out of codebook range");
    ETypeIIDecoded out;
    out.beams = gather_beams(cb, rep.beams);
    out.delay = CMat::Zero(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(rep.m_v));
    std::vector<char> seen(l * rep.m_v, 0);
    for (const auto &e : rep.entries)
    {
        if (e.beam >= l || e.tap >= rep.m_v)
            throw DataError("decode_etype2: entry position out of range");
        auto &s = seen[e.beam * rep.m_v + e.tap];
        if (s)
            throw DataError("decode_etype2: duplicate entry at (beam " + std::to_string(e.beam) + ", tap " +
                            std::to_string(e.tap) + ")");
        s = 1;
        out.delay(static_cast<Eigen::Index>(e.beam), static_cast<Eigen::Index>(e.tap)) = e.value;
    }
    const std::size_t n = rep.n_samples();
    CMat padded = CMat::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(l));
    padded.topRows(static_cast<Eigen::Index>(rep.m_v)) = out.delay.transpose();
    out.samples = to_freq(padded);
    return out;
}

inline TypeIReport encode_type1(const CMat &csi, const BeamCodebook &cb, const SbGrid &grid)
{
    const CMat sb = sb_reduce(csi, grid);
    TypeIReport rep;
    rep.grid = grid;
    for (Eigen::Index s = 0; s < sb.rows(); ++s)
        rep.beams.push_back(select_type1(sb.row(s).transpose(), cb));
    return rep;
}

inline TypeIIReport encode_type2(const CMat &csi, const BeamCodebook &cb, const SbGrid &grid, std::size_t n_beams,
                                 Criterion criterion)
{
    const CMat sb = sb_reduce(csi, grid);
    TypeIIReport rep;
    rep.grid = grid;
    rep.n_beams = n_beams;
    rep.criterion = criterion;
    for (Eigen::Index s = 0; s < sb.rows(); ++s)
    {
        auto sel = select_type2(sb.row(s).transpose(), cb, n_beams, criterion);
        rep.beams.push_back(std::move(sel.beams));
        rep.alpha.push_back(std::move(sel.alpha));
    }
    return rep;
}

// SB-level precoders (N_3 x N_a) carried by a Type I report.
inline CMat decode_type1(const TypeIReport &rep, const BeamCodebook &cb)
{
    CMat w(static_cast<Eigen::Index>(rep.beams.size()), static_cast<Eigen::Index>(cb.n_ant));
    for (std::size_t s = 0; s < rep.beams.size(); ++s)
    {
        if (rep.beams[s] >= cb.size())
            throw DataError("decode_type1: beam index out of codebook range");
        w.row(static_cast<Eigen::Index>(s)) = cb.beams.col(static_cast<Eigen::Index>(rep.beams[s])).transpose();
    }
    return w;
}

// SB-level precoders (N_3 x N_a) carried by a Type II report.
inline CMat decode_type2(const TypeIIReport &rep, const BeamCodebook &cb)
{
    CMat w(static_cast<Eigen::Index>(rep.beams.size()), static_cast<Eigen::Index>(cb.n_ant));
    for (std::size_t s = 0; s < rep.beams.size(); ++s)
    {
        for (auto b : rep.beams[s])
            if (b >= cb.size())
                throw DataError("decode_type2: beam index out of codebook range");
        const Type2Selection sel{rep.beams[s], rep.alpha[s], false};
        w.row(static_cast<Eigen::Index>(s)) = type2_precoder(cb, sel).transpose();
    }
    return w;
}

// ---- feedback overhead ----------------------------------------------------------------------

struct Overhead
{
    std::size_t coefficients = 0; // complex coefficients fed back
    std::size_t index_bits = 0;   // PMI / beam-combination indices and position bitmaps
};

inline std::size_t log2_binomial_bits(std::size_t n, std::size_t k)
{
    if (k == 0 || k >= n)
        return 0;
    const double v = (std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
                      std::lgamma(static_cast<double>(n - k) + 1.0)) /
                     std::numbers::ln2;
    return static_cast<std::size_t>(std::ceil(v - 1e-9));
}

inline Overhead type1_overhead(std::size_t n_sb, std::size_t codebook_size)
{
    return {0, n_sb * log2_binomial_bits(codebook_size, 1)};
}

inline Overhead type2_overhead(std::size_t n_sb, std::size_t n_beams, std::size_t codebook_size)
{
    return {n_sb * n_beams, n_sb * log2_binomial_bits(codebook_size, n_beams)};
}

inline Overhead etype2_overhead(std::size_t n_beams, std::size_t m_v, double r, std::size_t codebook_size)
{
    return {kept_count(n_beams, m_v, r), log2_binomial_bits(codebook_size, n_beams) + n_beams * m_v};
}

} // namespace srp::codebook
