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

#include "../codebook.hpp"
#include "../srpnet.hpp"
#include "../upsample.hpp"
#include "dataset.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace srp::harness
{

enum class SchemeKind
{
    type1,
    type2,
    etype2
};

inline std::string to_string(SchemeKind k)
{
    switch (k)
    {
    case SchemeKind::type1: return "type1";
    case SchemeKind::type2: return "type2";
    case SchemeKind::etype2: return "etype2";
    }
    return "?";
}

inline SchemeKind scheme_kind_from_string(const std::string &s)
{
    for (auto k : {SchemeKind::type1, SchemeKind::type2, SchemeKind::etype2})
        if (s == to_string(k))
            return k;
    throw ConfigError("unknown precoder scheme '" + s + "' (expected type1|type2|etype2)");
}

// One feedback configuration. n3 is the SB count (Type I/II and truncated eType II).
struct SchemeSpec
{
    SchemeKind kind = SchemeKind::etype2;
    codebook::EType2Variant variant = codebook::EType2Variant::modified;
    codebook::Criterion criterion = codebook::Criterion::modified;
    std::size_t n_beams = 4;
    std::size_t n3 = 12;
    std::size_t m_v = 12;
    double r = 1.0;
    std::size_t sample_offset = 0;
    std::size_t oversampling = 4;

    std::string label() const
    {
        char r_buf[32];
        std::snprintf(r_buf, sizeof r_buf, "%g", r);
        switch (kind)
        {
        case SchemeKind::type1: return "type1_n3=" + std::to_string(n3);
        case SchemeKind::type2:
            return "type2_" + codebook::to_string(criterion) + "_n3=" + std::to_string(n3) +
                   "_L=" + std::to_string(n_beams);
        case SchemeKind::etype2:
            return "etype2_" + codebook::to_string(variant) + "_mv=" + std::to_string(m_v) + "_r=" + r_buf +
                   (variant == codebook::EType2Variant::truncated ? "_n3=" + std::to_string(n3) : std::string{}) +
                   "_L=" + std::to_string(n_beams);
        }
        return "?";
    }

    codebook::SbGrid grid(std::size_t n_rb) const
    {
        if (n3 == 0 || n_rb % n3 != 0)
            throw ConfigError("scheme " + label() + ": n3 must divide N_RB (" + std::to_string(n_rb) + ")");
        return {n_rb, n_rb / n3};
    }
};

inline void to_json(nlohmann::json &j, const SchemeSpec &s)
{
    j = nlohmann::json{{"kind", to_string(s.kind)},         {"variant", codebook::to_string(s.variant)},
                       {"criterion", codebook::to_string(s.criterion)}, {"n_beams", s.n_beams},
                       {"n3", s.n3},                        {"m_v", s.m_v},
                       {"r", s.r},                          {"sample_offset", s.sample_offset},
                       {"oversampling", s.oversampling}};
}

inline void from_json(const nlohmann::json &j, SchemeSpec &s)
{
    SchemeSpec d;
    s.kind = scheme_kind_from_string(j.value("kind", to_string(d.kind)));
    s.variant = codebook::variant_from_string(j.value("variant", codebook::to_string(d.variant)));
    s.criterion = codebook::criterion_from_string(j.value("criterion", codebook::to_string(d.criterion)));
    s.n_beams = j.value("n_beams", d.n_beams);
    s.n3 = j.value("n3", d.n3);
    s.m_v = j.value("m_v", d.m_v);
    s.r = j.value("r", d.r);
    s.sample_offset = j.value("sample_offset", d.sample_offset);
    s.oversampling = j.value("oversampling", d.oversampling);
}

// Sampled precoders recovered by the gNB from one report, plus the report's payload size.
struct Feedback
{
    upsample::SampledPrecoders sp;
    codebook::Overhead overhead;
};

// Encodes the DL channel with the scheme and decodes it as the gNB would.
inline Feedback make_feedback(const CMat &dl, const SchemeSpec &s, const codebook::BeamCodebook &cb)
{
    const auto n_rb = static_cast<std::size_t>(dl.rows());
    Feedback fb;
    fb.sp.n_rb = n_rb;
    switch (s.kind)
    {
    case SchemeKind::type1:
    {
        const auto grid = s.grid(n_rb);
        const auto rep = codebook::encode_type1(dl, cb, grid);
        fb.sp.values = codebook::decode_type1(rep, cb);
        fb.sp.offset = grid.center_offset();
        fb.overhead = codebook::type1_overhead(grid.n_sb(), cb.size());
        break;
    }
    case SchemeKind::type2:
    {
        const auto grid = s.grid(n_rb);
        const auto rep = codebook::encode_type2(dl, cb, grid, s.n_beams, s.criterion);
        fb.sp.values = codebook::decode_type2(rep, cb);
        fb.sp.offset = grid.center_offset();
        fb.overhead = codebook::type2_overhead(grid.n_sb(), s.n_beams, cb.size());
        break;
    }
    case SchemeKind::etype2:
    {
        const codebook::SbGrid grid =
            s.variant == codebook::EType2Variant::truncated ? s.grid(n_rb) : codebook::SbGrid{n_rb, 1};
        const codebook::ETypeIIConfig cfg{s.n_beams, s.m_v, s.r, s.variant, s.sample_offset};
        const auto rep = codebook::encode_etype2(dl, cb, grid, cfg);
        auto dec = codebook::decode_etype2(rep, cb);
        fb.sp.values = std::move(dec.samples);
        fb.sp.beams = std::move(dec.beams);
        fb.sp.domain = upsample::Domain::beam;
        fb.sp.offset = rep.sample_position_offset();
        fb.overhead = codebook::etype2_overhead(s.n_beams, s.m_v, s.r, cb.size());
        break;
    }
    }
    fb.sp.validate();
    return fb;
}

enum class Upsampler
{
    interp,
    srpnet,
    srpnet_det
};

inline std::string to_string(Upsampler u)
{
    switch (u)
    {
    case Upsampler::interp: return "interp";
    case Upsampler::srpnet: return "srpnet";
    case Upsampler::srpnet_det: return "srpnet_det";
    }
    return "?";
}

inline Upsampler upsampler_from_string(const std::string &s)
{
    for (auto u : {Upsampler::interp, Upsampler::srpnet, Upsampler::srpnet_det})
        if (s == to_string(u))
            return u;
    throw ConfigError("unknown upsampler '" + s + "' (expected interp|srpnet|srpnet_det)");
}

// RB-level antenna-domain precoders (unit-norm rows).
inline CMat run_upsampler(Upsampler u, const upsample::SampledPrecoders &sp, const channel::Pdp &ul_pdp,
                          const upsample::SrpnetParams *theta)
{
    switch (u)
    {
    case Upsampler::interp: return upsample::interpolate_linear(sp).values;
    case Upsampler::srpnet_det: return upsample::deterministic_upsample(sp, ul_pdp).values;
    case Upsampler::srpnet:
        if (theta == nullptr)
            throw ConfigError("upsampler 'srpnet' requires an SRPNet checkpoint (srpnet_checkpoint)");
        return upsample::srpnet_forward(sp, ul_pdp, *theta).values;
    }
    throw ConfigError("run_upsampler: unknown upsampler");
}

// Training samples: feedback of the given scheme on each selected channel.
inline std::vector<upsample::SrpnetSample> make_srpnet_samples(const Dataset &ds, const std::vector<std::size_t> &idx,
                                                               const SchemeSpec &scheme,
                                                               const upsample::SrpnetConfig &arch,
                                                               std::size_t threads = 1)
{
    const auto cb = codebook::build_codebook(ds.config.n_ant, scheme.oversampling);
    std::vector<upsample::SrpnetSample> out(idx.size());
    parallel_for(idx.size(), threads, [&](std::size_t i) {
        const std::size_t ue = idx[i];
        const auto fb = make_feedback(ds.dl[ue], scheme, cb);
        out[i].input = upsample::prepare_srpnet_input(fb.sp, ds.ul_pdp(ue), arch);
        out[i].dl = ds.dl[ue];
    });
    return out;
}

} // namespace srp::harness
