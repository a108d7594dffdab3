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

#include "codebook.hpp"
#include "errors.hpp"

#include <boost/archive/iterators/base64_from_binary.hpp>
#include <boost/archive/iterators/binary_from_base64.hpp>
#include <boost/archive/iterators/transform_width.hpp>
#include <json.hpp>

#include <bit>
#include <cstdint>
#include <string>
#include <vector>

namespace srp::codebook
{

inline constexpr const char *report_schema = "srp.report/1";

namespace detail
{

inline std::string base64_encode(const std::vector<unsigned char> &bytes)
{
    using namespace boost::archive::iterators;
    using It = base64_from_binary<transform_width<std::vector<unsigned char>::const_iterator, 6, 8>>;
    std::string out(It(bytes.begin()), It(bytes.end()));
    out.append((3 - bytes.size() % 3) % 3, '=');
    return out;
}

inline std::vector<unsigned char> base64_decode(std::string text)
{
    using namespace boost::archive::iterators;
    using It = transform_width<binary_from_base64<std::string::const_iterator>, 8, 6>;
    std::size_t pad = 0;
    while (!text.empty() && text.back() == '=')
    {
        text.pop_back();
        ++pad;
    }
    if (pad > 2)
        throw DataError("base64: invalid padding");
    try
    {
        std::vector<unsigned char> out(It(text.begin()), It(text.end()));
        // transform_width emits a trailing partial byte for padded input
        const std::size_t expected = text.size() * 6 / 8;
        out.resize(expected);
        return out;
    }
    catch (const std::exception &e)
    {
        throw DataError(std::string("base64: ") + e.what());
    }
}

// Interleaved (re, im) little-endian float32.
inline std::string encode_complex_f32(const std::vector<cd> &values)
{
    std::vector<unsigned char> bytes;
    bytes.reserve(values.size() * 8);
    auto put = [&](double v) {
        const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
        for (int b = 0; b < 4; ++b)
            bytes.push_back(static_cast<unsigned char>((bits >> (8 * b)) & 0xFFu));
    };
    for (const auto &z : values)
    {
        put(z.real());
        put(z.imag());
    }
    return base64_encode(bytes);
}

inline std::vector<cd> decode_complex_f32(const std::string &text, std::size_t count)
{
    const auto bytes = base64_decode(text);
    if (bytes.size() != count * 8)
        throw DataError("coefficient blob holds " + std::to_string(bytes.size()) + " bytes, expected " +
                        std::to_string(count * 8));
    auto get = [&](std::size_t off) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b)
            bits |= static_cast<std::uint32_t>(bytes[off + static_cast<std::size_t>(b)]) << (8 * b);
        return static_cast<double>(std::bit_cast<float>(bits));
    };
    std::vector<cd> out(count);
    for (std::size_t i = 0; i < count; ++i)
        out[i] = cd(get(8 * i), get(8 * i + 4));
    return out;
}

inline void require_schema(const nlohmann::json &j, const std::string &kind)
{
    if (j.value("schema", "") != report_schema)
        throw DataError("report schema mismatch: expected " + std::string(report_schema));
    if (j.value("kind", "") != kind)
        throw DataError("report kind mismatch: expected " + kind + ", got " + j.value("kind", "<none>"));
}

} // namespace detail

inline nlohmann::json report_to_json(const TypeIReport &rep)
{
    return {{"schema", report_schema},
            {"kind", "type1"},
            {"n_rb", rep.grid.n_rb},
            {"n_rbpsb", rep.grid.n_rbpsb},
            {"beams", rep.beams}};
}

inline nlohmann::json report_to_json(const TypeIIReport &rep)
{
    std::vector<cd> coeffs;
    for (const auto &a : rep.alpha)
        for (Eigen::Index i = 0; i < a.size(); ++i)
            coeffs.push_back(a(i));
    return {{"schema", report_schema},
            {"kind", "type2"},
            {"n_rb", rep.grid.n_rb},
            {"n_rbpsb", rep.grid.n_rbpsb},
            {"L", rep.n_beams},
            {"criterion", to_string(rep.criterion)},
            {"beams", rep.beams},
            {"coefficients", {{"encoding", "base64-f32le-complex"}, {"count", coeffs.size()},
                              {"data", detail::encode_complex_f32(coeffs)}}}};
}

inline nlohmann::json report_to_json(const ETypeIIReport &rep)
{
    std::vector<cd> coeffs;
    nlohmann::json positions = nlohmann::json::array();
    for (const auto &e : rep.entries)
    {
        coeffs.push_back(e.value);
        positions.push_back({e.beam, e.tap});
    }
    return {{"schema", report_schema},
            {"kind", "etype2"},
            {"variant", to_string(rep.variant)},
            {"n_rb", rep.n_rb},
            {"n_rbpsb", rep.n_rbpsb},
            {"sample_offset", rep.sample_offset},
            {"M_v", rep.m_v},
            {"R", rep.r},
            {"beams", rep.beams},
            {"positions", positions},
            {"coefficients", {{"encoding", "base64-f32le-complex"}, {"count", coeffs.size()},
                              {"data", detail::encode_complex_f32(coeffs)}}}};
}

inline TypeIReport type1_from_json(const nlohmann::json &j)
{
    detail::require_schema(j, "type1");
    TypeIReport rep;
    rep.grid = {j.at("n_rb").get<std::size_t>(), j.at("n_rbpsb").get<std::size_t>()};
    rep.beams = j.at("beams").get<std::vector<std::size_t>>();
    return rep;
}

inline TypeIIReport type2_from_json(const nlohmann::json &j)
{
    detail::require_schema(j, "type2");
    TypeIIReport rep;
    rep.grid = {j.at("n_rb").get<std::size_t>(), j.at("n_rbpsb").get<std::size_t>()};
    rep.n_beams = j.at("L").get<std::size_t>();
    rep.criterion = criterion_from_string(j.at("criterion").get<std::string>());
    rep.beams = j.at("beams").get<std::vector<std::vector<std::size_t>>>();
    const auto &c = j.at("coefficients");
    const auto coeffs = detail::decode_complex_f32(c.at("data").get<std::string>(), c.at("count").get<std::size_t>());
    if (coeffs.size() != rep.beams.size() * rep.n_beams)
        throw DataError("type2 report: coefficient count does not match N_3 * L");
    for (std::size_t s = 0; s < rep.beams.size(); ++s)
    {
        if (rep.beams[s].size() != rep.n_beams)
            throw DataError("type2 report: SB " + std::to_string(s) + " does not list L beams");
        CVec a(static_cast<Eigen::Index>(rep.n_beams));
        for (std::size_t i = 0; i < rep.n_beams; ++i)
            a(static_cast<Eigen::Index>(i)) = coeffs[s * rep.n_beams + i];
        rep.alpha.push_back(a);
    }
    return rep;
}

inline ETypeIIReport etype2_from_json(const nlohmann::json &j)
{
    detail::require_schema(j, "etype2");
    ETypeIIReport rep;
    rep.variant = variant_from_string(j.at("variant").get<std::string>());
    rep.n_rb = j.at("n_rb").get<std::size_t>();
    rep.n_rbpsb = j.at("n_rbpsb").get<std::size_t>();
    rep.sample_offset = j.at("sample_offset").get<std::size_t>();
    rep.m_v = j.at("M_v").get<std::size_t>();
    rep.r = j.at("R").get<double>();
    rep.beams = j.at("beams").get<std::vector<std::size_t>>();
    const auto positions = j.at("positions").get<std::vector<std::array<std::size_t, 2>>>();
    const auto &c = j.at("coefficients");
    const auto coeffs = detail::decode_complex_f32(c.at("data").get<std::string>(), c.at("count").get<std::size_t>());
    if (coeffs.size() != positions.size())
        throw DataError("etype2 report: " + std::to_string(positions.size()) + " positions but " +
                        std::to_string(coeffs.size()) + " coefficients");
    for (std::size_t i = 0; i < coeffs.size(); ++i)
        rep.entries.push_back({positions[i][0], positions[i][1], coeffs[i]});
    return rep;
}

} // namespace srp::codebook
