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

#include "../errors.hpp"
#include "tensor.hpp"

#include <json.hpp>

#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace srp::nn
{

namespace detail
{

inline void put_f64_le(std::vector<char> &out, double v)
{
    auto bits = std::bit_cast<std::uint64_t>(v);
    for (int b = 0; b < 8; ++b)
        out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFFu));
}

inline double get_f64_le(const char *p)
{
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b)
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(p[b])) << (8 * b);
    return std::bit_cast<double>(bits);
}

} // namespace detail

struct Checkpoint
{
    std::string kind;             // "srpnet", "switch", ...
    nlohmann::json hyperparameters = nlohmann::json::object();
    ParamList params;
};

inline constexpr int checkpoint_format_version = 1;

// Writes `<path>` (JSON manifest) and `<path>.bin` (little-endian float64 values in manifest order).
inline void save_checkpoint(const std::filesystem::path &path, const Checkpoint &ckpt)
{
    nlohmann::json manifest;
    manifest["format"] = "srp.checkpoint";
    manifest["version"] = checkpoint_format_version;
    manifest["kind"] = ckpt.kind;
    manifest["hyperparameters"] = ckpt.hyperparameters;
    std::vector<char> blob;
    blob.reserve(ckpt.params.numel() * 8);
    nlohmann::json tensors = nlohmann::json::array();
    for (const auto &p : ckpt.params)
    {
        tensors.push_back({{"name", p.name}, {"shape", p.value.shape()}, {"offset", blob.size()}, {"count", p.value.size()}});
        for (double v : p.value.data())
            detail::put_f64_le(blob, v);
    }
    const auto blob_path = std::filesystem::path(path.string() + ".bin");
    manifest["tensors"] = tensors;
    manifest["blob"] = blob_path.filename().string();
    manifest["blob_bytes"] = blob.size();

    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream js(path, std::ios::binary);
    if (!js)
        throw DataError("cannot write checkpoint manifest " + path.string());
    js << manifest.dump(2) << '\n';
    std::ofstream bin(blob_path, std::ios::binary);
    if (!bin)
        throw DataError("cannot write checkpoint blob " + blob_path.string());
    bin.write(blob.data(), static_cast<std::streamsize>(blob.size()));
    if (!js || !bin)
        throw DataError("short write on checkpoint " + path.string());
}

inline Checkpoint load_checkpoint(const std::filesystem::path &path)
{
    std::ifstream js(path, std::ios::binary);
    if (!js)
        throw DataError("missing checkpoint " + path.string());
    nlohmann::json manifest;
    try
    {
        js >> manifest;
    }
    catch (const nlohmann::json::exception &e)
    {
        throw DataError("malformed checkpoint manifest " + path.string() + ": " + e.what());
    }
    if (manifest.value("format", "") != "srp.checkpoint")
        throw DataError(path.string() + " is not an srp checkpoint manifest");
    if (manifest.value("version", 0) != checkpoint_format_version)
        throw DataError(path.string() + ": unsupported checkpoint version");

    const auto blob_path = path.parent_path() / manifest.at("blob").get<std::string>();
    std::ifstream bin(blob_path, std::ios::binary);
    if (!bin)
        throw DataError("missing checkpoint blob " + blob_path.string());
    std::vector<char> blob((std::istreambuf_iterator<char>(bin)), std::istreambuf_iterator<char>());
    if (blob.size() != manifest.at("blob_bytes").get<std::size_t>())
        throw DataError("checkpoint blob " + blob_path.string() + " has " + std::to_string(blob.size()) +
                        " bytes, manifest says " + manifest.at("blob_bytes").dump());

    Checkpoint ckpt;
    ckpt.kind = manifest.value("kind", "");
    ckpt.hyperparameters = manifest.value("hyperparameters", nlohmann::json::object());
    for (const auto &t : manifest.at("tensors"))
    {
        const auto shape = t.at("shape").get<Shape>();
        const auto offset = t.at("offset").get<std::size_t>();
        const auto count = t.at("count").get<std::size_t>();
        if (count != shape_numel(shape) || offset + 8 * count > blob.size())
            throw DataError("checkpoint tensor '" + t.at("name").get<std::string>() + "' out of blob bounds");
        std::vector<double> data(count);
        for (std::size_t i = 0; i < count; ++i)
            data[i] = detail::get_f64_le(blob.data() + offset + 8 * i);
        ckpt.params.add(t.at("name").get<std::string>(), Tensor(shape, std::move(data)));
    }
    return ckpt;
}

} // namespace srp::nn
