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
#include "errors.hpp"
#include "numerics/adam.hpp"
#include "numerics/autodiff.hpp"
#include "numerics/checkpoint.hpp"
#include "upsample.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <thread>
#include <vector>

namespace srp::upsample
{

// Layer sizes of the upsampling network. All layers are convolutional, so the same weights apply
// to any antenna count, beam count or bandwidth.
struct SrpnetConfig
{
    std::size_t bpf_hidden = 8;
    std::size_t bpf_kernel = 7;
    std::size_t refine_hidden = 16;
    std::size_t refine_kernel_rows = 3;
    std::size_t refine_kernel_cols = 7;
    // Clamp applied to the logit of the reciprocity mask fed to the BPF network.
    double logit_clip = 12.0;
};

inline void to_json(nlohmann::json &j, const SrpnetConfig &c)
{
    j = nlohmann::json{{"bpf_hidden", c.bpf_hidden},
                       {"bpf_kernel", c.bpf_kernel},
                       {"refine_hidden", c.refine_hidden},
                       {"refine_kernel_rows", c.refine_kernel_rows},
                       {"refine_kernel_cols", c.refine_kernel_cols},
                       {"logit_clip", c.logit_clip}};
}

inline void from_json(const nlohmann::json &j, SrpnetConfig &c)
{
    SrpnetConfig d;
    c.bpf_hidden = j.value("bpf_hidden", d.bpf_hidden);
    c.bpf_kernel = j.value("bpf_kernel", d.bpf_kernel);
    c.refine_hidden = j.value("refine_hidden", d.refine_hidden);
    c.refine_kernel_rows = j.value("refine_kernel_rows", d.refine_kernel_rows);
    c.refine_kernel_cols = j.value("refine_kernel_cols", d.refine_kernel_cols);
    c.logit_clip = j.value("logit_clip", d.logit_clip);
}

// Parameter names, in checkpoint order.
inline constexpr std::array<const char *, 14> srpnet_param_names{
    "bpf.conv1.w", "bpf.conv1.b", "bpf.conv2.w", "bpf.conv2.b", "bd.conv1.w", "bd.conv1.b", "bd.conv2.w",
    "bd.conv2.b",  "bd.gain",     "af.conv1.w",  "af.conv1.b",  "af.conv2.w", "af.conv2.b", "af.gain"};

struct SrpnetParams
{
    SrpnetConfig config;
    nn::ParamList params;
};

inline std::vector<nn::Shape> srpnet_param_shapes(const SrpnetConfig &c)
{
    const auto h = c.bpf_hidden, k = c.bpf_kernel, r = c.refine_hidden;
    const auto kr = c.refine_kernel_rows, kc = c.refine_kernel_cols;
    return {{h, 1, k}, {h}, {1, h, k}, {1}, {r, 2, kr, kc}, {r}, {2, r, kr, kc}, {2}, {1},
            {r, 2, kr, kc}, {r}, {2, r, kr, kc}, {2}, {1}};
}

// He-uniform first layers, unit shortcut gains. With zero_last the output layers of all three
// sub-networks start at zero, so the network initially equals the deterministic pipeline.
inline SrpnetParams init_srpnet(const SrpnetConfig &cfg, std::uint64_t seed, bool zero_last = true)
{
    std::mt19937_64 rng(seed);
    SrpnetParams out;
    out.config = cfg;
    const auto shapes = srpnet_param_shapes(cfg);
    for (std::size_t i = 0; i < shapes.size(); ++i)
    {
        const std::string name = srpnet_param_names[i];
        nn::Tensor t(shapes[i], 0.0);
        const bool is_weight = name.ends_with(".w");
        const bool is_last = name.find("conv2") != std::string::npos;
        if (name.ends_with("gain"))
            t.fill(1.0);
        else if (is_weight && (!is_last || !zero_last))
        {
            const std::size_t fan_in = t.size() / shapes[i][0];
            const double bound = std::sqrt(6.0 / static_cast<double>(fan_in)) * (is_last ? 0.1 : 1.0);
            std::uniform_real_distribution<double> u(-bound, bound);
            for (auto &v : t.data())
                v = u(rng);
        }
        else if (!is_weight && !zero_last && is_last)
        {
            std::uniform_real_distribution<double> u(-0.01, 0.01);
            for (auto &v : t.data())
                v = u(rng);
        }
        out.params.add(name, std::move(t));
    }
    return out;
}

inline void check_srpnet_params(const SrpnetParams &p)
{
    const auto shapes = srpnet_param_shapes(p.config);
    if (p.params.size() != shapes.size())
        throw ConfigError("SRPNet parameters: expected " + std::to_string(shapes.size()) + " tensors, got " +
                          std::to_string(p.params.size()));
    for (std::size_t i = 0; i < shapes.size(); ++i)
    {
        if (p.params[i].name != srpnet_param_names[i])
            throw ConfigError("SRPNet parameters: tensor " + std::to_string(i) + " is '" + p.params[i].name +
                              "', expected '" + srpnet_param_names[i] + "'");
        if (p.params[i].value.shape() != shapes[i])
            throw nn::ShapeError(std::string("SRPNet parameter ") + srpnet_param_names[i], shapes[i],
                                 p.params[i].value.shape());
    }
}

enum class BpfSource
{
    learned,    // BPF design network
    reciprocity // deterministic reciprocity_bpf mask
};

// Parameter-independent tensors derived from one set of sampled precoders and its UL PDP.
struct SrpnetInput
{
    nn::Tensor extended;         // [2, D, N_RB], delay along the last axis, RMS-normalized
    nn::Tensor bpf_logits;       // [1, N_RB], clamped logit of the reciprocity mask
    nn::Tensor reciprocity_mask; // [N_RB]
    CMat to_freq;                // N_RB x N_RB unitary delay -> frequency
    CMat expand;                 // N_a x D beam expansion (beam domain), empty otherwise
    std::size_t n_ant = 0;
};

inline nn::Tensor complex_to_tensor(const CMat &m_rows_by_cols_transposed)
{
    // input: rows = N (last tensor axis), cols = D; output [2, D, N]
    const auto n = static_cast<std::size_t>(m_rows_by_cols_transposed.rows());
    const auto d = static_cast<std::size_t>(m_rows_by_cols_transposed.cols());
    nn::Tensor t({2, d, n});
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t f = 0; f < n; ++f)
        {
            const cd v = m_rows_by_cols_transposed(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(i));
            t[i * n + f] = v.real();
            t[d * n + i * n + f] = v.imag();
        }
    return t;
}

// [2, A, N] -> N x A
inline CMat tensor_to_complex(const nn::Tensor &t)
{
    const std::size_t a = t.dim(1), n = t.dim(2);
    CMat m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(a));
    for (std::size_t i = 0; i < a; ++i)
        for (std::size_t f = 0; f < n; ++f)
            m(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(i)) = cd(t[i * n + f], t[a * n + i * n + f]);
    return m;
}

inline SrpnetInput prepare_srpnet_input(const SampledPrecoders &sp, const channel::Pdp &ul_pdp, const SrpnetConfig &cfg)
{
    sp.validate();
    if (ul_pdp.size() != sp.n_rb)
        throw ConfigError("SRPNet: UL PDP has " + std::to_string(ul_pdp.size()) + " bins, precoders span " +
                          std::to_string(sp.n_rb) + " RBs");
    SrpnetInput in;
    CMat ext = initial_upsample(sp);
    const double rms = ext.norm() / std::sqrt(static_cast<double>(ext.size()));
    if (rms > 0.0)
        ext /= rms;
    in.extended = complex_to_tensor(ext);
    const Bpf bpf = reciprocity_bpf(ul_pdp, sp.m());
    in.reciprocity_mask = nn::Tensor({sp.n_rb}, bpf.mask);
    in.bpf_logits = nn::Tensor({1, sp.n_rb});
    for (std::size_t t = 0; t < sp.n_rb; ++t)
    {
        const double p = bpf.mask[t];
        double logit = std::log(p) - std::log1p(-p);
        if (std::isnan(logit))
            logit = 0.0;
        in.bpf_logits[t] = std::clamp(logit, -cfg.logit_clip, cfg.logit_clip);
    }
    in.to_freq = dft_matrix(sp.n_rb, -1);
    in.n_ant = sp.n_ant();
    if (sp.domain == Domain::beam)
        in.expand = sp.beams / static_cast<double>(sp.d());
    return in;
}

namespace detail
{

inline nn::Var refine(nn::Var x, const std::vector<nn::Var> &p, std::size_t first)
{
    nn::Var h = nn::relu(nn::conv2d(x, p[first], p[first + 1]));
    nn::Var r = nn::conv2d(h, p[first + 2], p[first + 3]);
    return nn::add(x, nn::mul_scalar(r, p[first + 4]));
}

} // namespace detail

// Forward graph. params must be registered in srpnet_param_names order. Output: unit-norm
// precoders as a [2, N_a, N_RB] tensor.
inline nn::Var srpnet_graph(nn::Tape &tape, const std::vector<nn::Var> &params, const SrpnetInput &in,
                            BpfSource source = BpfSource::learned)
{
    if (params.size() != srpnet_param_names.size())
        throw ConfigError("srpnet_graph: expected " + std::to_string(srpnet_param_names.size()) + " parameters");
    const std::size_t n = in.reciprocity_mask.size();
    nn::Var mask;
    if (source == BpfSource::learned)
    {
        nn::Var u = tape.constant(in.bpf_logits);
        nn::Var h = nn::relu(nn::conv1d(u, params[0], params[1]));
        nn::Var z = nn::conv1d(h, params[2], params[3]);
        mask = nn::reshape(nn::sigmoid(nn::add(u, z)), {n});
    }
    else
        mask = tape.constant(in.reciprocity_mask);

    nn::Var x = nn::scale_along(tape.constant(in.extended), mask, 2);
    x = detail::refine(x, params, 4);
    x = nn::complex_linear(x, in.to_freq, 2);
    if (in.expand.size() > 0)
        x = nn::complex_linear(x, in.expand, 1);
    x = detail::refine(x, params, 9);
    return nn::unit_norm_columns(x);
}

inline nn::Var srpnet_loss_graph(nn::Tape &tape, const std::vector<nn::Var> &params, const SrpnetInput &in,
                                 const CMat &dl, BpfSource source = BpfSource::learned)
{
    return nn::neg_gain_loss(srpnet_graph(tape, params, in, source), dl);
}

inline RbPrecoders srpnet_forward(const SrpnetInput &in, const SrpnetParams &theta,
                                  BpfSource source = BpfSource::learned)
{
    check_srpnet_params(theta);
    nn::Tape tape(false);
    const auto vars = tape.parameters(theta.params);
    const nn::Var w = srpnet_graph(tape, vars, in, source);
    return {tensor_to_complex(w.value()), true};
}

inline RbPrecoders srpnet_forward(const SampledPrecoders &sp, const channel::Pdp &ul_pdp, const SrpnetParams &theta,
                                  BpfSource source = BpfSource::learned)
{
    return srpnet_forward(prepare_srpnet_input(sp, ul_pdp, theta.config), theta, source);
}

// ---- training -------------------------------------------------------------------------------

struct SrpnetSample
{
    SrpnetInput input;
    CMat dl; // N_RB x N_a ground-truth DL channel
};

struct SrpnetTrainConfig
{
    std::size_t epochs = 200;
    std::size_t patience = 30;
    std::size_t batch_size = 32;
    double lr = 1e-3;
    std::uint64_t seed = 1;
    std::size_t threads = 1;
};

inline void to_json(nlohmann::json &j, const SrpnetTrainConfig &c)
{
    j = nlohmann::json{{"epochs", c.epochs}, {"patience", c.patience}, {"batch_size", c.batch_size},
                       {"lr", c.lr},         {"seed", c.seed},         {"threads", c.threads}};
}

inline void from_json(const nlohmann::json &j, SrpnetTrainConfig &c)
{
    SrpnetTrainConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.patience = j.value("patience", d.patience);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.lr = j.value("lr", d.lr);
    c.seed = j.value("seed", d.seed);
    c.threads = j.value("threads", d.threads);
}

struct EpochLog
{
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct SrpnetTrainResult
{
    SrpnetParams params; // lowest validation loss seen, including the initial parameters
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double initial_val_loss = 0.0;
    double best_val_loss = 0.0;
};

namespace detail
{

// Runs fn(i) for i in [0, count) over `threads` workers with a static partition.
template <class Fn> void parallel_for(std::size_t count, std::size_t threads, Fn &&fn)
{
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1)
    {
        for (std::size_t i = 0; i < count; ++i)
            fn(i);
        return;
    }
    std::vector<std::jthread> pool;
    std::vector<std::exception_ptr> errors(threads);
    for (std::size_t w = 0; w < threads; ++w)
        pool.emplace_back([&, w] {
            try
            {
                for (std::size_t i = w; i < count; i += threads)
                    fn(i);
            }
            catch (...)
            {
                errors[w] = std::current_exception();
            }
        });
    pool.clear();
    for (auto &e : errors)
        if (e)
            std::rethrow_exception(e);
}

} // namespace detail

inline double srpnet_mean_loss(const std::vector<SrpnetSample> &set, const SrpnetParams &theta, std::size_t threads = 1,
                               BpfSource source = BpfSource::learned)
{
    if (set.empty())
        throw ConfigError("srpnet_mean_loss: empty sample set");
    std::vector<double> losses(set.size());
    detail::parallel_for(set.size(), threads, [&](std::size_t i) {
        nn::Tape tape(false);
        const auto vars = tape.parameters(theta.params);
        losses[i] = srpnet_loss_graph(tape, vars, set[i].input, set[i].dl, source).value().item();
    });
    double s = 0.0;
    for (double l : losses)
        s += l;
    return s / static_cast<double>(set.size());
}

// Mini-batch Adam on the negative normalized gain, early-stopped on validation loss.
inline SrpnetTrainResult train_srpnet(const std::vector<SrpnetSample> &train, const std::vector<SrpnetSample> &val,
                                      SrpnetParams init, const SrpnetTrainConfig &hyper,
                                      const std::function<void(const EpochLog &)> &on_epoch = {})
{
    if (train.empty() || val.empty())
        throw ConfigError("train_srpnet: training and validation sets must be non-empty");
    if (hyper.batch_size == 0)
        throw ConfigError("train_srpnet: batch size must be positive");
    check_srpnet_params(init);

    SrpnetTrainResult res;
    SrpnetParams theta = std::move(init);
    res.initial_val_loss = srpnet_mean_loss(val, theta, hyper.threads);
    if (!std::isfinite(res.initial_val_loss))
        throw NumericalError("train_srpnet: non-finite validation loss at initialization");
    res.best_val_loss = res.initial_val_loss;
    res.params = theta;

    nn::Adam adam({hyper.lr});
    std::mt19937_64 rng(hyper.seed);
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::size_t since_best = 0;

    for (std::size_t epoch = 1; epoch <= hyper.epochs; ++epoch)
    {
        std::shuffle(order.begin(), order.end(), rng);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += hyper.batch_size)
        {
            const std::size_t count = std::min(hyper.batch_size, order.size() - start);
            std::vector<nn::ParamList> grads(count);
            std::vector<double> losses(count);
            detail::parallel_for(count, hyper.threads, [&](std::size_t i) {
                const auto &s = train[order[start + i]];
                nn::Tape tape;
                const auto vars = tape.parameters(theta.params);
                const nn::Var loss = srpnet_loss_graph(tape, vars, s.input, s.dl);
                tape.backward(loss);
                losses[i] = loss.value().item();
                grads[i] = tape.gradients();
            });
            nn::ParamList mean_grad = grads[0];
            for (std::size_t i = 1; i < count; ++i)
                for (std::size_t k = 0; k < mean_grad.size(); ++k)
                    for (std::size_t e = 0; e < mean_grad[k].value.size(); ++e)
                        mean_grad[k].value[e] += grads[i][k].value[e];
            for (auto &g : mean_grad)
                for (auto &v : g.value.data())
                    v /= static_cast<double>(count);
            for (double l : losses)
            {
                if (!std::isfinite(l))
                    throw NumericalError("train_srpnet: non-finite training loss at epoch " + std::to_string(epoch));
                epoch_loss += l;
            }
            adam.step(theta.params, mean_grad);
            if (!theta.params.all_finite())
                throw NumericalError("train_srpnet: parameters diverged at epoch " + std::to_string(epoch));
        }
        EpochLog entry{epoch, epoch_loss / static_cast<double>(train.size()), srpnet_mean_loss(val, theta, hyper.threads)};
        if (!std::isfinite(entry.val_loss))
            throw NumericalError("train_srpnet: non-finite validation loss at epoch " + std::to_string(epoch));
        res.log.push_back(entry);
        if (on_epoch)
            on_epoch(entry);
        if (entry.val_loss < res.best_val_loss)
        {
            res.best_val_loss = entry.val_loss;
            res.best_epoch = epoch;
            res.params = theta;
            since_best = 0;
        }
        else if (++since_best >= hyper.patience)
            break;
    }
    return res;
}

inline void save_srpnet(const std::filesystem::path &path, const SrpnetParams &p, const nlohmann::json &extra = {})
{
    nn::Checkpoint ckpt;
    ckpt.kind = "srpnet";
    ckpt.hyperparameters = {{"architecture", p.config}};
    if (!extra.is_null())
        ckpt.hyperparameters["training"] = extra;
    ckpt.params = p.params;
    nn::save_checkpoint(path, ckpt);
}

inline SrpnetParams load_srpnet(const std::filesystem::path &path)
{
    auto ckpt = nn::load_checkpoint(path);
    if (ckpt.kind != "srpnet")
        throw DataError(path.string() + " is a '" + ckpt.kind + "' checkpoint, expected 'srpnet'");
    SrpnetParams p;
    p.config = ckpt.hyperparameters.value("architecture", nlohmann::json::object()).get<SrpnetConfig>();
    p.params = std::move(ckpt.params);
    check_srpnet_params(p);
    return p;
}

} // namespace srp::upsample
