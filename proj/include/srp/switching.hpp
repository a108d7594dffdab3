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

#include <cmath>
#include <string>
#include <vector>

namespace srp::switching
{

enum class Metric
{
    max_excess,
    mean_excess,
    rms_ds,
    learned
};

inline std::string to_string(Metric m)
{
    switch (m)
    {
    case Metric::max_excess: return "max_excess";
    case Metric::mean_excess: return "mean_excess";
    case Metric::rms_ds: return "rms_ds";
    case Metric::learned: return "learned";
    }
    return "?";
}

inline Metric metric_from_string(const std::string &s)
{
    for (auto m : {Metric::max_excess, Metric::mean_excess, Metric::rms_ds})
        if (s == to_string(m))
            return m;
    throw ConfigError("unknown switch metric '" + s + "' (expected max_excess|mean_excess|rms_ds)");
}

// Relative complexity of the two upsamplers.
struct CostModel
{
    double c_itp = 1.0;
    double c_srp = 1000.0;
};

struct SwitchDecision
{
    double s_soft = 0.0; // sigmoid output (learned) or 0/1 (threshold)
    int s = 0;           // 1 selects SRPNet
    Metric metric_used = Metric::rms_ds;
    double complexity_charged = 0.0;
};

inline double metric_value(const channel::PdpMetrics &m, Metric metric)
{
    switch (metric)
    {
    case Metric::max_excess: return m.max_excess_delay;
    case Metric::mean_excess: return m.mean_excess_delay;
    case Metric::rms_ds: return m.rms_ds;
    case Metric::learned: break;
    }
    throw ConfigError("metric_value: the learned switch has no PDP metric");
}

// SRPNet iff metric >= thres (seconds).
inline SwitchDecision threshold_switch(const channel::Pdp &pdp, Metric metric, double thres, double eta = 0.1,
                                       const CostModel &cost = {})
{
    const double v = metric_value(channel::pdp_metrics(pdp, eta), metric);
    SwitchDecision d;
    d.s = v >= thres ? 1 : 0;
    d.s_soft = d.s;
    d.metric_used = metric;
    d.complexity_charged = d.s ? cost.c_srp : cost.c_itp;
    return d;
}

struct LearnedSwitchParams
{
    std::vector<double> f;
    double b = 0.0;
    double lambda = 0.0;
};

inline std::vector<double> normalized_pdp(const channel::Pdp &pdp)
{
    const double total = pdp.total();
    if (!(total > 0.0) || !std::isfinite(total))
        throw NumericalError("learned switch: PDP has no energy");
    std::vector<double> out(pdp.p);
    for (auto &v : out)
        v /= total;
    return out;
}

// s_soft = sigmoid(f . p / sum(p) + b); s = 1 when s_soft >= 0.5.
inline SwitchDecision learned_switch_forward(const channel::Pdp &pdp, const LearnedSwitchParams &p,
                                             const CostModel &cost = {})
{
    if (p.f.size() != pdp.size())
        throw ConfigError("learned switch: weight length " + std::to_string(p.f.size()) + " does not match PDP length " +
                          std::to_string(pdp.size()));
    const auto x = normalized_pdp(pdp);
    double z = p.b;
    for (std::size_t i = 0; i < x.size(); ++i)
        z += p.f[i] * x[i];
    SwitchDecision d;
    d.s_soft = 1.0 / (1.0 + std::exp(-z));
    d.s = d.s_soft >= 0.5 ? 1 : 0;
    d.metric_used = Metric::learned;
    d.complexity_charged = d.s ? cost.c_srp : cost.c_itp;
    return d;
}

struct GainCost
{
    double g = 0.0;
    double c = 0.0;
};

inline GainCost gain_cost(double s_soft, double ng_srp, double ng_itp, const CostModel &cost = {})
{
    return {s_soft * ng_srp + (1.0 - s_soft) * ng_itp, s_soft * cost.c_srp + (1.0 - s_soft) * cost.c_itp};
}

// ---- training -------------------------------------------------------------------------------

struct SwitchSample
{
    std::vector<double> pdp; // unit-sum PDP
    double ng_srp = 0.0;
    double ng_itp = 0.0;
};

struct SwitchTrainConfig
{
    std::size_t epochs = 3000;
    std::size_t patience = 500;
    double lr = 0.05;
    // Multiplier applied to C inside the objective G - lambda * scale * C.
    double cost_scale = 1.0;
    CostModel cost;
};

inline void to_json(nlohmann::json &j, const SwitchTrainConfig &c)
{
    j = nlohmann::json{{"epochs", c.epochs},
                       {"patience", c.patience},
                       {"lr", c.lr},
                       {"cost_scale", c.cost_scale},
                       {"c_itp", c.cost.c_itp},
                       {"c_srp", c.cost.c_srp}};
}

inline void from_json(const nlohmann::json &j, SwitchTrainConfig &c)
{
    SwitchTrainConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.patience = j.value("patience", d.patience);
    c.lr = j.value("lr", d.lr);
    c.cost_scale = j.value("cost_scale", d.cost_scale);
    c.cost.c_itp = j.value("c_itp", d.cost.c_itp);
    c.cost.c_srp = j.value("c_srp", d.cost.c_srp);
}

struct SwitchBatch
{
    nn::Tensor x;      // [B, N] unit-sum PDPs
    nn::Tensor weight; // [B], gain advantage minus weighted extra cost per sample
};

inline SwitchBatch make_switch_batch(const std::vector<SwitchSample> &samples, double lambda,
                                     const SwitchTrainConfig &cfg)
{
    if (samples.empty())
        throw ConfigError("switch training: empty sample set");
    const std::size_t n = samples[0].pdp.size();
    SwitchBatch batch{nn::Tensor({samples.size(), n}), nn::Tensor({samples.size()})};
    const double extra = lambda * cfg.cost_scale * (cfg.cost.c_srp - cfg.cost.c_itp);
    for (std::size_t i = 0; i < samples.size(); ++i)
    {
        if (samples[i].pdp.size() != n)
            throw ConfigError("switch training: PDP lengths differ between samples");
        for (std::size_t t = 0; t < n; ++t)
            batch.x[i * n + t] = samples[i].pdp[t];
        batch.weight[i] = samples[i].ng_srp - samples[i].ng_itp - extra;
    }
    return batch;
}

// Negative relaxed objective up to a parameter-independent constant: -mean(s_soft * weight).
// params: [f [1,N], b [1]].
inline nn::Var switch_loss_graph(nn::Tape &tape, const std::vector<nn::Var> &params, const SwitchBatch &batch)
{
    const std::size_t count = batch.weight.size();
    nn::Var s = nn::reshape(nn::sigmoid(nn::dense(tape.constant(batch.x), params[0], params[1])), {count});
    return nn::scale(nn::mean(nn::mul(s, tape.constant(batch.weight))), -1.0);
}

inline nn::ParamList switch_param_list(const LearnedSwitchParams &p)
{
    nn::ParamList list;
    list.add("switch.f", nn::Tensor({1, p.f.size()}, p.f));
    list.add("switch.b", nn::Tensor({1}, std::vector<double>{p.b}));
    return list;
}

inline LearnedSwitchParams switch_params_from_list(const nn::ParamList &list, double lambda)
{
    if (list.size() != 2 || list[0].name != "switch.f" || list[1].name != "switch.b" || list[0].value.rank() != 2 ||
        list[0].value.dim(0) != 1 || list[1].value.size() != 1)
        throw DataError("switch parameters: expected tensors switch.f [1,N] and switch.b [1]");
    LearnedSwitchParams p;
    const auto f = list[0].value.data();
    p.f.assign(f.begin(), f.end());
    p.b = list[1].value[0];
    p.lambda = lambda;
    return p;
}

// Mean of G - lambda * scale * C with hard (rounded) decisions.
inline double switch_objective(const std::vector<SwitchSample> &samples, const LearnedSwitchParams &p,
                               const SwitchTrainConfig &cfg)
{
    double acc = 0.0;
    for (const auto &s : samples)
    {
        channel::Pdp pdp{s.pdp, 1.0};
        const auto d = learned_switch_forward(pdp, p, cfg.cost);
        const auto gc = gain_cost(d.s, s.ng_srp, s.ng_itp, cfg.cost);
        acc += gc.g - p.lambda * cfg.cost_scale * gc.c;
    }
    return acc / static_cast<double>(samples.size());
}

struct SwitchTrainResult
{
    LearnedSwitchParams params;
    double best_val_objective = 0.0;
    std::size_t best_epoch = 0;
};

// Full-batch Adam ascent on the relaxed objective; keeps the parameters with the best
// validation objective under hard decisions.
inline SwitchTrainResult train_switch(const std::vector<SwitchSample> &train, const std::vector<SwitchSample> &val,
                                      double lambda, const SwitchTrainConfig &cfg = {})
{
    if (train.empty() || val.empty())
        throw ConfigError("train_switch: training and validation sets must be non-empty");
    if (!(lambda >= 0.0))
        throw ConfigError("train_switch: lambda must be non-negative");
    const SwitchBatch batch = make_switch_batch(train, lambda, cfg);
    LearnedSwitchParams p;
    p.f.assign(train[0].pdp.size(), 0.0);
    p.lambda = lambda;
    nn::ParamList theta = switch_param_list(p);

    SwitchTrainResult res{p, switch_objective(val, p, cfg), 0};
    nn::Adam adam({cfg.lr});
    std::size_t since_best = 0;
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch)
    {
        nn::Tape tape;
        const auto vars = tape.parameters(theta);
        const nn::Var loss = switch_loss_graph(tape, vars, batch);
        if (!std::isfinite(loss.value().item()))
            throw NumericalError("train_switch: non-finite objective at epoch " + std::to_string(epoch));
        tape.backward(loss);
        adam.step(theta, tape.gradients());
        if (!theta.all_finite())
            throw NumericalError("train_switch: parameters diverged at epoch " + std::to_string(epoch));
        const auto cur = switch_params_from_list(theta, lambda);
        const double obj = switch_objective(val, cur, cfg);
        if (obj > res.best_val_objective)
        {
            res = {cur, obj, epoch};
            since_best = 0;
        }
        else if (++since_best >= cfg.patience)
            break;
    }
    return res;
}

inline void save_switch(const std::filesystem::path &path, const LearnedSwitchParams &p, const SwitchTrainConfig &cfg)
{
    nn::Checkpoint ckpt;
    ckpt.kind = "switch";
    ckpt.hyperparameters = {{"lambda", p.lambda}, {"training", cfg}};
    ckpt.params = switch_param_list(p);
    nn::save_checkpoint(path, ckpt);
}

inline LearnedSwitchParams load_switch(const std::filesystem::path &path)
{
    const auto ckpt = nn::load_checkpoint(path);
    if (ckpt.kind != "switch")
        throw DataError(path.string() + " is a '" + ckpt.kind + "' checkpoint, expected 'switch'");
    return switch_params_from_list(ckpt.params, ckpt.hyperparameters.value("lambda", 0.0));
}

} // namespace srp::switching
