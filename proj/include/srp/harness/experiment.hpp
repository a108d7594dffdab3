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

#include "../switching.hpp"
#include "dataset.hpp"
#include "metrics.hpp"
#include "pipeline.hpp"

#include <json.hpp>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

namespace srp::harness
{

struct SwitchSpec
{
    bool enabled = true;
    Upsampler upsampler = Upsampler::srpnet;
    std::vector<switching::Metric> metrics{switching::Metric::max_excess, switching::Metric::mean_excess,
                                           switching::Metric::rms_ds};
    // Explicit thresholds in ns; when empty, thresholds are the k/threshold_quantiles quantiles
    // (k < threshold_quantiles) of each metric over the evaluation set.
    std::vector<double> thresholds_ns;
    std::size_t threshold_quantiles = 10;
    std::vector<double> lambdas{1e-5, 5e-5, 1e-4, 5e-4, 1e-3};
    std::size_t random_steps = 10;
    switching::SwitchTrainConfig train;
};

inline std::vector<SchemeSpec> default_fig5_schemes()
{
    std::vector<SchemeSpec> out;
    for (std::size_t n3 : {3, 6, 12, 24})
    {
        SchemeSpec s;
        s.kind = SchemeKind::type2;
        s.n3 = n3;
        out.push_back(s);
    }
    for (auto variant : {codebook::EType2Variant::modified, codebook::EType2Variant::truncated})
        for (double r : {1.0, 2.0, 4.0, 8.0, 16.0})
        {
            SchemeSpec s;
            s.variant = variant;
            s.m_v = 24;
            s.n3 = 24;
            s.r = r;
            out.push_back(s);
        }
    return out;
}

struct EvalConfig
{
    std::string dataset;
    std::string srpnet_checkpoint;
    std::string split = "test"; // test | val | all
    std::vector<double> snr_db{-10, -5, 0, 5, 10, 15, 20};
    SchemeSpec primary;
    std::vector<SchemeSpec> schemes = default_fig5_schemes();
    std::vector<Upsampler> upsamplers{Upsampler::interp, Upsampler::srpnet, Upsampler::srpnet_det};
    SwitchSpec sw;

    void validate() const
    {
        if (snr_db.empty() || schemes.empty() || upsamplers.empty())
            throw ConfigError("eval config: snr_db, schemes and upsamplers must be non-empty");
        if (split != "test" && split != "val" && split != "all")
            throw ConfigError("eval config: split must be test|val|all");
        if (sw.thresholds_ns.empty() && sw.threshold_quantiles == 0)
            throw ConfigError("eval config: switch.threshold_quantiles must be positive without explicit thresholds");
        if (sw.random_steps == 0)
            throw ConfigError("eval config: switch.random_steps must be positive");
    }
};

inline void from_json(const nlohmann::json &j, SwitchSpec &s)
{
    SwitchSpec d;
    s.enabled = j.value("enabled", d.enabled);
    s.upsampler = upsampler_from_string(j.value("upsampler", to_string(d.upsampler)));
    s.metrics.clear();
    if (j.contains("metrics"))
        for (const auto &m : j.at("metrics"))
            s.metrics.push_back(switching::metric_from_string(m.get<std::string>()));
    else
        s.metrics = d.metrics;
    s.thresholds_ns = j.value("thresholds_ns", d.thresholds_ns);
    s.threshold_quantiles = j.value("threshold_quantiles", d.threshold_quantiles);
    s.lambdas = j.value("lambdas", d.lambdas);
    s.random_steps = j.value("random_steps", d.random_steps);
    s.train = j.value("train", d.train);
}

inline void to_json(nlohmann::json &j, const SwitchSpec &s)
{
    nlohmann::json metrics = nlohmann::json::array();
    for (auto m : s.metrics)
        metrics.push_back(switching::to_string(m));
    j = nlohmann::json{{"enabled", s.enabled},          {"upsampler", to_string(s.upsampler)},
                       {"metrics", metrics},            {"thresholds_ns", s.thresholds_ns},
                       {"threshold_quantiles", s.threshold_quantiles},
                       {"lambdas", s.lambdas},          {"random_steps", s.random_steps},
                       {"train", s.train}};
}

inline void from_json(const nlohmann::json &j, EvalConfig &c)
{
    EvalConfig d;
    c.dataset = j.value("dataset", d.dataset);
    c.srpnet_checkpoint = j.value("srpnet_checkpoint", d.srpnet_checkpoint);
    c.split = j.value("split", d.split);
    c.snr_db = j.value("snr_db", d.snr_db);
    c.primary = j.value("primary", d.primary);
    c.schemes = j.contains("schemes") ? j.at("schemes").get<std::vector<SchemeSpec>>() : d.schemes;
    c.upsamplers.clear();
    if (j.contains("upsamplers"))
        for (const auto &u : j.at("upsamplers"))
            c.upsamplers.push_back(upsampler_from_string(u.get<std::string>()));
    else
        c.upsamplers = d.upsamplers;
    c.sw = j.value("switch", d.sw);
}

inline void to_json(nlohmann::json &j, const EvalConfig &c)
{
    nlohmann::json ups = nlohmann::json::array();
    for (auto u : c.upsamplers)
        ups.push_back(to_string(u));
    j = nlohmann::json{{"dataset", c.dataset}, {"srpnet_checkpoint", c.srpnet_checkpoint},
                       {"split", c.split},     {"snr_db", c.snr_db},
                       {"primary", c.primary}, {"schemes", c.schemes},
                       {"upsamplers", ups},    {"switch", c.sw}};
}

inline constexpr std::array<const char *, 4> cluster_names{"low", "medium", "high", "all"};

struct ClusterStats
{
    std::size_t n = 0;
    double mean_ng = 0.0;
    std::vector<double> mean_capacity; // per SNR
};

struct SchemeResult
{
    std::string scheme;
    Upsampler upsampler = Upsampler::interp;
    codebook::Overhead overhead;
    std::array<ClusterStats, 4> clusters; // low, medium, high, all
    std::vector<double> per_channel_ng;   // eval-set order
};

struct CapacityRatioRow
{
    double snr_db = 0.0;
    std::string cluster;
    std::string scheme;
    Upsampler upsampler = Upsampler::srpnet;
    double ratio = std::numeric_limits<double>::quiet_NaN(); // mean of per-channel ratios
    std::size_t defined = 0;
    std::size_t undefined = 0;
};

struct SwitchPoint
{
    std::string kind;  // random | max_excess | mean_excess | rms_ds | learned
    std::string param; // p, threshold (ns) or lambda
    double mean_complexity = 0.0;
    double mean_ng = 0.0;
    double random_line_ng = 0.0; // random-switch gain at the same mean complexity
};

struct EvalReport
{
    std::vector<std::size_t> eval_index;
    std::vector<channel::DsCluster> eval_cluster;
    std::vector<SchemeResult> schemes;
    std::vector<CapacityRatioRow> fig4;
    std::vector<SwitchPoint> fig6;
    nlohmann::json meta;
};

namespace detail
{

inline std::string fmt(double v)
{
    if (std::isnan(v))
        return "undefined";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

struct ChannelEval
{
    double ng = 0.0;
    std::vector<double> cap;
};

} // namespace detail

// Per-channel (UL PDP, NG with SRPNet, NG with interpolation) records for switch studies.
inline std::vector<switching::SwitchSample> switch_samples(const Dataset &ds, const std::vector<std::size_t> &idx,
                                                           const SchemeSpec &scheme, Upsampler srp,
                                                           const upsample::SrpnetParams *theta, std::size_t threads)
{
    const auto cb = codebook::build_codebook(ds.config.n_ant, scheme.oversampling);
    std::vector<switching::SwitchSample> out(idx.size());
    parallel_for(idx.size(), threads, [&](std::size_t i) {
        const std::size_t ue = idx[i];
        const auto fb = make_feedback(ds.dl[ue], scheme, cb);
        const auto pdp = ds.ul_pdp(ue);
        out[i].pdp = switching::normalized_pdp(pdp);
        out[i].ng_srp = normalized_gain(run_upsampler(srp, fb.sp, pdp, theta), ds.dl[ue]).ng;
        out[i].ng_itp = normalized_gain(run_upsampler(Upsampler::interp, fb.sp, pdp, theta), ds.dl[ue]).ng;
    });
    return out;
}

inline EvalReport run_experiment(const EvalConfig &cfg, const Dataset &ds, const upsample::SrpnetParams *theta,
                                 std::size_t threads = 1)
{
    cfg.validate();
    const Split split = split_811(ds.size());
    EvalReport rep;
    if (cfg.split == "test")
        rep.eval_index = split.test;
    else if (cfg.split == "val")
        rep.eval_index = split.val;
    else
        for (std::size_t i = 0; i < ds.size(); ++i)
            rep.eval_index.push_back(i);
    for (auto i : rep.eval_index)
        rep.eval_cluster.push_back(ds.cluster[i]);
    const std::size_t n_eval = rep.eval_index.size();
    const std::size_t n_snr = cfg.snr_db.size();

    const bool interp_present =
        std::find(cfg.upsamplers.begin(), cfg.upsamplers.end(), Upsampler::interp) != cfg.upsamplers.end();

    std::vector<SchemeSpec> schemes = cfg.schemes;
    if (std::none_of(schemes.begin(), schemes.end(),
                     [&](const SchemeSpec &s) { return s.label() == cfg.primary.label(); }))
        schemes.insert(schemes.begin(), cfg.primary);
    for (const auto &scheme : schemes)
    {
        const auto cb = codebook::build_codebook(ds.config.n_ant, scheme.oversampling);
        const std::size_t n_up = cfg.upsamplers.size();
        std::vector<std::vector<detail::ChannelEval>> per(n_up, std::vector<detail::ChannelEval>(n_eval));
        std::vector<codebook::Overhead> overhead(n_eval);
        parallel_for(n_eval, threads, [&](std::size_t i) {
            const std::size_t ue = rep.eval_index[i];
            const auto fb = make_feedback(ds.dl[ue], scheme, cb);
            overhead[i] = fb.overhead;
            const auto pdp = ds.ul_pdp(ue);
            for (std::size_t u = 0; u < n_up; ++u)
            {
                const CMat w = run_upsampler(cfg.upsamplers[u], fb.sp, pdp, theta);
                auto &e = per[u][i];
                e.ng = normalized_gain(w, ds.dl[ue]).ng;
                for (double snr : cfg.snr_db)
                    e.cap.push_back(capacity(w, ds.dl[ue], snr));
            }
        });

        std::size_t interp_slot = 0;
        for (std::size_t u = 0; u < n_up; ++u)
            if (cfg.upsamplers[u] == Upsampler::interp)
                interp_slot = u;

        for (std::size_t u = 0; u < n_up; ++u)
        {
            SchemeResult res;
            res.scheme = scheme.label();
            res.upsampler = cfg.upsamplers[u];
            res.overhead = overhead.empty() ? codebook::Overhead{} : overhead[0];
            for (auto &c : res.clusters)
                c.mean_capacity.assign(n_snr, 0.0);
            for (std::size_t i = 0; i < n_eval; ++i)
            {
                res.per_channel_ng.push_back(per[u][i].ng);
                for (std::size_t c : {static_cast<std::size_t>(rep.eval_cluster[i]), std::size_t{3}})
                {
                    auto &cs = res.clusters[c];
                    ++cs.n;
                    cs.mean_ng += per[u][i].ng;
                    for (std::size_t k = 0; k < n_snr; ++k)
                        cs.mean_capacity[k] += per[u][i].cap[k];
                }
            }
            for (auto &cs : res.clusters)
                if (cs.n > 0)
                {
                    cs.mean_ng /= static_cast<double>(cs.n);
                    for (auto &v : cs.mean_capacity)
                        v /= static_cast<double>(cs.n);
                }
            rep.schemes.push_back(std::move(res));

            if (!interp_present || cfg.upsamplers[u] == Upsampler::interp)
                continue;
            for (std::size_t k = 0; k < n_snr; ++k)
                for (std::size_t c = 0; c < 4; ++c)
                {
                    CapacityRatioRow row{cfg.snr_db[k], cluster_names[c], scheme.label(), cfg.upsamplers[u]};
                    double acc = 0.0;
                    for (std::size_t i = 0; i < n_eval; ++i)
                    {
                        if (c < 3 && static_cast<std::size_t>(rep.eval_cluster[i]) != c)
                            continue;
                        const auto r = capacity_ratio(per[u][i].cap[k], per[interp_slot][i].cap[k]);
                        if (r)
                        {
                            acc += *r;
                            ++row.defined;
                        }
                        else
                            ++row.undefined;
                    }
                    if (row.defined > 0)
                        row.ratio = acc / static_cast<double>(row.defined);
                    rep.fig4.push_back(row);
                }
        }
    }

    if (cfg.sw.enabled)
    {
        const auto &sw = cfg.sw;
        const auto cost = sw.train.cost;
        const auto evals = switch_samples(ds, rep.eval_index, cfg.primary, sw.upsampler, theta, threads);
        double ng_srp = 0.0, ng_itp = 0.0;
        for (const auto &s : evals)
        {
            ng_srp += s.ng_srp;
            ng_itp += s.ng_itp;
        }
        ng_srp /= static_cast<double>(n_eval);
        ng_itp /= static_cast<double>(n_eval);
        const auto line = [&](double c) { return ng_itp + (c - cost.c_itp) / (cost.c_srp - cost.c_itp) * (ng_srp - ng_itp); };
        const auto add_point = [&](std::string kind, std::string param, const std::vector<int> &s) {
            double c = 0.0, g = 0.0;
            for (std::size_t i = 0; i < n_eval; ++i)
            {
                const auto gc = switching::gain_cost(s[i], evals[i].ng_srp, evals[i].ng_itp, cost);
                c += gc.c;
                g += gc.g;
            }
            c /= static_cast<double>(n_eval);
            g /= static_cast<double>(n_eval);
            rep.fig6.push_back({std::move(kind), std::move(param), c, g, line(c)});
        };

        for (std::size_t k = 0; k <= sw.random_steps; ++k)
        {
            const double p = static_cast<double>(k) / static_cast<double>(sw.random_steps);
            const auto gc_hi = switching::gain_cost(p, ng_srp, ng_itp, cost);
            rep.fig6.push_back({"random", detail::fmt(p), gc_hi.c, gc_hi.g, line(gc_hi.c)});
        }
        for (auto metric : sw.metrics)
        {
            std::vector<double> values(n_eval);
            for (std::size_t i = 0; i < n_eval; ++i)
                values[i] = switching::metric_value(
                    channel::pdp_metrics(ds.ul_pdp(rep.eval_index[i]), ds.config.eta), metric);
            std::vector<double> grid; // seconds
            for (double t_ns : sw.thresholds_ns)
                grid.push_back(t_ns * 1e-9);
            if (grid.empty())
            {
                std::vector<double> sorted = values;
                std::sort(sorted.begin(), sorted.end());
                for (std::size_t k = 0; k < sw.threshold_quantiles; ++k)
                    grid.push_back(sorted[k * n_eval / sw.threshold_quantiles]);
                grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
            }
            for (double thres : grid)
            {
                std::vector<int> s(n_eval);
                for (std::size_t i = 0; i < n_eval; ++i)
                    s[i] = values[i] >= thres ? 1 : 0;
                add_point(switching::to_string(metric), detail::fmt(thres * 1e9), s);
            }
        }
        if (!sw.lambdas.empty())
        {
            const auto trains = switch_samples(ds, split.train, cfg.primary, sw.upsampler, theta, threads);
            const auto vals = switch_samples(ds, split.val, cfg.primary, sw.upsampler, theta, threads);
            for (double lambda : sw.lambdas)
            {
                const auto trained = switching::train_switch(trains, vals, lambda, sw.train);
                std::vector<int> s(n_eval);
                for (std::size_t i = 0; i < n_eval; ++i)
                    s[i] = switching::learned_switch_forward(channel::Pdp{evals[i].pdp, 1.0}, trained.params, cost).s;
                add_point("learned", detail::fmt(lambda), s);
            }
        }
    }

    auto counts = cluster_counts(rep.eval_cluster);
    rep.meta = {{"capacity_formula", "mean over RBs of log2(1 + 10^(snr_db/10) |h_f^H w_f|^2), unit-norm w_f"},
                {"capacity_ratio", "mean over channels of C(upsampler) / C(interp) on the same reports; "
                                   "channels with zero baseline capacity are counted as undefined"},
                {"normalized_gain", "mean over RBs of |h_f^H w_f| / (|h_f| |w_f|)"},
                {"split", cfg.split},
                {"n_eval", n_eval},
                {"eval_clusters", {{"low", counts[0]}, {"medium", counts[1]}, {"high", counts[2]}}},
                {"primary_scheme", cfg.primary.label()},
                {"config", cfg}};
    return rep;
}

inline EvalReport run_experiment(const EvalConfig &cfg, std::size_t threads = 1)
{
    if (cfg.dataset.empty())
        throw ConfigError("eval config: 'dataset' path is required");
    const Dataset ds = load_dataset(cfg.dataset);
    const bool needs_net =
        std::find(cfg.upsamplers.begin(), cfg.upsamplers.end(), Upsampler::srpnet) != cfg.upsamplers.end() ||
        (cfg.sw.enabled && cfg.sw.upsampler == Upsampler::srpnet);
    std::optional<upsample::SrpnetParams> theta;
    if (needs_net)
    {
        if (cfg.srpnet_checkpoint.empty())
            throw ConfigError("eval config: upsampler 'srpnet' requires 'srpnet_checkpoint' (produced by train-srpnet)");
        if (!std::filesystem::exists(cfg.srpnet_checkpoint))
            throw DataError("missing SRPNet checkpoint: " + cfg.srpnet_checkpoint);
        theta = upsample::load_srpnet(cfg.srpnet_checkpoint);
    }
    return run_experiment(cfg, ds, theta ? &*theta : nullptr, threads);
}

inline std::string fig4_csv(const EvalReport &rep)
{
    std::ostringstream o;
    o << "snr_db,cluster,scheme,upsampler,baseline,capacity_ratio,n_defined,n_undefined\n";
    for (const auto &r : rep.fig4)
        o << detail::fmt(r.snr_db) << ',' << r.cluster << ',' << r.scheme << ',' << to_string(r.upsampler)
          << ",interp," << detail::fmt(r.ratio) << ',' << r.defined << ',' << r.undefined << '\n';
    return o.str();
}

inline std::string fig5_csv(const EvalReport &rep)
{
    std::ostringstream o;
    o << "overhead,scheme,upsampler,cluster,ng,n\n";
    for (const auto &s : rep.schemes)
        for (std::size_t c = 0; c < 4; ++c)
            o << s.overhead.coefficients << ',' << s.scheme << ',' << to_string(s.upsampler) << ','
              << cluster_names[c] << ',' << (s.clusters[c].n ? detail::fmt(s.clusters[c].mean_ng) : "undefined")
              << ',' << s.clusters[c].n << '\n';
    return o.str();
}

inline std::string fig6_csv(const EvalReport &rep)
{
    std::ostringstream o;
    o << "switch,param,mean_complexity,mean_ng,random_line_ng\n";
    for (const auto &p : rep.fig6)
        o << p.kind << ',' << p.param << ',' << detail::fmt(p.mean_complexity) << ',' << detail::fmt(p.mean_ng)
          << ',' << detail::fmt(p.random_line_ng) << '\n';
    return o.str();
}

inline nlohmann::json report_json(const EvalReport &rep)
{
    nlohmann::json schemes = nlohmann::json::array();
    for (const auto &s : rep.schemes)
    {
        nlohmann::json clusters = nlohmann::json::object();
        for (std::size_t c = 0; c < 4; ++c)
        {
            const auto &cs = s.clusters[c];
            clusters[cluster_names[c]] = {{"n", cs.n},
                                          {"mean_ng", cs.n ? nlohmann::json(cs.mean_ng) : nlohmann::json("undefined")},
                                          {"mean_capacity", cs.n ? nlohmann::json(cs.mean_capacity)
                                                                 : nlohmann::json("undefined")}};
        }
        schemes.push_back({{"scheme", s.scheme},
                           {"upsampler", to_string(s.upsampler)},
                           {"overhead", {{"coefficients", s.overhead.coefficients}, {"index_bits", s.overhead.index_bits}}},
                           {"clusters", clusters}});
    }
    nlohmann::json points = nlohmann::json::array();
    for (const auto &p : rep.fig6)
        points.push_back({{"switch", p.kind}, {"param", p.param}, {"mean_complexity", p.mean_complexity},
                          {"mean_ng", p.mean_ng}});
    return {{"format", "srp.eval"}, {"version", 1}, {"meta", rep.meta}, {"schemes", schemes}, {"switch", points}};
}

inline void write_text(const std::filesystem::path &path, const std::string &text)
{
    std::ofstream f(path, std::ios::binary);
    if (!f)
        throw DataError("cannot write " + path.string());
    f << text;
    if (!f)
        throw DataError("write failed: " + path.string());
}

inline void write_report(const std::filesystem::path &dir, const EvalReport &rep)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw DataError("cannot create output directory " + dir.string() + ": " + ec.message());
    write_text(dir / "fig4.csv", fig4_csv(rep));
    write_text(dir / "fig5.csv", fig5_csv(rep));
    write_text(dir / "fig6.csv", fig6_csv(rep));
    write_text(dir / "report.json", report_json(rep).dump(2) + "\n");
}

} // namespace srp::harness
