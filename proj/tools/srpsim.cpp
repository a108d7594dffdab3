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

#include "srp.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;

namespace
{

struct Globals
{
    std::string config;
    std::optional<std::uint64_t> seed;
    std::size_t threads = 1;
    std::string out = "out";
};

json load_config(const std::string &path)
{
    if (path.empty())
        return json::object();
    std::ifstream f(path);
    if (!f)
        throw srp::ConfigError("cannot open config " + path);
    try
    {
        return json::parse(f);
    }
    catch (const json::exception &e)
    {
        throw srp::ConfigError(path + ": " + e.what());
    }
}

srp::channel::SimConfig sim_config(const json &cfg, const Globals &g)
{
    auto sim = cfg.value("sim", json::object()).get<srp::channel::SimConfig>();
    if (g.seed)
        sim.seed = *g.seed;
    sim.validate();
    return sim;
}

std::string pick(const std::string &flag, const json &cfg, const char *key)
{
    if (!flag.empty())
        return flag;
    return cfg.value(key, std::string{});
}

fs::path out_dir(const Globals &g)
{
    std::error_code ec;
    fs::create_directories(g.out, ec);
    if (ec)
        throw srp::DataError("cannot create output directory " + g.out + ": " + ec.message());
    return g.out;
}

void cmd_gen(const Globals &g, const json &cfg, std::optional<std::size_t> n_ue_flag)
{
    const auto sim = sim_config(cfg, g);
    const std::size_t n_ue = n_ue_flag.value_or(cfg.value("n_ue", std::size_t{512}));
    const auto ds = srp::harness::generate_dataset(sim, n_ue, g.threads);
    srp::harness::save_dataset(g.out, ds);
    const auto c = srp::harness::cluster_counts(ds.cluster);
    std::cout << "wrote " << n_ue << " channels to " << g.out << " (low " << c[0] << ", medium " << c[1] << ", high "
              << c[2] << ")\n";
}

void cmd_encode(const Globals &g, const json &cfg, const std::string &dataset_flag)
{
    const auto dataset = pick(dataset_flag, cfg, "dataset");
    if (dataset.empty())
        throw srp::ConfigError("encode: --dataset is required");
    const auto ds = srp::harness::load_dataset(dataset);
    const auto scheme = cfg.value("scheme", json::object()).get<srp::harness::SchemeSpec>();
    const auto cb = srp::codebook::build_codebook(ds.config.n_ant, scheme.oversampling);
    const auto n_rb = ds.config.n_rb;
    std::vector<std::string> lines(ds.size());
    srp::harness::parallel_for(ds.size(), g.threads, [&](std::size_t ue) {
        json j;
        using srp::harness::SchemeKind;
        switch (scheme.kind)
        {
        case SchemeKind::type1: j = srp::codebook::report_to_json(srp::codebook::encode_type1(ds.dl[ue], cb, scheme.grid(n_rb))); break;
        case SchemeKind::type2:
            j = srp::codebook::report_to_json(
                srp::codebook::encode_type2(ds.dl[ue], cb, scheme.grid(n_rb), scheme.n_beams, scheme.criterion));
            break;
        case SchemeKind::etype2:
        {
            const srp::codebook::SbGrid grid = scheme.variant == srp::codebook::EType2Variant::truncated
                                                   ? scheme.grid(n_rb)
                                                   : srp::codebook::SbGrid{n_rb, 1};
            j = srp::codebook::report_to_json(srp::codebook::encode_etype2(
                ds.dl[ue], cb, grid, {scheme.n_beams, scheme.m_v, scheme.r, scheme.variant, scheme.sample_offset}));
            break;
        }
        }
        j["ue"] = ue;
        lines[ue] = j.dump();
    });
    std::ostringstream o;
    for (const auto &l : lines)
        o << l << '\n';
    const auto path = out_dir(g) / "reports.jsonl";
    srp::harness::write_text(path, o.str());
    std::cout << "wrote " << ds.size() << " " << scheme.label() << " reports to " << path.string() << "\n";
}

void cmd_train_srpnet(const Globals &g, const json &cfg, const std::string &dataset_flag,
                      std::optional<std::size_t> epochs)
{
    const auto dataset = pick(dataset_flag, cfg, "dataset");
    if (dataset.empty())
        throw srp::ConfigError("train-srpnet: --dataset is required");
    const auto ds = srp::harness::load_dataset(dataset);
    const auto scheme = cfg.value("scheme", json::object()).get<srp::harness::SchemeSpec>();
    const auto arch = cfg.value("srpnet", json::object()).get<srp::upsample::SrpnetConfig>();
    auto hyper = cfg.value("train", json::object()).get<srp::upsample::SrpnetTrainConfig>();
    if (g.seed)
        hyper.seed = *g.seed;
    if (epochs)
        hyper.epochs = *epochs;
    hyper.threads = g.threads;

    const auto split = srp::harness::split_811(ds.size());
    const auto train = srp::harness::make_srpnet_samples(ds, split.train, scheme, arch, g.threads);
    const auto val = srp::harness::make_srpnet_samples(ds, split.val, scheme, arch, g.threads);
    const auto dir = out_dir(g);
    std::ofstream log(dir / "train_log.csv");
    if (!log)
        throw srp::DataError("cannot write " + (dir / "train_log.csv").string());
    log << "epoch,train_loss,val_loss\n";
    const auto init = srp::upsample::init_srpnet(arch, hyper.seed);
    const auto res = srp::upsample::train_srpnet(train, val, init, hyper, [&](const srp::upsample::EpochLog &e) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "%zu,%.12g,%.12g\n", e.epoch, e.train_loss, e.val_loss);
        log << buf << std::flush;
        std::cout << buf << std::flush;
    });
    srp::upsample::save_srpnet(dir / "srpnet.ckpt.json", res.params,
                               {{"hyper", hyper},
                                {"scheme", scheme},
                                {"best_epoch", res.best_epoch},
                                {"initial_val_loss", res.initial_val_loss},
                                {"best_val_loss", res.best_val_loss}});
    std::cout << "best epoch " << res.best_epoch << ", val loss " << res.initial_val_loss << " -> " << res.best_val_loss
              << "; checkpoint " << (dir / "srpnet.ckpt.json").string() << "\n";
}

srp::harness::EvalConfig eval_config(const json &cfg, const std::string &dataset_flag, const std::string &ckpt_flag)
{
    auto ec = cfg.value("eval", json::object()).get<srp::harness::EvalConfig>();
    if (!dataset_flag.empty())
        ec.dataset = dataset_flag;
    else if (ec.dataset.empty())
        ec.dataset = cfg.value("dataset", std::string{});
    if (!ckpt_flag.empty())
        ec.srpnet_checkpoint = ckpt_flag;
    return ec;
}

void cmd_train_switch(const Globals &g, const json &cfg, const std::string &dataset_flag, const std::string &ckpt_flag)
{
    const auto ec = eval_config(cfg, dataset_flag, ckpt_flag);
    if (ec.dataset.empty())
        throw srp::ConfigError("train-switch: --dataset is required");
    const auto ds = srp::harness::load_dataset(ec.dataset);
    std::optional<srp::upsample::SrpnetParams> theta;
    if (ec.sw.upsampler == srp::harness::Upsampler::srpnet)
    {
        if (ec.srpnet_checkpoint.empty())
            throw srp::ConfigError("train-switch: --checkpoint (SRPNet) is required");
        if (!fs::exists(ec.srpnet_checkpoint))
            throw srp::DataError("missing SRPNet checkpoint: " + ec.srpnet_checkpoint);
        theta = srp::upsample::load_srpnet(ec.srpnet_checkpoint);
    }
    const auto split = srp::harness::split_811(ds.size());
    const auto *tp = theta ? &*theta : nullptr;
    const auto train = srp::harness::switch_samples(ds, split.train, ec.primary, ec.sw.upsampler, tp, g.threads);
    const auto val = srp::harness::switch_samples(ds, split.val, ec.primary, ec.sw.upsampler, tp, g.threads);
    const auto dir = out_dir(g);
    std::ostringstream summary;
    summary << "lambda,best_epoch,val_objective,checkpoint\n";
    for (double lambda : ec.sw.lambdas)
    {
        const auto res = srp::switching::train_switch(train, val, lambda, ec.sw.train);
        const std::string name = "switch_lambda=" + srp::harness::detail::fmt(lambda) + ".ckpt.json";
        srp::switching::save_switch(dir / name, res.params, ec.sw.train);
        summary << srp::harness::detail::fmt(lambda) << ',' << res.best_epoch << ','
                << srp::harness::detail::fmt(res.best_val_objective) << ',' << name << '\n';
    }
    srp::harness::write_text(dir / "switch_train.csv", summary.str());
    std::cout << summary.str();
}

void cmd_eval(const Globals &g, const json &cfg, const std::string &dataset_flag, const std::string &ckpt_flag)
{
    const auto ec = eval_config(cfg, dataset_flag, ckpt_flag);
    const auto rep = srp::harness::run_experiment(ec, g.threads);
    srp::harness::write_report(g.out, rep);
    std::cout << "wrote fig4.csv, fig5.csv, fig6.csv and report.json to " << g.out << "\n";
}

// Concatenates the figure CSVs of several eval runs, prefixing each row with the run name.
void cmd_report(const Globals &g, const std::vector<std::string> &runs)
{
    if (runs.empty())
        throw srp::ConfigError("report: at least one eval output directory is required");
    const auto dir = out_dir(g);
    for (const char *name : {"fig4.csv", "fig5.csv", "fig6.csv"})
    {
        std::ostringstream merged;
        bool header = false;
        for (const auto &run : runs)
        {
            std::ifstream f(fs::path(run) / name);
            if (!f)
                throw srp::DataError("missing " + (fs::path(run) / name).string());
            std::string line;
            if (!std::getline(f, line))
                throw srp::DataError("empty " + (fs::path(run) / name).string());
            if (!header)
            {
                merged << "run," << line << '\n';
                header = true;
            }
            while (std::getline(f, line))
                if (!line.empty())
                    merged << fs::path(run).filename().string() << ',' << line << '\n';
        }
        srp::harness::write_text(dir / name, merged.str());
    }
    std::cout << "merged " << runs.size() << " runs into " << g.out << "\n";
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"srpsim: subband-to-RB precoder upsampling simulator"};
    app.require_subcommand(1);
    Globals g;
    std::uint64_t seed = 0;
    app.add_option("--config", g.config, "JSON configuration file");
    auto *seed_opt = app.add_option("--seed", seed, "Override the random seed");
    app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
    app.add_option("--out", g.out, "Output directory");

    std::string dataset, checkpoint;
    std::size_t n_ue = 0, epochs = 0;
    std::vector<std::string> runs;

    auto *gen = app.add_subcommand("gen", "Generate a channel dataset");
    auto *n_ue_opt = gen->add_option("--n-ue", n_ue, "Number of channels")->check(CLI::PositiveNumber);
    auto *encode = app.add_subcommand("encode", "Encode precoder reports for a dataset");
    encode->add_option("--dataset", dataset, "Dataset directory");
    auto *train_srpnet = app.add_subcommand("train-srpnet", "Train the upsampling network");
    train_srpnet->add_option("--dataset", dataset, "Dataset directory");
    auto *epochs_opt = train_srpnet->add_option("--epochs", epochs, "Override the epoch count");
    auto *train_switch = app.add_subcommand("train-switch", "Train learned switches over the lambda grid");
    train_switch->add_option("--dataset", dataset, "Dataset directory");
    train_switch->add_option("--checkpoint", checkpoint, "SRPNet checkpoint");
    auto *eval = app.add_subcommand("eval", "Run the evaluation experiment");
    eval->add_option("--dataset", dataset, "Dataset directory");
    eval->add_option("--checkpoint", checkpoint, "SRPNet checkpoint");
    auto *report = app.add_subcommand("report", "Merge figure CSVs of several eval runs");
    report->add_option("runs", runs, "Eval output directories");
    for (auto *sub : {gen, encode, train_srpnet, train_switch, eval, report})
        sub->fallthrough();

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (*seed_opt)
        g.seed = seed;

    try
    {
        const json cfg = load_config(g.config);
        if (*gen)
            cmd_gen(g, cfg, *n_ue_opt ? std::optional<std::size_t>(n_ue) : std::nullopt);
        else if (*encode)
            cmd_encode(g, cfg, dataset);
        else if (*train_srpnet)
            cmd_train_srpnet(g, cfg, dataset, *epochs_opt ? std::optional<std::size_t>(epochs) : std::nullopt);
        else if (*train_switch)
            cmd_train_switch(g, cfg, dataset, checkpoint);
        else if (*eval)
            cmd_eval(g, cfg, dataset, checkpoint);
        else if (*report)
            cmd_report(g, runs);
        return 0;
    }
    catch (const srp::ConfigError &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    catch (const srp::nn::ShapeError &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    catch (const nlohmann::json::exception &e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    catch (const srp::DataError &e)
    {
        std::cerr << "data error: " << e.what() << "\n";
        return 3;
    }
    catch (const srp::NumericalError &e)
    {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
