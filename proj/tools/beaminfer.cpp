// SPDX-License-Identifier: Apache-2.0
//
// beaminfer - beam inference from partial L1-RSRP measurements
// Copyright (C) 2026 The beaminfer authors
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

#include "beaminfer.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

// Exit codes: 0 success, 2 config/argument error, 3 missing state, 4 I/O error.
int run(int argc, char **argv)
{
    using namespace beaminfer;
    CLI::App app{"beaminfer: two-stage beam search with imputed L1-RSRP grids"};
    app.require_subcommand(1);
    std::string config_path, model_name, out_dir;
    std::optional<std::uint64_t> seed;
    auto add_common = [&](CLI::App *sub) {
        sub->add_option("--config", config_path, "experiment config (JSON); defaults are used when omitted");
        sub->add_option("--out", out_dir, "override output_dir");
        sub->add_option("--seed", seed, "override every seed (scenario, data, model, eval)");
    };
    auto *gen = app.add_subcommand("generate", "generate the scenario dataset and splits");
    auto *train = app.add_subcommand("train", "train imputers (all configured models unless --model is given)");
    auto *eval = app.add_subcommand("evaluate", "run the top-k sweep and write the report");
    auto *report = app.add_subcommand("report", "re-render the report from the outcome table");
    for (auto *s : {gen, train, eval, report}) add_common(s);
    train->add_option("--model", model_name, "rf | mf | cgan | mean | random");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    ExperimentConfig cfg = config_path.empty() ? default_experiment() : load_experiment(config_path);
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) {
        cfg.scenario.seed = *seed;
        cfg.seeds = {*seed, *seed, *seed};
    }

    if (gen->parsed()) cmd_generate(cfg);
    if (train->parsed()) {
        if (!model_name.empty()) {
            cmd_train(cfg, model_from_string(model_name));
        } else {
            for (auto k : cfg.model_kinds()) cmd_train(cfg, k);
        }
    }
    if (eval->parsed()) cmd_evaluate(cfg);
    if (report->parsed()) cmd_report(cfg);
    return 0;
}

} // namespace

int main(int argc, char **argv)
{
    try {
        return run(argc, argv);
    } catch (const beaminfer::Error &e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
