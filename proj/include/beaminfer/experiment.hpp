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

#ifndef BEAMINFER_EXPERIMENT_HPP
#define BEAMINFER_EXPERIMENT_HPP

#include "beaminfer/cgan.hpp"
#include "beaminfer/common.hpp"
#include "beaminfer/dataio.hpp"
#include "beaminfer/evaluation.hpp"
#include "beaminfer/missforest.hpp"
#include "beaminfer/pipeline.hpp"
#include "beaminfer/rf_impute.hpp"
#include "beaminfer/scenario.hpp"

#include <json.hpp>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

// Declarative experiment driver behind the command-line tool.
//
// Layout under output_dir:
//   data/dataset.{json,csv}            full generated grid
//   data/train{,_truth,_manifest}      masked, oversampled training split
//   data/test.{json,csv}               unmasked test split
//   models/rf.bin, models/mf.json, models/cgan.bin, models/cgan_curve.csv
//   outcomes.csv                       one row per SearchOutcome
//   report/                            W1, percentile and CDF files

namespace beaminfer {

struct ModelSpec {
    ModelKind kind = ModelKind::rf;
    ForestParams forest{};     // rf, mf
    std::size_t max_iter = 10; // mf
    std::size_t train_rows = 0; // mf: training sources imputed jointly with the test rows, 0 = all
    GanConfig gan{};           // cgan
};

struct MaskingConfig {
    double train_p = 0.8;
    std::vector<double> test_ps{0.8, 0.95};
    std::size_t oversample_factor = 4;
    double split_fraction = 0.2;
};

struct SeedConfig {
    std::uint64_t data = 1;
    std::uint64_t model = 7;
    std::uint64_t eval = 11;
};

struct ExperimentConfig {
    ScenarioConfig scenario{};
    MaskingConfig masking{};
    std::vector<ModelSpec> models;
    std::vector<std::size_t> ks{1, 2, 4, 8, 16};
    SeedConfig seeds{};
    std::string output_dir = "beaminfer_out";

    const ModelSpec &model(ModelKind k) const
    {
        for (const auto &m : models)
            if (m.kind == k) return m;
        throw ConfigError(std::string("model '") + to_string(k) + "' has no block in the experiment config");
    }

    std::vector<ModelKind> model_kinds() const
    {
        std::vector<ModelKind> out;
        for (const auto &m : models) out.push_back(m.kind);
        return out;
    }

    void validate() const
    {
        scenario.validate();
        auto frac = [](double p) { return p >= 0.0 && p <= 1.0; };
        if (!frac(masking.train_p)) throw ConfigError("masking.train_p must lie in [0, 1]");
        if (masking.test_ps.empty()) throw ConfigError("masking.test_ps must not be empty");
        for (double p : masking.test_ps)
            if (!frac(p)) throw ConfigError("masking.test_ps entries must lie in [0, 1]");
        if (masking.oversample_factor == 0) throw ConfigError("masking.oversample_factor must be >= 1");
        if (!(masking.split_fraction > 0.0 && masking.split_fraction < 1.0))
            throw ConfigError("masking.split_fraction must lie in (0, 1)");
        if (models.empty()) throw ConfigError("models must not be empty");
        for (std::size_t i = 0; i < models.size(); ++i)
            for (std::size_t j = i + 1; j < models.size(); ++j)
                if (models[i].kind == models[j].kind)
                    throw ConfigError(std::string("duplicate model block '") + to_string(models[i].kind) + "'");
        if (ks.empty()) throw ConfigError("ks must not be empty");
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ks[i] == 0) throw ConfigError("ks entries must be >= 1");
            if (i > 0 && ks[i] <= ks[i - 1]) throw ConfigError("ks must be sorted ascending and unique");
        }
        for (const auto &m : models) {
            if (m.kind == ModelKind::rf || m.kind == ModelKind::mf)
                if (m.forest.n_trees == 0) throw ConfigError(std::string(to_string(m.kind)) + ": n_trees must be >= 1");
            if (m.kind == ModelKind::cgan) {
                m.gan.validate();
                if (m.gan.gen_out != scenario.total_beams())
                    throw ConfigError("cgan: output width must equal num_aps * beams_per_ap");
            }
        }
    }
};

inline ModelSpec default_model_spec(ModelKind k)
{
    ModelSpec m;
    m.kind = k;
    if (k == ModelKind::rf) {
        m.forest.n_trees = 20;
        m.forest.mtry = 20;
    } else if (k == ModelKind::mf) {
        m.forest.n_trees = 20;
        m.forest.mtry = 20;
        m.train_rows = 0;
    }
    return m;
}

inline ExperimentConfig default_experiment()
{
    ExperimentConfig c;
    for (auto k : {ModelKind::rf, ModelKind::mf, ModelKind::cgan, ModelKind::random}) c.models.push_back(default_model_spec(k));
    return c;
}

// ---- JSON ---------------------------------------------------------------

namespace detail {

template <class T>
T json_get(const nlohmann::json &j, const char *what)
{
    try {
        return j.get<T>();
    } catch (const nlohmann::json::exception &) {
        throw ConfigError(std::string("invalid value for '") + what + "': " + j.dump());
    }
}

inline void check_keys(const nlohmann::json &j, const std::vector<std::string> &allowed, const std::string &where)
{
    if (!j.is_object()) throw ConfigError(where + " must be an object");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
}

} // namespace detail

inline nlohmann::json to_json(const ModelSpec &m)
{
    nlohmann::json j{{"name", to_string(m.kind)}};
    if (m.kind == ModelKind::rf || m.kind == ModelKind::mf) {
        j["n_trees"] = m.forest.n_trees;
        j["mtry"] = m.forest.mtry;
        j["min_leaf"] = m.forest.min_leaf;
        j["max_depth"] = m.forest.max_depth;
        j["bootstrap"] = m.forest.bootstrap;
    }
    if (m.kind == ModelKind::mf) {
        j["max_iter"] = m.max_iter;
        j["train_rows"] = m.train_rows;
    }
    if (m.kind == ModelKind::cgan) {
        j["latent_dim"] = m.gan.latent_dim;
        j["gen_hidden"] = m.gan.gen_hidden;
        j["disc_hidden"] = m.gan.disc_hidden;
        j["pretrain_epochs"] = m.gan.pretrain_epochs;
        j["pretrain_lr"] = m.gan.pretrain_lr;
        j["gan_epochs"] = m.gan.gan_epochs;
        j["gan_lr"] = m.gan.gan_lr;
        j["batch_size"] = m.gan.batch_size;
        j["submask_fraction"] = m.gan.submask_fraction;
    }
    return j;
}

inline ModelSpec model_spec_from_json(const nlohmann::json &j)
{
    if (!j.is_object() || !j.contains("name")) throw ConfigError("every model block needs a 'name'");
    ModelSpec m;
    try {
        m = default_model_spec(model_from_string(detail::json_get<std::string>(j.at("name"), "name")));
    } catch (const ArgumentError &e) {
        throw ConfigError(e.what());
    }
    const std::string where = std::string("model block '") + to_string(m.kind) + "'";
    std::vector<std::string> keys{"name"};
    if (m.kind == ModelKind::rf || m.kind == ModelKind::mf)
        keys.insert(keys.end(), {"n_trees", "mtry", "min_leaf", "max_depth", "bootstrap"});
    if (m.kind == ModelKind::mf) keys.insert(keys.end(), {"max_iter", "train_rows"});
    if (m.kind == ModelKind::cgan)
        keys.insert(keys.end(), {"latent_dim", "gen_hidden", "disc_hidden", "pretrain_epochs", "pretrain_lr", "gan_epochs",
                                 "gan_lr", "batch_size", "submask_fraction"});
    detail::check_keys(j, keys, where);
    auto opt = [&](const char *key, auto &dst) {
        if (j.contains(key)) dst = detail::json_get<std::decay_t<decltype(dst)>>(j.at(key), key);
    };
    opt("n_trees", m.forest.n_trees);
    opt("mtry", m.forest.mtry);
    opt("min_leaf", m.forest.min_leaf);
    opt("max_depth", m.forest.max_depth);
    opt("bootstrap", m.forest.bootstrap);
    opt("max_iter", m.max_iter);
    opt("train_rows", m.train_rows);
    opt("latent_dim", m.gan.latent_dim);
    opt("gen_hidden", m.gan.gen_hidden);
    opt("disc_hidden", m.gan.disc_hidden);
    opt("pretrain_epochs", m.gan.pretrain_epochs);
    opt("pretrain_lr", m.gan.pretrain_lr);
    opt("gan_epochs", m.gan.gan_epochs);
    opt("gan_lr", m.gan.gan_lr);
    opt("batch_size", m.gan.batch_size);
    opt("submask_fraction", m.gan.submask_fraction);
    return m;
}

inline nlohmann::json to_json(const ExperimentConfig &c)
{
    nlohmann::json models = nlohmann::json::array();
    for (const auto &m : c.models) models.push_back(to_json(m));
    return {{"scenario", to_json(c.scenario)},
            {"masking",
             {{"train_p", c.masking.train_p},
              {"test_ps", c.masking.test_ps},
              {"oversample_factor", c.masking.oversample_factor},
              {"split_fraction", c.masking.split_fraction}}},
            {"models", models},
            {"ks", c.ks},
            {"seeds", {{"data", c.seeds.data}, {"model", c.seeds.model}, {"eval", c.seeds.eval}}},
            {"output_dir", c.output_dir}};
}

/// Missing keys keep the embedded defaults; unknown keys are rejected.
inline ExperimentConfig experiment_from_json(const nlohmann::json &j)
{
    detail::check_keys(j, {"scenario", "masking", "models", "ks", "seeds", "output_dir"}, "experiment config");
    ExperimentConfig c = default_experiment();
    if (j.contains("scenario")) c.scenario = scenario_from_json(j.at("scenario"));
    if (j.contains("masking")) {
        const auto &m = j.at("masking");
        detail::check_keys(m, {"train_p", "test_ps", "oversample_factor", "split_fraction"}, "masking");
        if (m.contains("train_p")) c.masking.train_p = detail::json_get<double>(m.at("train_p"), "train_p");
        if (m.contains("test_ps")) c.masking.test_ps = detail::json_get<std::vector<double>>(m.at("test_ps"), "test_ps");
        if (m.contains("oversample_factor"))
            c.masking.oversample_factor = detail::json_get<std::size_t>(m.at("oversample_factor"), "oversample_factor");
        if (m.contains("split_fraction"))
            c.masking.split_fraction = detail::json_get<double>(m.at("split_fraction"), "split_fraction");
    }
    if (j.contains("models")) {
        if (!j.at("models").is_array()) throw ConfigError("models must be a list of model blocks");
        c.models.clear();
        for (const auto &b : j.at("models")) c.models.push_back(model_spec_from_json(b));
    }
    if (j.contains("ks")) c.ks = detail::json_get<std::vector<std::size_t>>(j.at("ks"), "ks");
    if (j.contains("seeds")) {
        const auto &s = j.at("seeds");
        detail::check_keys(s, {"data", "model", "eval"}, "seeds");
        if (s.contains("data")) c.seeds.data = detail::json_get<std::uint64_t>(s.at("data"), "seeds.data");
        if (s.contains("model")) c.seeds.model = detail::json_get<std::uint64_t>(s.at("model"), "seeds.model");
        if (s.contains("eval")) c.seeds.eval = detail::json_get<std::uint64_t>(s.at("eval"), "seeds.eval");
    }
    if (j.contains("output_dir")) c.output_dir = detail::json_get<std::string>(j.at("output_dir"), "output_dir");
    for (auto &m : c.models) m.gan.gen_out = c.scenario.total_beams();
    c.validate();
    return c;
}

inline ExperimentConfig load_experiment(const std::string &path)
{
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    try {
        return experiment_from_json(nlohmann::json::parse(is));
    } catch (const nlohmann::json::parse_error &e) {
        throw ConfigError("malformed config file " + path + ": " + e.what());
    }
}

// ---- Commands -----------------------------------------------------------

struct Paths {
    std::filesystem::path root;
    std::string dataset() const { return (root / "data" / "dataset").string(); }
    std::string train() const { return (root / "data" / "train").string(); }
    std::string test() const { return (root / "data" / "test").string(); }
    std::string rf() const { return (root / "models" / "rf.bin").string(); }
    std::string mf() const { return (root / "models" / "mf.json").string(); }
    std::string cgan() const { return (root / "models" / "cgan.bin").string(); }
    std::string cgan_curve() const { return (root / "models" / "cgan_curve.csv").string(); }
    std::string outcomes() const { return (root / "outcomes.csv").string(); }
    std::string report() const { return (root / "report").string(); }
};

namespace detail {

inline void make_dirs(const std::filesystem::path &p)
{
    std::error_code ec;
    std::filesystem::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

inline bool exists(const std::string &path) { return std::filesystem::exists(path); }

inline void log(std::ostream *os, const std::string &msg)
{
    if (os) *os << "[beaminfer] " << msg << std::endl;
}

} // namespace detail

/// Generates the grid, splits by UE, masks and oversamples the training side.
inline void cmd_generate(const ExperimentConfig &cfg, std::ostream *log = &std::cerr)
{
    const Paths p{cfg.output_dir};
    detail::make_dirs(p.root / "data");
    const Dataset ds = generate_scenario(cfg.scenario);
    auto [train, test] = split(ds, cfg.masking.split_fraction, derive_seed(cfg.seeds.data, 0x5b));
    MaskedDataset masked = oversample(train, cfg.masking.oversample_factor, cfg.masking.train_p, derive_seed(cfg.seeds.data, 0x3a));
    masked.split = SplitTag::train;
    write_dataset(ds, p.dataset());
    write_dataset(test, p.test());
    write_masked_dataset(masked, p.train());
    detail::log(log, "generated " + std::to_string(ds.rows.size()) + " UEs x " + std::to_string(ds.width()) + " beams (" +
                         std::to_string(ds.num_aps()) + " APs x " + std::to_string(ds.beams_per_ap()) + "); train " +
                         std::to_string(train.rows.size()) + " sources -> " + std::to_string(masked.rows.size()) +
                         " masked rows, test " + std::to_string(test.rows.size()));
}

namespace detail {

inline MaskedDataset load_train(const Paths &p)
{
    if (!exists(p.train() + "_manifest.json")) throw StateError("no training data at " + p.train() + "; run generate first");
    return read_masked_dataset(p.train());
}

// One replica per source, capped at `limit` sources (0 = all).
inline Matrix mf_training_matrix(const MaskedDataset &train, std::size_t limit)
{
    const std::size_t factor = std::max<std::size_t>(1, train.oversample_factor);
    std::size_t n = train.rows.size() / factor;
    if (limit > 0) n = std::min(n, limit);
    Matrix m(n, train.width());
    for (std::size_t i = 0; i < n; ++i) m.set_row(i, train.rows[i * factor].observed);
    return m;
}

inline nlohmann::json mf_manifest(const ModelSpec &spec, std::uint64_t seed)
{
    nlohmann::json j = to_json(spec);
    j["seed"] = seed;
    return j;
}

} // namespace detail

inline void cmd_train(const ExperimentConfig &cfg, ModelKind kind, std::ostream *log = &std::cerr)
{
    const Paths p{cfg.output_dir};
    const ModelSpec &spec = cfg.model(kind);
    detail::make_dirs(p.root / "models");
    if (kind == ModelKind::mean || kind == ModelKind::random) {
        detail::log(log, std::string(to_string(kind)) + ": nothing to train");
        return;
    }
    const MaskedDataset train = detail::load_train(p);
    if (train.width() != cfg.scenario.total_beams()) throw StateError("training data width does not match the config; regenerate");
    const std::uint64_t seed = derive_seed(cfg.seeds.model, static_cast<std::uint64_t>(kind));
    switch (kind) {
    case ModelKind::rf: {
        const auto imp = RfImputer::fit(observed_matrix(train), spec.forest, seed);
        imp.save(p.rf());
        detail::log(log, "rf: " + std::to_string(imp.width()) + " column forests -> " + p.rf());
        break;
    }
    case ModelKind::mf: {
        detail::write_json_file(p.mf(), detail::mf_manifest(spec, seed));
        detail::log(log, "mf: hyperparameters -> " + p.mf());
        break;
    }
    case ModelKind::cgan: {
        GanConfig g = spec.gan;
        g.seed = seed;
        const CganModel m = train_cgan(train, g);
        m.save(p.cgan());
        write_training_curve(m, p.cgan_curve());
        detail::log(log, "cgan: " + std::to_string(m.pretrain_loss.size()) + " pretrain + " +
                             std::to_string(m.gen_loss.size()) + " adversarial epochs -> " + p.cgan());
        break;
    }
    default: break;
    }
}

/// Loads what each requested model needs; a missing checkpoint is a state error.
inline TrainedModels load_trained(const ExperimentConfig &cfg, const std::vector<ModelKind> &kinds)
{
    const Paths p{cfg.output_dir};
    TrainedModels tm;
    std::optional<MaskedDataset> train;
    auto need_train = [&]() -> const MaskedDataset & {
        if (!train) train = detail::load_train(p);
        return *train;
    };
    for (auto k : kinds) {
        switch (k) {
        case ModelKind::rf:
            if (!detail::exists(p.rf())) throw StateError("missing checkpoint for model 'rf': " + p.rf());
            tm.rf = RfImputer::load(p.rf());
            break;
        case ModelKind::mf: {
            if (!detail::exists(p.mf())) throw StateError("missing checkpoint for model 'mf': " + p.mf());
            const auto j = detail::read_json_file(p.mf());
            MfArtifacts a;
            ModelSpec spec;
            try {
                nlohmann::json block = j;
                block.erase("seed");
                spec = model_spec_from_json(block);
                a.seed = j.at("seed").get<std::uint64_t>();
            } catch (const nlohmann::json::exception &e) {
                throw IoError("malformed MF manifest " + p.mf() + ": " + e.what());
            }
            a.params.forest = spec.forest;
            a.params.max_iter = spec.max_iter;
            a.train_observed = detail::mf_training_matrix(need_train(), spec.train_rows);
            tm.mf = std::move(a);
            break;
        }
        case ModelKind::cgan:
            if (!detail::exists(p.cgan())) throw StateError("missing checkpoint for model 'cgan': " + p.cgan());
            tm.cgan = CganModel::load(p.cgan());
            break;
        case ModelKind::mean: tm.column_means = column_means(observed_matrix(need_train())).means; break;
        case ModelKind::random: break;
        }
    }
    return tm;
}

inline EvalReport cmd_report(const ExperimentConfig &cfg, std::ostream *log = &std::cerr)
{
    const Paths p{cfg.output_dir};
    if (!detail::exists(p.outcomes())) throw StateError("no outcome table at " + p.outcomes() + "; run evaluate first");
    const auto outcomes = read_outcomes(p.outcomes());
    const auto rep = build_report(outcomes, cfg.model_kinds(), cfg.masking.test_ps, cfg.ks);
    write_report(rep, p.report());
    detail::log(log, "report: " + std::to_string(rep.cells.size()) + " cells -> " + p.report());
    return rep;
}

inline EvalReport cmd_evaluate(const ExperimentConfig &cfg, std::ostream *log = &std::cerr)
{
    const Paths p{cfg.output_dir};
    if (!detail::exists(p.test() + ".json")) throw StateError("no test split at " + p.test() + "; run generate first");
    const Dataset test = read_dataset(p.test());
    const auto kinds = cfg.model_kinds();
    const TrainedModels tm = load_trained(cfg, kinds);
    SweepDiagnostics diag;
    const auto outcomes = run_sweep(test, kinds, cfg.masking.test_ps, cfg.ks, tm, cfg.seeds.eval, &diag);
    if (diag.passthrough_violations) detail::log(log, "warning: " + std::to_string(diag.passthrough_violations) + " observed entries altered by imputers");
    write_outcomes(outcomes, p.outcomes());
    detail::log(log, "evaluate: " + std::to_string(outcomes.size()) + " outcomes -> " + p.outcomes());
    return cmd_report(cfg, log);
}

} // namespace beaminfer

#endif
