/*
 * Copyright 2026 The ccr Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#include "ccr/config.hpp"
#include "ccr/experiment.hpp"
#include "ccr/metrics.hpp"
#include "ccr/model_io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using namespace ccr;

namespace {

struct Overrides {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> mode;
    std::optional<int> levels;
    std::optional<std::string> lambda;
    bool sweep = false;
};

RunConfig resolve(const Overrides& o)
{
    RunConfig cfg;
    if (!o.config.empty()) {
        cfg.load(o.config);
    }
    if (o.seed) {
        cfg.seed = *o.seed;
    }
    if (o.out) {
        cfg.out_dir = *o.out;
    }
    if (o.mode) {
        cfg.set("mode", *o.mode);
    }
    if (o.levels) {
        cfg.levels = *o.levels;
    }
    if (o.lambda) {
        cfg.set("lambda", *o.lambda);
    }
    return cfg;
}

ExperimentConfig experiment(const RunConfig& cfg)
{
    ExperimentConfig e;
    e.seed = cfg.seed;
    e.image_size = cfg.image_size;
    e.train_stills = cfg.train_stills;
    e.train_sequences = cfg.train_sequences;
    e.train_frames = cfg.train_frames;
    e.calibration_stills = cfg.validation_frames / 2;
    e.m_flex = cfg.m_flex;
    e.cascade = cfg.cascade();
    e.features = cfg.features;
    return e;
}

std::string seq_name(std::size_t i)
{
    char buf[16];
    std::snprintf(buf, sizeof(buf), "seq_%02zu", i);
    return buf;
}

std::vector<fs::path> sequence_dirs(const fs::path& dir)
{
    if (!fs::is_directory(dir)) {
        throw std::runtime_error("missing data directory " + dir.string());
    }
    std::vector<fs::path> out;
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (entry.is_directory() && entry.path().filename().string().rfind("seq_", 0) == 0) {
            out.push_back(entry.path());
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::ofstream open_out(const fs::path& file)
{
    fs::create_directories(file.parent_path().empty() ? fs::path(".") : file.parent_path());
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("cannot write " + file.string());
    }
    out.precision(10);
    return out;
}

fs::path sdm_path(const RunConfig& cfg)
{
    return fs::path(cfg.model_file.string() + ".sdm");
}

void log_seed(const char* name, std::uint64_t seed)
{
    std::cout << "seed " << name << " = " << seed << '\n';
}

int cmd_gen_data(const RunConfig& cfg)
{
    const ExperimentConfig e = experiment(cfg);
    log_seed("base", cfg.seed);
    const TrainingData data = generate_training_data(e);
    const fs::path root = cfg.data_dir;
    auto write_loaded = [](const fs::path& dir, const LoadedSequence& seq) {
        SyntheticSequence out;
        out.frames = seq.frames;
        out.gt_shapes = seq.gt_shapes;
        write_sequence(dir, out);
    };
    write_loaded(root / "train" / "stills", data.stills);
    for (std::size_t i = 0; i < data.sequences.size(); ++i) {
        write_loaded(root / "train" / seq_name(i), data.sequences[i]);
    }
    write_loaded(root / "calibration", data.calibration);
    std::cout << "train stills: " << data.stills.frames.size() << '\n'
              << "train sequences: " << data.sequences.size() << '\n'
              << "calibration stills: " << data.calibration.frames.size() << '\n';
    for (const auto& tier : cfg.tiers) {
        const auto seqs = generate_tier(tier, cfg.test_sequences, cfg.test_frames, cfg.image_size, cfg.seed);
        std::size_t frames = 0;
        for (std::size_t i = 0; i < seqs.size(); ++i) {
            write_sequence(root / tier / seq_name(i), seqs[i]);
            frames += seqs[i].frames.size();
        }
        std::cout << "tier " << tier << ": " << seqs.size() << " sequences, " << frames << " frames\n";
    }
    return 0;
}

TrainingData load_training(const RunConfig& cfg)
{
    const fs::path root = cfg.data_dir;
    TrainingData data;
    data.stills = read_sequence(root / "train" / "stills");
    for (const auto& dir : sequence_dirs(root / "train")) {
        data.sequences.push_back(read_sequence(dir));
    }
    if (fs::exists(root / "calibration" / "ground_truth.txt")) {
        data.calibration = read_sequence(root / "calibration");
    }
    if (data.sequences.empty()) {
        throw std::runtime_error("no training sequences under " + (root / "train").string());
    }
    return data;
}

int cmd_train(const RunConfig& cfg)
{
    const ExperimentConfig e = experiment(cfg);
    const TrainingData data = load_training(cfg);
    const FeatureExtractor extractor(cfg.features);
    log_seed("cascade", e.cascade.seed);
    const TrainedSystem sys = train_system(data, e, extractor);
    const TrainedCascade& t = sys.trained;

    std::cout << "training images: " << sys.set.images.size() << ", statistics pairs: " << sys.set.statistics.samples
              << '\n';
    for (std::size_t l = 0; l < t.stats.size(); ++l) {
        std::cout << (l == 0 ? "initial" : "level " + std::to_string(l))
                  << ": trace(Sigma) = " << t.stats[l].moments.sigma.trace() << ", |mu| = " << t.stats[l].mean_norm
                  << '\n';
    }
    std::cout << "extractions: regression = " << t.extractions << " (5 x " << sys.set.images.size()
              << "), statistics = " << t.propagation_extractions << '\n';
    std::cout << "gate: update < " << sys.gate.update_threshold << ", loss > " << sys.gate.loss_threshold << '\n';

    ModelFile file;
    file.model = t.model;
    file.incremental = init_incremental(t.model, t.systems, cfg.forgetting());
    file.gate = sys.gate;
    if (cfg.update_threshold) {
        file.gate->update_threshold = *cfg.update_threshold;
    }
    if (cfg.loss_threshold) {
        file.gate->loss_threshold = *cfg.loss_threshold;
    }
    if (!cfg.model_file.parent_path().empty()) {
        fs::create_directories(cfg.model_file.parent_path());
    }
    save_model(cfg.model_file, file);
    std::cout << "model written to " << cfg.model_file.string() << '\n';

    if (cfg.train_sdm) {
        const FeatureExtractor sdm_extractor(cfg.features);
        const TrainedSdm sdm = train_sdm(sys.set.images, sys.set.params, sys.set.pdm, sys.set.statistics.moments,
                                         cfg.initial_draws, e.cascade, sdm_extractor);
        std::cout << "sdm extractions: " << sdm.extractions << " (L K M = " << cfg.levels << " x "
                  << cfg.initial_draws << " x " << sys.set.images.size() << ")\n";
        ModelFile sdm_file;
        sdm_file.model = sdm.model;
        sdm_file.gate = sys.gate;
        save_model(sdm_path(cfg), sdm_file);
        std::cout << "sdm model written to " << sdm_path(cfg).string() << '\n';
    }
    return 0;
}

struct Loaded {
    ModelFile file;
    GateConfig gate;
};

Loaded load_for_mode(const RunConfig& cfg, const std::string& mode)
{
    Loaded out;
    out.file = load_model(mode == "sdm" ? sdm_path(cfg) : cfg.model_file);
    out.gate = out.file.gate.value_or(GateConfig{});
    if (cfg.update_threshold) {
        out.gate.update_threshold = *cfg.update_threshold;
    }
    if (cfg.loss_threshold) {
        out.gate.loss_threshold = *cfg.loss_threshold;
    }
    if (mode == "iccr") {
        if (!out.file.incremental) {
            throw std::runtime_error("model file has no incremental section");
        }
        const auto lambdas = cfg.forgetting();
        if (lambdas.size() != out.file.incremental->levels.size()) {
            throw std::invalid_argument("lambda needs one value per model level");
        }
        for (std::size_t l = 0; l < lambdas.size(); ++l) {
            out.file.incremental->levels[l].lambda = lambdas[l];
        }
    }
    return out;
}

TrackRecord run_track(const Loaded& m, const std::string& mode, const LoadedSequence& seq, std::uint64_t seed)
{
    TrackOptions options;
    options.mode = mode == "iccr" ? TrackMode::iccr : TrackMode::ccr;
    options.gate = m.gate;
    options.seed = seed;
    const auto offline = level_moments(m.file.model);
    return track(m.file.model, seq.frames, seq.gt_shapes, options, offline,
                 mode == "iccr" ? &*m.file.incremental : nullptr);
}

void write_record(const fs::path& file, const TrackRecord& rec)
{
    auto out = open_out(file);
    out << "frame,rmse,reinit,updated\n";
    for (std::size_t t = 0; t < rec.size(); ++t) {
        out << t << ',' << rec.rmse[t] << ',' << int(rec.reinit[t]) << ',' << int(rec.updated[t]) << '\n';
    }
}

int cmd_track(const RunConfig& cfg)
{
    const Loaded m = load_for_mode(cfg, cfg.mode);
    const std::uint64_t seed = named_seed(cfg.seed, "detector");
    log_seed("detector", seed);
    for (const auto& tier : cfg.tiers) {
        const auto dirs = sequence_dirs(cfg.data_dir / tier);
        for (const auto& dir : dirs) {
            const TrackRecord rec = run_track(m, cfg.mode, read_sequence(dir), seed);
            write_record(cfg.out_dir / "track" / cfg.mode / tier / (dir.filename().string() + ".csv"), rec);
            const auto reinits = std::count(rec.reinit.begin(), rec.reinit.end(), true);
            const auto updates = std::count(rec.updated.begin(), rec.updated.end(), true);
            std::cout << cfg.mode << ' ' << tier << ' ' << dir.filename().string() << ": auc "
                      << ced_auc(rec.rmse).auc << ", reinit " << reinits << ", updates " << updates << '\n';
        }
    }
    return 0;
}

int cmd_eval(const RunConfig& cfg, bool sweep)
{
    std::vector<std::string> modes{"ccr", "iccr"};
    if (fs::exists(sdm_path(cfg))) {
        modes.push_back("sdm");
    }
    const std::uint64_t seed = named_seed(cfg.seed, "detector");
    log_seed("detector", seed);
    auto table = open_out(cfg.out_dir / "auc.csv");
    table << "tier,mode,sequences,frames,auc,reinit_rate\n";
    auto per_seq = open_out(cfg.out_dir / "auc_per_sequence.csv");
    per_seq << "tier,mode,sequence,auc,median_rmse\n";
    for (const auto& mode : modes) {
        const Loaded m = load_for_mode(cfg, mode);
        for (const auto& tier : cfg.tiers) {
            std::vector<double> errors;
            std::size_t reinits = 0;
            const auto dirs = sequence_dirs(cfg.data_dir / tier);
            for (const auto& dir : dirs) {
                const TrackRecord rec = run_track(m, mode, read_sequence(dir), seed);
                errors.insert(errors.end(), rec.rmse.begin(), rec.rmse.end());
                reinits += static_cast<std::size_t>(std::count(rec.reinit.begin(), rec.reinit.end(), true));
                per_seq << tier << ',' << mode << ',' << dir.filename().string() << ',' << ced_auc(rec.rmse).auc << ','
                        << median(rec.rmse) << '\n';
            }
            if (errors.empty()) {
                throw std::runtime_error("tier " + tier + " has no frames");
            }
            const CedCurve curve = ced_auc(errors);
            table << tier << ',' << mode << ',' << dirs.size() << ',' << errors.size() << ',' << curve.auc << ','
                  << static_cast<double>(reinits) / static_cast<double>(errors.size()) << '\n';
            auto ced = open_out(cfg.out_dir / ("ced_" + tier + "_" + mode + ".dat"));
            ced << "# threshold fraction\n";
            for (std::size_t i = 0; i < curve.thresholds.size(); ++i) {
                ced << curve.thresholds[i] << ' ' << curve.fraction[i] << '\n';
            }
            std::cout << tier << ' ' << mode << ": auc " << curve.auc << '\n';
        }
    }

    if (sweep) {
        const Loaded m = load_for_mode(cfg, "iccr");
        ModelFile raw = load_model(cfg.model_file);
        std::vector<LevelSystem> systems;
        for (const auto& level : raw.incremental->levels) {
            // V already carries the ridge; hand it back as a ridge-free system.
            systems.push_back({level.v, level.cov_xy, 0.0});
        }
        std::vector<LoadedSequence> seqs;
        const std::string tier = std::find(cfg.tiers.begin(), cfg.tiers.end(), "drift") != cfg.tiers.end()
                                     ? "drift"
                                     : cfg.tiers.back();
        for (const auto& dir : sequence_dirs(cfg.data_dir / tier)) {
            seqs.push_back(read_sequence(dir));
        }
        const std::vector<double> scales{0.25, 0.5, 1.0, 2.0, 4.0, 8.0};
        const auto base = cfg.forgetting();
        const SweepResult res = sweep_forgetting(m.file.model, systems, level_moments(m.file.model), m.gate, seqs, base,
                                                 scales, seed);
        auto out = open_out(cfg.out_dir / "lambda_sweep.csv");
        out << "scale,mean_auc\n";
        for (std::size_t k = 0; k < scales.size(); ++k) {
            out << scales[k] << ',' << res.fixed_auc[k] << '\n';
        }
        out << "oracle," << res.oracle_auc << '\n';
        std::cout << "lambda sweep on " << tier << ": best fixed scale " << scales[res.best_fixed] << " auc "
                  << res.fixed_auc[res.best_fixed] << ", oracle auc " << res.oracle_auc << ", gap "
                  << res.oracle_auc - res.fixed_auc[res.best_fixed] << '\n';
    }
    return 0;
}

int cmd_bench(const RunConfig& cfg)
{
    const SamplingCost s = sampling_cost_report(static_cast<std::uint64_t>(cfg.levels),
                                                static_cast<std::uint64_t>(cfg.initial_draws),
                                                static_cast<std::uint64_t>(cfg.train_stills));
    auto out = open_out(cfg.out_dir / "bench_sampling.csv");
    out << "levels,k,images,sdm_extractions,ccr_extractions,ratio\n"
        << cfg.levels << ',' << cfg.initial_draws << ',' << cfg.train_stills << ',' << s.sdm_extractions << ','
        << s.ccr_extractions << ',' << s.ratio << '\n';
    std::cout << "sampling: SDM " << s.sdm_extractions << ", CCR " << s.ccr_extractions << ", ratio LK/5 = " << s.ratio
              << '\n';

    auto upd = open_out(cfg.out_dir / "bench_update.csv");
    upd << "d,m,predicted_iccr,measured_iccr,predicted_isdm,measured_isdm,measured_ratio,predicted_ratio\n";
    const Index model_m = cfg.m_flex + ShapeParams::kRigidCount;
    std::vector<std::pair<Index, Index>> dims;
    for (const Index d : {cfg.pca_dim + 1, Index{128}, Index{256}, Index{512}}) {
        dims.emplace_back(d, model_m);
    }
    // Full-scale reference: 68 landmarks in parameter space (m = 24) and point space (m = 132).
    dims.emplace_back(256, 24);
    dims.emplace_back(256, 132);
    for (const auto& [d, m] : dims) {
        const UpdateCost c = update_cost_profile(d, m, named_seed(cfg.seed, "bench"));
        upd << d << ',' << m << ',' << c.predicted_iccr << ',' << c.measured_iccr << ',' << c.predicted_isdm << ','
            << c.measured_isdm << ',' << c.measured_ratio << ',' << c.predicted_ratio << '\n';
        std::cout << "update d=" << d << " m=" << m << ": iCCR " << c.measured_iccr << " mults, iSDM "
                  << c.measured_isdm << " mults, ratio " << c.measured_ratio << " (d/3m = " << c.predicted_ratio
                  << ")\n";
    }
    return 0;
}

int cmd_validate_taylor(const RunConfig& cfg)
{
    LoadedSequence images;
    const fs::path calib = cfg.data_dir / "calibration";
    if (fs::exists(calib / "ground_truth.txt")) {
        images = read_sequence(calib);
    } else {
        GeneratorConfig gen = tier_config("medium", 1);
        gen.width = gen.height = cfg.image_size;
        images = as_loaded(generate_stills(gen, 100, named_seed(cfg.seed, "taylor-images")));
    }
    const std::vector<int> levels{3, 4, 5, 6, 7};
    const auto rows =
        taylor_validity_study(images.frames, images.gt_shapes, levels, 10, named_seed(cfg.seed, "taylor"), cfg.features);
    auto out = open_out(cfg.out_dir / "taylor_validity.csv");
    out << "level,variance,diagonal_median,off_diagonal_median,flagged\n";
    for (const auto& r : rows) {
        out << r.level << ',' << r.variance << ',' << r.diagonal_median << ',' << r.off_diagonal_median << ','
            << r.flagged << '\n';
        std::cout << "level " << r.level << ": diagonal " << r.diagonal_median << ", off-diagonal "
                  << r.off_diagonal_median << '\n';
    }
    return 0;
}

std::string escape(const std::string& s)
{
    std::string out;
    for (const char c : s) {
        if (c == '"' || c == '\\') {
            out.push_back('\\');
        }
        out.push_back(c == '\n' ? ' ' : c);
    }
    return out;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Cascaded continuous regression: training, tracking and evaluation on synthetic data"};
    app.require_subcommand(1);
    Overrides o;
    app.add_option("--config", o.config, "key=value configuration file");
    app.add_option("--seed", o.seed, "base seed");
    app.add_option("--out", o.out, "output directory");
    app.add_option("--mode", o.mode, "ccr, iccr or sdm")->check(CLI::IsMember({"ccr", "iccr", "sdm"}));
    app.add_option("--levels", o.levels, "cascade levels");
    app.add_option("--lambda", o.lambda, "forgetting factors, comma separated");

    auto* gen = app.add_subcommand("gen-data", "write training data and test tiers");
    auto* train = app.add_subcommand("train", "train the cascade and write the model file");
    auto* trk = app.add_subcommand("track", "track every test sequence and write per-frame records");
    auto* eval = app.add_subcommand("eval", "CED/AUC per tier and mode");
    eval->add_flag("--sweep", o.sweep, "also sweep the forgetting factors");
    auto* bench = app.add_subcommand("bench", "sampling and update cost tables");
    auto* taylor = app.add_subcommand("validate-taylor", "Taylor approximation diagnostics");
    for (auto* sub : {gen, train, trk, eval, bench, taylor}) {
        sub->fallthrough();
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    const std::string command = app.get_subcommands().front()->get_name();
    try {
        const RunConfig cfg = resolve(o);
        if (command == "gen-data") {
            return cmd_gen_data(cfg);
        }
        if (command == "train") {
            return cmd_train(cfg);
        }
        if (command == "track") {
            return cmd_track(cfg);
        }
        if (command == "eval") {
            return cmd_eval(cfg, o.sweep);
        }
        if (command == "bench") {
            return cmd_bench(cfg);
        }
        return cmd_validate_taylor(cfg);
    } catch (const std::exception& e) {
        std::cerr << "{\"status\":\"error\",\"command\":\"" << command << "\",\"message\":\"" << escape(e.what())
                  << "\"}\n";
        return 1;
    }
}
