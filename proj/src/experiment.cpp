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
#include "ccr/experiment.hpp"

#include "ccr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <numeric>
#include <stdexcept>

namespace ccr {

std::vector<double> desk_forgetting_schedule(std::size_t levels)
{
    std::vector<double> out = default_forgetting_schedule(levels);
    for (double& l : out) {
        l *= 2.0;
    }
    return out;
}

std::uint64_t named_seed(std::uint64_t base, std::string_view name)
{
    // FNV-1a over the name, mixed with the base through splitmix64.
    std::uint64_t h = 1469598103934665603ull;
    for (const char c : name) {
        h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ull;
    }
    std::uint64_t z = base + 0x9e3779b97f4a7c15ull * (h | 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

TrainingData generate_training_data(const ExperimentConfig& cfg)
{
    GeneratorConfig gen = tier_config("medium", cfg.train_frames);
    gen.width = gen.height = cfg.image_size;
    TrainingData data;
    data.stills = as_loaded(generate_stills(gen, cfg.train_stills, named_seed(cfg.seed, "train-stills")));
    for (int i = 0; i < cfg.train_sequences; ++i) {
        const auto seed = named_seed(cfg.seed, "train-sequence-" + std::to_string(i));
        data.sequences.push_back(as_loaded(generate_sequence(gen, seed)));
    }
    data.calibration = as_loaded(generate_stills(gen, cfg.calibration_stills, named_seed(cfg.seed, "calibration")));
    GeneratorConfig drifted = tier_config("drift", 1);
    drifted.width = drifted.height = cfg.image_size;
    const LoadedSequence extra =
        as_loaded(generate_stills(drifted, cfg.calibration_stills, named_seed(cfg.seed, "calibration-drift")));
    data.calibration.frames.insert(data.calibration.frames.end(), extra.frames.begin(), extra.frames.end());
    data.calibration.gt_shapes.insert(data.calibration.gt_shapes.end(), extra.gt_shapes.begin(), extra.gt_shapes.end());
    return data;
}

std::vector<MomentSpec> level_moments(const CascadeModel& model)
{
    std::vector<MomentSpec> out;
    for (const auto& level : model.levels) {
        out.push_back(level.moments);
    }
    return out;
}

TrainedSystem train_system(const TrainingData& data, const ExperimentConfig& cfg, const FeatureExtractor& extractor)
{
    TrainedSystem sys;
    sys.set = prepare_training(data.stills, data.sequences, cfg.m_flex, cfg.point_space);
    sys.trained = train_ccr(sys.set.images, sys.set.params, sys.set.pdm, sys.set.statistics.moments, cfg.cascade,
                            extractor);
    sys.offline = level_moments(sys.trained.model);
    if (!data.calibration.frames.empty()) {
        const auto params = fit_sequence(sys.set.pdm, data.calibration.gt_shapes);
        sys.gate = calibrate_gate(sys.trained.model, data.calibration.frames, params, named_seed(cfg.seed, "gate"));
    }
    return sys;
}

std::vector<SyntheticSequence> generate_tier(const std::string& tier, int count, int frames, int image_size,
                                             std::uint64_t seed)
{
    GeneratorConfig gen = tier_config(tier, frames);
    gen.width = gen.height = image_size;
    std::vector<SyntheticSequence> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(generate_sequence(gen, named_seed(seed, tier + "-" + std::to_string(i))));
    }
    return out;
}

SweepResult sweep_forgetting(const CascadeModel& model, std::span<const LevelSystem> systems,
                             std::span<const MomentSpec> offline, const GateConfig& gate,
                             std::span<const LoadedSequence> sequences, std::span<const double> base_schedule,
                             std::span<const double> scales, std::uint64_t seed)
{
    if (sequences.empty() || scales.empty()) {
        throw std::invalid_argument("sweep_forgetting: nothing to sweep");
    }
    SweepResult out;
    out.scales.assign(scales.begin(), scales.end());
    out.auc.assign(sequences.size(), std::vector<double>(scales.size()));
    for (std::size_t k = 0; k < scales.size(); ++k) {
        std::vector<double> lambdas(base_schedule.begin(), base_schedule.end());
        for (double& l : lambdas) {
            l *= scales[k];
        }
        const IncrementalState state = init_incremental(model, systems, lambdas);
        for (std::size_t s = 0; s < sequences.size(); ++s) {
            TrackOptions options;
            options.mode = TrackMode::iccr;
            options.gate = gate;
            options.seed = seed;
            const TrackRecord rec = track(model, sequences[s].frames, sequences[s].gt_shapes, options, offline, &state);
            out.auc[s][k] = ced_auc(rec.rmse).auc;
        }
    }
    for (std::size_t k = 0; k < scales.size(); ++k) {
        double sum = 0.0;
        for (const auto& row : out.auc) {
            sum += row[k];
        }
        out.fixed_auc.push_back(sum / static_cast<double>(sequences.size()));
    }
    out.best_fixed = static_cast<std::size_t>(
        std::max_element(out.fixed_auc.begin(), out.fixed_auc.end()) - out.fixed_auc.begin());
    double oracle = 0.0;
    for (const auto& row : out.auc) {
        oracle += *std::max_element(row.begin(), row.end());
    }
    out.oracle_auc = oracle / static_cast<double>(sequences.size());
    return out;
}

std::vector<TaylorLevelSummary> taylor_validity_study(std::span<const Image> images, std::span<const Shape> shapes,
                                                      std::span<const int> levels, int k, std::uint64_t seed,
                                                      const FeatureConfig& cfg)
{
    require_dims(images.size() == shapes.size() && !images.empty(), "taylor_validity_study: need matching images");
    if (k < 2) {
        throw std::invalid_argument("taylor_validity_study: need at least two perturbations per image");
    }
    std::vector<TaylorLevelSummary> out;
    for (const int level : levels) {
        std::mt19937_64 rng(named_seed(seed, "taylor-" + std::to_string(level)));
        const double variance = std::ldexp(1.0, level - 1);
        std::normal_distribution<double> normal(0.0, std::sqrt(variance));
        std::vector<double> diagonal;
        std::vector<double> off;
        TaylorLevelSummary row;
        row.level = level;
        row.variance = variance;
        for (std::size_t i = 0; i < images.size(); ++i) {
            std::vector<Vector> deltas;
            for (int j = 0; j < k; ++j) {
                Vector d(shapes[i].size());
                for (Index q = 0; q < d.size(); ++q) {
                    d[q] = normal(rng);
                }
                deltas.push_back(d);
            }
            const TaylorValidity tv = taylor_validity(images[i], shapes[i], deltas, deltas, cfg);
            row.flagged += tv.flagged;
            for (Index a = 0; a < tv.dist.rows(); ++a) {
                for (Index b = 0; b < tv.dist.cols(); ++b) {
                    const double v = tv.dist(a, b);
                    if (std::isnan(v)) {
                        continue;
                    }
                    (a == b ? diagonal : off).push_back(v);
                }
            }
        }
        row.diagonal_median = median(diagonal);
        row.off_diagonal_median = median(off);
        out.push_back(row);
    }
    return out;
}

} // namespace ccr
