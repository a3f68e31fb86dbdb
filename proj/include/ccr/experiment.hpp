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
#pragma once

#include "ccr/cascade.hpp"
#include "ccr/incremental.hpp"
#include "ccr/synthetic.hpp"
#include "ccr/tracker.hpp"

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ccr {

/// Forgetting factors validated on the synthetic training sequences: the
/// default schedule scaled by two.
std::vector<double> desk_forgetting_schedule(std::size_t levels);

/// Deterministic per-purpose seed derived from a base seed and a name.
std::uint64_t named_seed(std::uint64_t base, std::string_view name);

struct ExperimentConfig {
    std::uint64_t seed = 1;
    int image_size = 128;
    int train_stills = 300;
    int train_sequences = 10;
    int train_frames = 100;
    int calibration_stills = 60; ///< per appearance condition (training look and drifted look)
    Index m_flex = 6;
    bool point_space = false;
    CascadeConfig cascade;
    FeatureConfig features;
};

struct TrainingData {
    LoadedSequence stills;
    std::vector<LoadedSequence> sequences;
    LoadedSequence calibration;
};

/// Training stills, training sequences (for the statistics) and held-out
/// calibration stills, all from the medium tier except half of the
/// calibration set, which uses the drifted appearance.
TrainingData generate_training_data(const ExperimentConfig& cfg);

struct TrainedSystem {
    TrainingSet set;
    TrainedCascade trained;
    GateConfig gate;
    std::vector<MomentSpec> offline; ///< moments each level was trained with
};

TrainedSystem train_system(const TrainingData& data, const ExperimentConfig& cfg, const FeatureExtractor& extractor);

std::vector<MomentSpec> level_moments(const CascadeModel& model);

/// `count` test sequences of a tier.
std::vector<SyntheticSequence> generate_tier(const std::string& tier, int count, int frames, int image_size,
                                             std::uint64_t seed);

struct SweepResult {
    std::vector<double> scales;          ///< multipliers applied to the base schedule
    std::vector<std::vector<double>> auc; ///< auc[sequence][scale]
    std::vector<double> fixed_auc;       ///< mean over sequences per scale
    double oracle_auc = 0.0;             ///< mean over sequences of the per-sequence best
    std::size_t best_fixed = 0;
};

/// Tracks every sequence in iccr mode once per forgetting-factor scale.
SweepResult sweep_forgetting(const CascadeModel& model, std::span<const LevelSystem> systems,
                             std::span<const MomentSpec> offline, const GateConfig& gate,
                             std::span<const LoadedSequence> sequences, std::span<const double> base_schedule,
                             std::span<const double> scales, std::uint64_t seed);

struct TaylorLevelSummary {
    int level = 0;
    double variance = 0.0; ///< per-coordinate perturbation variance, 2^(level - 1)
    double diagonal_median = 0.0;
    double off_diagonal_median = 0.0;
    Index flagged = 0;
};

/// For every level, K isotropic point perturbations per image; medians of
/// the same-displacement and cross-displacement Taylor distances.
std::vector<TaylorLevelSummary> taylor_validity_study(std::span<const Image> images, std::span<const Shape> shapes,
                                                      std::span<const int> levels, int k, std::uint64_t seed,
                                                      const FeatureConfig& cfg);

} // namespace ccr
