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

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ccr {

struct FrameStatistics {
    MomentSpec moments;
    Index samples = 0;
};

/// Pooled mean and (population) covariance of p_{t - lag} - p_t over all
/// sequences and lags. Throws DegenerateInputError when no pair exists.
FrameStatistics frame_statistics(std::span<const std::vector<ShapeParams>> sequences,
                                 std::span<const int> lags);
FrameStatistics frame_statistics(std::span<const std::vector<ShapeParams>> sequences);

struct GateConfig {
    double update_threshold = 0.5; ///< fit score below this admits an incremental update
    double loss_threshold = 0.8;   ///< fit score above this triggers re-initialisation
    int update_spacing = 3;        ///< minimum frame gap between accepted updates
    int window = 50;               ///< frames in the statistics window
    int min_window = 10;           ///< below this the window is shrunk toward the offline moments
    double reinit_jitter = 0.03;   ///< detector noise, fraction of the face scale
};

/// Fraction of the last level's input features lying outside its PCA
/// subspace: |x - mean - P P^T (x - mean)| / |x|.
double fit_quality(const Image& img, const ShapeParams& p, const CascadeModel& model);
double fit_quality(const Vector& raw_features, const CascadeModel& model);

/// Update threshold from the given quantile of scores at the ground truth on
/// validation frames; loss threshold between the ground-truth scores and the
/// scores on pure-noise images.
GateConfig calibrate_gate(const CascadeModel& model, std::span<const Image> frames,
                          std::span<const ShapeParams> gt_params, std::uint64_t seed, double quantile = 0.95);

enum class TrackMode { ccr, iccr };

struct TrackOptions {
    TrackMode mode = TrackMode::ccr;
    GateConfig gate;
    std::uint64_t seed = 1;       ///< detector jitter
    bool init_at_gt = false;      ///< first frame starts at the fitted ground truth without jitter
    Index outer_left = 0;
    Index outer_right = 3;
};

struct TrackRecord {
    std::vector<Shape> shapes;
    std::vector<double> rmse;
    std::vector<bool> reinit;
    std::vector<bool> updated;
    std::uint64_t skipped_updates = 0;

    std::size_t size() const { return rmse.size(); }
};

/// Tracks a sequence frame by frame. `offline` are the per-level moments the
/// model was trained with; in iccr mode `state` must be initialised from the
/// same model.
TrackRecord track(const CascadeModel& model, std::span<const Image> frames, std::span<const Shape> gt_shapes,
                  const TrackOptions& options, std::span<const MomentSpec> offline,
                  const IncrementalState* state = nullptr);

/// Everything the tracker needs from training data: a learned PDM, the
/// fitted ground truth in its parameterisation and the initial moments
/// computed from frame differences.
struct TrainingSet {
    std::vector<Image> images;
    std::vector<ShapeParams> params;
    PdmModel pdm;
    FrameStatistics statistics;
};

/// `stills` provide the training images; `sequences` the shapes for the PDM
/// and the frame-difference statistics. With `point_space` the regression
/// targets are landmark offsets instead of PDM parameters.
TrainingSet prepare_training(const LoadedSequence& stills, std::span<const LoadedSequence> sequences, Index m_flex,
                             bool point_space = false);

/// Fitted parameters of each ground-truth shape.
std::vector<ShapeParams> fit_sequence(const PdmModel& pdm, std::span<const Shape> shapes);

} // namespace ccr
