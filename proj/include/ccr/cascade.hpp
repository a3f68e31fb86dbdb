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

#include "ccr/features.hpp"
#include "ccr/shapes.hpp"
#include "ccr/solver.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace ccr {

/// One cascade level: PCA of the level's functional covariance, the linear
/// map from projected (bias-augmented) features to parameter displacements,
/// and the perturbation moments the level was trained for.
struct CascadeLevel {
    PcaBasis pca;
    Regressor regressor; ///< m x (d_r + 1); last column is the intercept
    MomentSpec moments;

    /// [P^T (x - mean); 1]
    Vector features(const Vector& raw) const;
    /// Projected, bias-augmented ground-truth block for this level.
    GroundTruthSample project(const GroundTruthSample& raw) const;
};

struct CascadeModel {
    PdmModel pdm;
    FeatureConfig features;
    std::vector<CascadeLevel> levels;

    Index param_dim() const { return pdm.param_count(); }
    Index reduced_dim() const { return levels.empty() ? 0 : levels.front().pca.dim(); }
};

/// How training shapes are carried from one level to the next.
enum class Propagation {
    taylor,    ///< linearised features x* + J* dp from the cached ground truth: no extra sampling
    extracted, ///< descriptor re-extracted at every intermediate shape
};

struct CascadeConfig {
    Index levels = 4;
    Index pca_dim = 64;
    Index initial_draws = 10; ///< perturbed initial shapes per training image
    std::optional<double> ridge;
    std::uint64_t seed = 1;
    Propagation propagation = Propagation::extracted;
    bool uncorrelated = false; ///< force zero-mean diagonal moments at every level
};

/// Ground-truth features and parameter Jacobians of every training image,
/// extracted once.
struct TrainingCache {
    FeatureConfig features;
    PdmModel pdm;
    std::vector<ShapeParams> gt_params;
    std::vector<GroundTruthSample> samples; ///< raw descriptor space, d x m Jacobians
};

/// Residual displacements after a level and their moments.
struct LevelStats {
    std::vector<Vector> residuals;
    MomentSpec moments;
    double mean_norm = 0.0;
};

/// Normal equations of a level in its projected space (ridge not included).
struct LevelSystem {
    Matrix cov_xx;
    Matrix cov_xy;
    double ridge = 0.0;
};

struct TrainedCascade {
    CascadeModel model;
    TrainingCache cache;
    std::vector<LevelSystem> systems;
    std::vector<LevelStats> stats; ///< stats[0] initial, stats[l + 1] after level l
    std::uint64_t extractions = 0;             ///< descriptor calls made to sample the regression data
    std::uint64_t propagation_extractions = 0; ///< descriptor calls made to measure the level statistics
};

LevelStats level_stats(std::vector<Vector> residuals);

/// Five extractions per image (features plus four shifted copies).
TrainingCache precompute_cache(std::span<const Image> images, std::span<const ShapeParams> gt_params,
                               const PdmModel& pdm, const FeatureExtractor& extractor);

/// Cascaded Continuous Regression training from the initial moments.
TrainedCascade train_ccr(std::span<const Image> images, std::span<const ShapeParams> gt_params, const PdmModel& pdm,
                         const MomentSpec& init_moments, const CascadeConfig& cfg, const FeatureExtractor& extractor);

/// Same as above starting from an existing cache.
TrainedCascade train_ccr(const TrainingCache& cache, std::span<const Image> images, const MomentSpec& init_moments,
                         const CascadeConfig& cfg, const FeatureExtractor& extractor);

/// Rebuilds every level for the given per-level moments without touching
/// any image.
TrainedCascade retrain_from_cache(const TrainingCache& cache, std::span<const MomentSpec> level_moments,
                                  const CascadeConfig& cfg);

/// Builds a single level (PCA + closed-form solve) from cached samples.
CascadeLevel train_level(const TrainingCache& cache, const MomentSpec& moments, const CascadeConfig& cfg,
                         LevelSystem* system = nullptr);

/// p <- p - R_l phi_l(f(I, p)) for every level.
ShapeParams apply_cascade(const CascadeModel& model, const Image& img, const ShapeParams& init);
/// Parameters after each level; front() is the initialisation.
std::vector<ShapeParams> apply_cascade_trace(const CascadeModel& model, const Image& img, const ShapeParams& init);
ShapeParams apply_level(const CascadeModel& model, std::size_t level, const Image& img, const ShapeParams& p);

struct SamplingCost {
    std::uint64_t sdm_extractions = 0; ///< L K M
    std::uint64_t ccr_extractions = 0; ///< 5 M
    double ratio = 0.0;                ///< L K / 5
};

SamplingCost sampling_cost_report(std::uint64_t levels, std::uint64_t k, std::uint64_t images);

/// Sequential sampling-based cascade (SDM): K perturbations per image are
/// extracted at every level, PCA is computed on the sampled features.
struct TrainedSdm {
    CascadeModel model;
    std::vector<LevelStats> stats;
    std::uint64_t extractions = 0;
};

TrainedSdm train_sdm(std::span<const Image> images, std::span<const ShapeParams> gt_params, const PdmModel& pdm,
                     const MomentSpec& init_moments, Index k, const CascadeConfig& cfg,
                     const FeatureExtractor& extractor);

/// Zero-mean diagonal copy of the moments (the uncorrelated ablation).
MomentSpec diagonalised(const MomentSpec& moments);

} // namespace ccr
