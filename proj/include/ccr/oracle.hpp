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
#include "ccr/opcount.hpp"
#include "ccr/solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace ccr {

/// K displacement vectors per training image.
struct PerturbationSet {
    std::vector<std::vector<Vector>> deltas; ///< [image][k]
    MomentSpec source;

    std::size_t images() const { return deltas.size(); }
    std::size_t per_image() const { return deltas.empty() ? 0 : deltas.front().size(); }
};

/// K i.i.d. draws from N(mu, Sigma) for each of `images` images.
/// Throws std::invalid_argument for a non-PSD Sigma.
PerturbationSet draw_perturbations(const MomentSpec& moments, std::size_t images, std::size_t k, std::uint64_t seed);

/// Draws with the same first two moments but a uniform shape:
/// mu + L u, u uniform on [-sqrt(3), sqrt(3)]^D, L L^T = Sigma.
PerturbationSet draw_uniform_perturbations(const MomentSpec& moments, std::size_t images, std::size_t k,
                                           std::uint64_t seed);

enum class FeatureMode {
    extracted, ///< real descriptor at s* + delta
    taylor,    ///< first-order prediction x* + J* delta
};

/// Least squares of displacements on bias-augmented features [x; 1], with
/// the Gram matrices averaged over the K perturbations of each image so the
/// ridge has the same meaning as in the closed-form solver.
/// Returns D x (d + 1); the last column is the intercept.
Regressor train_sampling_regressor(std::span<const GroundTruthSample> samples, const PerturbationSet& perturbations,
                                   std::optional<double> ridge);

/// Extracted-feature variant in point space: features at gt_shapes[j] + delta.
Regressor train_sampling_regressor(std::span<const Image> images, std::span<const Shape> gt_shapes,
                                   const PerturbationSet& perturbations, const FeatureExtractor& extractor,
                                   std::optional<double> ridge);

/// Generic form: feature(j, k) returns the (un-augmented) feature vector of
/// perturbation k of image j.
Regressor train_sampling_regressor(const PerturbationSet& perturbations,
                                   const std::function<Vector(std::size_t, std::size_t)>& feature,
                                   std::optional<double> ridge);

struct IsdmState {
    Matrix r; ///< D x d
    Matrix v; ///< inverse Gram (X X^T)^-1, d x d
};

/// Recursive least-squares update of a sampling-based regressor with a
/// batch of K new columns X_S (d x K) and targets Y_S (D x K):
///   U = (I_K + X_S^T V X_S)^-1,  Q = X_S U X_S^T V,
///   V' = V - V Q,  R' = R - R Q + Y_S X_S^T V'.
IsdmState isdm_update(const IsdmState& state, const Matrix& x_s, const Matrix& y_s, OpCounter* counter = nullptr);

} // namespace ccr
