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

#include "ccr/image.hpp"
#include "ccr/shapes.hpp"
#include "ccr/solver.hpp"

#include <atomic>
#include <cstdint>
#include <span>
#include <vector>

namespace ccr {

enum class Descriptor {
    raw_patch,          ///< bilinear intensities on a patch grid
    gradient_histogram, ///< HOG-like orientation histograms over cells
};

struct FeatureConfig {
    Descriptor kind = Descriptor::gradient_histogram;
    int patch_size = 17; ///< odd, so the landmark sits at the patch centre
    int cells = 2;       ///< cells per patch side (gradient histogram)
    int bins = 6;        ///< unsigned orientation bins (gradient histogram)
    double norm_floor = 0.2; ///< per-landmark normalisation h / sqrt(|h|^2 + floor^2)

    Index dim_per_point() const;
    Index dim(Index points) const { return dim_per_point() * points; }
    void validate() const;
};

/// Concatenated per-landmark descriptors; landmark i owns rows
/// [i * dim_per_point, (i + 1) * dim_per_point).
Vector extract(const Image& img, const Shape& s, const FeatureConfig& cfg);

/// Central differences with a one-pixel step, d x 2n. Column i is the x
/// derivative of landmark i, column i + n its y derivative.
Matrix empirical_jacobian(const Image& img, const Shape& s, const FeatureConfig& cfg);

/// Chain rule: empirical_jacobian at compose_shape(p) times shape_jacobian.
Matrix param_jacobian(const Image& img, const PdmModel& pdm, const ShapeParams& p, const FeatureConfig& cfg);

/// x* + J* delta.
Vector taylor_predict(const Vector& x_star, const Matrix& j_star, const Vector& delta);

struct TaylorValidity {
    Matrix dist;          ///< dist(i, j); NaN where the denominator vanished
    Index flagged = 0;    ///< number of NaN entries
};

/// dist(i,j) = |f(s*+dj) - (f(s*) + J* di)| / |f(s*+dj) + (f(s*) + J* di)|.
TaylorValidity taylor_validity(const Image& img, const Shape& s_star, std::span<const Vector> deltas_i,
                               std::span<const Vector> deltas_j, const FeatureConfig& cfg);

struct PcaBasis {
    Matrix basis;       ///< d x d_r, orthonormal columns
    Vector mean;        ///< functional mean used for centring
    Vector eigenvalues; ///< descending, length d_r

    Vector project(const Vector& x) const { return basis.transpose() * (x - mean); }
    Index dim() const { return basis.cols(); }
};

/// Top eigenvectors of the centred functional covariance
/// Cov(X,X)/M - mean mean^T. Throws DegenerateInputError when d_r exceeds
/// the numerical rank.
PcaBasis functional_pca(std::span<const GroundTruthSample> samples, const MomentSpec& moments, Index d_r);

/// Instrumented extractor: every call to the descriptor is counted, so the
/// training routines can report how often images were sampled.
class FeatureExtractor {
public:
    explicit FeatureExtractor(FeatureConfig cfg = {});
    FeatureExtractor(const FeatureExtractor& other);
    FeatureExtractor& operator=(const FeatureExtractor& other);

    const FeatureConfig& config() const { return cfg_; }

    Vector extract(const Image& img, const Shape& s) const;
    /// Four extractions: all landmarks shifted by +-1 in x and in y.
    Matrix point_jacobian(const Image& img, const Shape& s) const;
    /// Features and point-space Jacobian at s (five extractions).
    GroundTruthSample point_sample(const Image& img, const Shape& s) const;
    /// Features and parameter-space Jacobian at compose_shape(p) (five extractions).
    GroundTruthSample param_sample(const Image& img, const PdmModel& pdm, const ShapeParams& p) const;

    std::uint64_t calls() const { return calls_.load(); }
    void reset_calls() { calls_.store(0); }

private:
    FeatureConfig cfg_;
    mutable std::atomic<std::uint64_t> calls_{0};
};

} // namespace ccr
