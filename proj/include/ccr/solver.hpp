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

#include "ccr/types.hpp"

#include <optional>
#include <span>
#include <vector>

namespace ccr {

/// First and second moments of the perturbation distribution. This is all
/// the closed-form solver needs to know about how training shapes are
/// displaced from the ground truth.
struct MomentSpec {
    Vector mu;
    Matrix sigma;

    static MomentSpec zero(Index dim);
    /// Zero-mean uniform box [-a, a]: Sigma = diag(a^2 / 3).
    static MomentSpec uniform_box(const Vector& limits);

    Index dim() const { return mu.size(); }
    /// Throws std::invalid_argument unless sigma is symmetric PSD (1e-10).
    void validate() const;
};

/// Ground-truth features x* (length d) and their Jacobian J* (d x D).
struct GroundTruthSample {
    Vector x_star;
    Matrix j_star;

    Index feature_dim() const { return x_star.size(); }
    Index target_dim() const { return j_star.cols(); }
    /// D* = [x*, J*], d x (D + 1).
    Matrix block() const;
};

/// Appends a constant feature (x = 1, zero Jacobian row) so the linear map
/// can carry an intercept.
GroundTruthSample with_bias(const GroundTruthSample& s);
std::vector<GroundTruthSample> with_bias(std::span<const GroundTruthSample> samples);

/// Linear map from features to displacements, D x d.
struct Regressor {
    Matrix r;

    Vector predict(const Vector& features) const { return r * features; }
};

/// M = [mu, Sigma + mu mu^T] and B = [[1, mu^T], [mu, Sigma + mu mu^T]].
struct AugmentedMoments {
    Matrix m;
    Matrix b;

    static AugmentedMoments from(const MomentSpec& moments);
};

/// 1e-6 * trace(cov) / d.
double default_ridge(const Matrix& cov);

/// Incrementally assembled normal equations Cov(X,X) R^T = Cov(X,Y)^T where
/// every sample contributes with its own moments and weight. Contributions are
/// plain sums, so partial accumulators can be merged.
class NormalEquations {
public:
    NormalEquations(Index feature_dim, Index target_dim);

    void add(const GroundTruthSample& sample, const AugmentedMoments& moments, double weight = 1.0);
    void merge(const NormalEquations& other);

    const Matrix& cov_xx() const { return cov_xx_; }
    const Matrix& cov_xy() const { return cov_xy_; } ///< D x d
    Index samples() const { return count_; }

    /// nullopt ridge selects default_ridge(cov_xx).
    Regressor solve(std::optional<double> ridge) const;

private:
    Matrix cov_xx_;
    Matrix cov_xy_;
    Index count_ = 0;
};

/// Solves R (C + ridge I) = rhs for R. Cholesky first; a complete orthogonal
/// decomposition takes over when Cholesky fails on a numerically full-rank
/// system. Throws SingularSystemError for rank-deficient systems.
Matrix solve_right_spd(const Matrix& c, const Matrix& rhs, double ridge);

/// Uncorrelated (bounded-limit) closed form with Sigma = diag(a^2 / 3).
Regressor solve_uncorrelated(std::span<const GroundTruthSample> samples, const Vector& limits,
                             std::optional<double> ridge);

/// Correlated closed form R = M (sum_j D*_j)^T (Dbar B^ Dbar^T + ridge I)^-1.
Regressor solve_correlated(std::span<const GroundTruthSample> samples, const MomentSpec& moments,
                           std::optional<double> ridge);

/// Expanded sum  sum_j x x^T + x mu^T J^T + J mu x^T + J (Sigma + mu mu^T) J^T.
Matrix functional_covariance(std::span<const GroundTruthSample> samples, const MomentSpec& moments);

/// Block form Dbar* B^ Dbar*^T, one B block per sample.
Matrix functional_covariance_blocks(std::span<const GroundTruthSample> samples, const MomentSpec& moments);

/// sum_j mu x*^T + (Sigma + mu mu^T) J*^T, D x d.
Matrix functional_cross_covariance(std::span<const GroundTruthSample> samples, const MomentSpec& moments);

/// Per-sample average of x* + J* mu.
Vector functional_mean(std::span<const GroundTruthSample> samples, const MomentSpec& moments);

/// R = Cov(X,Y) Cov(X,X)^-1, the covariance form of the normal equations.
Regressor solve_from_covariances(const Matrix& cov_xy, const Matrix& cov_xx, double ridge);

} // namespace ccr
