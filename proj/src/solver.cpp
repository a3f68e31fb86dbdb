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
#include "ccr/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace ccr {

namespace {

void check_samples(std::span<const GroundTruthSample> samples, Index target_dim, const char* who)
{
    if (samples.empty()) {
        throw DegenerateInputError(std::string(who) + ": empty training set");
    }
    const Index d = samples.front().feature_dim();
    for (const auto& s : samples) {
        require_dims(s.x_star.size() == d && s.j_star.rows() == d,
                     std::string(who) + ": inconsistent feature dimension");
        require_dims(s.j_star.cols() == target_dim, std::string(who) + ": Jacobian columns differ from moment dimension");
    }
}

double resolve_ridge(std::optional<double> ridge, const Matrix& cov)
{
    const double value = ridge ? *ridge : default_ridge(cov);
    if (!(value >= 0.0)) {
        throw std::invalid_argument("ridge must be non-negative");
    }
    return value;
}

} // namespace

MomentSpec MomentSpec::zero(Index dim)
{
    return {Vector::Zero(dim), Matrix::Zero(dim, dim)};
}

MomentSpec MomentSpec::uniform_box(const Vector& limits)
{
    return {Vector::Zero(limits.size()), Matrix(limits.array().square().matrix().asDiagonal()) / 3.0};
}

void MomentSpec::validate() const
{
    require_dims(sigma.rows() == mu.size() && sigma.cols() == mu.size(), "MomentSpec: sigma must be D x D");
    if (!mu.allFinite() || !sigma.allFinite()) {
        throw std::invalid_argument("MomentSpec: non-finite moments");
    }
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale) {
        throw std::invalid_argument("MomentSpec: sigma is not symmetric");
    }
    if (mu.size() > 0) {
        const Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma, Eigen::EigenvaluesOnly);
        if (eig.eigenvalues().minCoeff() < -1e-10 * scale) {
            throw std::invalid_argument("MomentSpec: sigma is not positive semi-definite");
        }
    }
}

Matrix GroundTruthSample::block() const
{
    Matrix d(x_star.size(), j_star.cols() + 1);
    d << x_star, j_star;
    return d;
}

GroundTruthSample with_bias(const GroundTruthSample& s)
{
    GroundTruthSample out;
    out.x_star.resize(s.x_star.size() + 1);
    out.x_star << s.x_star, 1.0;
    out.j_star = Matrix::Zero(s.j_star.rows() + 1, s.j_star.cols());
    out.j_star.topRows(s.j_star.rows()) = s.j_star;
    return out;
}

std::vector<GroundTruthSample> with_bias(std::span<const GroundTruthSample> samples)
{
    std::vector<GroundTruthSample> out;
    out.reserve(samples.size());
    for (const auto& s : samples) {
        out.push_back(with_bias(s));
    }
    return out;
}

AugmentedMoments AugmentedMoments::from(const MomentSpec& moments)
{
    moments.validate();
    const Index dim = moments.dim();
    const Matrix second = moments.sigma + moments.mu * moments.mu.transpose();
    AugmentedMoments out;
    out.m.resize(dim, dim + 1);
    out.m << moments.mu, second;
    out.b.resize(dim + 1, dim + 1);
    out.b(0, 0) = 1.0;
    out.b.block(0, 1, 1, dim) = moments.mu.transpose();
    out.b.block(1, 0, dim, 1) = moments.mu;
    out.b.bottomRightCorner(dim, dim) = second;
    return out;
}

double default_ridge(const Matrix& cov)
{
    if (cov.rows() == 0) {
        return 0.0;
    }
    return 1e-6 * cov.trace() / static_cast<double>(cov.rows());
}

NormalEquations::NormalEquations(Index feature_dim, Index target_dim)
    : cov_xx_(Matrix::Zero(feature_dim, feature_dim)), cov_xy_(Matrix::Zero(target_dim, feature_dim))
{
}

void NormalEquations::add(const GroundTruthSample& sample, const AugmentedMoments& moments, double weight)
{
    require_dims(sample.feature_dim() == cov_xx_.rows(), "NormalEquations::add: feature dimension mismatch");
    require_dims(sample.target_dim() == cov_xy_.rows() && moments.m.rows() == cov_xy_.rows(),
                 "NormalEquations::add: target dimension mismatch");
    const Matrix block = sample.block();
    cov_xx_.noalias() += weight * (block * moments.b * block.transpose());
    cov_xy_.noalias() += weight * (moments.m * block.transpose());
    ++count_;
}

void NormalEquations::merge(const NormalEquations& other)
{
    require_dims(other.cov_xx_.rows() == cov_xx_.rows() && other.cov_xy_.rows() == cov_xy_.rows(),
                 "NormalEquations::merge: dimension mismatch");
    cov_xx_ += other.cov_xx_;
    cov_xy_ += other.cov_xy_;
    count_ += other.count_;
}

Regressor NormalEquations::solve(std::optional<double> ridge) const
{
    const double lambda = resolve_ridge(ridge, cov_xx_);
    return {solve_right_spd(cov_xx_, cov_xy_, lambda)};
}

Matrix solve_right_spd(const Matrix& c, const Matrix& rhs, double ridge)
{
    require_dims(c.rows() == c.cols() && rhs.cols() == c.rows(), "solve_right_spd: dimension mismatch");
    Matrix a = c;
    a.diagonal().array() += ridge;
    a = 0.5 * (a + a.transpose());

    const Eigen::LLT<Matrix> llt(a);
    if (llt.info() == Eigen::Success && llt.rcond() > 1e-15) {
        Matrix out = llt.solve(rhs.transpose()).transpose();
        if (out.allFinite()) {
            return out;
        }
    }
    Eigen::CompleteOrthogonalDecomposition<Matrix> cod(a);
    cod.setThreshold(1e-13);
    if (cod.rank() < a.rows()) {
        throw SingularSystemError("singular functional covariance (rank " + std::to_string(cod.rank()) + " of " +
                                  std::to_string(a.rows()) + "); increase the ridge");
    }
    Matrix out = cod.solve(rhs.transpose()).transpose();
    if (!out.allFinite()) {
        throw SingularSystemError("non-finite regressor");
    }
    return out;
}

Regressor solve_uncorrelated(std::span<const GroundTruthSample> samples, const Vector& limits,
                             std::optional<double> ridge)
{
    if ((limits.array() <= 0.0).any()) {
        throw std::invalid_argument("solve_uncorrelated: limits must be strictly positive");
    }
    check_samples(samples, limits.size(), "solve_uncorrelated");
    const Index d = samples.front().feature_dim();
    const Vector variances = limits.array().square() / 3.0;

    Matrix jac_sum = Matrix::Zero(limits.size(), d); // sum_j J*_j^T
    Matrix denom = Matrix::Zero(d, d);
    for (const auto& s : samples) {
        jac_sum += s.j_star.transpose();
        denom.noalias() += s.x_star * s.x_star.transpose();
        denom.noalias() += s.j_star * variances.asDiagonal() * s.j_star.transpose();
    }
    const Matrix numer = variances.asDiagonal() * jac_sum;
    return {solve_right_spd(denom, numer, resolve_ridge(ridge, denom))};
}

Regressor solve_correlated(std::span<const GroundTruthSample> samples, const MomentSpec& moments,
                           std::optional<double> ridge)
{
    const AugmentedMoments aug = AugmentedMoments::from(moments);
    check_samples(samples, moments.dim(), "solve_correlated");
    const Index d = samples.front().feature_dim();

    // Single pass: sum_j D*_j and the block-diagonal product Dbar B^ Dbar^T.
    Matrix block_sum = Matrix::Zero(d, moments.dim() + 1);
    Matrix cov = Matrix::Zero(d, d);
    for (const auto& s : samples) {
        const Matrix block = s.block();
        block_sum += block;
        cov.noalias() += block * aug.b * block.transpose();
    }
    const Matrix numer = aug.m * block_sum.transpose();
    return {solve_right_spd(cov, numer, resolve_ridge(ridge, cov))};
}

Matrix functional_covariance(std::span<const GroundTruthSample> samples, const MomentSpec& moments)
{
    moments.validate();
    check_samples(samples, moments.dim(), "functional_covariance");
    const Index d = samples.front().feature_dim();
    const Matrix second = moments.sigma + moments.mu * moments.mu.transpose();
    Matrix cov = Matrix::Zero(d, d);
    for (const auto& s : samples) {
        const Vector jmu = s.j_star * moments.mu;
        cov.noalias() += s.x_star * s.x_star.transpose();
        cov.noalias() += s.x_star * jmu.transpose();
        cov.noalias() += jmu * s.x_star.transpose();
        cov.noalias() += s.j_star * second * s.j_star.transpose();
    }
    return 0.5 * (cov + cov.transpose());
}

Matrix functional_covariance_blocks(std::span<const GroundTruthSample> samples, const MomentSpec& moments)
{
    const AugmentedMoments aug = AugmentedMoments::from(moments);
    check_samples(samples, moments.dim(), "functional_covariance_blocks");
    const Index d = samples.front().feature_dim();
    const Index width = moments.dim() + 1;
    const Index count = static_cast<Index>(samples.size());

    // Dbar* = [D*_1, ..., D*_M] against B^ = blockdiag(B, ..., B).
    Matrix dbar(d, width * count);
    Matrix bhat = Matrix::Zero(width * count, width * count);
    for (Index j = 0; j < count; ++j) {
        dbar.middleCols(j * width, width) = samples[static_cast<std::size_t>(j)].block();
        bhat.block(j * width, j * width, width, width) = aug.b;
    }
    return dbar * bhat * dbar.transpose();
}

Matrix functional_cross_covariance(std::span<const GroundTruthSample> samples, const MomentSpec& moments)
{
    moments.validate();
    check_samples(samples, moments.dim(), "functional_cross_covariance");
    const Matrix second = moments.sigma + moments.mu * moments.mu.transpose();
    Matrix cross = Matrix::Zero(moments.dim(), samples.front().feature_dim());
    for (const auto& s : samples) {
        cross.noalias() += moments.mu * s.x_star.transpose();
        cross.noalias() += second * s.j_star.transpose();
    }
    return cross;
}

Vector functional_mean(std::span<const GroundTruthSample> samples, const MomentSpec& moments)
{
    check_samples(samples, moments.dim(), "functional_mean");
    Vector mean = Vector::Zero(samples.front().feature_dim());
    for (const auto& s : samples) {
        mean += s.x_star + s.j_star * moments.mu;
    }
    return mean / static_cast<double>(samples.size());
}

Regressor solve_from_covariances(const Matrix& cov_xy, const Matrix& cov_xx, double ridge)
{
    return {solve_right_spd(cov_xx, cov_xy, ridge)};
}

} // namespace ccr
