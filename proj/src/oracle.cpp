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
#include "ccr/oracle.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ccr {

namespace {

// Symmetric square root factor of a PSD covariance (tolerates singular Sigma).
Matrix covariance_factor(const MomentSpec& moments)
{
    moments.validate();
    if (moments.dim() == 0) {
        return Matrix(0, 0);
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(moments.sigma);
    const Vector roots = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal() * eig.eigenvectors().transpose();
}

template <class Draw>
PerturbationSet draw_with(const MomentSpec& moments, std::size_t images, std::size_t k, Draw&& draw)
{
    if (k < 1) {
        throw std::invalid_argument("draw_perturbations: K must be at least 1");
    }
    const Matrix factor = covariance_factor(moments);
    PerturbationSet out;
    out.source = moments;
    out.deltas.resize(images);
    Vector u(moments.dim());
    for (auto& per_image : out.deltas) {
        per_image.reserve(k);
        for (std::size_t i = 0; i < k; ++i) {
            for (Index c = 0; c < u.size(); ++c) {
                u[c] = draw();
            }
            per_image.push_back(moments.mu + factor * u);
        }
    }
    return out;
}

} // namespace

PerturbationSet draw_perturbations(const MomentSpec& moments, std::size_t images, std::size_t k, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    return draw_with(moments, images, k, [&] { return normal(rng); });
}

PerturbationSet draw_uniform_perturbations(const MomentSpec& moments, std::size_t images, std::size_t k,
                                           std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const double limit = std::sqrt(3.0);
    std::uniform_real_distribution<double> uniform(-limit, limit);
    return draw_with(moments, images, k, [&] { return uniform(rng); });
}

Regressor train_sampling_regressor(const PerturbationSet& perturbations,
                                   const std::function<Vector(std::size_t, std::size_t)>& feature,
                                   std::optional<double> ridge)
{
    if (perturbations.images() == 0 || perturbations.per_image() == 0) {
        throw DegenerateInputError("train_sampling_regressor: no perturbations");
    }
    const std::size_t k = perturbations.per_image();
    const Index target_dim = perturbations.deltas.front().front().size();

    Matrix gram;
    Matrix cross;
    Vector augmented;
    for (std::size_t j = 0; j < perturbations.images(); ++j) {
        require_dims(perturbations.deltas[j].size() == k, "train_sampling_regressor: ragged perturbation set");
        for (std::size_t i = 0; i < k; ++i) {
            const Vector x = feature(j, i);
            if (gram.size() == 0) {
                gram = Matrix::Zero(x.size() + 1, x.size() + 1);
                cross = Matrix::Zero(target_dim, x.size() + 1);
                augmented.resize(x.size() + 1);
            }
            require_dims(x.size() + 1 == augmented.size(), "train_sampling_regressor: feature length changed");
            augmented << x, 1.0;
            gram.selfadjointView<Eigen::Lower>().rankUpdate(augmented);
            cross.noalias() += perturbations.deltas[j][i] * augmented.transpose();
        }
    }
    gram = gram.selfadjointView<Eigen::Lower>();
    gram /= static_cast<double>(k);
    cross /= static_cast<double>(k);
    const double lambda = ridge ? *ridge : default_ridge(gram);
    if (!(lambda >= 0.0)) {
        throw std::invalid_argument("train_sampling_regressor: ridge must be non-negative");
    }
    return {solve_right_spd(gram, cross, lambda)};
}

Regressor train_sampling_regressor(std::span<const GroundTruthSample> samples, const PerturbationSet& perturbations,
                                   std::optional<double> ridge)
{
    require_dims(samples.size() == perturbations.images(), "train_sampling_regressor: one sample per image required");
    return train_sampling_regressor(
        perturbations,
        [&](std::size_t j, std::size_t k) {
            return taylor_predict(samples[j].x_star, samples[j].j_star, perturbations.deltas[j][k]);
        },
        ridge);
}

Regressor train_sampling_regressor(std::span<const Image> images, std::span<const Shape> gt_shapes,
                                   const PerturbationSet& perturbations, const FeatureExtractor& extractor,
                                   std::optional<double> ridge)
{
    require_dims(images.size() == gt_shapes.size() && images.size() == perturbations.images(),
                 "train_sampling_regressor: images, shapes and perturbations disagree");
    return train_sampling_regressor(
        perturbations,
        [&](std::size_t j, std::size_t k) {
            return extractor.extract(images[j], gt_shapes[j] + perturbations.deltas[j][k]);
        },
        ridge);
}

IsdmState isdm_update(const IsdmState& state, const Matrix& x_s, const Matrix& y_s, OpCounter* counter)
{
    const Index d = state.v.rows();
    require_dims(state.v.cols() == d && state.r.cols() == d, "isdm_update: state dimensions disagree");
    require_dims(x_s.rows() == d && y_s.rows() == state.r.rows() && y_s.cols() == x_s.cols(),
                 "isdm_update: batch dimensions disagree");
    const Index k = x_s.cols();
    if (k == 0) {
        return state;
    }

    const Matrix xt_v = counted_product(x_s.transpose(), state.v, counter); // K x d
    Matrix inner = counted_product(xt_v, x_s, counter);                     // K x K
    inner.diagonal().array() += 1.0;
    if (counter) {
        counter->inverse(k);
    }
    const Matrix u = inner.inverse();
    const Matrix q = counted_product(x_s, counted_product(u, xt_v, counter), counter); // d x d

    IsdmState out;
    out.v = state.v - counted_product(state.v, q, counter);
    const Matrix ys_xt = counted_product(y_s, x_s.transpose(), counter);
    out.r = state.r - counted_product(state.r, q, counter) + counted_product(ys_xt, out.v, counter);
    return out;
}

} // namespace ccr
