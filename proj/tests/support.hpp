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
#include "ccr/synthetic.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace ccr::test {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng, double sd = 1.0)
{
    std::normal_distribution<double> n(0.0, sd);
    Matrix m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) {
        m.data()[i] = n(rng);
    }
    return m;
}

inline Vector random_vector(Index size, std::mt19937_64& rng, double sd = 1.0)
{
    return random_matrix(size, 1, rng, sd);
}

inline Matrix random_spd(Index dim, std::mt19937_64& rng, double scale = 1.0)
{
    const Matrix a = random_matrix(dim, dim, rng);
    return scale * (a * a.transpose() / static_cast<double>(dim) + 0.1 * Matrix::Identity(dim, dim));
}

inline std::vector<GroundTruthSample> random_samples(Index m, Index d, Index dim, std::mt19937_64& rng)
{
    std::vector<GroundTruthSample> out;
    for (Index j = 0; j < m; ++j) {
        out.push_back({random_vector(d, rng), random_matrix(d, dim, rng)});
    }
    return out;
}

inline MomentSpec random_moments(Index dim, std::mt19937_64& rng)
{
    return {random_vector(dim, rng, 0.3), random_spd(dim, rng, 0.5)};
}

/// Orthonormal flexible modes orthogonal to the similarity tangent at `mean`.
inline Matrix flex_modes(const Shape& mean, Index count, std::mt19937_64& rng)
{
    const Index n = mean.size() / 2;
    Matrix tangent(mean.size(), 4);
    tangent.col(0) = mean;
    tangent.col(1) << -mean.tail(n), mean.head(n);
    tangent.col(2) << Vector::Ones(n), Vector::Zero(n);
    tangent.col(3) << Vector::Zero(n), Vector::Ones(n);
    Matrix all(mean.size(), 4 + count);
    all << tangent, random_matrix(mean.size(), count, rng);
    const Matrix q = Eigen::HouseholderQR<Matrix>(all).householderQ() * Matrix::Identity(mean.size(), 4 + count);
    return q.rightCols(count);
}

inline PdmModel random_pdm(Index n, Index m_flex, std::mt19937_64& rng)
{
    Shape mean = random_vector(2 * n, rng);
    mean.head(n).array() -= mean.head(n).mean();
    mean.tail(n).array() -= mean.tail(n).mean();
    mean *= std::sqrt(static_cast<double>(n)) / mean.norm();
    PdmModel pdm;
    pdm.mean = mean;
    pdm.basis = flex_modes(mean, m_flex, rng);
    return pdm;
}

inline ShapeParams random_params(Index m_flex, std::mt19937_64& rng)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    ShapeParams p;
    p.rigid = {20.0 + 5.0 * u(rng), 0.3 * u(rng), 64.0 + 5.0 * u(rng), 64.0 + 5.0 * u(rng)};
    p.flex = random_vector(m_flex, rng, 0.1);
    return p;
}

/// Noise-free synthetic face with its ground-truth shape.
struct SmoothFace {
    Image image;
    Shape shape;
};

inline SmoothFace smooth_face(std::uint64_t seed, int size = 128)
{
    GeneratorConfig cfg = tier_config("medium", 1);
    cfg.width = cfg.height = size;
    cfg.noise_sigma = 0.0;
    const SyntheticSequence s = generate_stills(cfg, 1, seed);
    return {s.frames.front(), s.gt_shapes.front()};
}

} // namespace ccr::test
