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

#include <span>
#include <vector>

namespace ccr {

/// Landmark vector (x_1..x_n, y_1..y_n) in pixels.
using Shape = Vector;

inline Index point_count(const Shape& s) { return s.size() / 2; }

/// Rigid part of the shape parameters: similarity transform applied after
/// the flexible deformation.
struct RigidParams {
    double scale = 1.0;
    double angle = 0.0; ///< in-plane rotation, radians
    double tx = 0.0;
    double ty = 0.0;
};

/// PDM parameters p = [q, c]. The packed vector layout used by the
/// regressors is (scale, angle, tx, ty, c_1..c_m_flex).
struct ShapeParams {
    RigidParams rigid;
    Vector flex;

    static constexpr Index kRigidCount = 4;

    Index size() const { return kRigidCount + flex.size(); }
    Vector packed() const;
    static ShapeParams unpack(const Vector& p);
};

/// Point distribution model: s = t_q(s0 + B_s c).
///
/// The mean shape is centred at the origin with sum of squared point
/// radii equal to n, so `scale` reads as the RMS landmark radius in pixels.
struct PdmModel {
    Shape mean;  ///< s0, length 2n
    Matrix basis; ///< B_s, 2n x m_flex, orthonormal columns

    Index points() const { return mean.size() / 2; }
    Index flex_modes() const { return basis.cols(); }
    Index param_count() const { return ShapeParams::kRigidCount + basis.cols(); }
    /// True for the identity-basis model where the flexible part is the
    /// landmark offset itself.
    bool point_space() const { return basis.cols() == mean.size() && basis.isIdentity(0.0); }

    /// Throws DimensionError / std::invalid_argument when the invariants fail.
    void validate() const;
};

/// Point-space model: identity basis, so with the rigid part held at the
/// identity the flexible parameters are the landmark offsets from `mean`.
PdmModel point_space_model(const Shape& mean);

Shape compose_shape(const PdmModel& pdm, const ShapeParams& p);

/// d s / d p, a 2n x m matrix; rigid columns first.
Matrix shape_jacobian(const PdmModel& pdm, const ShapeParams& p);

/// Applies a similarity transform to every landmark of `s`.
Shape transform_shape(const Shape& s, const RigidParams& q);

/// Generalised Procrustes alignment followed by PCA.
PdmModel build_pdm(std::span<const Shape> shapes, Index m_flex);

/// Gauss-Newton fit of PDM parameters to a raw shape. Point-space models
/// return the identity rigid part and the exact offsets.
ShapeParams fit_params(const PdmModel& pdm, const Shape& target, int max_iterations = 20);

/// Mean point-to-point error normalised by the distance between two
/// reference landmarks measured on the ground truth.
double rmse(const Shape& est, const Shape& gt, Index outer_left, Index outer_right);

} // namespace ccr
