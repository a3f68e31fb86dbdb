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
#include "ccr/shapes.hpp"

#include <cmath>
#include <complex>
#include <stdexcept>

namespace ccr {

namespace {

using Complex = std::complex<double>;

// Shapes as complex landmark vectors z_i = x_i + i y_i.
Eigen::VectorXcd to_complex(const Shape& s)
{
    const Index n = point_count(s);
    Eigen::VectorXcd z(n);
    for (Index i = 0; i < n; ++i) {
        z[i] = Complex(s[i], s[i + n]);
    }
    return z;
}

Shape from_complex(const Eigen::VectorXcd& z)
{
    const Index n = z.size();
    Shape s(2 * n);
    for (Index i = 0; i < n; ++i) {
        s[i] = z[i].real();
        s[i + n] = z[i].imag();
    }
    return s;
}

Eigen::VectorXcd centred(const Eigen::VectorXcd& z)
{
    return z.array() - z.mean();
}

// Rotation/scale w so that w*z has zero rotational misfit against `ref` and
// its projection onto `ref` equals |ref|^2 (tangent-space alignment).
Complex tangent_alignment(const Eigen::VectorXcd& z, const Eigen::VectorXcd& ref)
{
    const Complex c = z.dot(ref); // conjugates z
    if (std::abs(c) < 1e-300) {
        throw DegenerateInputError("degenerate shape set: shape orthogonal to reference");
    }
    return ref.squaredNorm() / std::conj(c);
}

// Rotates `m` onto `ref` in the least-squares sense and rescales it to |m|^2 = n.
Eigen::VectorXcd fix_gauge(const Eigen::VectorXcd& m, const Eigen::VectorXcd& ref)
{
    const Complex c = m.dot(ref);
    const double norm = m.norm();
    if (norm < 1e-300 || std::abs(c) < 1e-300) {
        throw DegenerateInputError("degenerate shape set: collapsed mean shape");
    }
    const Complex rot = c / std::abs(c);
    const double target = std::sqrt(static_cast<double>(m.size()));
    return m * rot * (target / norm);
}

} // namespace

Vector ShapeParams::packed() const
{
    Vector p(size());
    p << rigid.scale, rigid.angle, rigid.tx, rigid.ty, flex;
    return p;
}

ShapeParams ShapeParams::unpack(const Vector& p)
{
    require_dims(p.size() >= kRigidCount, "ShapeParams::unpack: vector shorter than rigid block");
    ShapeParams out;
    out.rigid = {p[0], p[1], p[2], p[3]};
    out.flex = p.tail(p.size() - kRigidCount);
    return out;
}

void PdmModel::validate() const
{
    require_dims(mean.size() % 2 == 0 && mean.size() > 0, "PdmModel: mean shape length must be even");
    require_dims(basis.rows() == mean.size(), "PdmModel: basis rows must equal 2n");
    const Matrix gram = basis.transpose() * basis;
    if (!gram.isIdentity(1e-10)) {
        throw std::invalid_argument("PdmModel: basis columns are not orthonormal");
    }
}

PdmModel point_space_model(const Shape& mean)
{
    require_dims(mean.size() % 2 == 0 && mean.size() > 0, "point_space_model: mean shape length must be even");
    PdmModel pdm;
    pdm.mean = mean;
    pdm.basis = Matrix::Identity(mean.size(), mean.size());
    return pdm;
}

Shape transform_shape(const Shape& s, const RigidParams& q)
{
    const Index n = point_count(s);
    const double a = q.scale * std::cos(q.angle);
    const double b = q.scale * std::sin(q.angle);
    Shape out(2 * n);
    for (Index i = 0; i < n; ++i) {
        const double x = s[i];
        const double y = s[i + n];
        out[i] = a * x - b * y + q.tx;
        out[i + n] = b * x + a * y + q.ty;
    }
    return out;
}

Shape compose_shape(const PdmModel& pdm, const ShapeParams& p)
{
    require_dims(p.flex.size() == pdm.flex_modes(), "compose_shape: flexible parameter count mismatch");
    const Shape base = pdm.mean + pdm.basis * p.flex;
    return transform_shape(base, p.rigid);
}

Matrix shape_jacobian(const PdmModel& pdm, const ShapeParams& p)
{
    require_dims(p.flex.size() == pdm.flex_modes(), "shape_jacobian: flexible parameter count mismatch");
    const Index n = pdm.points();
    const Index m = pdm.param_count();
    const Shape base = pdm.mean + pdm.basis * p.flex;
    const double cs = std::cos(p.rigid.angle);
    const double sn = std::sin(p.rigid.angle);
    const double a = p.rigid.scale * cs;
    const double b = p.rigid.scale * sn;

    Matrix jac = Matrix::Zero(2 * n, m);
    for (Index i = 0; i < n; ++i) {
        const double x = base[i];
        const double y = base[i + n];
        jac(i, 0) = cs * x - sn * y;
        jac(i + n, 0) = sn * x + cs * y;
        jac(i, 1) = -b * x - a * y;
        jac(i + n, 1) = a * x - b * y;
        jac(i, 2) = 1.0;
        jac(i + n, 3) = 1.0;
        for (Index k = 0; k < pdm.flex_modes(); ++k) {
            const double bx = pdm.basis(i, k);
            const double by = pdm.basis(i + n, k);
            jac(i, 4 + k) = a * bx - b * by;
            jac(i + n, 4 + k) = b * bx + a * by;
        }
    }
    return jac;
}

PdmModel build_pdm(std::span<const Shape> shapes, Index m_flex)
{
    if (m_flex < 0) {
        throw std::invalid_argument("build_pdm: m_flex must be non-negative");
    }
    if (static_cast<Index>(shapes.size()) < m_flex + 1 || shapes.empty()) {
        throw DegenerateInputError("build_pdm: need at least m_flex + 1 shapes");
    }
    const Index dim = shapes.front().size();
    require_dims(dim % 2 == 0 && dim >= 4, "build_pdm: shapes need at least two landmarks");
    const Index n = dim / 2;
    if (m_flex > dim - 4) {
        throw std::invalid_argument("build_pdm: m_flex exceeds the non-rigid dimension 2n - 4");
    }

    std::vector<Eigen::VectorXcd> zs;
    zs.reserve(shapes.size());
    for (const auto& s : shapes) {
        require_dims(s.size() == dim, "build_pdm: inconsistent landmark counts");
        if (!s.allFinite()) {
            throw std::invalid_argument("build_pdm: non-finite coordinates");
        }
        zs.push_back(centred(to_complex(s)));
    }

    const Eigen::VectorXcd reference = fix_gauge(zs.front(), zs.front());
    Eigen::VectorXcd mean = reference;

    constexpr int kMaxIterations = 100;
    constexpr double kTolerance = 1e-8;
    std::vector<Eigen::VectorXcd> aligned(zs.size());
    for (int it = 0; it < kMaxIterations; ++it) {
        Eigen::VectorXcd acc = Eigen::VectorXcd::Zero(n);
        for (std::size_t j = 0; j < zs.size(); ++j) {
            acc += tangent_alignment(zs[j], mean) * zs[j];
        }
        acc /= static_cast<double>(zs.size());
        const Eigen::VectorXcd next = fix_gauge(centred(acc), reference);
        const double change = (next - mean).norm();
        mean = next;
        if (change < kTolerance) {
            break;
        }
    }

    Matrix residuals(dim, static_cast<Index>(zs.size()));
    for (std::size_t j = 0; j < zs.size(); ++j) {
        const Eigen::VectorXcd a = tangent_alignment(zs[j], mean) * zs[j];
        residuals.col(static_cast<Index>(j)) = from_complex(a - mean);
    }
    const double total_variance = residuals.squaredNorm() / static_cast<double>(zs.size());
    if (total_variance < 1e-20 * static_cast<double>(n)) {
        throw DegenerateInputError("degenerate shape set");
    }

    const Matrix cov = residuals * residuals.transpose() / static_cast<double>(zs.size());
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cov);
    PdmModel pdm;
    pdm.mean = from_complex(mean);
    pdm.basis.resize(dim, m_flex);
    for (Index k = 0; k < m_flex; ++k) {
        Vector v = eig.eigenvectors().col(dim - 1 - k);
        Index pivot = 0;
        v.cwiseAbs().maxCoeff(&pivot);
        if (v[pivot] < 0.0) {
            v = -v;
        }
        pdm.basis.col(k) = v;
    }
    return pdm;
}

ShapeParams fit_params(const PdmModel& pdm, const Shape& target, int max_iterations)
{
    require_dims(target.size() == pdm.mean.size(), "fit_params: landmark count mismatch");
    const Index n = pdm.points();
    if (pdm.point_space()) {
        ShapeParams p;
        p.flex = target - pdm.mean;
        return p;
    }

    // Closed-form similarity of s0 onto the target, then project the residual.
    const Eigen::VectorXcd z = to_complex(target);
    const Complex centroid = z.mean();
    const Eigen::VectorXcd s0 = to_complex(pdm.mean);
    const Complex w = s0.dot(centred(z)) / s0.squaredNorm();

    ShapeParams p;
    p.rigid = {std::abs(w), std::arg(w), centroid.real(), centroid.imag()};
    if (p.rigid.scale <= 0.0) {
        throw DegenerateInputError("fit_params: target shape has no extent");
    }
    const RigidParams inverse{1.0 / p.rigid.scale, -p.rigid.angle, 0.0, 0.0};
    Shape back = target;
    back.head(n).array() -= p.rigid.tx;
    back.tail(n).array() -= p.rigid.ty;
    back = transform_shape(back, inverse);
    p.flex = pdm.basis.transpose() * (back - pdm.mean);

    for (int it = 0; it < max_iterations; ++it) {
        const Vector r = compose_shape(pdm, p) - target;
        const Matrix jac = shape_jacobian(pdm, p);
        const Vector step = (jac.transpose() * jac).ldlt().solve(-jac.transpose() * r);
        if (!step.allFinite()) {
            break;
        }
        p = ShapeParams::unpack(p.packed() + step);
        if (step.norm() < 1e-12 * (1.0 + p.packed().norm())) {
            break;
        }
    }
    return p;
}

double rmse(const Shape& est, const Shape& gt, Index outer_left, Index outer_right)
{
    require_dims(est.size() == gt.size() && gt.size() % 2 == 0, "rmse: shape sizes differ");
    const Index n = point_count(gt);
    require_dims(outer_left >= 0 && outer_left < n && outer_right >= 0 && outer_right < n,
                 "rmse: outer landmark index out of range");
    const double d_outer = std::hypot(gt[outer_left] - gt[outer_right], gt[outer_left + n] - gt[outer_right + n]);
    if (!(d_outer > 0.0)) {
        throw std::invalid_argument("rmse: inter-ocular distance is zero");
    }
    double sum = 0.0;
    for (Index i = 0; i < n; ++i) {
        sum += std::hypot(est[i] - gt[i], est[i + n] - gt[i + n]);
    }
    return sum / (d_outer * static_cast<double>(n));
}

} // namespace ccr
