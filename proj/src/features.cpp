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
#include "ccr/features.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace ccr {

namespace {

void raw_patch(const Image& img, double cx, double cy, const FeatureConfig& cfg, double* out)
{
    const int half = cfg.patch_size / 2;
    for (int v = -half; v <= half; ++v) {
        for (int u = -half; u <= half; ++u) {
            *out++ = img.sample(cx + u, cy + v);
        }
    }
}

void gradient_histogram(const Image& img, double cx, double cy, const FeatureConfig& cfg, double* out)
{
    const int size = cfg.patch_size;
    const int half = size / 2;
    const int span = size + 2;
    const Index block = cfg.dim_per_point();

    // Intensities on the patch grid plus a one-pixel rim for the gradients.
    std::vector<double> grid(static_cast<std::size_t>(span) * span);
    for (int v = 0; v < span; ++v) {
        for (int u = 0; u < span; ++u) {
            grid[static_cast<std::size_t>(v) * span + u] = img.sample(cx + u - half - 1, cy + v - half - 1);
        }
    }
    auto g = [&](int u, int v) { return grid[static_cast<std::size_t>(v + half + 1) * span + (u + half + 1)]; };

    std::fill(out, out + block, 0.0);
    const double sigma = 0.5 * size;
    const double bin_width = std::numbers::pi / cfg.bins;
    for (int v = -half; v <= half; ++v) {
        const int cell_y = std::min((v + half) * cfg.cells / size, cfg.cells - 1);
        for (int u = -half; u <= half; ++u) {
            const double gx = 0.5 * (g(u + 1, v) - g(u - 1, v));
            const double gy = 0.5 * (g(u, v + 1) - g(u, v - 1));
            const double mag = std::sqrt(gx * gx + gy * gy);
            if (mag == 0.0) {
                continue;
            }
            double theta = std::atan2(gy, gx);
            if (theta < 0.0) {
                theta += std::numbers::pi;
            }
            const double pos = theta / bin_width - 0.5;
            const double lower = std::floor(pos);
            const double frac = pos - lower;
            const int b0 = (static_cast<int>(lower) + cfg.bins) % cfg.bins;
            const int b1 = (b0 + 1) % cfg.bins;
            const double weight = mag * std::exp(-(u * u + v * v) / (2.0 * sigma * sigma));
            const int cell_x = std::min((u + half) * cfg.cells / size, cfg.cells - 1);
            double* hist = out + (cell_y * cfg.cells + cell_x) * cfg.bins;
            hist[b0] += (1.0 - frac) * weight;
            hist[b1] += frac * weight;
        }
    }
    double norm2 = 0.0;
    for (Index k = 0; k < block; ++k) {
        norm2 += out[k] * out[k];
    }
    const double scale = 1.0 / std::sqrt(norm2 + cfg.norm_floor * cfg.norm_floor);
    for (Index k = 0; k < block; ++k) {
        out[k] *= scale;
    }
}

Vector extract_impl(const Image& img, const Shape& s, const FeatureConfig& cfg)
{
    require_dims(s.size() % 2 == 0, "extract: shape length must be even");
    const Index n = point_count(s);
    const Index block = cfg.dim_per_point();
    Vector out(block * n);
    for (Index i = 0; i < n; ++i) {
        double* dst = out.data() + i * block;
        if (cfg.kind == Descriptor::raw_patch) {
            raw_patch(img, s[i], s[i + n], cfg, dst);
        } else {
            gradient_histogram(img, s[i], s[i + n], cfg, dst);
        }
    }
    return out;
}

Shape shifted(const Shape& s, double dx, double dy)
{
    const Index n = point_count(s);
    Shape out = s;
    out.head(n).array() += dx;
    out.tail(n).array() += dy;
    return out;
}

// Every landmark's descriptor depends only on its own position, so shifting
// all landmarks at once yields each landmark's derivative block.
template <class Extract>
Matrix jacobian_from_shifts(const Shape& s, Index block, Extract&& extract_at)
{
    const Index n = point_count(s);
    const Vector xp = extract_at(shifted(s, 1.0, 0.0));
    const Vector xm = extract_at(shifted(s, -1.0, 0.0));
    const Vector yp = extract_at(shifted(s, 0.0, 1.0));
    const Vector ym = extract_at(shifted(s, 0.0, -1.0));
    Matrix jac = Matrix::Zero(block * n, 2 * n);
    for (Index i = 0; i < n; ++i) {
        jac.block(i * block, i, block, 1) = 0.5 * (xp.segment(i * block, block) - xm.segment(i * block, block));
        jac.block(i * block, i + n, block, 1) = 0.5 * (yp.segment(i * block, block) - ym.segment(i * block, block));
    }
    return jac;
}

} // namespace

Index FeatureConfig::dim_per_point() const
{
    if (kind == Descriptor::raw_patch) {
        return static_cast<Index>(patch_size) * patch_size;
    }
    return static_cast<Index>(cells) * cells * bins;
}

void FeatureConfig::validate() const
{
    if (patch_size < 1 || patch_size % 2 == 0) {
        throw std::invalid_argument("FeatureConfig: patch size must be odd and positive");
    }
    if (kind == Descriptor::gradient_histogram) {
        if (cells < 1 || cells > patch_size || bins < 2) {
            throw std::invalid_argument("FeatureConfig: bad cell/bin layout");
        }
        if (!(norm_floor > 0.0)) {
            throw std::invalid_argument("FeatureConfig: normalisation floor must be positive");
        }
    }
}

Vector extract(const Image& img, const Shape& s, const FeatureConfig& cfg)
{
    cfg.validate();
    return extract_impl(img, s, cfg);
}

Matrix empirical_jacobian(const Image& img, const Shape& s, const FeatureConfig& cfg)
{
    cfg.validate();
    return jacobian_from_shifts(s, cfg.dim_per_point(), [&](const Shape& at) { return extract_impl(img, at, cfg); });
}

Matrix param_jacobian(const Image& img, const PdmModel& pdm, const ShapeParams& p, const FeatureConfig& cfg)
{
    const Shape s = compose_shape(pdm, p);
    return empirical_jacobian(img, s, cfg) * shape_jacobian(pdm, p);
}

Vector taylor_predict(const Vector& x_star, const Matrix& j_star, const Vector& delta)
{
    require_dims(j_star.rows() == x_star.size() && j_star.cols() == delta.size(), "taylor_predict: dimension mismatch");
    return x_star + j_star * delta;
}

TaylorValidity taylor_validity(const Image& img, const Shape& s_star, std::span<const Vector> deltas_i,
                               std::span<const Vector> deltas_j, const FeatureConfig& cfg)
{
    cfg.validate();
    const Vector x_star = extract_impl(img, s_star, cfg);
    const Matrix j_star = empirical_jacobian(img, s_star, cfg);

    std::vector<Vector> predicted;
    predicted.reserve(deltas_i.size());
    for (const auto& d : deltas_i) {
        predicted.push_back(taylor_predict(x_star, j_star, d));
    }
    std::vector<Vector> observed;
    observed.reserve(deltas_j.size());
    for (const auto& d : deltas_j) {
        require_dims(d.size() == s_star.size(), "taylor_validity: perturbation length mismatch");
        observed.push_back(extract_impl(img, s_star + d, cfg));
    }

    TaylorValidity out;
    out.dist.resize(static_cast<Index>(predicted.size()), static_cast<Index>(observed.size()));
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        for (std::size_t j = 0; j < observed.size(); ++j) {
            const double denom = (observed[j] + predicted[i]).norm();
            if (denom < 1e-12) {
                out.dist(static_cast<Index>(i), static_cast<Index>(j)) = std::numeric_limits<double>::quiet_NaN();
                ++out.flagged;
            } else {
                out.dist(static_cast<Index>(i), static_cast<Index>(j)) = (observed[j] - predicted[i]).norm() / denom;
            }
        }
    }
    return out;
}

PcaBasis functional_pca(std::span<const GroundTruthSample> samples, const MomentSpec& moments, Index d_r)
{
    const Matrix second = functional_covariance(samples, moments) / static_cast<double>(samples.size());
    const Vector mean = functional_mean(samples, moments);
    const Matrix cov = second - mean * mean.transpose();
    const Index d = cov.rows();
    if (d_r < 1 || d_r > d) {
        throw DegenerateInputError("functional_pca: requested dimension exceeds feature dimension");
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(0.5 * (cov + cov.transpose()));
    const Vector& values = eig.eigenvalues();
    const double top = values[d - 1];
    Index rank = 0;
    for (Index k = 0; k < d; ++k) {
        if (values[k] > 1e-12 * std::max(top, 1e-300)) {
            ++rank;
        }
    }
    if (d_r > rank) {
        throw DegenerateInputError("functional_pca: requested dimension " + std::to_string(d_r) +
                                   " exceeds covariance rank " + std::to_string(rank));
    }
    PcaBasis out;
    out.mean = mean;
    out.basis.resize(d, d_r);
    out.eigenvalues.resize(d_r);
    for (Index k = 0; k < d_r; ++k) {
        Vector v = eig.eigenvectors().col(d - 1 - k);
        Index pivot = 0;
        v.cwiseAbs().maxCoeff(&pivot);
        if (v[pivot] < 0.0) {
            v = -v;
        }
        out.basis.col(k) = v;
        out.eigenvalues[k] = values[d - 1 - k];
    }
    return out;
}

FeatureExtractor::FeatureExtractor(FeatureConfig cfg) : cfg_(cfg)
{
    cfg_.validate();
}

FeatureExtractor::FeatureExtractor(const FeatureExtractor& other) : cfg_(other.cfg_), calls_(other.calls())
{
}

FeatureExtractor& FeatureExtractor::operator=(const FeatureExtractor& other)
{
    cfg_ = other.cfg_;
    calls_.store(other.calls());
    return *this;
}

Vector FeatureExtractor::extract(const Image& img, const Shape& s) const
{
    calls_.fetch_add(1);
    return extract_impl(img, s, cfg_);
}

Matrix FeatureExtractor::point_jacobian(const Image& img, const Shape& s) const
{
    return jacobian_from_shifts(s, cfg_.dim_per_point(), [&](const Shape& at) { return extract(img, at); });
}

GroundTruthSample FeatureExtractor::point_sample(const Image& img, const Shape& s) const
{
    return {extract(img, s), point_jacobian(img, s)};
}

GroundTruthSample FeatureExtractor::param_sample(const Image& img, const PdmModel& pdm, const ShapeParams& p) const
{
    const Shape s = compose_shape(pdm, p);
    return {extract(img, s), point_jacobian(img, s) * shape_jacobian(pdm, p)};
}

} // namespace ccr
