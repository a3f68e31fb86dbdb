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
#include "ccr/incremental.hpp"

#include "ccr/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace ccr {

namespace {

constexpr std::uint64_t kRefreshInterval = 100;

Matrix spd_inverse(const Matrix& v)
{
    const Eigen::LLT<Matrix> llt(v);
    if (llt.info() != Eigen::Success) {
        throw SingularSystemError("incremental: covariance is not positive definite");
    }
    return llt.solve(Matrix::Identity(v.rows(), v.cols()));
}

// B / lambda = L L^T through the eigendecomposition (B is only PSD).
Matrix weighted_factor(const Matrix& b, double lambda, OpCounter* counter)
{
    if (counter) {
        counter->inverse(b.rows());
    }
    const Eigen::SelfAdjointEigenSolver<Matrix> eig(b);
    const Vector roots = (eig.eigenvalues().cwiseMax(0.0) / lambda).cwiseSqrt();
    return eig.eigenvectors() * roots.asDiagonal();
}

// One Woodbury step on a level: V' = V + D (B / lambda) D^T.
bool update_level(IncrementalLevel& level, const Matrix& block, const AugmentedMoments& aug, double* asymmetry,
                  OpCounter* counter)
{
    const Matrix factor = weighted_factor(aug.b, level.lambda, counter);
    const Matrix u = counted_product(block, factor, counter);          // d x (m+1)
    const Matrix vinv_u = counted_product(level.v_inv, u, counter);    // d x (m+1)
    Matrix inner = counted_product(u.transpose(), vinv_u, counter);    // (m+1) x (m+1)
    inner.diagonal().array() += 1.0;

    const Eigen::LLT<Matrix> llt(inner);
    if (counter) {
        counter->inverse(inner.rows());
    }
    if (llt.info() != Eigen::Success || !inner.allFinite() || llt.rcond() < 1e-14) {
        return false;
    }
    if (counter) {
        counter->product(vinv_u.rows(), inner.rows(), inner.rows());
    }
    const Matrix gain = llt.solve(vinv_u.transpose()).transpose(); // d x (m+1)

    Matrix v_inv = level.v_inv - counted_product(gain, vinv_u.transpose(), counter);
    const double asym = (v_inv - v_inv.transpose()).cwiseAbs().maxCoeff();
    if (asymmetry) {
        *asymmetry = std::max(*asymmetry, asym);
    }
    level.v_inv = 0.5 * (v_inv + v_inv.transpose());
    level.v += counted_product(u, u.transpose(), counter);
    level.cov_xy += counted_product(aug.m, block.transpose(), counter) / level.lambda;
    level.r = counted_product(level.cov_xy, level.v_inv, counter);
    return true;
}

} // namespace

std::vector<double> default_forgetting_schedule(std::size_t levels)
{
    static constexpr double kSchedule[] = {0.01, 0.025, 0.05, 0.1};
    std::vector<double> out(levels);
    for (std::size_t l = 0; l < levels; ++l) {
        out[l] = kSchedule[std::min<std::size_t>(l, 3)];
    }
    return out;
}

IncrementalState init_incremental(const CascadeModel& model, std::span<const LevelSystem> systems,
                                  std::span<const double> lambdas)
{
    if (systems.empty()) {
        throw std::invalid_argument("init_incremental: training covariances were not cached");
    }
    if (systems.size() != model.levels.size() || lambdas.size() != model.levels.size()) {
        throw std::invalid_argument("init_incremental: cache, schedule and model level counts differ");
    }
    IncrementalState state;
    for (std::size_t l = 0; l < systems.size(); ++l) {
        const LevelSystem& sys = systems[l];
        const Index d = model.levels[l].pca.dim() + 1;
        require_dims(sys.cov_xx.rows() == d && sys.cov_xy.cols() == d && sys.cov_xy.rows() == model.param_dim(),
                     "init_incremental: cached system does not match the model");
        if (!(lambdas[l] > 0.0)) {
            throw std::invalid_argument("init_incremental: forgetting factors must be positive");
        }
        IncrementalLevel level;
        level.v = sys.cov_xx;
        level.v.diagonal().array() += sys.ridge;
        level.v = 0.5 * (level.v + level.v.transpose());
        level.v_inv = spd_inverse(level.v);
        level.v_inv = 0.5 * (level.v_inv + level.v_inv.transpose());
        level.cov_xy = sys.cov_xy;
        level.r = level.cov_xy * level.v_inv;
        level.lambda = lambdas[l];
        state.levels.push_back(std::move(level));
    }
    return state;
}

IncrementalState update(const IncrementalState& state, const CascadeModel& model, const GroundTruthSample& raw_sample,
                        std::span<const MomentSpec> level_moments, UpdateReport* report, OpCounter* counter)
{
    require_dims(state.levels.size() == model.levels.size() && level_moments.size() == model.levels.size(),
                 "update: level counts differ");
    IncrementalState next = state;
    UpdateReport local;
    bool any = false;
    for (std::size_t l = 0; l < next.levels.size(); ++l) {
        const GroundTruthSample projected = model.levels[l].project(raw_sample);
        const AugmentedMoments aug = AugmentedMoments::from(level_moments[l]);
        require_dims(aug.m.rows() == model.param_dim(), "update: moments must live in parameter space");
        const bool ok = update_level(next.levels[l], projected.block(), aug, &local.max_asymmetry, counter);
        local.applied.push_back(ok);
        any = any || ok;
    }
    if (any) {
        ++next.updates;
        if (next.updates % kRefreshInterval == 0) {
            refresh_inverses(next);
        }
    } else {
        ++next.skipped;
    }
    if (report) {
        *report = std::move(local);
    }
    return next;
}

void refresh_inverses(IncrementalState& state)
{
    for (auto& level : state.levels) {
        level.v_inv = spd_inverse(level.v);
        level.v_inv = 0.5 * (level.v_inv + level.v_inv.transpose());
        level.r = level.cov_xy * level.v_inv;
    }
}

CascadeModel with_regressors(const CascadeModel& model, const IncrementalState& state)
{
    require_dims(state.levels.size() == model.levels.size(), "with_regressors: level counts differ");
    CascadeModel out = model;
    for (std::size_t l = 0; l < out.levels.size(); ++l) {
        out.levels[l].regressor.r = state.levels[l].r;
    }
    return out;
}

UpdateCost update_cost_profile(Index feature_dim, Index param_dim, std::uint64_t seed)
{
    if (feature_dim < 1 || param_dim < 1) {
        throw std::invalid_argument("update_cost_profile: dimensions must be positive");
    }
    const Index d = feature_dim;
    const Index m = param_dim;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    auto random = [&](Index rows, Index cols) {
        Matrix a(rows, cols);
        for (Index i = 0; i < a.size(); ++i) {
            a.data()[i] = normal(rng);
        }
        return a;
    };

    const Matrix g = random(d, d);
    Matrix v = g * g.transpose() / static_cast<double>(d);
    v.diagonal().array() += 1.0;

    UpdateCost cost;
    cost.feature_dim = d;
    cost.param_dim = m;
    const auto du = static_cast<std::uint64_t>(d);
    const auto mu = static_cast<std::uint64_t>(m);
    cost.predicted_iccr = 3 * mu * du * du + 3 * mu * mu * du + mu * mu * mu;
    cost.predicted_isdm = du * du * du;
    cost.predicted_ratio = static_cast<double>(d) / (3.0 * static_cast<double>(m));

    IncrementalLevel level;
    level.v = v;
    level.v_inv = spd_inverse(v);
    level.cov_xy = random(m, d);
    level.r = level.cov_xy * level.v_inv;
    level.lambda = 0.05;
    const Matrix a = random(m, m);
    const MomentSpec moments{random(m, 1).col(0), a * a.transpose() / static_cast<double>(m)};
    OpCounter iccr;
    update_level(level, random(d, m + 1), AugmentedMoments::from(moments), nullptr, &iccr);
    cost.measured_iccr = iccr.multiplies;

    OpCounter isdm;
    IsdmState sdm{random(m, d), spd_inverse(v)};
    isdm_update(sdm, random(d, 1), random(m, 1), &isdm);
    cost.measured_isdm = isdm.multiplies;
    cost.measured_ratio = static_cast<double>(cost.measured_isdm) / static_cast<double>(cost.measured_iccr);
    return cost;
}

} // namespace ccr
