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

#include "ccr/cascade.hpp"
#include "ccr/opcount.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace ccr {

/// Forgetting factors per cascade level; lower values give a frame more
/// influence.
std::vector<double> default_forgetting_schedule(std::size_t levels);

/// Per-level state of the incremental cascade in the level's projected,
/// bias-augmented feature space (dimension d = d_r + 1).
struct IncrementalLevel {
    Matrix v;      ///< ridge-regularised functional covariance, d x d
    Matrix v_inv;  ///< maintained inverse of v
    Matrix cov_xy; ///< accumulated cross term, m x d
    Matrix r;      ///< current regressor cov_xy * v_inv
    double lambda = 1.0;
};

struct IncrementalState {
    std::vector<IncrementalLevel> levels;
    std::uint64_t updates = 0; ///< accepted updates since initialisation
    std::uint64_t skipped = 0;
};

/// Materialises V^-1 and the cross term from the training normal equations.
/// Throws std::invalid_argument when the cache is missing or mismatched.
IncrementalState init_incremental(const CascadeModel& model, std::span<const LevelSystem> systems,
                                  std::span<const double> lambdas);

struct UpdateReport {
    std::vector<bool> applied;  ///< per level; false if the inner system was singular
    double max_asymmetry = 0.0; ///< |V^-1 - V^-T|_max before re-symmetrisation
};

/// Adds one frame (raw descriptor features and parameter Jacobian at the
/// estimated shape) to every level. Each level uses its own moments for the
/// frame's contribution and weights it by 1 / lambda. The covariance update
/// goes through the Woodbury identity with an (m + 1)-dimensional inner
/// system; levels whose inner system is singular are skipped and reported.
IncrementalState update(const IncrementalState& state, const CascadeModel& model, const GroundTruthSample& raw_sample,
                        std::span<const MomentSpec> level_moments, UpdateReport* report = nullptr,
                        OpCounter* counter = nullptr);

/// Recomputes every V^-1 by direct factorisation.
void refresh_inverses(IncrementalState& state);

/// Copy of the model with the state's regressors swapped in.
CascadeModel with_regressors(const CascadeModel& model, const IncrementalState& state);

struct UpdateCost {
    Index feature_dim = 0;
    Index param_dim = 0;
    std::uint64_t predicted_iccr = 0; ///< 3 m d^2 + 3 m^2 d + m^3
    std::uint64_t predicted_isdm = 0; ///< d^3 dominant term
    std::uint64_t measured_iccr = 0;
    std::uint64_t measured_isdm = 0;
    double measured_ratio = 0.0;  ///< isdm / iccr
    double predicted_ratio = 0.0; ///< d / (3 m)
};

/// Runs one instrumented update of each kind on random data of the given
/// size and reports predicted and counted multiplications.
UpdateCost update_cost_profile(Index feature_dim, Index param_dim, std::uint64_t seed = 7);

} // namespace ccr
