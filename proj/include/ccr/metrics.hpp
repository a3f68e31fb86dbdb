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

#include <span>
#include <vector>

namespace ccr {

struct CedCurve {
    std::vector<double> thresholds;
    std::vector<double> fraction; ///< share of errors <= threshold
    double auc = 0.0;             ///< trapezoid area divided by the threshold range
};

/// 0 to 0.08 in steps of 0.0005.
std::vector<double> default_ced_thresholds();

/// Throws std::invalid_argument on empty errors or thresholds.
CedCurve ced_auc(std::span<const double> errors, std::span<const double> thresholds);
CedCurve ced_auc(std::span<const double> errors);

double median(std::vector<double> values);

} // namespace ccr
