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
#include "ccr/metrics.hpp"

#include <algorithm>
#include <stdexcept>

namespace ccr {

std::vector<double> default_ced_thresholds()
{
    std::vector<double> t;
    for (int i = 0; i <= 160; ++i) {
        t.push_back(0.0005 * i);
    }
    return t;
}

CedCurve ced_auc(std::span<const double> errors, std::span<const double> thresholds)
{
    if (errors.empty() || thresholds.empty()) {
        throw std::invalid_argument("ced_auc: empty input");
    }
    std::vector<double> sorted(errors.begin(), errors.end());
    std::sort(sorted.begin(), sorted.end());
    CedCurve curve;
    curve.thresholds.assign(thresholds.begin(), thresholds.end());
    for (double t : thresholds) {
        const auto below = std::upper_bound(sorted.begin(), sorted.end(), t) - sorted.begin();
        curve.fraction.push_back(static_cast<double>(below) / static_cast<double>(sorted.size()));
    }
    const double range = thresholds.back() - thresholds.front();
    if (thresholds.size() == 1 || range <= 0.0) {
        curve.auc = curve.fraction.front();
        return curve;
    }
    double area = 0.0;
    for (std::size_t i = 1; i < thresholds.size(); ++i) {
        area += 0.5 * (curve.fraction[i] + curve.fraction[i - 1]) * (thresholds[i] - thresholds[i - 1]);
    }
    curve.auc = area / range;
    return curve;
}

CedCurve ced_auc(std::span<const double> errors)
{
    const auto t = default_ced_thresholds();
    return ced_auc(errors, t);
}

double median(std::vector<double> values)
{
    if (values.empty()) {
        throw std::invalid_argument("median: empty input");
    }
    const auto mid = values.begin() + static_cast<std::ptrdiff_t>(values.size() / 2);
    std::nth_element(values.begin(), mid, values.end());
    if (values.size() % 2 == 1) {
        return *mid;
    }
    const double hi = *mid;
    const double lo = *std::max_element(values.begin(), mid);
    return 0.5 * (lo + hi);
}

} // namespace ccr
