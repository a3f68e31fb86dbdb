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

#include <cstdint>

namespace ccr {

/// Counts scalar multiplications of dense products and inversions, so the
/// incremental update costs can be compared independently of timing noise.
struct OpCounter {
    std::uint64_t multiplies = 0;

    void product(Index rows, Index inner, Index cols)
    {
        multiplies += static_cast<std::uint64_t>(rows) * inner * cols;
    }
    /// Dense factorisation-based inverse of an n x n matrix, counted as n^3.
    void inverse(Index n) { multiplies += static_cast<std::uint64_t>(n) * n * n; }
};

inline Matrix counted_product(const Matrix& a, const Matrix& b, OpCounter* counter)
{
    if (counter) {
        counter->product(a.rows(), a.cols(), b.cols());
    }
    return a * b;
}

} // namespace ccr
