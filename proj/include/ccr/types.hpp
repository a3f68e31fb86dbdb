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

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace ccr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Thrown when operand sizes disagree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A linear system could not be solved (singular with zero ridge, non-finite).
class SingularSystemError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data carries no usable information (e.g. identical shapes, empty sets).
class DegenerateInputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require_dims(bool ok, const std::string& what)
{
    if (!ok) {
        throw DimensionError(what);
    }
}

inline double relative_frobenius(const Matrix& a, const Matrix& b)
{
    const double denom = b.norm();
    return denom > 0.0 ? (a - b).norm() / denom : (a - b).norm();
}

} // namespace ccr
