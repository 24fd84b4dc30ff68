/*
 * Copyright 2026 The pmaf Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 * http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Principal eigenpair of a square matrix, seen as the minimiser of
// -u^T A u on the unit sphere. Two forward solvers:
//
//   power iteration         u_{t+1} = A u_t / |A u_t|,  lambda = y^T A y
//   simultaneous iteration  Q_t R_t = x_t,  x_{t+1} = A Q_t,  x_0 = A
//
// Both resolve the +-y ambiguity on request, either against the previous
// iterate (Historical) or once against a fixed reference r (HardCoded).

#include <cstddef>
#include <cstdint>
#include <optional>

#include "pmaf/numkernel.hpp"

namespace pmaf
{

template <typename T>
struct IedProblem
{
    DenseMatrix<T> A;
    bool symmetric_hint = false;

    IedProblem() = default;
    explicit IedProblem(DenseMatrix<T> a, bool symmetric = false);

    std::size_t m() const noexcept { return A.rows(); }
};

enum class EigMethod
{
    PI,
    SI
};

enum class SignMode
{
    None,
    Historical,
    HardCoded
};

template <typename T>
struct EigResult
{
    DenseVector<T> y;
    T lambda = T(0);
    std::size_t iterations = 0;
    bool converged = false;
    EigMethod method = EigMethod::PI;
    SignMode sign_mode = SignMode::None;
};

inline constexpr double kIedDefaultTol = 1e-7;
inline constexpr std::size_t kIedDefaultMaxIters = 300;
inline constexpr double kOrthogonalityThreshold = 1e-12;

// Seeded standard-normal vector, normalised.
template <typename T>
DenseVector<T> default_start(std::size_t m, std::uint64_t seed);

// All-ones vector, normalised: the default hard-coded sign reference.
template <typename T>
DenseVector<T> default_reference(std::size_t m);

// sign(a^T b) unless |a^T b| <= eps_perp |a| |b|, in which case +1.
template <typename T>
T sign_consistency_V(const DenseVector<T>& a, const DenseVector<T>& b);

// `r` is only read in HardCoded mode; an empty optional selects the
// all-ones reference.
template <typename T>
EigResult<T> power_iteration(const IedProblem<T>& p, const DenseVector<T>& u0, T tol,
                             std::size_t max_iters, SignMode sign_mode,
                             const std::optional<DenseVector<T>>& r = std::nullopt);

template <typename T>
EigResult<T> simultaneous_iteration(const IedProblem<T>& p, T tol, std::size_t max_iters,
                                    SignMode sign_mode,
                                    const std::optional<DenseVector<T>>& r = std::nullopt);

}  // namespace pmaf
