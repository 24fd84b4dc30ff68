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

// Implicit backward pass through the sphere-constrained least-squares layer.
//
// With y the solution, v = dL/dy, r = A y - b and
//
//   beta = 0.5 y^T A^T r,   H = A^T A - 2 beta I,   a = 2 y^T,
//   K    = v (H^-1 a^T (a H^-1 a^T)^-1 a - I) H^-1,
//
// the input gradients are dL/dX = K B with B = d(grad_y f)/dX. For A the
// block B_i (m x n) is A_{:,i} y^T plus r added to column i, which collapses
// the contraction to
//
//   dL/dA = (A K) y^T + r K^T,      dL/db = -A K.
//
// The exploited path never forms B; the materialized path builds H^-1 and B
// explicitly and contracts them, as a plain reference implementation.

#include "pmaf/less_solver.hpp"
#include "pmaf/numkernel.hpp"

namespace pmaf
{

template <typename T>
struct LessGradPack
{
    DenseMatrix<T> dLdA;
    DenseVector<T> dLdb;
    T beta_lm = T(0);
    DenseVector<T> K;
    DenseMatrix<T> H;  // filled by the materialized path only
    T ridge = T(0);    // ridge actually added to H
    bool materialized = false;
};

// Negative ridge means "choose automatically": zero unless H is numerically
// singular, then 1e-9 |trace(H)| / n.
inline constexpr double kAutoRidge = -1.0;

template <typename T>
T less_lagrange_beta(const LessProblem<T>& p, const DenseVector<T>& y);

// K from two solves against H (dense factorization of H).
template <typename T>
DenseVector<T> less_K(const LessProblem<T>& p, const DenseVector<T>& y,
                      const DenseVector<T>& dLdy, T ridge = T(kAutoRidge));

// The (n, m, n) tensor d(grad_y f)_i / dA_pq, built from the closed-form rule.
template <typename T>
DenseTensor3<T> less_B_exploited(const LessProblem<T>& p, const DenseVector<T>& y);

// Bytes the materialized path needs for its tensor and explicit inverse.
std::size_t less_materialized_bytes(std::size_t m, std::size_t n, std::size_t scalar_size);

template <typename T>
LessGradPack<T> less_backward(const LessProblem<T>& p, const DenseVector<T>& y,
                              const DenseVector<T>& dLdy, bool materialize_B,
                              T ridge = T(kAutoRidge));

}  // namespace pmaf
