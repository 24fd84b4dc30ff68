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

// Backward passes for the principal eigenvector y of A.
//
// Declarative (DDN) view: y minimises f = -u^T A u on the unit sphere, so
//   beta = -0.5 y^T (A + A^T) y,   H = -(A + A^T) - 2 beta I,   a = 2 y^T,
//   B_ipq = d(grad_y f)_i / dA_pq = -delta_ip y_q - delta_iq y_p,
// and contracting K with B collapses to dL/dA = -K y^T - y K^T.
// f only sees the symmetric part of A, so this gradient is symmetric.
//
// Fixed-point (IFT) view: y = A y / |A y|. With lambda = |A y|,
//   H = I - (I - y y^T) A / lambda,
//   dL/dA = ((I - y y^T) w) y^T / lambda,   H^T w = dL/dy.
// This one also responds to non-symmetric perturbations of A; on symmetric
// perturbations the two views agree, i.e. DDN = sym(IFT).

#include "pmaf/ied_solver.hpp"
#include "pmaf/numkernel.hpp"

namespace pmaf
{

enum class IedGradMethod
{
    DDN,
    IFT
};

template <typename T>
struct IedGradPack
{
    DenseMatrix<T> dLdA;
    T beta_lm = T(0);   // DDN only
    DenseVector<T> K;   // DDN: K. IFT: w with H^T w = dL/dy
    IedGradMethod method = IedGradMethod::DDN;
    bool exploited = true;
    T ridge = T(0);
};

// Negative ridge selects the default max(1e-8, 256 eps) |A|_F.
inline constexpr double kIedAutoRidge = -1.0;

template <typename T>
T ied_lagrange_beta(const IedProblem<T>& p, const DenseVector<T>& y);

// -K y^T - y K^T
template <typename T>
DenseMatrix<T> ied_ddn_combine(const DenseVector<T>& K, const DenseVector<T>& y);

// B as an (m, m, m) tensor; reference use only.
template <typename T>
DenseTensor3<T> ied_B_materialize(const DenseVector<T>& y);

// Bytes the materialized DDN / IFT paths allocate for tensors and inverses.
std::size_t ied_materialized_bytes(std::size_t m, std::size_t scalar_size);

template <typename T>
IedGradPack<T> ied_ddn_backward(const IedProblem<T>& p, const EigResult<T>& eig,
                                const DenseVector<T>& dLdy, bool exploited,
                                T ridge = T(kIedAutoRidge));

template <typename T>
IedGradPack<T> ied_ift_backward(const IedProblem<T>& p, const EigResult<T>& eig,
                                const DenseVector<T>& dLdy, bool exploited = true);

// x(i, j) -> x(m-1-i, m-1-j)
template <typename T>
DenseMatrix<T> flip_transform(const DenseMatrix<T>& x);

}  // namespace pmaf
