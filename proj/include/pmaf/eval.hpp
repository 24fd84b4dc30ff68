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

// Metrics, random instance generators and the independent oracles used to
// check every solver and gradient in the library.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string_view>
#include <vector>

#include "pmaf/ied_solver.hpp"
#include "pmaf/less_solver.hpp"
#include "pmaf/numkernel.hpp"

namespace pmaf
{

// ---------------------------------------------------------------------------
// Sampling
// ---------------------------------------------------------------------------

enum class Distribution
{
    Gaussian01,
    Uniform01,
    VonMises01,
    Choice10
};

std::string_view to_string(Distribution d);
Distribution parse_distribution(std::string_view text);

struct SampleSpec
{
    Distribution dist = Distribution::Gaussian01;
    std::size_t m = 2;
    std::size_t n = 2;
    bool symmetric = false;
    bool absolute = false;
    std::uint64_t seed = 0;

    void validate() const;
};

// Mixes a base seed with an instance index (splitmix64), so instance k of a
// run never depends on how many draws instances 0..k-1 consumed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept;

// Entrywise draws, then |.| if `absolute`, then A + A^T if `symmetric`.
template <typename T>
DenseMatrix<T> sample_matrix(const SampleSpec& spec);

// A (m x n) followed by b (m) from one generator; `symmetric` is ignored.
template <typename T>
LessProblem<T> sample_less(const SampleSpec& spec);

// Von Mises(mu = 0, kappa) by the Best-Fisher rejection scheme.
double draw_von_mises(std::mt19937_64& gen, double kappa);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

// |A y - b|
template <typename T>
T fpd_less(const LessProblem<T>& p, const DenseVector<T>& y);

// |y - A y / |A y||
template <typename T>
T fpd_ied(const IedProblem<T>& p, const DenseVector<T>& y);

// |A y - lambda y|
template <typename T>
T eigen_distance(const IedProblem<T>& p, const DenseVector<T>& y, T lambda);

inline constexpr double kMreFloor = 1e-12;

struct MreReport
{
    double percent = 0.0;
    std::size_t floored = 0;  // references below kMreFloor that were clamped
};

MreReport mre_report(std::span<const double> estimates, std::span<const double> references);

// Mean relative error in percent; negative when the estimates beat the
// references on average.
double mre(std::span<const double> estimates, std::span<const double> references);

// A case counts as improved when its FPD does not exceed the reference by
// more than this margin.
inline constexpr double kImpMargin = 1e-9;

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

template <typename T>
struct SymmetricEigen
{
    DenseVector<T> values;   // descending
    DenseMatrix<T> vectors;  // column j pairs with values[j]
    std::size_t sweeps = 0;
};

// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below
// off_tol * |A|_F. off_tol <= 0 selects a precision-appropriate default.
template <typename T>
SymmetricEigen<T> jacobi_eigen(const DenseMatrix<T>& a, double off_tol = 0.0);

template <typename T>
struct ReferenceEig
{
    T lambda = T(0);
    DenseVector<T> y;
};

// Dominant eigenpair. Symmetric input: Jacobi. Otherwise a long power
// iteration, refusing with OracleError if it does not settle.
ReferenceEig<double> reference_eig(const IedProblem<double>& p);

struct ReferenceLess
{
    Vector y;
    double fpd = 0.0;
};

// Global minimiser of 0.5 |A u - b|^2 on the unit sphere. n = 2: angle grid
// plus golden section. n != 2: secular equation on the eigenbasis of A^T A.
// Both finish with Newton steps on the KKT system.
ReferenceLess reference_less(const LessProblem<double>& p);

// Exposed for tests: the two strategies above, callable for any n.
ReferenceLess reference_less_angle_grid(const LessProblem<double>& p, std::size_t grid = 10000);
ReferenceLess reference_less_secular(const LessProblem<double>& p);

// Central differences (L(x + h e_ij) - L(x - h e_ij)) / 2h for every entry.
Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss, const Matrix& x0,
                        double step);
Vector finite_diff_grad(const std::function<double(const Vector&)>& loss, const Vector& x0,
                        double step);

// Solution maps re-solved under perturbation by the finite-difference checks.
//   symmetric:   top eigenvector of (A + A^T) / 2 (what -u^T A u sees), Jacobi
//   fixed point: limit of u <- A u / |A u|, long power iteration
// Both return the sign closest to r.
Vector ied_symmetric_solution(const Matrix& a, const Vector& r);
Vector ied_fixed_point_solution(const Matrix& a, const Vector& r);

inline constexpr std::size_t kBruteForceMaxDim = 16;

// d(grad_u f)_i / dX_pq assembled one input entry at a time by central
// differences of the analytic gradient. The gradients are quadratic (LESS)
// or linear (IED) in X, so a unit step is exact up to rounding.
//   LESS: grad_u f = A^T (A u - b),   tensor (n, m, n)
//   IED:  grad_u f = -(A + A^T) u,    tensor (m, m, m)
DenseTensor3<double> brute_force_B_less(const LessProblem<double>& p, const Vector& y);
DenseTensor3<double> brute_force_B_ied(const IedProblem<double>& p, const Vector& y);

// Largest entrywise |a - b|.
double max_abs_diff(std::span<const double> a, std::span<const double> b);

// max |a - b| / max(max |b|, tiny).
double max_rel_diff(std::span<const double> a, std::span<const double> b);

}  // namespace pmaf
