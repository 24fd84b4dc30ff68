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

// Least squares on the unit sphere:
//
//   minimize 0.5 |A u - b|^2   subject to |u| = 1,   A in R^{m x n}
//
// solved by projected gradient descent starting from the projected
// unconstrained least-squares solution. Optional refinements:
//   rm   - restrict the descent direction to the tangent space of the sphere
//   dw   - scale the step by 1 - cos(d_t, u0_raw)
//   bls  - Armijo backtracking from eta = 1 (EtaOne) or the closed-form step
//   twd  - start from min(1, closed-form step) and shrink it while
//          consecutive tangent directions oppose
// bls and twd are mutually exclusive.

#include <cstddef>
#include <string>
#include <vector>

#include "pmaf/numkernel.hpp"

namespace pmaf
{

template <typename T>
struct LessProblem
{
    DenseMatrix<T> A;
    DenseVector<T> b;

    LessProblem() = default;
    LessProblem(DenseMatrix<T> a, DenseVector<T> rhs);

    std::size_t m() const noexcept { return A.rows(); }
    std::size_t n() const noexcept { return A.cols(); }
};

enum class BlsMode
{
    Off,
    EtaOne,
    EtaDerived
};

struct LessConfig
{
    bool use_rm = false;
    bool use_dw = false;
    BlsMode bls = BlsMode::Off;
    bool use_twd = false;
    double alpha = 0.5;
    double beta_bls = 0.8;
    double beta_twd = 0.9;
    double tol = 1e-7;
    std::size_t max_iters = 100;
    std::size_t max_backtracks = 50;

    // Throws InvalidConfigError.
    void validate() const;

    // "PGD", "PGD+RM+BLSOne", ... in the order rm, bls, twd, dw.
    std::string label() const;
};

// The nine solver rows of the comparison table; the reference solver is the
// tenth row and lives with the oracles.
std::vector<LessConfig> table_method_configs();

enum class InnerOuter
{
    Inner,
    Outer
};

template <typename T>
struct LessTraceEntry
{
    DenseVector<T> u;
    T objective = T(0);
    T eta = T(0);             // step actually applied to reach u (0 for the initial point)
    T grad_norm = T(0);       // |grad f(u)|, diagnostics only
    T trial_objective = T(0); // f(u_prev + eta du) before re-projection
    T armijo_rhs = T(0);      // f(u_prev) + alpha eta grad^T du (0 unless BLS is on)
    bool backtrack_capped = false;
};

template <typename T>
struct LessResult
{
    DenseVector<T> y;
    T objective = T(0);
    std::size_t iterations = 0;
    bool converged = false;
    InnerOuter inner_outer = InnerOuter::Inner;
    bool init_fallback = false;  // u0_raw was zero; started from e_1
    std::vector<LessTraceEntry<T>> trace;
};

template <typename T>
class LessNumericFailure : public NumericFailure
{
   public:
    LessNumericFailure(std::size_t iteration, std::vector<LessTraceEntry<T>> trace)
        : NumericFailure("solve_less: non-finite iterate", iteration), trace_(std::move(trace))
    {
    }

    const std::vector<LessTraceEntry<T>>& trace() const noexcept { return trace_; }

   private:
    std::vector<LessTraceEntry<T>> trace_;
};

template <typename T>
struct LessInit
{
    DenseVector<T> u0_raw;
    DenseVector<T> u0;
    InnerOuter inner_outer = InnerOuter::Inner;
    bool fallback = false;
};

// 0.5 |A u - b|^2
template <typename T>
T less_objective(const LessProblem<T>& p, const DenseVector<T>& u);

// A^T (A u - b)
template <typename T>
DenseVector<T> less_gradient(const LessProblem<T>& p, const DenseVector<T>& u);

template <typename T>
LessInit<T> init_unconstrained(const LessProblem<T>& p);

// Exact step along -grad f for the unconstrained quadratic:
// |A^T r|^2 / |A A^T r|^2 with r = A u - b. Zero at a stationary point.
template <typename T>
T pgd_step_eta(const LessProblem<T>& p, const DenseVector<T>& u);

// Exact step along the tangent-projected direction:
// r^T A P A^T r / |A P A^T r|^2 with P = I - u u^T.
template <typename T>
T rm_step_eta(const LessProblem<T>& p, const DenseVector<T>& u);

// w = 1 - cos(d, u0_raw), d = -grad f if |u0_raw| >= 1 else +grad f.
template <typename T>
T direction_weight(const LessProblem<T>& p, const DenseVector<T>& u,
                   const DenseVector<T>& u0_raw);

// f(u + eta du) <= f(u) + alpha eta grad f(u)^T du
template <typename T>
bool armijo_accepts(const LessProblem<T>& p, const DenseVector<T>& u, const DenseVector<T>& du,
                    T eta, T alpha);

// cos(g_t, g_t1) < 0; false when either vector is zero.
template <typename T>
bool twd_should_decay(const DenseVector<T>& g_t, const DenseVector<T>& g_t1);

template <typename T>
LessResult<T> solve_less(const LessProblem<T>& p, const LessConfig& cfg);

}  // namespace pmaf
