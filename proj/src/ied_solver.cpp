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

#include "pmaf/ied_solver.hpp"

#include <random>

namespace pmaf
{

template <typename T>
IedProblem<T>::IedProblem(DenseMatrix<T> a, bool symmetric) : A(std::move(a)), symmetric_hint(symmetric)
{
    if (!A.is_square() || A.rows() == 0) {
        throw ShapeError("IedProblem: A must be square and non-empty");
    }
    detail::require_finite<T>(A.span(), "IedProblem::A");
    if (symmetric_hint) {
        T diff = T(0);
        for (std::size_t i = 0; i < A.rows(); ++i) {
            for (std::size_t j = 0; j < A.cols(); ++j) {
                const T d = A(i, j) - A(j, i);
                diff += d * d;
            }
        }
        if (std::sqrt(diff) > T(1e-8) * frobenius_norm(A)) {
            throw DomainError("IedProblem: symmetric_hint set but A is not symmetric");
        }
    }
}

template <typename T>
DenseVector<T> default_start(std::size_t m, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    DenseVector<T> u(m);
    for (auto& v : u) {
        v = static_cast<T>(normal(gen));
    }
    return proj_sphere(u);
}

template <typename T>
DenseVector<T> default_reference(std::size_t m)
{
    return proj_sphere(DenseVector<T>(m, T(1)));
}

template <typename T>
T sign_consistency_V(const DenseVector<T>& a, const DenseVector<T>& b)
{
    const double ab = static_cast<double>(dot(a, b));
    const double scale = static_cast<double>(norm(a)) * static_cast<double>(norm(b));
    if (std::abs(ab) <= kOrthogonalityThreshold * scale) {
        return T(1);
    }
    return ab < 0.0 ? T(-1) : T(1);
}

namespace
{
template <typename T>
DenseVector<T> resolve_reference(std::size_t m, const std::optional<DenseVector<T>>& r)
{
    if (!r) {
        return default_reference<T>(m);
    }
    if (r->size() != m) {
        throw ShapeError("sign reference length must equal m");
    }
    return *r;
}

template <typename T>
T distance(const DenseVector<T>& a, const DenseVector<T>& b)
{
    return norm(a - b);
}
}  // namespace

template <typename T>
EigResult<T> power_iteration(const IedProblem<T>& p, const DenseVector<T>& u0, T tol,
                             std::size_t max_iters, SignMode sign_mode,
                             const std::optional<DenseVector<T>>& r)
{
    if (u0.size() != p.m()) {
        throw ShapeError("power_iteration: u0 length must equal m");
    }
    EigResult<T> res;
    res.method = EigMethod::PI;
    res.sign_mode = sign_mode;

    DenseVector<T> u = proj_sphere(u0);
    for (std::size_t t = 0; t < max_iters; ++t) {
        const auto au = matvec(p.A, u);
        const T nrm = norm(au);
        if (!(nrm > T(0))) {
            throw ZeroImageError("power_iteration: A u_t = 0");
        }
        if (!std::isfinite(nrm)) {
            throw NumericFailure("power_iteration: non-finite iterate", t + 1);
        }
        DenseVector<T> next = scaled(au, T(1) / nrm);
        if (sign_mode == SignMode::Historical) {
            const T v = sign_consistency_V(next, u);
            if (v < T(0)) {
                next = -next;
            }
        }
        const T change = distance(next, u);
        u = std::move(next);
        ++res.iterations;
        if (change <= tol) {
            res.converged = true;
            break;
        }
    }
    if (sign_mode == SignMode::HardCoded) {
        const auto ref = resolve_reference(p.m(), r);
        if (sign_consistency_V(u, ref) < T(0)) {
            u = -u;
        }
    }
    res.lambda = dot(u, matvec(p.A, u));
    res.y = std::move(u);
    return res;
}

template <typename T>
EigResult<T> simultaneous_iteration(const IedProblem<T>& p, T tol, std::size_t max_iters,
                                    SignMode sign_mode, const std::optional<DenseVector<T>>& r)
{
    const std::size_t m = p.m();
    EigResult<T> res;
    res.method = EigMethod::SI;
    res.sign_mode = sign_mode;

    DenseMatrix<T> x = p.A;
    DenseMatrix<T> q_prev;
    DenseVector<T> y_prev;
    T lambda_prev = T(0);
    DenseVector<T> y;
    T lambda = T(0);

    for (std::size_t t = 0; t < max_iters; ++t) {
        auto [q, rr] = qr(x);
        x = matmul(p.A, q);

        // Column-wise sign alignment against the previous basis, using only the
        // diagonal of Q_t^T Q_{t-1}.
        if (sign_mode == SignMode::Historical && q_prev.rows() == m) {
            for (std::size_t j = 0; j < m; ++j) {
                T d = T(0);
                for (std::size_t i = 0; i < m; ++i) {
                    d += q(i, j) * q_prev(i, j);
                }
                if (d < T(0)) {
                    for (std::size_t i = 0; i < m; ++i) {
                        q(i, j) = -q(i, j);
                    }
                }
            }
        }

        std::size_t best = 0;
        for (std::size_t j = 1; j < m; ++j) {
            if (rr(j, j) > rr(best, best)) {
                best = j;
            }
        }
        DenseVector<T> col(m);
        for (std::size_t i = 0; i < m; ++i) {
            col[i] = q(i, best);
        }
        y = proj_sphere(col);
        lambda = rr(best, best);
        ++res.iterations;

        if (t > 0) {
            DenseVector<T> aligned = y;
            if (sign_consistency_V(aligned, y_prev) < T(0)) {
                aligned = -aligned;
            }
            if (std::abs(lambda - lambda_prev) <= tol && distance(aligned, y_prev) <= tol) {
                res.converged = true;
                break;
            }
        }
        y_prev = y;
        lambda_prev = lambda;
        q_prev = std::move(q);
    }

    if (sign_mode == SignMode::HardCoded) {
        const auto ref = resolve_reference(m, r);
        if (sign_consistency_V(y, ref) < T(0)) {
            y = -y;
        }
    }
    res.y = std::move(y);
    res.lambda = lambda;
    return res;
}

#define PMAF_INSTANTIATE(T)                                                                    \
    template struct IedProblem<T>;                                                             \
    template DenseVector<T> default_start<T>(std::size_t, std::uint64_t);                      \
    template DenseVector<T> default_reference<T>(std::size_t);                                 \
    template T sign_consistency_V<T>(const DenseVector<T>&, const DenseVector<T>&);            \
    template EigResult<T> power_iteration<T>(const IedProblem<T>&, const DenseVector<T>&, T,   \
                                             std::size_t, SignMode,                            \
                                             const std::optional<DenseVector<T>>&);            \
    template EigResult<T> simultaneous_iteration<T>(const IedProblem<T>&, T, std::size_t,      \
                                                    SignMode,                                  \
                                                    const std::optional<DenseVector<T>>&);

PMAF_INSTANTIATE(float)
PMAF_INSTANTIATE(double)

#undef PMAF_INSTANTIATE

}  // namespace pmaf
