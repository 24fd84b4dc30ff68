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

#include "pmaf/ied_grad.hpp"

#include <cmath>
#include <algorithm>
#include <limits>

namespace pmaf
{

namespace
{
template <typename T>
void check_inputs(const IedProblem<T>& p, const DenseVector<T>& y, const DenseVector<T>& dLdy)
{
    if (y.size() != p.m() || dLdy.size() != p.m()) {
        throw ShapeError("IED backward: y and dL/dy must have length m");
    }
    if (std::abs(static_cast<double>(norm(y)) - 1.0) > 1e-4) {
        throw DomainError("IED backward: y is not on the unit sphere");
    }
}

// -(A + A^T) - 2 beta I
template <typename T>
DenseMatrix<T> ddn_H(const DenseMatrix<T>& a, T beta)
{
    const std::size_t m = a.rows();
    DenseMatrix<T> h(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            h(i, j) = -(a(i, j) + a(j, i));
        }
        h(i, i) -= T(2) * beta;
    }
    return h;
}

// I - (I - y y^T) A / lambda
template <typename T>
DenseMatrix<T> ift_H(const DenseMatrix<T>& a, const DenseVector<T>& y, T lambda)
{
    const std::size_t m = a.rows();
    const auto yta = matvec_t(a, y);  // (y^T A)^T
    DenseMatrix<T> h(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            h(i, j) = -(a(i, j) - y[i] * yta[j]) / lambda;
        }
        h(i, i) += T(1);
    }
    return h;
}

template <typename T>
T check_ift_lambda(const IedProblem<T>& p, const EigResult<T>& eig)
{
    const T lambda = eig.lambda;
    if (!(lambda > T(1e-12) * std::max(frobenius_norm(p.A), std::numeric_limits<T>::min()))) {
        throw DomainError("IFT backward: needs a positive dominant eigenvalue");
    }
    return lambda;
}
}  // namespace

template <typename T>
T ied_lagrange_beta(const IedProblem<T>& p, const DenseVector<T>& y)
{
    if (y.size() != p.m()) {
        throw ShapeError("ied_lagrange_beta: y length must equal m");
    }
    return -T(0.5) * (dot(y, matvec(p.A, y)) + dot(y, matvec_t(p.A, y)));
}

template <typename T>
DenseMatrix<T> ied_ddn_combine(const DenseVector<T>& K, const DenseVector<T>& y)
{
    if (K.size() != y.size()) {
        throw ShapeError("ied_ddn_combine: length mismatch");
    }
    const std::size_t m = y.size();
    DenseMatrix<T> g(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            g(i, j) = -K[i] * y[j] - y[i] * K[j];
        }
    }
    return g;
}

template <typename T>
DenseTensor3<T> ied_B_materialize(const DenseVector<T>& y)
{
    const std::size_t m = y.size();
    DenseTensor3<T> t(m, m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            t(i, j, i) -= y[j];
            t(i, i, j) -= y[j];
        }
    }
    return t;
}

std::size_t ied_materialized_bytes(std::size_t m, std::size_t scalar_size)
{
    return (m * m * m + 3 * m * m) * scalar_size;
}

template <typename T>
IedGradPack<T> ied_ddn_backward(const IedProblem<T>& p, const EigResult<T>& eig,
                                const DenseVector<T>& dLdy, bool exploited, T ridge)
{
    const auto& y = eig.y;
    check_inputs(p, y, dLdy);
    const std::size_t m = p.m();
    IedGradPack<T> pack;
    pack.method = IedGradMethod::DDN;
    pack.exploited = exploited;
    pack.beta_lm = ied_lagrange_beta(p, y);
    if (ridge < T(0)) {
        // H is singular along y at an exact eigenpair. The relative ridge must
        // stay well above round-off, which matters in single precision.
        const T rel = std::max(T(1e-8), T(256) * std::numeric_limits<T>::epsilon());
        ridge = rel * frobenius_norm(p.A);
    }
    pack.ridge = ridge;
    auto h = ddn_H(p.A, pack.beta_lm);

    if (exploited) {
        for (std::size_t i = 0; i < m; ++i) {
            h(i, i) += ridge;
        }
        HouseholderQR<T> f(std::move(h));
        const auto z = f.solve(y);
        const auto w = f.solve(dLdy);
        const T yz = dot(y, z);
        if (!(std::abs(yz) > std::numeric_limits<T>::min()) || !std::isfinite(yz)) {
            throw DegenerateConstraintError("IED backward: a H^-1 a^T vanishes");
        }
        pack.K = axpy(-w, dot(dLdy, z) / yz, z);
        pack.dLdA = ied_ddn_combine(pack.K, y);
        return pack;
    }

    const auto hinv = inverse(h, ridge);
    const auto a = scaled(y, T(2));
    const auto hia = matvec(hinv, a);
    const T s = dot(a, hia);
    if (!(std::abs(s) > std::numeric_limits<T>::min()) || !std::isfinite(s)) {
        throw DegenerateConstraintError("IED backward: a H^-1 a^T vanishes");
    }
    auto mmat = outer(hia, a);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            mmat(i, j) /= s;
        }
        mmat(i, i) -= T(1);
    }
    pack.K = matvec_t(hinv, matvec_t(mmat, dLdy));

    const auto b = ied_B_materialize(y);
    pack.dLdA = DenseMatrix<T>(m, m);
    auto out = pack.dLdA.span();
    for (std::size_t i = 0; i < m; ++i) {
        const T ki = pack.K[i];
        const auto blk = b.block(i);
        for (std::size_t e = 0; e < m * m; ++e) {
            out[e] += ki * blk[e];
        }
    }
    return pack;
}

template <typename T>
IedGradPack<T> ied_ift_backward(const IedProblem<T>& p, const EigResult<T>& eig,
                                const DenseVector<T>& dLdy, bool exploited)
{
    const auto& y = eig.y;
    check_inputs(p, y, dLdy);
    const std::size_t m = p.m();
    const T lambda = check_ift_lambda(p, eig);
    IedGradPack<T> pack;
    pack.method = IedGradMethod::IFT;
    pack.exploited = exploited;
    const auto h = ift_H(p.A, y, lambda);

    if (exploited) {
        pack.K = solve(transpose(h), dLdy);
        const T yw = dot(y, pack.K);
        pack.dLdA = DenseMatrix<T>(m, m);
        for (std::size_t i = 0; i < m; ++i) {
            const T pi = (pack.K[i] - y[i] * yw) / lambda;
            for (std::size_t j = 0; j < m; ++j) {
                pack.dLdA(i, j) = pi * y[j];
            }
        }
        return pack;
    }

    const auto hinv = inverse(h);
    pack.K = matvec_t(hinv, dLdy);
    // B_kpq = -(I - y y^T)_kp y_q / lambda
    DenseTensor3<T> b(m, m, m);
    for (std::size_t k = 0; k < m; ++k) {
        for (std::size_t q = 0; q < m; ++q) {
            for (std::size_t r = 0; r < m; ++r) {
                const T proj = (k == q ? T(1) : T(0)) - y[k] * y[q];
                b(k, q, r) = -proj * y[r] / lambda;
            }
        }
    }
    pack.dLdA = DenseMatrix<T>(m, m);
    auto out = pack.dLdA.span();
    for (std::size_t k = 0; k < m; ++k) {
        const T wk = pack.K[k];
        const auto blk = b.block(k);
        for (std::size_t e = 0; e < m * m; ++e) {
            out[e] -= wk * blk[e];
        }
    }
    return pack;
}

template <typename T>
DenseMatrix<T> flip_transform(const DenseMatrix<T>& x)
{
    if (!x.is_square()) {
        throw ShapeError("flip_transform: matrix must be square");
    }
    const std::size_t m = x.rows();
    DenseMatrix<T> out(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            out(i, j) = x(m - 1 - i, m - 1 - j);
        }
    }
    return out;
}

#define PMAF_INSTANTIATE(T)                                                                      \
    template T ied_lagrange_beta<T>(const IedProblem<T>&, const DenseVector<T>&);                \
    template DenseMatrix<T> ied_ddn_combine<T>(const DenseVector<T>&, const DenseVector<T>&);    \
    template DenseTensor3<T> ied_B_materialize<T>(const DenseVector<T>&);                        \
    template IedGradPack<T> ied_ddn_backward<T>(const IedProblem<T>&, const EigResult<T>&,       \
                                                const DenseVector<T>&, bool, T);                 \
    template IedGradPack<T> ied_ift_backward<T>(const IedProblem<T>&, const EigResult<T>&,       \
                                                const DenseVector<T>&, bool);                    \
    template DenseMatrix<T> flip_transform<T>(const DenseMatrix<T>&);

PMAF_INSTANTIATE(float)
PMAF_INSTANTIATE(double)

#undef PMAF_INSTANTIATE

}  // namespace pmaf
