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

#include "pmaf/less_grad.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace pmaf
{

namespace
{
template <typename T>
void check_inputs(const LessProblem<T>& p, const DenseVector<T>& y, const DenseVector<T>* dLdy)
{
    if (y.size() != p.n()) {
        throw ShapeError("LESS backward: y length must equal n");
    }
    if (dLdy != nullptr && dLdy->size() != p.n()) {
        throw ShapeError("LESS backward: dL/dy length must equal n");
    }
    if (std::abs(static_cast<double>(norm(y)) - 1.0) > 1e-4) {
        throw DomainError("LESS backward: y is not on the unit sphere");
    }
}

template <typename T>
T trace(const DenseMatrix<T>& h)
{
    T s = T(0);
    for (std::size_t i = 0; i < h.rows(); ++i) {
        s += h(i, i);
    }
    return s;
}

// H = A^T A - 2 beta I (+ ridge I).
template <typename T>
DenseMatrix<T> build_H(const LessProblem<T>& p, T beta)
{
    auto h = gram(p.A);
    for (std::size_t i = 0; i < h.rows(); ++i) {
        h(i, i) -= T(2) * beta;
    }
    return h;
}

template <typename T>
T auto_ridge(const DenseMatrix<T>& h)
{
    const T tr = std::abs(trace(h));
    return T(1e-9) * (tr > T(0) ? tr / static_cast<T>(h.rows()) : T(1));
}

template <typename T>
DenseMatrix<T> add_ridge(DenseMatrix<T> h, T ridge)
{
    for (std::size_t i = 0; i < h.rows(); ++i) {
        h(i, i) += ridge;
    }
    return h;
}

// Solves (A^T A + c I) x = rhs. When A is wide (m < n) and c is safely away
// from zero, the Woodbury identity
//   (A^T A + c I)^-1 = (I - A^T (c I + A A^T)^-1 A) / c
// reduces the work to an m x m factorization.
template <typename T>
class ShiftedGramSolver
{
   public:
    ShiftedGramSolver(const LessProblem<T>& p, T beta, T ridge_request) : a_(p.A)
    {
        const std::size_t m = p.m();
        const std::size_t n = p.n();
        const T c0 = T(-2) * beta;
        const T gram_scale = trace_gram(p.A) / static_cast<T>(n);
        const bool auto_mode = ridge_request < T(0);
        ridge_ = auto_mode ? T(0) : ridge_request;
        const T c = c0 + ridge_;

        if (m < n && std::abs(c) > std::sqrt(std::numeric_limits<T>::epsilon()) * gram_scale) {
            DenseMatrix<T> s(m, m);
            for (std::size_t i = 0; i < m; ++i) {
                const auto ri = p.A.row(i);
                for (std::size_t j = 0; j <= i; ++j) {
                    const auto rj = p.A.row(j);
                    T acc = T(0);
                    for (std::size_t k = 0; k < n; ++k) {
                        acc += ri[k] * rj[k];
                    }
                    s(i, j) = acc;
                    s(j, i) = acc;
                }
                s(i, i) += c;
            }
            HouseholderQR<T> f(std::move(s));
            if (!f.is_singular()) {
                c_ = c;
                small_.emplace(std::move(f));
                return;
            }
        }

        auto h = build_H(p, beta);
        if (auto_mode) {
            HouseholderQR<T> f(add_ridge(h, ridge_));
            if (!f.is_singular()) {
                dense_.emplace(std::move(f));
                return;
            }
            ridge_ = auto_ridge(h);
        }
        dense_.emplace(add_ridge(std::move(h), ridge_));
    }

    DenseVector<T> solve(const DenseVector<T>& rhs) const
    {
        if (dense_) {
            return dense_->solve(rhs);
        }
        const auto t = small_->solve(matvec(a_, rhs));
        auto x = rhs - matvec_t(a_, t);
        return scaled(x, T(1) / c_);
    }

    T ridge() const noexcept { return ridge_; }

   private:
    static T trace_gram(const DenseMatrix<T>& a)
    {
        T s = T(0);
        for (const T v : a.span()) {
            s += v * v;
        }
        return s > T(0) ? s : T(1);
    }

    const DenseMatrix<T>& a_;
    T c_ = T(0);
    T ridge_ = T(0);
    std::optional<HouseholderQR<T>> small_;
    std::optional<HouseholderQR<T>> dense_;
};

// K = (v.z / y.z) z - w with z = H^-1 y, w = H^-1 v; H symmetric.
template <typename T>
DenseVector<T> combine_K(const DenseVector<T>& y, const DenseVector<T>& v, const DenseVector<T>& z,
                         const DenseVector<T>& w)
{
    const T yz = dot(y, z);
    if (!(std::abs(yz) > std::numeric_limits<T>::min()) || !std::isfinite(yz)) {
        throw DegenerateConstraintError("LESS backward: a H^-1 a^T vanishes");
    }
    return axpy(-w, dot(v, z) / yz, z);
}
}  // namespace

template <typename T>
T less_lagrange_beta(const LessProblem<T>& p, const DenseVector<T>& y)
{
    if (y.size() != p.n()) {
        throw ShapeError("less_lagrange_beta: y length must equal n");
    }
    const auto r = matvec(p.A, y) - p.b;
    return T(0.5) * dot(y, matvec_t(p.A, r));
}

template <typename T>
DenseVector<T> less_K(const LessProblem<T>& p, const DenseVector<T>& y, const DenseVector<T>& dLdy,
                      T ridge)
{
    check_inputs(p, y, &dLdy);
    const T beta = less_lagrange_beta(p, y);
    ShiftedGramSolver<T> hs(p, beta, ridge);
    return combine_K(y, dLdy, hs.solve(y), hs.solve(dLdy));
}

template <typename T>
DenseTensor3<T> less_B_exploited(const LessProblem<T>& p, const DenseVector<T>& y)
{
    if (y.size() != p.n()) {
        throw ShapeError("less_B_exploited: y length must equal n");
    }
    const std::size_t m = p.m();
    const std::size_t n = p.n();
    const auto r = matvec(p.A, y) - p.b;
    DenseTensor3<T> t(n, m, n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t row = 0; row < m; ++row) {
            const T a = p.A(row, i);
            for (std::size_t q = 0; q < n; ++q) {
                t(i, row, q) = a * y[q];
            }
            t(i, row, i) += r[row];
        }
    }
    return t;
}

std::size_t less_materialized_bytes(std::size_t m, std::size_t n, std::size_t scalar_size)
{
    return (n * m * n + 3 * n * n + n * m) * scalar_size;
}

template <typename T>
LessGradPack<T> less_backward(const LessProblem<T>& p, const DenseVector<T>& y,
                              const DenseVector<T>& dLdy, bool materialize_B, T ridge)
{
    check_inputs(p, y, &dLdy);
    const std::size_t m = p.m();
    const std::size_t n = p.n();
    LessGradPack<T> pack;
    pack.materialized = materialize_B;
    pack.beta_lm = less_lagrange_beta(p, y);

    if (!materialize_B) {
        ShiftedGramSolver<T> hs(p, pack.beta_lm, ridge);
        pack.ridge = hs.ridge();
        pack.K = combine_K(y, dLdy, hs.solve(y), hs.solve(dLdy));
        const auto ak = matvec(p.A, pack.K);
        const auto r = matvec(p.A, y) - p.b;
        pack.dLdA = DenseMatrix<T>(m, n);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                pack.dLdA(i, j) = ak[i] * y[j] + r[i] * pack.K[j];
            }
        }
        pack.dLdb = -ak;
        return pack;
    }

    // Reference route: explicit inverse, the formula for K term by term, and a
    // dense contraction with the materialized second-derivative tensors.
    auto h = build_H(p, pack.beta_lm);
    if (ridge < T(0)) {
        ridge = HouseholderQR<T>(h).is_singular() ? auto_ridge(h) : T(0);
    }
    pack.ridge = ridge;
    const auto hinv = inverse(h, ridge);
    const auto a = scaled(y, T(2));
    const auto hia = matvec(hinv, a);
    const T s = dot(a, hia);
    if (!(std::abs(s) > std::numeric_limits<T>::min()) || !std::isfinite(s)) {
        throw DegenerateConstraintError("LESS backward: a H^-1 a^T vanishes");
    }
    auto mmat = outer(hia, a);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            mmat(i, j) /= s;
        }
        mmat(i, i) -= T(1);
    }
    pack.K = matvec_t(hinv, matvec_t(mmat, dLdy));

    const auto b_a = less_B_exploited(p, y);
    pack.dLdA = DenseMatrix<T>(m, n);
    for (std::size_t i = 0; i < n; ++i) {
        const T ki = pack.K[i];
        const auto blk = b_a.block(i);
        auto out = pack.dLdA.span();
        for (std::size_t e = 0; e < m * n; ++e) {
            out[e] += ki * blk[e];
        }
    }
    // d(grad_y f)/db = -A^T, materialized as an n x m matrix.
    auto b_b = transpose(p.A);
    for (auto& v : b_b.span()) {
        v = -v;
    }
    pack.dLdb = matvec_t(b_b, pack.K);
    pack.H = std::move(h);
    return pack;
}

#define PMAF_INSTANTIATE(T)                                                                       \
    template T less_lagrange_beta<T>(const LessProblem<T>&, const DenseVector<T>&);               \
    template DenseVector<T> less_K<T>(const LessProblem<T>&, const DenseVector<T>&,               \
                                      const DenseVector<T>&, T);                                  \
    template DenseTensor3<T> less_B_exploited<T>(const LessProblem<T>&, const DenseVector<T>&);   \
    template LessGradPack<T> less_backward<T>(const LessProblem<T>&, const DenseVector<T>&,       \
                                              const DenseVector<T>&, bool, T);

PMAF_INSTANTIATE(float)
PMAF_INSTANTIATE(double)

#undef PMAF_INSTANTIATE

}  // namespace pmaf
