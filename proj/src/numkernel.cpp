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

#include "pmaf/numkernel.hpp"

#include <limits>
#include <string>

namespace pmaf
{

std::string_view to_string(Precision p)
{
    return p == Precision::F32 ? "f32" : "f64";
}

Precision parse_precision(std::string_view text)
{
    if (text == "f32" || text == "F32" || text == "float32") {
        return Precision::F32;
    }
    if (text == "f64" || text == "F64" || text == "float64") {
        return Precision::F64;
    }
    throw InvalidConfigError("unknown precision '" + std::string(text) + "' (expected f32 or f64)");
}

template <typename T>
HouseholderQR<T>::HouseholderQR(DenseMatrix<T> a)
    : qr_(std::move(a)), beta_(qr_.cols(), T(0)), diag_(qr_.cols(), T(0))
{
    const std::size_t m = qr_.rows();
    const std::size_t n = qr_.cols();
    if (m < n) {
        throw ShapeError("HouseholderQR: more columns than rows");
    }
    detail::require_finite<T>(qr_.span(), "HouseholderQR");

    Buffer<T> s(n, T(0));
    for (std::size_t k = 0; k < n; ++k) {
        // Scale to avoid overflow in the column norm.
        T scale = T(0);
        for (std::size_t i = k; i < m; ++i) {
            scale = std::max(scale, std::abs(qr_(i, k)));
        }
        if (scale == T(0)) {
            beta_[k] = T(0);
            diag_[k] = T(0);
            continue;
        }
        T sumsq = T(0);
        for (std::size_t i = k; i < m; ++i) {
            const T v = qr_(i, k) / scale;
            sumsq += v * v;
        }
        const T xnorm = scale * std::sqrt(sumsq);
        const T x0 = qr_(k, k);
        const T alpha = x0 >= T(0) ? -xnorm : xnorm;
        // v = x - alpha e1, normalised so that v0 = 1.
        const T v0 = x0 - alpha;
        for (std::size_t i = k + 1; i < m; ++i) {
            qr_(i, k) /= v0;
        }
        beta_[k] = -v0 / alpha;  // 2 / (v^T v) with v0 = 1
        diag_[k] = alpha;
        qr_(k, k) = alpha;

        // Apply (I - beta v v^T) to the trailing columns, row by row.
        std::fill(s.begin() + static_cast<std::ptrdiff_t>(k + 1), s.end(), T(0));
        for (std::size_t j = k + 1; j < n; ++j) {
            s[j] = qr_(k, j);
        }
        for (std::size_t i = k + 1; i < m; ++i) {
            const T vi = qr_(i, k);
            const auto row = qr_.row(i);
            for (std::size_t j = k + 1; j < n; ++j) {
                s[j] += vi * row[j];
            }
        }
        for (std::size_t j = k + 1; j < n; ++j) {
            s[j] *= beta_[k];
            qr_(k, j) -= s[j];
        }
        for (std::size_t i = k + 1; i < m; ++i) {
            const T vi = qr_(i, k);
            auto row = qr_.row(i);
            for (std::size_t j = k + 1; j < n; ++j) {
                row[j] -= s[j] * vi;
            }
        }
    }
}

template <typename T>
double HouseholderQR<T>::condition_estimate() const noexcept
{
    double lo = std::numeric_limits<double>::infinity();
    double hi = 0.0;
    for (const T d : diag_) {
        lo = std::min(lo, static_cast<double>(std::abs(d)));
        hi = std::max(hi, static_cast<double>(std::abs(d)));
    }
    if (diag_.empty()) {
        return 1.0;
    }
    if (lo == 0.0) {
        return std::numeric_limits<double>::infinity();
    }
    return hi / lo;
}

template <typename T>
bool HouseholderQR<T>::is_singular() const noexcept
{
    const double eps = std::numeric_limits<T>::epsilon();
    const double n = static_cast<double>(std::max<std::size_t>(cols(), 1));
    return !(condition_estimate() * n * eps < 1.0);
}

template <typename T>
void HouseholderQR<T>::apply_qt(std::span<T> x) const
{
    const std::size_t m = qr_.rows();
    for (std::size_t k = 0; k < qr_.cols(); ++k) {
        if (beta_[k] == T(0)) {
            continue;
        }
        T s = x[k];
        for (std::size_t i = k + 1; i < m; ++i) {
            s += qr_(i, k) * x[i];
        }
        s *= beta_[k];
        x[k] -= s;
        for (std::size_t i = k + 1; i < m; ++i) {
            x[i] -= s * qr_(i, k);
        }
    }
}

template <typename T>
void HouseholderQR<T>::back_substitute(std::span<T> x) const
{
    const std::size_t n = qr_.cols();
    for (std::size_t ii = n; ii-- > 0;) {
        T s = x[ii];
        const auto row = qr_.row(ii);
        for (std::size_t j = ii + 1; j < n; ++j) {
            s -= row[j] * x[j];
        }
        x[ii] = s / row[ii];
    }
}

template <typename T>
DenseVector<T> HouseholderQR<T>::solve(const DenseVector<T>& rhs) const
{
    if (rhs.size() != qr_.rows()) {
        throw ShapeError("HouseholderQR::solve: rhs length does not match rows");
    }
    if (is_singular()) {
        throw SingularMatrixError("HouseholderQR::solve: matrix is numerically singular",
                                  condition_estimate());
    }
    Buffer<T> work(rhs.begin(), rhs.end());
    apply_qt(work);
    back_substitute(work);
    DenseVector<T> x(qr_.cols());
    std::copy_n(work.begin(), qr_.cols(), x.begin());
    return x;
}

template <typename T>
DenseMatrix<T> HouseholderQR<T>::solve(const DenseMatrix<T>& rhs) const
{
    if (rhs.rows() != qr_.rows()) {
        throw ShapeError("HouseholderQR::solve: rhs rows do not match");
    }
    if (is_singular()) {
        throw SingularMatrixError("HouseholderQR::solve: matrix is numerically singular",
                                  condition_estimate());
    }
    DenseMatrix<T> x(qr_.cols(), rhs.cols());
    Buffer<T> work(qr_.rows());
    for (std::size_t c = 0; c < rhs.cols(); ++c) {
        for (std::size_t i = 0; i < rhs.rows(); ++i) {
            work[i] = rhs(i, c);
        }
        apply_qt(work);
        back_substitute(work);
        for (std::size_t i = 0; i < qr_.cols(); ++i) {
            x(i, c) = work[i];
        }
    }
    return x;
}

template <typename T>
DenseMatrix<T> HouseholderQR<T>::q() const
{
    const std::size_t m = qr_.rows();
    const std::size_t n = qr_.cols();
    DenseMatrix<T> q(m, n);
    for (std::size_t i = 0; i < n; ++i) {
        q(i, i) = T(1);
    }
    // Q = H_0 H_1 ... H_{n-1} applied to the thin identity, last reflector first.
    Buffer<T> s(n);
    for (std::size_t kk = n; kk-- > 0;) {
        if (beta_[kk] == T(0)) {
            continue;
        }
        for (std::size_t j = 0; j < n; ++j) {
            T acc = q(kk, j);
            for (std::size_t i = kk + 1; i < m; ++i) {
                acc += qr_(i, kk) * q(i, j);
            }
            s[j] = acc * beta_[kk];
        }
        for (std::size_t j = 0; j < n; ++j) {
            q(kk, j) -= s[j];
        }
        for (std::size_t i = kk + 1; i < m; ++i) {
            const T vi = qr_(i, kk);
            auto row = q.row(i);
            for (std::size_t j = 0; j < n; ++j) {
                row[j] -= s[j] * vi;
            }
        }
    }
    for (std::size_t k = 0; k < n; ++k) {
        if (diag_[k] < T(0)) {
            for (std::size_t i = 0; i < m; ++i) {
                q(i, k) = -q(i, k);
            }
        }
    }
    return q;
}

template <typename T>
DenseMatrix<T> HouseholderQR<T>::r() const
{
    const std::size_t n = qr_.cols();
    DenseMatrix<T> r(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const T sign = diag_[i] < T(0) ? T(-1) : T(1);
        for (std::size_t j = i; j < n; ++j) {
            r(i, j) = sign * qr_(i, j);
        }
    }
    return r;
}

template <typename T>
QrFactors<T> qr(const DenseMatrix<T>& x)
{
    if (!x.is_square()) {
        throw ShapeError("qr: input must be square");
    }
    HouseholderQR<T> f(x);
    return {f.q(), f.r()};
}

namespace
{
template <typename T>
DenseMatrix<T> shifted(const DenseMatrix<T>& h, T ridge, const char* who)
{
    if (!h.is_square()) {
        throw ShapeError(std::string(who) + ": matrix must be square");
    }
    if (!(ridge >= T(0)) || !std::isfinite(ridge)) {
        throw DomainError(std::string(who) + ": ridge must be finite and non-negative");
    }
    DenseMatrix<T> m = h;
    if (ridge != T(0)) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
            m(i, i) += ridge;
        }
    }
    return m;
}
}  // namespace

template <typename T>
DenseVector<T> solve(const DenseMatrix<T>& h, const DenseVector<T>& rhs, T ridge)
{
    if (h.rows() != rhs.size()) {
        throw ShapeError("solve: rhs length does not match the matrix");
    }
    HouseholderQR<T> f(shifted(h, ridge, "solve"));
    return f.solve(rhs);
}

template <typename T>
DenseMatrix<T> inverse(const DenseMatrix<T>& h, T ridge)
{
    HouseholderQR<T> f(shifted(h, ridge, "inverse"));
    return f.solve(DenseMatrix<T>::identity(h.rows()));
}

template <typename T>
DenseVector<T> proj_sphere(const DenseVector<T>& u)
{
    const T n = norm(u);
    if (!(n > T(0))) {
        throw DegenerateInputError("proj_sphere: zero-norm vector");
    }
    DenseVector<T> r(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) {
        r[i] = u[i] / n;
    }
    return r;
}

template <typename T>
DenseVector<T> proj_tangent(const DenseVector<T>& u, const DenseVector<T>& g)
{
    if (u.size() != g.size()) {
        throw ShapeError("proj_tangent: length mismatch");
    }
    const T uu = dot(u, u);
    if (!(uu > T(0))) {
        throw DegenerateInputError("proj_tangent: zero-norm base point");
    }
    const T c = dot(u, g) / uu;
    DenseVector<T> r(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        r[i] = g[i] - c * u[i];
    }
    return r;
}

template <typename T>
T cosine_sim(const DenseVector<T>& a, const DenseVector<T>& b)
{
    const T na = norm(a);
    const T nb = norm(b);
    if (!(na > T(0)) || !(nb > T(0))) {
        throw DegenerateInputError("cosine_sim: zero-norm input");
    }
    return std::clamp(dot(a, b) / (na * nb), T(-1), T(1));
}

#define PMAF_INSTANTIATE(T)                                                       \
    template class HouseholderQR<T>;                                              \
    template QrFactors<T> qr<T>(const DenseMatrix<T>&);                           \
    template DenseVector<T> solve<T>(const DenseMatrix<T>&, const DenseVector<T>&, T); \
    template DenseMatrix<T> inverse<T>(const DenseMatrix<T>&, T);                 \
    template DenseVector<T> proj_sphere<T>(const DenseVector<T>&);                \
    template DenseVector<T> proj_tangent<T>(const DenseVector<T>&, const DenseVector<T>&); \
    template T cosine_sim<T>(const DenseVector<T>&, const DenseVector<T>&);

PMAF_INSTANTIATE(float)
PMAF_INSTANTIATE(double)

#undef PMAF_INSTANTIATE

}  // namespace pmaf
