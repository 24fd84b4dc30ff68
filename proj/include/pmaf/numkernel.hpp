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

// Dense row-major containers and the handful of kernels the solvers need:
// Householder QR, QR-based linear solves, sphere/tangent projections and
// cosine similarity. Everything is templated on the scalar so one binary can
// run the same math in float and double.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <string_view>
#include <vector>

#include "pmaf/error.hpp"
#include "pmaf/memtrack.hpp"

namespace pmaf
{

enum class Precision
{
    F32,
    F64
};

std::string_view to_string(Precision p);
Precision parse_precision(std::string_view text);

template <typename T>
using Buffer = std::vector<T, memtrack::TrackingAllocator<T>>;

namespace detail
{
template <typename T>
void require_finite(std::span<const T> values, const char* what)
{
    for (const T v : values) {
        if (!std::isfinite(v)) {
            throw DomainError(std::string(what) + ": non-finite entry");
        }
    }
}
}  // namespace detail

template <typename T>
class DenseVector
{
   public:
    using value_type = T;

    DenseVector() = default;
    explicit DenseVector(std::size_t len, T fill = T(0)) : data_(len, fill) {}
    DenseVector(std::initializer_list<T> values) : data_(values.begin(), values.end())
    {
        detail::require_finite<T>(data_, "DenseVector");
    }

    static DenseVector from(std::span<const T> values)
    {
        DenseVector v(values.size());
        std::copy(values.begin(), values.end(), v.data_.begin());
        detail::require_finite<T>(v.data_, "DenseVector");
        return v;
    }

    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }

    std::span<T> span() noexcept { return data_; }
    std::span<const T> span() const noexcept { return data_; }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }

    auto begin() noexcept { return data_.begin(); }
    auto end() noexcept { return data_.end(); }
    auto begin() const noexcept { return data_.begin(); }
    auto end() const noexcept { return data_.end(); }

    bool operator==(const DenseVector& other) const
    {
        return std::equal(data_.begin(), data_.end(), other.data_.begin(), other.data_.end());
    }

   private:
    Buffer<T> data_;
};

template <typename T>
class DenseMatrix
{
   public:
    using value_type = T;

    DenseMatrix() = default;
    DenseMatrix(std::size_t rows, std::size_t cols, T fill = T(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill)
    {
    }

    DenseMatrix(std::size_t rows, std::size_t cols, std::span<const T> values)
        : rows_(rows), cols_(cols), data_(values.begin(), values.end())
    {
        if (values.size() != rows * cols) {
            throw ShapeError("DenseMatrix: data length does not equal rows x cols");
        }
        detail::require_finite<T>(data_, "DenseMatrix");
    }

    static DenseMatrix from_rows(std::initializer_list<std::initializer_list<T>> rows)
    {
        const std::size_t r = rows.size();
        const std::size_t c = r == 0 ? 0 : rows.begin()->size();
        DenseMatrix m(r, c);
        std::size_t i = 0;
        for (const auto& row : rows) {
            if (row.size() != c) {
                throw ShapeError("DenseMatrix::from_rows: ragged rows");
            }
            std::copy(row.begin(), row.end(), m.data_.begin() + i * c);
            ++i;
        }
        detail::require_finite<T>(m.data_, "DenseMatrix");
        return m;
    }

    static DenseMatrix identity(std::size_t n)
    {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) {
            m(i, i) = T(1);
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool is_square() const noexcept { return rows_ == cols_; }

    T& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const noexcept
    {
        return data_[i * cols_ + j];
    }

    std::span<T> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const T> row(std::size_t i) const noexcept
    {
        return {data_.data() + i * cols_, cols_};
    }

    std::span<T> span() noexcept { return data_; }
    std::span<const T> span() const noexcept { return data_; }

    bool operator==(const DenseMatrix& other) const
    {
        return rows_ == other.rows_ && cols_ == other.cols_ &&
               std::equal(data_.begin(), data_.end(), other.data_.begin());
    }

   private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    Buffer<T> data_;
};

// Rank-3 array stored as d0 contiguous blocks of d1 x d2 (block-row layout).
// Used only when a second-derivative tensor is materialized on purpose.
template <typename T>
class DenseTensor3
{
   public:
    DenseTensor3() = default;
    DenseTensor3(std::size_t d0, std::size_t d1, std::size_t d2)
        : d0_(d0), d1_(d1), d2_(d2), data_(d0 * d1 * d2, T(0))
    {
    }

    std::size_t dim0() const noexcept { return d0_; }
    std::size_t dim1() const noexcept { return d1_; }
    std::size_t dim2() const noexcept { return d2_; }

    T& operator()(std::size_t i, std::size_t j, std::size_t k) noexcept
    {
        return data_[(i * d1_ + j) * d2_ + k];
    }
    const T& operator()(std::size_t i, std::size_t j, std::size_t k) const noexcept
    {
        return data_[(i * d1_ + j) * d2_ + k];
    }

    // Block i as a d1 x d2 row-major slab.
    std::span<const T> block(std::size_t i) const noexcept
    {
        return {data_.data() + i * d1_ * d2_, d1_ * d2_};
    }

    std::span<T> span() noexcept { return data_; }
    std::span<const T> span() const noexcept { return data_; }

    static std::size_t bytes_for(std::size_t d0, std::size_t d1, std::size_t d2) noexcept
    {
        return d0 * d1 * d2 * sizeof(T);
    }

   private:
    std::size_t d0_ = 0, d1_ = 0, d2_ = 0;
    Buffer<T> data_;
};

using Vector = DenseVector<double>;
using Matrix = DenseMatrix<double>;

// ---------------------------------------------------------------------------
// Small BLAS-1/2/3 helpers. Accumulation happens in T on purpose: the float
// path must behave like float arithmetic.
// ---------------------------------------------------------------------------

template <typename T>
T dot(const DenseVector<T>& a, const DenseVector<T>& b)
{
    if (a.size() != b.size()) {
        throw ShapeError("dot: length mismatch");
    }
    T s = T(0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

template <typename T>
T norm(const DenseVector<T>& a)
{
    return std::sqrt(dot(a, a));
}

template <typename T>
T max_abs(std::span<const T> values)
{
    T m = T(0);
    for (const T v : values) {
        m = std::max(m, std::abs(v));
    }
    return m;
}

template <typename T>
T frobenius_norm(const DenseMatrix<T>& a)
{
    T s = T(0);
    for (const T v : a.span()) {
        s += v * v;
    }
    return std::sqrt(s);
}

template <typename T>
DenseVector<T> scaled(const DenseVector<T>& a, T c)
{
    DenseVector<T> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        r[i] = c * a[i];
    }
    return r;
}

// a + c * b
template <typename T>
DenseVector<T> axpy(const DenseVector<T>& a, T c, const DenseVector<T>& b)
{
    if (a.size() != b.size()) {
        throw ShapeError("axpy: length mismatch");
    }
    DenseVector<T> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        r[i] = a[i] + c * b[i];
    }
    return r;
}

template <typename T>
DenseVector<T> operator-(const DenseVector<T>& a, const DenseVector<T>& b)
{
    return axpy(a, T(-1), b);
}

template <typename T>
DenseVector<T> operator+(const DenseVector<T>& a, const DenseVector<T>& b)
{
    return axpy(a, T(1), b);
}

template <typename T>
DenseVector<T> operator-(const DenseVector<T>& a)
{
    return scaled(a, T(-1));
}

// A x
template <typename T>
DenseVector<T> matvec(const DenseMatrix<T>& a, const DenseVector<T>& x)
{
    if (a.cols() != x.size()) {
        throw ShapeError("matvec: inner dimensions differ");
    }
    DenseVector<T> r(a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto row = a.row(i);
        T s = T(0);
        for (std::size_t j = 0; j < a.cols(); ++j) {
            s += row[j] * x[j];
        }
        r[i] = s;
    }
    return r;
}

// A^T x
template <typename T>
DenseVector<T> matvec_t(const DenseMatrix<T>& a, const DenseVector<T>& x)
{
    if (a.rows() != x.size()) {
        throw ShapeError("matvec_t: inner dimensions differ");
    }
    DenseVector<T> r(a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        const auto row = a.row(i);
        const T xi = x[i];
        for (std::size_t j = 0; j < a.cols(); ++j) {
            r[j] += row[j] * xi;
        }
    }
    return r;
}

template <typename T>
DenseMatrix<T> matmul(const DenseMatrix<T>& a, const DenseMatrix<T>& b)
{
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: inner dimensions differ");
    }
    DenseMatrix<T> c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        auto crow = c.row(i);
        for (std::size_t k = 0; k < a.cols(); ++k) {
            const T aik = a(i, k);
            const auto brow = b.row(k);
            for (std::size_t j = 0; j < b.cols(); ++j) {
                crow[j] += aik * brow[j];
            }
        }
    }
    return c;
}

// A^T A
template <typename T>
DenseMatrix<T> gram(const DenseMatrix<T>& a)
{
    DenseMatrix<T> g(a.cols(), a.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        const auto row = a.row(r);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const T ai = row[i];
            auto grow = g.row(i);
            for (std::size_t j = 0; j < a.cols(); ++j) {
                grow[j] += ai * row[j];
            }
        }
    }
    return g;
}

template <typename T>
DenseMatrix<T> transpose(const DenseMatrix<T>& a)
{
    DenseMatrix<T> t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            t(j, i) = a(i, j);
        }
    }
    return t;
}

// a b^T
template <typename T>
DenseMatrix<T> outer(const DenseVector<T>& a, const DenseVector<T>& b)
{
    DenseMatrix<T> m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        for (std::size_t j = 0; j < b.size(); ++j) {
            m(i, j) = a[i] * b[j];
        }
    }
    return m;
}

template <typename U, typename T>
DenseVector<U> cast(const DenseVector<T>& v)
{
    DenseVector<U> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        r[i] = static_cast<U>(v[i]);
    }
    return r;
}

template <typename U, typename T>
DenseMatrix<U> cast(const DenseMatrix<T>& m)
{
    DenseMatrix<U> r(m.rows(), m.cols());
    auto dst = r.span();
    auto src = m.span();
    for (std::size_t i = 0; i < src.size(); ++i) {
        dst[i] = static_cast<U>(src[i]);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Householder QR
// ---------------------------------------------------------------------------

// Compact Householder factorization of an m x n matrix (m >= n). The
// reflectors live below the diagonal of the factored copy, R on and above it.
// One factorization serves any number of right-hand sides.
template <typename T>
class HouseholderQR
{
   public:
    explicit HouseholderQR(DenseMatrix<T> a);

    std::size_t rows() const noexcept { return qr_.rows(); }
    std::size_t cols() const noexcept { return qr_.cols(); }

    // max |R_ii| / min |R_ii|; infinity when a diagonal entry is exactly 0.
    double condition_estimate() const noexcept;
    bool is_singular() const noexcept;

    // Least-squares solution of A x = rhs. Throws SingularMatrixError when the
    // triangular factor is numerically singular.
    DenseVector<T> solve(const DenseVector<T>& rhs) const;
    DenseMatrix<T> solve(const DenseMatrix<T>& rhs) const;

    // Explicit thin factors with diag(R) >= 0.
    DenseMatrix<T> q() const;
    DenseMatrix<T> r() const;

   private:
    void apply_qt(std::span<T> x) const;
    void back_substitute(std::span<T> x) const;

    DenseMatrix<T> qr_;
    Buffer<T> beta_;
    Buffer<T> diag_;
};

template <typename T>
struct QrFactors
{
    DenseMatrix<T> q;
    DenseMatrix<T> r;
};

// Square QR with diag(R) >= 0.
template <typename T>
QrFactors<T> qr(const DenseMatrix<T>& x);

// Solves (H + ridge I) x = rhs by QR.
template <typename T>
DenseVector<T> solve(const DenseMatrix<T>& h, const DenseVector<T>& rhs, T ridge = T(0));

// Returns (H + ridge I)^{-1}, column by column. Only the unexploited
// reference paths form explicit inverses.
template <typename T>
DenseMatrix<T> inverse(const DenseMatrix<T>& h, T ridge = T(0));

template <typename T>
DenseVector<T> proj_sphere(const DenseVector<T>& u);

// (I - u u^T / |u|^2) g
template <typename T>
DenseVector<T> proj_tangent(const DenseVector<T>& u, const DenseVector<T>& g);

template <typename T>
T cosine_sim(const DenseVector<T>& a, const DenseVector<T>& b);

}  // namespace pmaf
