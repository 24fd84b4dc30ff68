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

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "pmaf/error.hpp"
#include "pmaf/memtrack.hpp"
#include "pmaf/numkernel.hpp"

using namespace pmaf;

namespace
{
template <typename T>
DenseMatrix<T> random_matrix(std::size_t r, std::size_t c, std::uint64_t seed)
{
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    DenseMatrix<T> m(r, c);
    for (auto& v : m.span()) {
        v = static_cast<T>(nd(gen));
    }
    return m;
}

template <typename T>
double frob_diff(const DenseMatrix<T>& a, const DenseMatrix<T>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = static_cast<double>(a.span()[i]) - static_cast<double>(b.span()[i]);
        s += d * d;
    }
    return std::sqrt(s);
}
}  // namespace

TEST_CASE("containers reject non-finite data and ragged rows")
{
    const double nan = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(Vector({1.0, nan}), DomainError);
    CHECK_THROWS_AS(Matrix::from_rows({{1.0, 2.0}, {3.0}}), ShapeError);
    const double vals[] = {1.0, 2.0, 3.0};
    CHECK_THROWS_AS(Matrix(2, 2, std::span<const double>(vals)), ShapeError);
    const double inf_vals[] = {1.0, std::numeric_limits<double>::infinity()};
    CHECK_THROWS_AS(Matrix(1, 2, std::span<const double>(inf_vals)), DomainError);
    Matrix m(2, 3);
    CHECK(m.size() == 6);
}

TEST_CASE("precision names round-trip")
{
    CHECK(parse_precision("f32") == Precision::F32);
    CHECK(parse_precision("f64") == Precision::F64);
    CHECK(parse_precision(to_string(Precision::F32)) == Precision::F32);
    CHECK_THROWS_AS(parse_precision("f16"), InvalidConfigError);
}

TEST_CASE("qr of an upper-triangular matrix is trivial")
{
    const auto f = qr(Matrix::from_rows({{2, 0}, {0, 1}}));
    CHECK(frob_diff(f.q, Matrix::identity(2)) < 1e-15);
    CHECK(frob_diff(f.r, Matrix::from_rows({{2, 0}, {0, 1}})) < 1e-15);
}

TEST_CASE("qr of a permutation keeps diag(R) non-negative")
{
    const auto f = qr(Matrix::from_rows({{0, 1}, {1, 0}}));
    CHECK(frob_diff(f.q, Matrix::from_rows({{0, 1}, {1, 0}})) < 1e-15);
    CHECK(frob_diff(f.r, Matrix::identity(2)) < 1e-15);
}

TEST_CASE("qr errors")
{
    CHECK_THROWS_AS(qr(Matrix(2, 3)), ShapeError);
}

TEST_CASE("qr reconstructs random matrices with orthogonal Q")
{
    for (const std::size_t m : {1u, 4u, 17u, 64u, 256u}) {
        CAPTURE(m);
        const auto x = random_matrix<double>(m, m, 11 + m);
        const auto f = qr(x);
        CHECK(frob_diff(matmul(f.q, f.r), x) / frobenius_norm(x) <= 1e-12);
        CHECK(frob_diff(matmul(transpose(f.q), f.q), Matrix::identity(m)) <= 1e-10);
        for (std::size_t i = 0; i < m; ++i) {
            CHECK(f.r(i, i) >= 0.0);
            for (std::size_t j = 0; j < i; ++j) {
                CHECK(f.r(i, j) == 0.0);
            }
        }
        const auto xf = random_matrix<float>(m, m, 11 + m);
        const auto ff = qr(xf);
        CHECK(frob_diff(matmul(transpose(ff.q), ff.q), DenseMatrix<float>::identity(m)) <= 1e-4);
    }
}

TEST_CASE("solve examples")
{
    const auto x1 = solve(Matrix::identity(2), Vector{3, 4});
    CHECK(x1[0] == doctest::Approx(3));
    CHECK(x1[1] == doctest::Approx(4));
    const auto x2 = solve(Matrix::from_rows({{2, 0}, {0, 4}}), Vector{2, 4});
    CHECK(x2[0] == doctest::Approx(1));
    CHECK(x2[1] == doctest::Approx(1));
    // Ridge regularizes a rank-one system towards its least-norm solution.
    const auto x3 = solve(Matrix::from_rows({{1, 1}, {1, 1}}), Vector{1, 1}, 1e-8);
    CHECK(x3[0] == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(x3[1] == doctest::Approx(0.5).epsilon(1e-6));
}

TEST_CASE("solve errors")
{
    CHECK_THROWS_AS(solve(Matrix(2, 3), Vector{1, 2}), ShapeError);
    CHECK_THROWS_AS(solve(Matrix::identity(2), Vector{1, 2, 3}), ShapeError);
    try {
        (void)solve(Matrix::from_rows({{1, 1}, {1, 1}}), Vector{1, 1});
        FAIL("expected a singular-matrix error");
    } catch (const SingularMatrixError& e) {
        CHECK(e.condition_estimate() > 1e12);
    }
}

TEST_CASE("solve residual on well-conditioned systems")
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        auto h = random_matrix<double>(12, 12, s);
        for (std::size_t i = 0; i < 12; ++i) {
            h(i, i) += 10.0;
        }
        Vector rhs(12);
        for (std::size_t i = 0; i < 12; ++i) {
            rhs[i] = std::sin(double(i + s));
        }
        const auto x = solve(h, rhs);
        CHECK(norm(matvec(h, x) - rhs) / norm(rhs) <= 1e-12);
    }
}

TEST_CASE("inverse times matrix is identity")
{
    auto h = random_matrix<double>(6, 6, 3);
    for (std::size_t i = 0; i < 6; ++i) {
        h(i, i) += 5.0;
    }
    CHECK(frob_diff(matmul(inverse(h), h), Matrix::identity(6)) < 1e-12);
}

TEST_CASE("proj_sphere")
{
    const auto a = proj_sphere(Vector{3, 4});
    CHECK(a[0] == doctest::Approx(0.6));
    CHECK(a[1] == doctest::Approx(0.8));
    const auto b = proj_sphere(Vector{1, 0});
    CHECK(b[0] == 1.0);
    CHECK(b[1] == 0.0);
    CHECK_THROWS_AS(proj_sphere(Vector{0, 0}), DegenerateInputError);
    for (std::uint64_t s = 0; s < 50; ++s) {
        const auto m = random_matrix<double>(1, 7, s);
        const auto u = proj_sphere(Vector::from(m.row(0)));
        CHECK(std::abs(norm(u) - 1.0) <= 4 * std::numeric_limits<double>::epsilon());
    }
}

TEST_CASE("proj_tangent")
{
    const auto a = proj_tangent(Vector{1, 0}, Vector{1, 0});
    CHECK(a[0] == 0.0);
    CHECK(a[1] == 0.0);
    const auto b = proj_tangent(Vector{0, 1}, Vector{2, -1});
    CHECK(b[0] == doctest::Approx(2));
    CHECK(b[1] == doctest::Approx(0));
    const auto c = proj_tangent(Vector{0.6, 0.8}, Vector{1, 0});
    CHECK(c[0] == doctest::Approx(0.64));
    CHECK(c[1] == doctest::Approx(-0.48));
    CHECK_THROWS_AS(proj_tangent(Vector{0, 0}, Vector{1, 0}), DegenerateInputError);
    CHECK_THROWS_AS(proj_tangent(Vector{1, 0}, Vector{1, 0, 0}), ShapeError);
}

TEST_CASE("proj_tangent output is orthogonal to u")
{
    for (std::uint64_t s = 0; s < 100; ++s) {
        const auto m = random_matrix<double>(2, 9, s);
        const auto u = Vector::from(m.row(0));
        const auto g = Vector::from(m.row(1));
        const auto t = proj_tangent(u, g);
        const double scale = norm(u) * std::max(norm(g), 1.0);
        CHECK(std::abs(dot(u, t)) <= 1e-12 * scale);
    }
}

TEST_CASE("cosine_sim")
{
    CHECK(cosine_sim(Vector{1, 0}, Vector{2, 0}) == doctest::Approx(1));
    CHECK(cosine_sim(Vector{1, 0}, Vector{0, 3}) == doctest::Approx(0));
    CHECK(cosine_sim(Vector{1, 0}, Vector{-5, 0}) == doctest::Approx(-1));
    CHECK_THROWS_AS(cosine_sim(Vector{0, 0}, Vector{1, 0}), DegenerateInputError);
    for (std::uint64_t s = 0; s < 200; ++s) {
        const auto m = random_matrix<double>(1, 3, s);
        const auto a = Vector::from(m.row(0));
        const auto c = cosine_sim(a, scaled(a, 1.0 + 1e-3 * double(s)));
        CHECK(c <= 1.0);
        CHECK(c >= -1.0);
        const auto d = cosine_sim(a, -a);
        CHECK(d >= -1.0);
    }
}

TEST_CASE("tensor block layout")
{
    DenseTensor3<double> t(2, 3, 4);
    t(1, 2, 3) = 7.0;
    CHECK(t.block(1)[2 * 4 + 3] == 7.0);
    CHECK(DenseTensor3<double>::bytes_for(2, 3, 4) == 2 * 3 * 4 * sizeof(double));
}

TEST_CASE("allocation tracking sees container buffers")
{
    const memtrack::PeakScope scope;
    {
        Matrix big(100, 100);
        (void)big;
    }
    CHECK(scope.peak_bytes() >= 100 * 100 * sizeof(double));
}
