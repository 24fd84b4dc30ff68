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

#include "pmaf/error.hpp"
#include "pmaf/eval.hpp"
#include "pmaf/ied_grad.hpp"

using namespace pmaf;

namespace
{
IedProblem<double> sym_nonneg(std::size_t m, std::uint64_t seed)
{
    SampleSpec s;
    s.m = m;
    s.n = m;
    s.symmetric = true;
    s.absolute = true;
    s.seed = derive_seed(31337, seed);
    return IedProblem<double>(sample_matrix<double>(s), true);
}

EigResult<double> solve_eig(const IedProblem<double>& p, std::uint64_t seed)
{
    return power_iteration(p, default_start<double>(p.m(), seed), 1e-12, 10000, SignMode::HardCoded);
}

Vector direction(std::size_t n, double phase)
{
    Vector c(n);
    for (std::size_t i = 0; i < n; ++i) {
        c[i] = std::sin(0.7 * double(i) + phase);
    }
    return c;
}

Matrix contract(const Vector& k, const DenseTensor3<double>& b)
{
    const std::size_t m = k.size();
    Matrix g(b.dim1(), b.dim2());
    for (std::size_t i = 0; i < m; ++i) {
        const auto blk = b.block(i);
        for (std::size_t e = 0; e < g.size(); ++e) {
            g.span()[e] += k[i] * blk[e];
        }
    }
    return g;
}

Matrix sym(const Matrix& a)
{
    Matrix s(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        for (std::size_t j = 0; j < a.cols(); ++j) {
            s(i, j) = 0.5 * (a(i, j) + a(j, i));
        }
    }
    return s;
}

double rel(const Matrix& a, const Matrix& b) { return max_rel_diff(a.span(), b.span()); }
}  // namespace

TEST_CASE("Lagrange multiplier is the negative eigenvalue")
{
    const IedProblem<double> d(Matrix::from_rows({{3, 0}, {0, 1}}), true);
    CHECK(ied_lagrange_beta(d, Vector{1, 0}) == doctest::Approx(-3));
    const IedProblem<double> id(Matrix::identity(2), true);
    CHECK(ied_lagrange_beta(id, proj_sphere(Vector{0.3, -2})) == doctest::Approx(-1));
    const auto p = sym_nonneg(16, 0);
    const auto e = solve_eig(p, 0);
    CHECK(std::abs(ied_lagrange_beta(p, e.y) + e.lambda) <= 1e-6);
    CHECK_THROWS_AS(ied_lagrange_beta(d, Vector{1, 0, 0}), ShapeError);
}

TEST_CASE("rank-two combination")
{
    const auto g = ied_ddn_combine(Vector{1, 0}, Vector{0, 1});
    CHECK(g(0, 0) == 0.0);
    CHECK(g(0, 1) == -1.0);
    CHECK(g(1, 0) == -1.0);
    CHECK(g(1, 1) == 0.0);
}

TEST_CASE("materialized B examples")
{
    const auto b = ied_B_materialize(Vector{1, 0});
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t p = 0; p < 2; ++p) {
            for (std::size_t q = 0; q < 2; ++q) {
                double expect = 0.0;
                if (i == 0 && p == 0 && q == 0) {
                    expect = -2.0;
                } else if ((i == 1 && p == 0 && q == 1) || (i == 1 && p == 1 && q == 0)) {
                    expect = -1.0;
                }
                CHECK(b(i, p, q) == expect);
            }
        }
    }
    // General y: B_ipq = -delta_ip y_q - delta_iq y_p.
    const Vector y{0.6, -0.8};
    const auto g = ied_B_materialize(y);
    for (std::size_t i = 0; i < 2; ++i) {
        for (std::size_t p = 0; p < 2; ++p) {
            for (std::size_t q = 0; q < 2; ++q) {
                const double expect = -(i == p ? y[q] : 0.0) - (i == q ? y[p] : 0.0);
                CHECK(g(i, p, q) == doctest::Approx(expect));
            }
        }
    }
}

TEST_CASE("property: materialized B matches brute-force assembly")
{
    for (std::uint64_t s = 0; s < 12; ++s) {
        const std::size_t m = 1 + s;
        const auto p = sym_nonneg(m, s);
        const auto y = default_start<double>(m, s);
        const auto a = ied_B_materialize(y);
        const auto b = brute_force_B_ied(p, y);
        CHECK(max_abs_diff(a.span(), b.span()) <= 1e-10);
    }
}

TEST_CASE("DDN backward basics")
{
    const auto p = sym_nonneg(6, 1);
    const auto e = solve_eig(p, 1);
    for (const bool ex : {true, false}) {
        const auto g = ied_ddn_backward(p, e, Vector(6), ex);
        CHECK(max_abs(g.dLdA.span()) == 0.0);
        CHECK(g.method == IedGradMethod::DDN);
        CHECK(g.exploited == ex);
    }
    EigResult<double> bad = e;
    bad.y = scaled(e.y, 2.0);
    CHECK_THROWS_AS(ied_ddn_backward(p, bad, direction(6, 0), true), DomainError);
    CHECK_THROWS_AS(ied_ddn_backward(p, e, direction(5, 0), true), ShapeError);
}

TEST_CASE("property: DDN exploited gradient is the symmetric rank-two form")
{
    for (std::uint64_t s = 0; s < 12; ++s) {
        const std::size_t m = 2 + s % 11;
        const auto p = sym_nonneg(m, s);
        const auto e = solve_eig(p, s);
        const auto g = ied_ddn_backward(p, e, direction(m, double(s)), true);
        const auto r = ied_ddn_combine(g.K, e.y);
        CHECK(g.dLdA == r);
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                CHECK(g.dLdA(i, j) == g.dLdA(j, i));
            }
        }
        // Same K through the dense tensor contraction.
        CHECK(rel(g.dLdA, contract(g.K, ied_B_materialize(e.y))) <= 1e-10);
    }
}

TEST_CASE("DDN materialized path stays close to the exploited path")
{
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto p = sym_nonneg(8, s);
        const auto e = solve_eig(p, s);
        const auto c = direction(8, double(s));
        const auto a = ied_ddn_backward(p, e, c, true);
        const auto b = ied_ddn_backward(p, e, c, false);
        CHECK(rel(a.dLdA, b.dLdA) <= 1e-6);
        CHECK(a.ridge > 0.0);
    }
}

TEST_CASE("IFT example on a diagonal matrix")
{
    const IedProblem<double> p(Matrix::from_rows({{2, 0}, {0, 1}}), true);
    EigResult<double> e;
    e.y = Vector{1, 0};
    e.lambda = 2.0;
    e.converged = true;
    for (const bool ex : {true, false}) {
        const auto g = ied_ift_backward(p, e, Vector{0, 1}, ex);
        CHECK(g.K[0] == doctest::Approx(0).epsilon(1e-15));
        CHECK(g.K[1] == doctest::Approx(2));
        CHECK(g.dLdA(0, 0) == doctest::Approx(0).epsilon(1e-15));
        CHECK(g.dLdA(0, 1) == doctest::Approx(0).epsilon(1e-15));
        CHECK(g.dLdA(1, 0) == doctest::Approx(1));
        CHECK(g.dLdA(1, 1) == doctest::Approx(0).epsilon(1e-15));
        const auto z = ied_ift_backward(p, e, Vector{0, 0}, ex);
        CHECK(max_abs(z.dLdA.span()) == 0.0);
    }
}

TEST_CASE("IFT needs a positive eigenvalue")
{
    const IedProblem<double> p(Matrix::from_rows({{-2, 0}, {0, 1}}), true);
    EigResult<double> e;
    e.y = Vector{1, 0};
    e.lambda = -2.0;
    CHECK_THROWS_AS(ied_ift_backward(p, e, Vector{0, 1}), DomainError);
}

TEST_CASE("property: IFT materialized and exploited paths agree")
{
    for (std::uint64_t s = 0; s < 8; ++s) {
        const auto p = sym_nonneg(3 + s, s);
        const auto e = solve_eig(p, s);
        const auto c = direction(3 + s, double(s));
        CHECK(rel(ied_ift_backward(p, e, c, true).dLdA, ied_ift_backward(p, e, c, false).dLdA) <=
              1e-10);
    }
}

TEST_CASE("property: gradients match finite differences and each other")
{
    for (std::uint64_t s = 0; s < 6; ++s) {
        const auto p = sym_nonneg(8, 50 + s);
        const auto e = solve_eig(p, s);
        // Fixed-point residual audit before any backward call.
        CHECK(fpd_ied(p, e.y) <= 1e-10);
        const auto c = direction(8, double(s));
        const Vector y0 = e.y;
        const auto ddn = ied_ddn_backward(p, e, c, true);
        const auto ift = ied_ift_backward(p, e, c, true);
        const auto fd_sym = finite_diff_grad(
            [&](const Matrix& a) { return dot(c, ied_symmetric_solution(a, y0)); }, p.A, 1e-6);
        const auto fd_fix = finite_diff_grad(
            [&](const Matrix& a) { return dot(c, ied_fixed_point_solution(a, y0)); }, p.A, 1e-6);
        CHECK(rel(ddn.dLdA, fd_sym) <= 1e-4);
        CHECK(rel(ift.dLdA, fd_fix) <= 1e-4);
        CHECK(rel(ddn.dLdA, sym(ift.dLdA)) <= 1e-4);
    }
}

TEST_CASE("flip transform")
{
    const auto f = flip_transform(Matrix::from_rows({{1, 2}, {3, 4}}));
    CHECK(f == Matrix::from_rows({{4, 3}, {2, 1}}));
    CHECK(flip_transform(Matrix::identity(3)) == Matrix::identity(3));
    CHECK_THROWS_AS(flip_transform(Matrix(2, 3)), ShapeError);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto p = sym_nonneg(4, s);
        Matrix x = p.A;
        x(0, 3) += 0.5;  // not symmetric on purpose
        CHECK(flip_transform(flip_transform(x)) == x);
    }
}

TEST_CASE("property: eigenvectors of a flipped matrix are flipped eigenvectors")
{
    for (std::size_t m = 1; m <= 4; ++m) {
        for (std::uint64_t s = 0; s < 5; ++s) {
            SampleSpec sp;
            sp.m = m;
            sp.n = m;
            sp.symmetric = true;
            sp.seed = derive_seed(8, 10 * m + s);
            const auto a = sample_matrix<double>(sp);
            const auto ea = jacobi_eigen(a);
            const auto ef = jacobi_eigen(flip_transform(a));
            for (std::size_t j = 0; j < m; ++j) {
                CHECK(ef.values[j] == doctest::Approx(ea.values[j]));
                double d = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    d += ef.vectors(i, j) * ea.vectors(m - 1 - i, j);
                }
                CHECK(std::abs(d) == doctest::Approx(1).epsilon(1e-9));
            }
        }
    }
}

TEST_CASE("float backward")
{
    const auto p = sym_nonneg(8, 3);
    const auto e = solve_eig(p, 3);
    const auto c = direction(8, 1.0);
    const auto g = ied_ddn_backward(p, e, c, true);
    const IedProblem<float> pf(cast<float>(p.A), true);
    EigResult<float> ef;
    ef.y = cast<float>(e.y);
    ef.lambda = static_cast<float>(e.lambda);
    const auto gf = ied_ddn_backward(pf, ef, cast<float>(c), true);
    CHECK(rel(cast<double>(gf.dLdA), g.dLdA) <= 1e-2);
}
