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
#include <optional>

#include "pmaf/error.hpp"
#include "pmaf/eval.hpp"
#include "pmaf/ied_solver.hpp"

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
    s.seed = derive_seed(4242, seed);
    return IedProblem<double>(sample_matrix<double>(s), true);
}

double rayleigh(const IedProblem<double>& p, const Vector& y) { return dot(y, matvec(p.A, y)); }
}  // namespace

TEST_CASE("problem validation")
{
    CHECK_THROWS_AS(IedProblem<double>(Matrix(2, 3)), ShapeError);
    CHECK_THROWS_AS(IedProblem<double>(Matrix::from_rows({{1, 2}, {0, 1}}), true), DomainError);
    CHECK_NOTHROW(IedProblem<double>(Matrix::from_rows({{1, 2}, {0, 1}}), false));
}

TEST_CASE("sign consistency examples")
{
    CHECK(sign_consistency_V(Vector{1, 0}, Vector{-1, 0}) == -1.0);
    CHECK(sign_consistency_V(Vector{1, 0}, Vector{0, 1}) == 1.0);
    CHECK(sign_consistency_V(Vector{1, 0}, Vector{0.5, 0}) == 1.0);
    CHECK(sign_consistency_V(Vector{1, 1e-13}, Vector{-1e-13, 1}) == 1.0);
}

TEST_CASE("power iteration on a diagonal matrix")
{
    const IedProblem<double> p(Matrix::from_rows({{2, 0}, {0, 1}}), true);
    const auto u0 = proj_sphere(Vector{1, 1});
    const auto one = power_iteration(p, u0, 1e-12, 1, SignMode::None);
    CHECK(one.y[0] == doctest::Approx(2 / std::sqrt(5.0)));
    CHECK(one.y[1] == doctest::Approx(1 / std::sqrt(5.0)));
    CHECK_FALSE(one.converged);
    const auto r = power_iteration(p, u0, 1e-10, 1000, SignMode::None);
    CHECK(r.converged);
    CHECK(r.y[0] == doctest::Approx(1));
    CHECK(r.lambda == doctest::Approx(2));
    CHECK(r.method == EigMethod::PI);
}

TEST_CASE("power iteration on the identity stops at once")
{
    const IedProblem<double> p(Matrix::identity(3), true);
    const auto u0 = proj_sphere(Vector{1, 2, 3});
    const auto r = power_iteration(p, u0, 1e-12, 100, SignMode::None);
    CHECK(r.converged);
    CHECK(r.iterations <= 1);
    CHECK(r.lambda == doctest::Approx(1));
    CHECK(norm(r.y - u0) <= 1e-15);
}

TEST_CASE("power iteration errors")
{
    const IedProblem<double> z(Matrix(2, 2), true);
    CHECK_THROWS_AS(power_iteration(z, Vector{1, 0}, 1e-7, 10, SignMode::None), ZeroImageError);
    const IedProblem<double> p(Matrix::identity(2), true);
    CHECK_THROWS_AS(power_iteration(p, Vector{1, 0, 0}, 1e-7, 10, SignMode::None), ShapeError);
    CHECK_THROWS_AS(power_iteration(p, Vector{0, 0}, 1e-7, 10, SignMode::None), DegenerateInputError);
}

TEST_CASE("power iteration on random symmetric non-negative 64x64")
{
    const auto p = sym_nonneg(64, 1);
    const auto r = power_iteration(p, default_start<double>(64, 3), 1e-12, 2000, SignMode::HardCoded);
    CHECK(r.converged);
    CHECK(eigen_distance(p, r.y, r.lambda) <= 1e-6);
    const auto ref = reference_eig(p);
    CHECK(std::abs(r.lambda - ref.lambda) / ref.lambda <= 1e-8);
}

TEST_CASE("simultaneous iteration examples")
{
    const IedProblem<double> d(Matrix::from_rows({{3, 0}, {0, 1}}), true);
    const auto r = simultaneous_iteration(d, 1e-10, 100, SignMode::None);
    CHECK(r.converged);
    CHECK(std::abs(r.y[0]) == doctest::Approx(1));
    CHECK(r.lambda == doctest::Approx(3));
    CHECK(r.method == EigMethod::SI);
    const IedProblem<double> id(Matrix::identity(4), true);
    const auto e = simultaneous_iteration(id, 1e-10, 100, SignMode::None);
    CHECK(e.y[0] == doctest::Approx(1));
    CHECK(e.lambda == doctest::Approx(1));
}

TEST_CASE("simultaneous iteration on random symmetric non-negative 32x32")
{
    const auto p = sym_nonneg(32, 2);
    const auto r = simultaneous_iteration(p, 1e-12, 300, SignMode::HardCoded);
    const auto ref = reference_eig(p);
    CHECK(std::abs(r.lambda - ref.lambda) / ref.lambda <= 1e-6);
    CHECK(eigen_distance(p, r.y, r.lambda) <= 1e-5);
}

TEST_CASE("one-by-one problems are exact")
{
    const IedProblem<double> p(Matrix::from_rows({{2.5}}), true);
    const auto a = power_iteration(p, Vector{1}, 1e-7, 10, SignMode::HardCoded);
    CHECK(a.y[0] == 1.0);
    CHECK(a.lambda == doctest::Approx(2.5));
    const auto b = simultaneous_iteration(p, 1e-7, 10, SignMode::HardCoded);
    CHECK(b.y[0] == 1.0);
    CHECK(b.lambda == doctest::Approx(2.5));
}

TEST_CASE("property: eigen residual and Rayleigh consistency")
{
    for (const std::size_t m : {8u, 32u, 128u, 256u}) {
        for (std::uint64_t s = 0; s < 3; ++s) {
            CAPTURE(m);
            const auto p = sym_nonneg(m, 10 * m + s);
            const auto pi = power_iteration(p, default_start<double>(m, s), 1e-10, 5000,
                                            SignMode::HardCoded);
            REQUIRE(pi.converged);
            CHECK(eigen_distance(p, pi.y, pi.lambda) <= 1e-5);
            CHECK(std::abs(pi.lambda - rayleigh(p, pi.y)) <= 1e-10 * std::abs(pi.lambda));
            CHECK(std::abs(norm(pi.y) - 1.0) <= 1e-6);
            const auto si = simultaneous_iteration(p, 1e-10, 5000, SignMode::HardCoded);
            REQUIRE(si.converged);
            CHECK(eigen_distance(p, si.y, si.lambda) <= 1e-5);
            CHECK(std::abs(si.lambda - rayleigh(p, si.y)) <= 1e-6 * std::abs(si.lambda));
        }
    }
}

TEST_CASE("property: hard-coded sign follows the reference")
{
    for (std::uint64_t s = 0; s < 20; ++s) {
        const auto p = sym_nonneg(10, s);
        Vector r(10);
        for (std::size_t i = 0; i < 10; ++i) {
            r[i] = std::sin(double(i * 7 + s));
        }
        const std::optional<Vector> pos(r);
        const std::optional<Vector> neg(-r);
        for (const bool use_si : {false, true}) {
            const auto e = use_si ? simultaneous_iteration(p, 1e-9, 500, SignMode::HardCoded, pos)
                                  : power_iteration(p, default_start<double>(10, s), 1e-9, 500,
                                                    SignMode::HardCoded, pos);
            if (std::abs(dot(e.y, r)) > kOrthogonalityThreshold * norm(r)) {
                CHECK(dot(e.y, r) >= 0.0);
            }
            const auto f = use_si ? simultaneous_iteration(p, 1e-9, 500, SignMode::HardCoded, neg)
                                  : power_iteration(p, default_start<double>(10, s), 1e-9, 500,
                                                    SignMode::HardCoded, neg);
            CHECK(norm(e.y + f.y) <= 1e-12);
        }
    }
}

TEST_CASE("property: historical sign keeps consecutive iterates aligned")
{
    // The dominant eigenvalue is negative, so raw power iterates flip sign
    // every step and never settle; aligning each iterate with the previous
    // one removes the flip.
    const IedProblem<double> p(Matrix::from_rows({{-3, 0.1}, {0.1, 1}}), true);
    const auto u0 = proj_sphere(Vector{1, 1});
    const auto raw = power_iteration(p, u0, 1e-10, 200, SignMode::None);
    CHECK_FALSE(raw.converged);
    for (std::size_t t = 1; t <= 30; ++t) {
        const auto a = power_iteration(p, u0, 1e-300, t, SignMode::Historical);
        const auto b = power_iteration(p, u0, 1e-300, t + 1, SignMode::Historical);
        CHECK(dot(a.y, b.y) >= 0.0);
    }
    const auto hist = power_iteration(p, u0, 1e-10, 200, SignMode::Historical);
    CHECK(hist.converged);
    CHECK(eigen_distance(p, hist.y, hist.lambda) <= 1e-8);
}

TEST_CASE("property: power iteration is scale equivariant")
{
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto p = sym_nonneg(12, s);
        const double c = 0.25 + double(s);
        Matrix ca = p.A;
        for (auto& v : ca.span()) {
            v *= c;
        }
        const IedProblem<double> q(ca, true);
        const auto u0 = default_start<double>(12, s);
        const auto a = power_iteration(p, u0, 1e-12, 2000, SignMode::HardCoded);
        const auto b = power_iteration(q, u0, 1e-12, 2000, SignMode::HardCoded);
        CHECK(norm(a.y - b.y) <= 1e-9);
        CHECK(b.lambda == doctest::Approx(c * a.lambda).epsilon(1e-10));
    }
}

TEST_CASE("float solvers reach single-precision accuracy")
{
    const auto p = sym_nonneg(64, 5);
    const IedProblem<float> pf(cast<float>(p.A), true);
    const auto r = power_iteration(pf, default_start<float>(64, 1), 1e-6f, 300, SignMode::HardCoded);
    const IedProblem<double> pe(cast<double>(pf.A), true);
    CHECK(eigen_distance(pe, cast<double>(r.y), double(r.lambda)) <= 1e-2);
    const auto si = simultaneous_iteration(pf, 1e-6f, 300, SignMode::HardCoded);
    CHECK(eigen_distance(pe, cast<double>(si.y), double(si.lambda)) <= 1e-2);
}
