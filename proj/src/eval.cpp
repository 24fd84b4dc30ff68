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

#include "pmaf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <string>

namespace pmaf
{

std::string_view to_string(Distribution d)
{
    switch (d) {
        case Distribution::Gaussian01:
            return "gaussian";
        case Distribution::Uniform01:
            return "uniform";
        case Distribution::VonMises01:
            return "vonmises";
        case Distribution::Choice10:
            return "choice10";
    }
    return "?";
}

Distribution parse_distribution(std::string_view text)
{
    for (auto d : {Distribution::Gaussian01, Distribution::Uniform01, Distribution::VonMises01,
                   Distribution::Choice10}) {
        if (text == to_string(d)) {
            return d;
        }
    }
    throw InvalidConfigError("unknown distribution '" + std::string(text) + "'");
}

void SampleSpec::validate() const
{
    if (m == 0 || n == 0) {
        throw InvalidConfigError("SampleSpec: dimensions must be positive");
    }
    if (symmetric && m != n) {
        throw InvalidConfigError("SampleSpec: symmetric sampling needs m == n");
    }
}

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t index) noexcept
{
    std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double draw_von_mises(std::mt19937_64& gen, double kappa)
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    if (kappa < 1e-8) {
        return std::numbers::pi * (2.0 * unif(gen) - 1.0);
    }
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    for (;;) {
        const double u1 = unif(gen);
        const double u2 = unif(gen);
        const double u3 = unif(gen);
        const double z = std::cos(std::numbers::pi * u1);
        const double f = (1.0 + r * z) / (r + z);
        const double c = kappa * (r - f);
        if (c * (2.0 - c) - u2 > 0.0 || std::log(c / u2) + 1.0 - c >= 0.0) {
            const double theta = std::acos(std::clamp(f, -1.0, 1.0));
            return u3 > 0.5 ? theta : -theta;
        }
    }
}

namespace
{
double draw(Distribution d, std::mt19937_64& gen)
{
    switch (d) {
        case Distribution::Gaussian01:
            return std::normal_distribution<double>(0.0, 1.0)(gen);
        case Distribution::Uniform01:
            return std::uniform_real_distribution<double>(0.0, 1.0)(gen);
        case Distribution::VonMises01:
            return draw_von_mises(gen, 1.0);
        case Distribution::Choice10:
            return static_cast<double>(std::uniform_int_distribution<int>(0, 9)(gen));
    }
    return 0.0;
}

template <typename T>
DenseMatrix<T> draw_matrix(const SampleSpec& spec, std::size_t rows, std::size_t cols,
                           std::mt19937_64& gen)
{
    DenseMatrix<T> a(rows, cols);
    for (auto& v : a.span()) {
        const double x = draw(spec.dist, gen);
        v = static_cast<T>(spec.absolute ? std::abs(x) : x);
    }
    return a;
}
}  // namespace

template <typename T>
DenseMatrix<T> sample_matrix(const SampleSpec& spec)
{
    spec.validate();
    std::mt19937_64 gen(spec.seed);
    auto a = draw_matrix<T>(spec, spec.m, spec.n, gen);
    if (spec.symmetric) {
        for (std::size_t i = 0; i < spec.m; ++i) {
            for (std::size_t j = i; j < spec.n; ++j) {
                const T s = a(i, j) + a(j, i);
                a(i, j) = s;
                a(j, i) = s;
            }
        }
    }
    return a;
}

template <typename T>
LessProblem<T> sample_less(const SampleSpec& spec)
{
    SampleSpec s = spec;
    s.symmetric = false;
    s.validate();
    std::mt19937_64 gen(s.seed);
    auto a = draw_matrix<T>(s, s.m, s.n, gen);
    auto bm = draw_matrix<T>(s, s.m, 1, gen);
    DenseVector<T> b(s.m);
    for (std::size_t i = 0; i < s.m; ++i) {
        b[i] = bm(i, 0);
    }
    return LessProblem<T>(std::move(a), std::move(b));
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

template <typename T>
T fpd_less(const LessProblem<T>& p, const DenseVector<T>& y)
{
    return norm(matvec(p.A, y) - p.b);
}

template <typename T>
T fpd_ied(const IedProblem<T>& p, const DenseVector<T>& y)
{
    const auto ay = matvec(p.A, y);
    const T n = norm(ay);
    if (!(n > T(0))) {
        throw ZeroImageError("fpd_ied: A y = 0");
    }
    return norm(y - scaled(ay, T(1) / n));
}

template <typename T>
T eigen_distance(const IedProblem<T>& p, const DenseVector<T>& y, T lambda)
{
    return norm(axpy(matvec(p.A, y), -lambda, y));
}

MreReport mre_report(std::span<const double> estimates, std::span<const double> references)
{
    if (estimates.size() != references.size() || estimates.empty()) {
        throw ShapeError("mre: need equal, non-zero lengths");
    }
    MreReport rep;
    double acc = 0.0;
    for (std::size_t k = 0; k < estimates.size(); ++k) {
        double ref = references[k];
        if (ref < kMreFloor) {
            ref = kMreFloor;
            ++rep.floored;
        }
        acc += (estimates[k] - ref) / ref;
    }
    rep.percent = 100.0 * acc / static_cast<double>(estimates.size());
    return rep;
}

double mre(std::span<const double> estimates, std::span<const double> references)
{
    return mre_report(estimates, references).percent;
}

// ---------------------------------------------------------------------------
// Reference eigensolvers
// ---------------------------------------------------------------------------

template <typename T>
SymmetricEigen<T> jacobi_eigen(const DenseMatrix<T>& a_in, double off_tol)
{
    if (!a_in.is_square()) {
        throw ShapeError("jacobi_eigen: matrix must be square");
    }
    if (off_tol <= 0.0) {
        off_tol = std::is_same_v<T, float> ? 1e-6 : 1e-14;
    }
    const std::size_t m = a_in.rows();
    DenseMatrix<T> a = a_in;
    DenseMatrix<T> v = DenseMatrix<T>::identity(m);
    const double scale = static_cast<double>(frobenius_norm(a));

    auto off_norm = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t j = 0; j < m; ++j) {
                if (i != j) {
                    s += static_cast<double>(a(i, j)) * static_cast<double>(a(i, j));
                }
            }
        }
        return std::sqrt(s);
    };

    SymmetricEigen<T> out;
    constexpr std::size_t kMaxSweeps = 100;
    while (out.sweeps < kMaxSweeps && off_norm() > off_tol * scale) {
        ++out.sweeps;
        for (std::size_t p = 0; p + 1 < m; ++p) {
            for (std::size_t q = p + 1; q < m; ++q) {
                const T apq = a(p, q);
                if (apq == T(0)) {
                    continue;
                }
                const T theta = (a(q, q) - a(p, p)) / (T(2) * apq);
                const T t = (theta >= T(0) ? T(1) : T(-1)) /
                            (std::abs(theta) + std::sqrt(theta * theta + T(1)));
                const T c = T(1) / std::sqrt(t * t + T(1));
                const T s = t * c;
                for (std::size_t k = 0; k < m; ++k) {
                    const T akp = a(k, p);
                    const T akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < m; ++k) {
                    const T apk = a(p, k);
                    const T aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < m; ++k) {
                    const T vkp = v(k, p);
                    const T vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t j) { return a(i, i) > a(j, j); });
    out.values = DenseVector<T>(m);
    out.vectors = DenseMatrix<T>(m, m);
    for (std::size_t j = 0; j < m; ++j) {
        out.values[j] = a(order[j], order[j]);
        for (std::size_t i = 0; i < m; ++i) {
            out.vectors(i, j) = v(i, order[j]);
        }
    }
    return out;
}

ReferenceEig<double> reference_eig(const IedProblem<double>& p)
{
    const auto& a = p.A;
    const std::size_t m = a.rows();
    double asym = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            const double d = a(i, j) - a(j, i);
            asym += d * d;
        }
    }
    const double fro = frobenius_norm(a);
    ReferenceEig<double> out;
    if (p.symmetric_hint || std::sqrt(asym) <= 1e-12 * fro) {
        const auto eig = jacobi_eigen(a, 1e-14);
        out.lambda = eig.values[0];
        out.y = Vector(m);
        for (std::size_t i = 0; i < m; ++i) {
            out.y[i] = eig.vectors(i, 0);
        }
        out.y = proj_sphere(out.y);
        if (eigen_distance(p, out.y, out.lambda) > 1e-10 * std::max(fro, 1.0)) {
            throw OracleError("reference_eig: Jacobi residual above bound");
        }
        return out;
    }
    auto res = power_iteration(p, proj_sphere(Vector(m, 1.0)), 1e-13, 100000, SignMode::None);
    if (!res.converged) {
        throw OracleError("reference_eig: no real dominant eigenpair (power iteration did not settle)");
    }
    out.lambda = res.lambda;
    out.y = std::move(res.y);
    return out;
}

// ---------------------------------------------------------------------------
// Reference LESS solvers
// ---------------------------------------------------------------------------

namespace
{
double less_f(const LessProblem<double>& p, const Vector& u)
{
    const auto r = matvec(p.A, u) - p.b;
    return 0.5 * dot(r, r);
}

Vector on_circle(double theta)
{
    return Vector{std::cos(theta), std::sin(theta)};
}

ReferenceLess finish(const LessProblem<double>& p, Vector y)
{
    ReferenceLess out;
    out.fpd = fpd_less(p, y);
    out.y = std::move(y);
    return out;
}

// Newton steps on (A^T A + mu I) u = A^T b, |u| = 1.
Vector kkt_polish(const LessProblem<double>& p, const Vector& u_start, double mu_start)
{
    const std::size_t n = p.n();
    const auto g = gram(p.A);
    const auto atb = matvec_t(p.A, p.b);
    Vector u = u_start;
    double mu = mu_start;
    for (int it = 0; it < 4; ++it) {
        Matrix j(n + 1, n + 1);
        Vector rhs(n + 1);
        const auto gu = matvec(g, u);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t k = 0; k < n; ++k) {
                j(i, k) = g(i, k);
            }
            j(i, i) += mu;
            j(i, n) = u[i];
            j(n, i) = u[i];
            rhs[i] = -(gu[i] + mu * u[i] - atb[i]);
        }
        rhs[n] = -0.5 * (dot(u, u) - 1.0);
        Vector step;
        try {
            step = solve(j, rhs);
        }
        catch (const SingularMatrixError&) {
            break;
        }
        for (std::size_t i = 0; i < n; ++i) {
            u[i] += step[i];
        }
        mu += step[n];
    }
    u = proj_sphere(u);
    // Near the optimum objective values tie to rounding, so the polished point
    // is judged by its tangential gradient, with a guard against drifting to a
    // different stationary point.
    auto kkt = [&](const Vector& x) {
        return norm(proj_tangent(x, matvec(g, x) - atb));
    };
    const double f0 = less_f(p, u_start);
    const bool no_worse = less_f(p, u) <= f0 + 1e-12 * (1.0 + std::abs(f0));
    return no_worse && kkt(u) <= kkt(u_start) ? u : u_start;
}
}  // namespace

ReferenceLess reference_less_angle_grid(const LessProblem<double>& p, std::size_t grid)
{
    if (p.n() != 2) {
        throw ShapeError("reference_less_angle_grid: needs n = 2");
    }
    if (grid < 8) {
        throw InvalidConfigError("reference_less_angle_grid: grid too coarse");
    }
    const double two_pi = 2.0 * std::numbers::pi;
    const double h = two_pi / static_cast<double>(grid);
    auto f = [&](double t) { return less_f(p, on_circle(t)); };

    // Golden section inside the bracket around every discrete local minimum;
    // keeps the global winner.
    double best_t = 0.0;
    double best_f = std::numeric_limits<double>::infinity();
    std::vector<double> vals(grid);
    for (std::size_t k = 0; k < grid; ++k) {
        vals[k] = f(h * static_cast<double>(k));
    }
    const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
    for (std::size_t k = 0; k < grid; ++k) {
        const double prev = vals[(k + grid - 1) % grid];
        const double next = vals[(k + 1) % grid];
        if (vals[k] > prev || vals[k] > next) {
            continue;
        }
        double lo = h * (static_cast<double>(k) - 1.0);
        double hi = h * (static_cast<double>(k) + 1.0);
        double x1 = hi - invphi * (hi - lo);
        double x2 = lo + invphi * (hi - lo);
        double f1 = f(x1);
        double f2 = f(x2);
        while (hi - lo > 1e-12) {
            if (f1 <= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - invphi * (hi - lo);
                f1 = f(x1);
            }
            else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + invphi * (hi - lo);
                f2 = f(x2);
            }
        }
        const double t = 0.5 * (lo + hi);
        const double ft = f(t);
        if (ft < best_f) {
            best_f = ft;
            best_t = t;
        }
    }
    // The angle search stalls near sqrt(eps) because f is flat at the minimum;
    // a few Newton steps on the KKT system recover full precision.
    const auto u = on_circle(best_t);
    const double mu = dot(u, matvec_t(p.A, p.b) - matvec(gram(p.A), u));
    return finish(p, kkt_polish(p, u, mu));
}

ReferenceLess reference_less_secular(const LessProblem<double>& p)
{
    const std::size_t n = p.n();
    const auto eig = jacobi_eigen(gram(p.A), 1e-15);
    const auto atb = matvec_t(p.A, p.b);
    // Coordinates of A^T b in the eigenbasis; eigenvalues sorted descending.
    Vector c(n);
    for (std::size_t j = 0; j < n; ++j) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            s += eig.vectors(i, j) * atb[i];
        }
        c[j] = s;
    }
    const double lmin = eig.values[n - 1];
    auto phi = [&](double mu) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double d = eig.values[j] + mu;
            s += c[j] * c[j] / (d * d);
        }
        return s;
    };

    // phi is decreasing on (-lmin, inf) and phi(-lmin + |c|) <= 1.
    double lo = -lmin;
    double hi = -lmin + std::max(norm(c), 1e-300);
    for (int it = 0; it < 400 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid <= lo || mid >= hi) {
            break;
        }
        if (phi(mid) > 1.0) {
            lo = mid;
        }
        else {
            hi = mid;
        }
    }
    const double mu = hi;

    Vector coef(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double d = eig.values[j] + mu;
        coef[j] = d > 0.0 ? c[j] / d : 0.0;
    }
    // Hard case: A^T b has (almost) no weight on the bottom eigenvector and
    // the secular root sits on the pole; fill the norm deficit along it.
    const double s2 = dot(coef, coef);
    if (s2 < 1.0) {
        coef[n - 1] += std::sqrt(1.0 - s2) * (c[n - 1] < 0.0 ? -1.0 : 1.0);
    }
    Vector u(n);
    for (std::size_t i = 0; i < n; ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            s += eig.vectors(i, j) * coef[j];
        }
        u[i] = s;
    }
    u = proj_sphere(u);
    return finish(p, kkt_polish(p, u, mu));
}

ReferenceLess reference_less(const LessProblem<double>& p)
{
    if (p.n() == 2) {
        return reference_less_angle_grid(p);
    }
    return reference_less_secular(p);
}

Vector ied_symmetric_solution(const Matrix& a, const Vector& r)
{
    const std::size_t m = a.rows();
    Matrix s(m, m);
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) {
            s(i, j) = 0.5 * (a(i, j) + a(j, i));
        }
    }
    const auto eig = jacobi_eigen(s, 1e-15);
    Vector y(m);
    for (std::size_t i = 0; i < m; ++i) {
        y[i] = eig.vectors(i, 0);
    }
    y = proj_sphere(y);
    return sign_consistency_V(y, r) < 0.0 ? -y : y;
}

Vector ied_fixed_point_solution(const Matrix& a, const Vector& r)
{
    IedProblem<double> p(a);
    auto res = power_iteration(p, r, 1e-15, 200000, SignMode::HardCoded, std::optional<Vector>(r));
    return res.y;
}

// ---------------------------------------------------------------------------
// Finite differences and brute-force second derivatives
// ---------------------------------------------------------------------------

Matrix finite_diff_grad(const std::function<double(const Matrix&)>& loss, const Matrix& x0,
                        double step)
{
    if (!(step > 0.0)) {
        throw InvalidConfigError("finite_diff_grad: step must be positive");
    }
    Matrix g(x0.rows(), x0.cols());
    Matrix x = x0;
    for (std::size_t i = 0; i < x0.rows(); ++i) {
        for (std::size_t j = 0; j < x0.cols(); ++j) {
            const double orig = x(i, j);
            x(i, j) = orig + step;
            const double fp = loss(x);
            x(i, j) = orig - step;
            const double fm = loss(x);
            x(i, j) = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                throw OracleError("finite_diff_grad: non-finite loss at entry (" +
                                  std::to_string(i) + ", " + std::to_string(j) + ")");
            }
            g(i, j) = (fp - fm) / (2.0 * step);
        }
    }
    return g;
}

Vector finite_diff_grad(const std::function<double(const Vector&)>& loss, const Vector& x0,
                        double step)
{
    if (!(step > 0.0)) {
        throw InvalidConfigError("finite_diff_grad: step must be positive");
    }
    Vector g(x0.size());
    Vector x = x0;
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const double orig = x[i];
        x[i] = orig + step;
        const double fp = loss(x);
        x[i] = orig - step;
        const double fm = loss(x);
        x[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm)) {
            throw OracleError("finite_diff_grad: non-finite loss at entry " + std::to_string(i));
        }
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

DenseTensor3<double> brute_force_B_less(const LessProblem<double>& p, const Vector& y)
{
    const std::size_t m = p.m();
    const std::size_t n = p.n();
    if (m > kBruteForceMaxDim || n > kBruteForceMaxDim) {
        throw OracleError("brute_force_B_less: refusing sizes above the brute-force cap");
    }
    if (y.size() != n) {
        throw ShapeError("brute_force_B_less: y length must equal n");
    }
    auto grad = [&](const Matrix& a) { return matvec_t(a, matvec(a, y) - p.b); };
    DenseTensor3<double> t(n, m, n);
    Matrix a = p.A;
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t q = 0; q < n; ++q) {
            const double orig = a(r, q);
            a(r, q) = orig + 1.0;
            const auto gp = grad(a);
            a(r, q) = orig - 1.0;
            const auto gm = grad(a);
            a(r, q) = orig;
            for (std::size_t i = 0; i < n; ++i) {
                t(i, r, q) = 0.5 * (gp[i] - gm[i]);
            }
        }
    }
    return t;
}

DenseTensor3<double> brute_force_B_ied(const IedProblem<double>& p, const Vector& y)
{
    const std::size_t m = p.m();
    if (m > kBruteForceMaxDim) {
        throw OracleError("brute_force_B_ied: refusing sizes above the brute-force cap");
    }
    if (y.size() != m) {
        throw ShapeError("brute_force_B_ied: y length must equal m");
    }
    auto grad = [&](const Matrix& a) { return -(matvec(a, y) + matvec_t(a, y)); };
    DenseTensor3<double> t(m, m, m);
    Matrix a = p.A;
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t q = 0; q < m; ++q) {
            const double orig = a(r, q);
            a(r, q) = orig + 1.0;
            const auto gp = grad(a);
            a(r, q) = orig - 1.0;
            const auto gm = grad(a);
            a(r, q) = orig;
            for (std::size_t i = 0; i < m; ++i) {
                t(i, r, q) = 0.5 * (gp[i] - gm[i]);
            }
        }
    }
    return t;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size()) {
        throw ShapeError("max_abs_diff: length mismatch");
    }
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        m = std::max(m, std::abs(a[i] - b[i]));
    }
    return m;
}

double max_rel_diff(std::span<const double> a, std::span<const double> b)
{
    const double scale = std::max(max_abs(b), 1e-300);
    return max_abs_diff(a, b) / scale;
}

#define PMAF_INSTANTIATE(T)                                                               \
    template DenseMatrix<T> sample_matrix<T>(const SampleSpec&);                          \
    template LessProblem<T> sample_less<T>(const SampleSpec&);                            \
    template T fpd_less<T>(const LessProblem<T>&, const DenseVector<T>&);                 \
    template T fpd_ied<T>(const IedProblem<T>&, const DenseVector<T>&);                   \
    template T eigen_distance<T>(const IedProblem<T>&, const DenseVector<T>&, T);         \
    template SymmetricEigen<T> jacobi_eigen<T>(const DenseMatrix<T>&, double);

PMAF_INSTANTIATE(float)
PMAF_INSTANTIATE(double)

#undef PMAF_INSTANTIATE

}  // namespace pmaf
