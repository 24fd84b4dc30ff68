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

#include "pmaf/less_solver.hpp"

#include <cmath>
#include <limits>

namespace pmaf
{

template <typename T>
LessProblem<T>::LessProblem(DenseMatrix<T> a, DenseVector<T> rhs) : A(std::move(a)), b(std::move(rhs))
{
    if (A.rows() == 0 || A.cols() == 0) {
        throw ShapeError("LessProblem: A must be at least 1 x 1");
    }
    if (b.size() != A.rows()) {
        throw ShapeError("LessProblem: b length must equal the rows of A");
    }
    detail::require_finite<T>(A.span(), "LessProblem::A");
    detail::require_finite<T>(b.span(), "LessProblem::b");
}

void LessConfig::validate() const
{
    if (bls != BlsMode::Off && use_twd) {
        throw InvalidConfigError("LessConfig: backtracking line search and tangent weight decay are mutually exclusive");
    }
    if (!(alpha > 0.0 && alpha <= 0.5)) {
        throw InvalidConfigError("LessConfig: alpha must lie in (0, 0.5]");
    }
    if (!(beta_bls > 0.0 && beta_bls < 1.0) || !(beta_twd > 0.0 && beta_twd < 1.0)) {
        throw InvalidConfigError("LessConfig: decay rates must lie in (0, 1)");
    }
    if (!(tol > 0.0)) {
        throw InvalidConfigError("LessConfig: tol must be positive");
    }
}

std::string LessConfig::label() const
{
    std::string s = "PGD";
    if (use_rm) {
        s += "+RM";
    }
    if (bls == BlsMode::EtaOne) {
        s += "+BLSOne";
    }
    else if (bls == BlsMode::EtaDerived) {
        s += "+BLSDerived";
    }
    if (use_twd) {
        s += "+TWD";
    }
    if (use_dw) {
        s += "+DW";
    }
    return s;
}

std::vector<LessConfig> table_method_configs()
{
    auto make = [](bool rm, BlsMode bls, bool twd, bool dw) {
        LessConfig c;
        c.use_rm = rm;
        c.bls = bls;
        c.use_twd = twd;
        c.use_dw = dw;
        return c;
    };
    return {
        make(false, BlsMode::Off, false, false),
        make(false, BlsMode::Off, false, true),
        make(true, BlsMode::Off, false, false),
        make(true, BlsMode::EtaOne, false, false),
        make(true, BlsMode::EtaOne, false, true),
        make(true, BlsMode::EtaDerived, false, false),
        make(true, BlsMode::EtaDerived, false, true),
        make(true, BlsMode::Off, true, false),
        make(true, BlsMode::Off, true, true),
    };
}

namespace
{
template <typename T>
DenseVector<T> residual(const LessProblem<T>& p, const DenseVector<T>& u)
{
    if (u.size() != p.n()) {
        throw ShapeError("LESS: u length must equal the columns of A");
    }
    return matvec(p.A, u) - p.b;
}

template <typename T>
bool all_finite(const DenseVector<T>& v)
{
    for (const T x : v) {
        if (!std::isfinite(x)) {
            return false;
        }
    }
    return true;
}
}  // namespace

template <typename T>
T less_objective(const LessProblem<T>& p, const DenseVector<T>& u)
{
    const auto r = residual(p, u);
    return T(0.5) * dot(r, r);
}

template <typename T>
DenseVector<T> less_gradient(const LessProblem<T>& p, const DenseVector<T>& u)
{
    return matvec_t(p.A, residual(p, u));
}

template <typename T>
LessInit<T> init_unconstrained(const LessProblem<T>& p)
{
    const auto g = gram(p.A);
    const auto rhs = matvec_t(p.A, p.b);
    LessInit<T> init;
    try {
        init.u0_raw = solve(g, rhs);
    }
    catch (const SingularMatrixError&) {
        // Rank-deficient A^T A (e.g. m < n): a small ridge gives the
        // minimum-norm least-squares solution to working accuracy.
        T tr = T(0);
        for (std::size_t i = 0; i < g.rows(); ++i) {
            tr += g(i, i);
        }
        const T scale = tr > T(0) ? tr / static_cast<T>(g.rows()) : T(1);
        init.u0_raw = solve(g, rhs, std::sqrt(std::numeric_limits<T>::epsilon()) * scale);
    }
    const T raw_norm = norm(init.u0_raw);
    if (!(raw_norm > T(0))) {
        init.fallback = true;
        init.u0 = DenseVector<T>(p.n());
        init.u0[0] = T(1);
        init.inner_outer = InnerOuter::Inner;
        return init;
    }
    init.u0 = proj_sphere(init.u0_raw);
    init.inner_outer = raw_norm >= T(1) ? InnerOuter::Outer : InnerOuter::Inner;
    return init;
}

template <typename T>
T pgd_step_eta(const LessProblem<T>& p, const DenseVector<T>& u)
{
    const auto g = less_gradient(p, u);
    const T num = dot(g, g);
    if (num == T(0)) {
        return T(0);
    }
    const auto ag = matvec(p.A, g);
    const T den = dot(ag, ag);
    return den > T(0) ? num / den : T(0);
}

template <typename T>
T rm_step_eta(const LessProblem<T>& p, const DenseVector<T>& u)
{
    const auto g = less_gradient(p, u);
    const auto pg = proj_tangent(u, g);
    const T num = dot(g, pg);
    const auto apg = matvec(p.A, pg);
    const T den = dot(apg, apg);
    if (!(den > T(0))) {
        return T(0);
    }
    return num / den;
}

template <typename T>
T direction_weight(const LessProblem<T>& p, const DenseVector<T>& u, const DenseVector<T>& u0_raw)
{
    const auto g = less_gradient(p, u);
    if (norm(g) == T(0)) {
        return T(0);
    }
    const bool outer = norm(u0_raw) >= T(1);
    const auto d = outer ? -g : g;
    return T(1) - cosine_sim(d, u0_raw);
}

template <typename T>
bool armijo_accepts(const LessProblem<T>& p, const DenseVector<T>& u, const DenseVector<T>& du,
                    T eta, T alpha)
{
    if (du.size() != u.size()) {
        throw ShapeError("armijo_accepts: du length must equal u length");
    }
    const T lhs = less_objective(p, axpy(u, eta, du));
    const T rhs = less_objective(p, u) + alpha * eta * dot(less_gradient(p, u), du);
    return lhs <= rhs;
}

template <typename T>
bool twd_should_decay(const DenseVector<T>& g_t, const DenseVector<T>& g_t1)
{
    if (norm(g_t) == T(0) || norm(g_t1) == T(0)) {
        return false;
    }
    return cosine_sim(g_t, g_t1) < T(0);
}

template <typename T>
LessResult<T> solve_less(const LessProblem<T>& p, const LessConfig& cfg)
{
    cfg.validate();
    const T alpha = static_cast<T>(cfg.alpha);
    const T beta_bls = static_cast<T>(cfg.beta_bls);
    const T beta_twd = static_cast<T>(cfg.beta_twd);
    const T tol = static_cast<T>(cfg.tol);
    const T eps = std::numeric_limits<T>::epsilon();

    const auto init = init_unconstrained(p);

    LessResult<T> res;
    res.inner_outer = init.inner_outer;
    res.init_fallback = init.fallback;

    DenseVector<T> u = init.u0;
    T f = less_objective(p, u);
    {
        LessTraceEntry<T> e;
        e.u = u;
        e.objective = f;
        e.grad_norm = norm(less_gradient(p, u));
        res.trace.push_back(std::move(e));
    }

    for (std::size_t it = 0; it < cfg.max_iters; ++it) {
        const auto g = less_gradient(p, u);
        const T gnorm = norm(g);
        DenseVector<T> d = -g;
        if (cfg.use_rm) {
            d = proj_tangent(u, d);
        }
        if (norm(d) <= eps * std::max(gnorm, T(1))) {
            res.converged = true;
            break;
        }

        T w = T(1);
        if (cfg.use_dw && !init.fallback) {
            w = direction_weight(p, u, init.u0_raw);
            if (w == T(0)) {
                res.converged = true;
                break;
            }
        }

        T eta;
        if (cfg.bls == BlsMode::EtaOne) {
            eta = T(1);
        }
        else {
            eta = cfg.use_rm ? rm_step_eta(p, u) : pgd_step_eta(p, u);
            if (!(eta > T(0))) {
                res.converged = true;
                break;
            }
            // The closed-form tangent step ignores the sphere's curvature and
            // blows up near the optimum; decay then starts from at most 1.
            if (cfg.use_twd) {
                eta = std::min(eta, T(1));
            }
        }

        LessTraceEntry<T> e;
        if (cfg.bls != BlsMode::Off) {
            const T slope = dot(g, d);
            std::size_t k = 0;
            for (; k < cfg.max_backtracks; ++k) {
                if (armijo_accepts(p, u, d, eta, alpha)) {
                    break;
                }
                eta *= beta_bls;
            }
            e.backtrack_capped = k == cfg.max_backtracks;
            e.trial_objective = less_objective(p, axpy(u, eta, d));
            e.armijo_rhs = f + alpha * eta * slope;
        }
        // The direction weight rescales whichever step the active scheme chose.
        eta *= w;

        if (cfg.use_twd) {
            const auto g_t = proj_tangent(u, -g);
            std::size_t k = 0;
            for (; k < cfg.max_backtracks; ++k) {
                const auto trial = axpy(u, eta, d);
                const auto g_t1 = proj_tangent(trial, -less_gradient(p, trial));
                if (!twd_should_decay(g_t, g_t1)) {
                    break;
                }
                eta *= beta_twd;
            }
            e.backtrack_capped = k == cfg.max_backtracks;
        }

        const auto trial = axpy(u, eta, d);
        if (!all_finite(trial) || norm(trial) == T(0)) {
            throw LessNumericFailure<T>(it + 1, std::move(res.trace));
        }
        if (cfg.bls == BlsMode::Off) {
            e.trial_objective = less_objective(p, trial);
        }
        DenseVector<T> u_next = proj_sphere(trial);
        const T f_next = less_objective(p, u_next);
        if (!std::isfinite(f_next)) {
            throw LessNumericFailure<T>(it + 1, std::move(res.trace));
        }

        e.u = u_next;
        e.objective = f_next;
        e.eta = eta;
        e.grad_norm = norm(less_gradient(p, u_next));
        res.trace.push_back(std::move(e));
        ++res.iterations;

        const T decrease = f - f_next;
        u = std::move(u_next);
        f = f_next;
        if (std::abs(decrease) <= tol) {
            res.converged = true;
            break;
        }
    }

    res.y = u;
    res.objective = f;
    return res;
}

#define PMAF_INSTANTIATE(T)                                                                   \
    template struct LessProblem<T>;                                                           \
    template T less_objective<T>(const LessProblem<T>&, const DenseVector<T>&);               \
    template DenseVector<T> less_gradient<T>(const LessProblem<T>&, const DenseVector<T>&);   \
    template LessInit<T> init_unconstrained<T>(const LessProblem<T>&);                        \
    template T pgd_step_eta<T>(const LessProblem<T>&, const DenseVector<T>&);                 \
    template T rm_step_eta<T>(const LessProblem<T>&, const DenseVector<T>&);                  \
    template T direction_weight<T>(const LessProblem<T>&, const DenseVector<T>&,              \
                                   const DenseVector<T>&);                                    \
    template bool armijo_accepts<T>(const LessProblem<T>&, const DenseVector<T>&,             \
                                    const DenseVector<T>&, T, T);                             \
    template bool twd_should_decay<T>(const DenseVector<T>&, const DenseVector<T>&);          \
    template LessResult<T> solve_less<T>(const LessProblem<T>&, const LessConfig&);

PMAF_INSTANTIATE(float)
PMAF_INSTANTIATE(double)

#undef PMAF_INSTANTIATE

}  // namespace pmaf
