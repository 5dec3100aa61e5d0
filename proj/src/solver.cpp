#include "bdsde/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/parallel.hpp"

namespace bdsde {

BackwardSolution::BackwardSolution(std::size_t n_paths, std::size_t n_steps, std::size_t dim_z)
    : n_paths_(n_paths), n_steps_(n_steps), dim_z_(dim_z),
      y_(n_paths * (n_steps + 1), 0.0), z_(n_paths * n_steps * dim_z, 0.0) {
    y_coeff.resize(n_steps);
    z_coeff.resize(n_steps);
    y_residual_rms.assign(n_steps, 0.0);
    z_residual_rms.assign(n_steps, 0.0);
    cond_estimate.assign(n_steps, 0.0);
    constant_step.assign(n_steps, 0);
}

double BackwardSolution::pooled_residual() const {
    if (y_residual_rms.empty()) return 0.0;
    double ss = 0.0;
    for (double r : y_residual_rms) ss += r * r;
    return std::sqrt(ss / static_cast<double>(y_residual_rms.size()));
}

namespace {

double solve_power_law(double q, double c, double dt, double tol) {
    if (c == 0.0) return 0.0;
    const double target = std::abs(c);
    // root of u + dt u^{1+q} = |c| on (0, |c|]; the map is convex, so Newton
    // started at the right end decreases monotonically onto the root
    double u = target;
    for (int it = 0; it < 200; ++it) {
        const double uq = std::pow(u, q);
        const double fval = u + dt * u * uq - target;
        const double fder = 1.0 + dt * (1.0 + q) * uq;
        const double step = fval / fder;
        u -= step;
        if (u < 0.0) u = 0.0;
        if (std::abs(step) <= tol) break;
    }
    return c > 0 ? u : -u;
}

double solve_general(const GeneratorSpec& f, double t, const Vec& x, const Vec& z, double c,
                     double dt, double tol) {
    auto F = [&](double y) { return y - dt * f.f(t, x, y, z) - c; };
    // expanding bracket around c; F is increasing for monotone f with dt mu < 1
    double r = 1.0 + dt * std::abs(f.f(t, x, c, z));
    double a = c - r, b = c + r;
    int guard = 0;
    while (F(a) > 0.0) {
        a -= r;
        r *= 2.0;
        if (++guard > 60) throw numerical_error("implicit step: cannot bracket root (lower)");
    }
    guard = 0;
    r = 1.0 + dt * std::abs(f.f(t, x, c, z));
    while (F(b) < 0.0) {
        b += r;
        r *= 2.0;
        if (++guard > 60) throw numerical_error("implicit step: cannot bracket root (upper)");
    }
    // safeguarded Newton with finite-difference slope
    double y = 0.5 * (a + b);
    for (int it = 0; it < 200; ++it) {
        const double fy = F(y);
        if (std::abs(fy) <= 4.0 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(y)))
            break; // already at floating-point resolution
        if (fy > 0) b = y; else a = y;
        const double h = std::max(1e-7, 1e-7 * std::abs(y));
        const double der = (F(y + h) - F(y - h)) / (2.0 * h);
        double ynext = der != 0.0 ? y - fy / der : 0.5 * (a + b);
        // non-strict bounds: an underflowing Newton step at a bracket
        // endpoint is convergence, not an escape to bisection
        if (!(ynext >= a && ynext <= b)) ynext = 0.5 * (a + b);
        if (std::abs(ynext - y) <= tol && std::abs(fy) <= tol * (1.0 + std::abs(y))) {
            y = ynext;
            break;
        }
        y = ynext;
        if (b - a <= tol) break;
    }
    return y;
}

// no spread in X at this node: conditioning is on a point mass and the
// regression degenerates to the mean (always true at the start node)
bool degenerate_node(const ForwardPaths& fwd, std::size_t node) {
    for (std::size_t c = 0; c < fwd.d(); ++c) {
        double lo = fwd.x(0, node, c), hi = lo;
        for (std::size_t p = 1; p < fwd.n_paths(); ++p) {
            lo = std::min(lo, fwd.x(p, node, c));
            hi = std::max(hi, fwd.x(p, node, c));
        }
        if (hi - lo > 1e-13 * (1.0 + std::abs(hi) + std::abs(lo))) return false;
    }
    return true;
}

RegressionBasis constant_fallback_basis() {
    RegressionBasis b;
    b.family = RegressionBasis::Family::polynomial;
    b.degree = 0;
    b.ridge_lambda = 0.0;
    b.domain_from_data = false;
    b.domain_lo = -1.0;
    b.domain_hi = 1.0;
    return b;
}

void check_coupling(const ForwardPaths& fwd, const TimeGrid& grid,
                    const DualBrownianPaths& noise) {
    if (fwd.n_paths() != noise.n_paths())
        throw shape_error("solver: forward paths and noise disagree on n_paths");
    if (fwd.n_nodes() != grid.n_steps() + 1 || noise.n_nodes() != grid.n_steps() + 1)
        throw shape_error("solver: forward paths / noise / grid node counts disagree");
}

} // namespace

double solve_implicit_step(const GeneratorSpec& f, double t, const Vec& x, const Vec& z,
                           double c, double dt, double tol) {
    if (!f.f) return c;
    if (f.kind == GeneratorSpec::Kind::power_law) return solve_power_law(f.q, c, dt, tol);
    return solve_general(f, t, x, z, c, dt, tol);
}

BasisEvaluator resolve_basis(const RegressionBasis& basis, const ForwardPaths& fwd) {
    BasisEvaluator be(basis, fwd.d());
    if (basis.domain_from_data) {
        double lo = std::numeric_limits<double>::infinity();
        double hi = -lo;
        for (std::size_t p = 0; p < fwd.n_paths(); ++p)
            for (std::size_t i = 0; i < fwd.n_nodes(); ++i)
                for (std::size_t c = 0; c < fwd.d(); ++c) {
                    lo = std::min(lo, fwd.x(p, i, c));
                    hi = std::max(hi, fwd.x(p, i, c));
                }
        be.set_domain(lo, hi);
    }
    return be;
}

BackwardSolution solve_lsmc(const ForwardPaths& fwd, const GeneratorSpec& f,
                            const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                            const TimeGrid& grid, const DualBrownianPaths& noise,
                            const RegressionBasis& basis, const SolverOptions& opts) {
    if (!tc.bounded())
        throw mode_error("solve_lsmc: terminal condition must be bounded (truncate first)");
    check_coupling(fwd, grid, noise);
    if (f.mu > 0.0 && grid.dt() * f.mu >= 1.0)
        throw config_error("solve_lsmc: dt * mu >= 1 breaks the implicit step");

    const std::size_t N = grid.n_steps();
    const std::size_t P = fwd.n_paths();
    const std::size_t dz = noise.d();
    const std::size_t m = g.m;
    const double dt = grid.dt();

    BasisEvaluator be = resolve_basis(basis, fwd);
    BackwardSolution sol(P, N, dz);
    sol.basis = basis;
    sol.basis_domain_lo = be.spec().domain_lo;
    sol.basis_domain_hi = be.spec().domain_hi;
    sol.b_seed = noise.seed();
    sol.b_index = noise.b_index();
    sol.dt = dt;
    sol.t_start = grid.t_start();

    parallel_for(P, opts.n_workers, [&](std::size_t p) {
        const double v = tc.h(fwd.point(p, N));
        if (!std::isfinite(v))
            throw numerical_error("solve_lsmc: non-finite terminal value on a path");
        sol.y(p, N) = v;
    });

    const BasisEvaluator const_be(constant_fallback_basis(), fwd.d());
    std::vector<double> ynext(P), proj(P), target(P), q(P), cont(P), zpred(P);
    for (std::size_t i = N; i-- > 0;) {
        const double ti = grid.node(i);
        const double tnext = grid.node(i + 1);
        const bool degen = degenerate_node(fwd, i);
        sol.constant_step[i] = degen ? 1 : 0;
        StepRegression reg(degen ? const_be : be, fwd, i, degen ? 0.0 : basis.ridge_lambda,
                           opts.n_workers);

        for (std::size_t p = 0; p < P; ++p) ynext[p] = sol.y(p, i + 1);

        // projection of Y_{i+1} onto the basis, used only to center the Z target
        const FitResult proj_fit = reg.fit(ynext);
        reg.predict(proj_fit.coeff, proj);

        double zres2 = 0.0;
        sol.z_coeff[i].resize(dz);
        for (std::size_t c = 0; c < dz; ++c) {
            parallel_for(P, opts.n_workers, [&](std::size_t p) {
                target[p] = (ynext[p] - proj[p]) * noise.dw(p, i, c) / dt;
            });
            const FitResult zf = reg.fit(target);
            sol.z_coeff[i][c] = zf.coeff;
            zres2 += sqr(zf.residual_rms);
            reg.predict(zf.coeff, zpred);
            parallel_for(P, opts.n_workers, [&](std::size_t p) { sol.z(p, i, c) = zpred[p]; });
        }
        sol.z_residual_rms[i] = std::sqrt(zres2 / static_cast<double>(dz));

        // backward-Ito increment with g at the right endpoint
        parallel_for(P, opts.n_workers, [&](std::size_t p) {
            Vec zright(static_cast<Eigen::Index>(dz));
            if (i + 1 < N)
                for (std::size_t c = 0; c < dz; ++c)
                    zright(static_cast<Eigen::Index>(c)) = sol.z(p, i + 1, c);
            else
                zright.setZero();
            const Vec gv = g.g(tnext, fwd.point(p, i + 1), ynext[p], zright);
            double acc = ynext[p];
            for (std::size_t k = 0; k < m; ++k)
                acc += gv(static_cast<Eigen::Index>(k)) * noise.db(i, k);
            q[p] = acc;
        });

        const FitResult cf = reg.fit(q);
        sol.y_coeff[i] = cf.coeff;
        sol.y_residual_rms[i] = cf.residual_rms;
        sol.cond_estimate[i] = cf.cond_estimate;
        reg.predict(cf.coeff, cont);

        parallel_for(P, opts.n_workers, [&](std::size_t p) {
            Vec zrow(static_cast<Eigen::Index>(dz));
            for (std::size_t c = 0; c < dz; ++c)
                zrow(static_cast<Eigen::Index>(c)) = sol.z(p, i, c);
            sol.y(p, i) =
                solve_implicit_step(f, ti, fwd.point(p, i), zrow, cont[p], dt, opts.root_tol);
        });
    }
    return sol;
}

BackwardSolution solve_shift_reduction(const ForwardPaths& fwd, const GeneratorSpec& f,
                                       const NoiseCoefficientSpec& g,
                                       const TerminalCondition& tc, const TimeGrid& grid,
                                       const DualBrownianPaths& noise,
                                       const RegressionBasis& basis,
                                       const SolverOptions& opts) {
    if (!tc.bounded()) throw mode_error("solve_shift_reduction: terminal must be bounded");
    check_coupling(fwd, grid, noise);
    if (f.kf != 0.0)
        throw mode_error("solve_shift_reduction: generator must be z-free");

    // probe g for (y, z) dependence; the reduction needs g = g(t) only
    {
        const Vec x0 = Vec::Zero(static_cast<Eigen::Index>(fwd.d()));
        const Vec z0 = Vec::Zero(static_cast<Eigen::Index>(noise.d()));
        Vec z1 = z0;
        z1.setConstant(0.7);
        for (double tt : {grid.t_start(), 0.5 * (grid.t_start() + grid.t_end())}) {
            const Vec a = g.g(tt, x0, 0.0, z0);
            const Vec b = g.g(tt, x0, 1.3, z0);
            const Vec c = g.g(tt, x0, 0.0, z1);
            if ((a - b).norm() > 0 || (a - c).norm() > 0)
                throw mode_error("solve_shift_reduction: g depends on y or z");
        }
    }

    const std::size_t N = grid.n_steps();
    const std::size_t P = fwd.n_paths();
    const std::size_t dz = noise.d();
    const std::size_t m = g.m;
    const double dt = grid.dt();

    // shift values G_i = int_0^{t_i} g dB (right-endpoint rule), one per node
    std::vector<double> shift(N + 1, 0.0);
    const Vec x0 = Vec::Zero(static_cast<Eigen::Index>(fwd.d()));
    const Vec zz = Vec::Zero(static_cast<Eigen::Index>(dz));
    for (std::size_t i = 0; i < N; ++i) {
        const Vec gv = g.g(grid.node(i + 1), x0, 0.0, zz);
        double inc = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            inc += gv(static_cast<Eigen::Index>(k)) * noise.db(i, k);
        shift[i + 1] = shift[i] + inc;
    }

    BasisEvaluator be = resolve_basis(basis, fwd);
    BackwardSolution sol(P, N, dz);
    sol.basis = basis;
    sol.basis_domain_lo = be.spec().domain_lo;
    sol.basis_domain_hi = be.spec().domain_hi;
    sol.b_seed = noise.seed();
    sol.b_index = noise.b_index();
    sol.dt = dt;
    sol.t_start = grid.t_start();

    // U_N = zeta = xi + G_N; solve the ordinary BSDE in U, then Y = U - G
    std::vector<double> u(P);
    parallel_for(P, opts.n_workers, [&](std::size_t p) {
        const double v = tc.h(fwd.point(p, N));
        if (!std::isfinite(v))
            throw numerical_error("solve_shift_reduction: non-finite terminal value");
        u[p] = v + shift[N];
        sol.y(p, N) = v;
    });

    const BasisEvaluator const_be(constant_fallback_basis(), fwd.d());
    std::vector<double> proj(P), target(P), cont(P), zpred(P);
    for (std::size_t i = N; i-- > 0;) {
        const double ti = grid.node(i);
        const bool degen = degenerate_node(fwd, i);
        sol.constant_step[i] = degen ? 1 : 0;
        StepRegression reg(degen ? const_be : be, fwd, i, degen ? 0.0 : basis.ridge_lambda,
                           opts.n_workers);

        // no backward increment in the reduced BSDE: the continuation fit of
        // U_{i+1} doubles as the centering projection
        const FitResult cf = reg.fit(u);
        reg.predict(cf.coeff, proj);

        double zres2 = 0.0;
        sol.z_coeff[i].resize(dz);
        for (std::size_t c = 0; c < dz; ++c) {
            parallel_for(P, opts.n_workers, [&](std::size_t p) {
                target[p] = (u[p] - proj[p]) * noise.dw(p, i, c) / dt;
            });
            const FitResult zf = reg.fit(target);
            sol.z_coeff[i][c] = zf.coeff;
            zres2 += sqr(zf.residual_rms);
            reg.predict(zf.coeff, zpred);
            parallel_for(P, opts.n_workers, [&](std::size_t p) { sol.z(p, i, c) = zpred[p]; });
        }
        sol.z_residual_rms[i] = std::sqrt(zres2 / static_cast<double>(dz));

        sol.y_coeff[i] = cf.coeff;
        sol.y_residual_rms[i] = cf.residual_rms;
        sol.cond_estimate[i] = cf.cond_estimate;
        std::copy(proj.begin(), proj.end(), cont.begin());

        // u - dt f(t, u - G_i) = c  <=>  y - dt f(t, y) = c - G_i with y = u - G_i
        parallel_for(P, opts.n_workers, [&](std::size_t p) {
            const Vec zrow = Vec::Zero(static_cast<Eigen::Index>(dz));
            const double y =
                solve_implicit_step(f, ti, fwd.point(p, i), zrow, cont[p] - shift[i], dt,
                                    opts.root_tol);
            sol.y(p, i) = y;
            u[p] = y + shift[i];
        });
    }
    return sol;
}

std::pair<BackwardSolution, ContractionTrace>
picard_solve(const ForwardPaths& fwd, const GeneratorSpec& f, const NoiseCoefficientSpec& g,
             const TerminalCondition& tc, const TimeGrid& grid, const DualBrownianPaths& noise,
             const RegressionBasis& basis, const PicardConfig& cfg, const SolverOptions& opts) {
    if (!tc.bounded()) throw mode_error("picard_solve: terminal must be bounded");
    check_coupling(fwd, grid, noise);

    const std::size_t N = grid.n_steps();
    const std::size_t P = fwd.n_paths();
    const std::size_t dz = noise.d();
    const std::size_t m = g.m;
    const double dt = grid.dt();

    ContractionTrace trace;
    const double denom_minus = 1.0 - g.eps;
    const double denom_plus = 1.0 + g.eps;
    trace.alpha = cfg.alpha ? *cfg.alpha
                            : 2.0 * f.mu + 2.0 * f.kf / denom_minus + 2.0 * g.kg / denom_plus;
    trace.eta = cfg.eta ? *cfg.eta : 2.0 / denom_minus;
    if (!std::isfinite(trace.alpha)) throw config_error("picard_solve: alpha not finite");
    if (!(cfg.stop_tol > 0)) throw config_error("picard_solve: stop_tol must be > 0");

    BasisEvaluator be = resolve_basis(basis, fwd);
    const BasisEvaluator const_be(constant_fallback_basis(), fwd.d());

    // frozen previous-sweep fields, (Y^0, Z^0) = (0, 0)
    std::vector<double> y_prev(P * (N + 1), 0.0);
    std::vector<double> z_prev(P * N * dz, 0.0);

    BackwardSolution sol(P, N, dz);
    std::vector<double> ynext(P), proj(P), target(P), q(P), cont(P), zpred(P);

    std::size_t grow_streak = 0;
    for (std::size_t sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        sol = BackwardSolution(P, N, dz);
        sol.basis = basis;
        sol.basis_domain_lo = be.spec().domain_lo;
        sol.basis_domain_hi = be.spec().domain_hi;
        sol.b_seed = noise.seed();
        sol.b_index = noise.b_index();
        sol.dt = dt;
        sol.t_start = grid.t_start();

        parallel_for(P, opts.n_workers, [&](std::size_t p) {
            sol.y(p, N) = tc.h(fwd.point(p, N));
        });

        for (std::size_t i = N; i-- > 0;) {
            const double ti = grid.node(i);
            const double tnext = grid.node(i + 1);
            const bool degen = degenerate_node(fwd, i);
            sol.constant_step[i] = degen ? 1 : 0;
            StepRegression reg(degen ? const_be : be, fwd, i,
                               degen ? 0.0 : basis.ridge_lambda, opts.n_workers);

            for (std::size_t p = 0; p < P; ++p) ynext[p] = sol.y(p, i + 1);
            const FitResult proj_fit = reg.fit(ynext);
            reg.predict(proj_fit.coeff, proj);

            double zres2 = 0.0;
            sol.z_coeff[i].resize(dz);
            for (std::size_t c = 0; c < dz; ++c) {
                parallel_for(P, opts.n_workers, [&](std::size_t p) {
                    target[p] = (ynext[p] - proj[p]) * noise.dw(p, i, c) / dt;
                });
                const FitResult zf = reg.fit(target);
                sol.z_coeff[i][c] = zf.coeff;
                zres2 += sqr(zf.residual_rms);
                reg.predict(zf.coeff, zpred);
                parallel_for(P, opts.n_workers,
                             [&](std::size_t p) { sol.z(p, i, c) = zpred[p]; });
            }
            sol.z_residual_rms[i] = std::sqrt(zres2 / static_cast<double>(dz));

            // g frozen at sweep-k values, right endpoint
            parallel_for(P, opts.n_workers, [&](std::size_t p) {
                Vec zk(static_cast<Eigen::Index>(dz));
                if (i + 1 < N)
                    for (std::size_t c = 0; c < dz; ++c)
                        zk(static_cast<Eigen::Index>(c)) = z_prev[(p * N + i + 1) * dz + c];
                else
                    zk.setZero();
                const double yk = y_prev[p * (N + 1) + i + 1];
                const Vec gv = g.g(tnext, fwd.point(p, i + 1), yk, zk);
                double acc = ynext[p];
                for (std::size_t k = 0; k < m; ++k)
                    acc += gv(static_cast<Eigen::Index>(k)) * noise.db(i, k);
                q[p] = acc;
            });

            const FitResult cf = reg.fit(q);
            sol.y_coeff[i] = cf.coeff;
            sol.y_residual_rms[i] = cf.residual_rms;
            sol.cond_estimate[i] = cf.cond_estimate;
            reg.predict(cf.coeff, cont);

            // f's z argument frozen at sweep k, y implicit
            parallel_for(P, opts.n_workers, [&](std::size_t p) {
                Vec zk(static_cast<Eigen::Index>(dz));
                for (std::size_t c = 0; c < dz; ++c)
                    zk(static_cast<Eigen::Index>(c)) = z_prev[(p * N + i) * dz + c];
                sol.y(p, i) =
                    solve_implicit_step(f, ti, fwd.point(p, i), zk, cont[p], dt, opts.root_tol);
            });
        }

        // weighted sweep gap D_k = dt sum_i e^{alpha t_i} (mean dY^2 + mean |dZ|^2)
        double d = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double w = std::exp(trace.alpha * grid.node(i));
            const double my = pairwise_sum(P, [&](std::size_t p) {
                                  return sqr(sol.y(p, i) - y_prev[p * (N + 1) + i]);
                              }) /
                              static_cast<double>(P);
            double mz = 0.0;
            for (std::size_t c = 0; c < dz; ++c)
                mz += pairwise_sum(P, [&](std::size_t p) {
                          return sqr(sol.z(p, i, c) - z_prev[(p * N + i) * dz + c]);
                      }) /
                      static_cast<double>(P);
            d += dt * w * (my + mz);
        }
        trace.d.push_back(d);
        trace.sweeps = sweep + 1;

        if (trace.d.size() >= 2 && d > trace.d[trace.d.size() - 2]) {
            if (++grow_streak >= 3) trace.non_contraction_warning = true;
        } else {
            grow_streak = 0;
        }

        // freeze current sweep
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t i = 0; i <= N; ++i) y_prev[p * (N + 1) + i] = sol.y(p, i);
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t i = 0; i < N; ++i)
                for (std::size_t c = 0; c < dz; ++c)
                    z_prev[(p * N + i) * dz + c] = sol.z(p, i, c);

        if (d < cfg.stop_tol) break;
    }
    return {std::move(sol), std::move(trace)};
}

ComparisonReport compare_coupled(const BackwardSolution& a, const BackwardSolution& b,
                                 double tol) {
    if (a.n_paths() != b.n_paths() || a.n_steps() != b.n_steps())
        throw mode_error("compare_coupled: solutions not on a common grid/path set");
    if (a.b_seed != b.b_seed || a.b_index != b.b_index)
        throw mode_error("compare_coupled: solutions use different backward noise");

    ComparisonReport rep;
    rep.tol = tol;
    const std::size_t N = a.n_steps();
    const std::size_t P = a.n_paths();
    rep.violations_per_node.assign(N + 1, 0);
    for (std::size_t p = 0; p < P; ++p) {
        if (a.y(p, N) > b.y(p, N)) rep.xi_ordering_ok = false;
        for (std::size_t i = 0; i <= N; ++i) {
            const double diff = a.y(p, i) - b.y(p, i);
            rep.max_violation = std::max(rep.max_violation, diff);
            if (diff > tol) {
                ++rep.n_violations;
                ++rep.violations_per_node[i];
            }
            ++rep.n_pairs;
        }
    }
    rep.violation_fraction =
        rep.n_pairs ? static_cast<double>(rep.n_violations) / static_cast<double>(rep.n_pairs)
                    : 0.0;
    return rep;
}

} // namespace bdsde
