#include "bdsde/field.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"

namespace bdsde {

RandomField::RandomField(std::vector<double> time_nodes, SpatialGrid box, std::size_t m)
    : time_nodes_(std::move(time_nodes)), box_(box), m_(m) {
    if (time_nodes_.size() < 2) throw config_error("RandomField: need at least two time nodes");
    if (box_.n < 2) throw config_error("RandomField: need at least two spatial points");
    u_.assign(time_nodes_.size() * box_.n, 0.0);
    grad_.assign(time_nodes_.size() * box_.n, 0.0);
    db_.assign((time_nodes_.size() - 1) * m_, 0.0);
}

RandomField RandomField::from_function(const TimeGrid& grid, const SpatialGrid& box,
                                       const std::function<double(double, double)>& u_fn,
                                       const std::function<double(double, double)>& grad_fn,
                                       std::span<const double> db) {
    std::vector<double> nodes(grid.nodes().begin(), grid.nodes().end());
    RandomField f(std::move(nodes), box, 1);
    for (std::size_t i = 0; i < f.n_time(); ++i)
        for (std::size_t j = 0; j < box.n; ++j) {
            f.u(i, j) = u_fn(f.t(i), box.point(j));
            f.grad(i, j) = grad_fn(f.t(i), box.point(j));
        }
    if (!db.empty()) {
        if (db.size() != f.db_data().size())
            throw shape_error("RandomField::from_function: db length mismatch");
        std::copy(db.begin(), db.end(), f.db_data().begin());
    }
    return f;
}

RandomField build_field(const SdeCoefficients& coeffs, const GeneratorSpec& f,
                        const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                        const TimeGrid& grid, const SpatialGrid& box, std::uint64_t seed,
                        std::uint64_t b_index, const FieldBuildConfig& cfg) {
    if (!tc.bounded()) throw mode_error("build_field: terminal must be bounded (truncate first)");
    if (coeffs.dim_x != 1)
        throw config_error("build_field: spatial lattice supports d = 1 in v1");

    const std::size_t N = grid.n_steps();
    std::vector<double> nodes(grid.nodes().begin(), grid.nodes().end());
    RandomField field(std::move(nodes), box, 1);
    field.b_seed = seed;
    field.b_index = b_index;

    // One noise block serves every lattice point: same W substreams, same B.
    DualBrownianPaths noise(grid, coeffs.dim_w, 1, cfg.w_budget, seed, cfg.solver.n_workers,
                            b_index);
    for (std::size_t s = 0; s < N; ++s) field.db_data()[s] = noise.db(s, 0);

    const bool grad_from_differences =
        cfg.basis.family == RegressionBasis::Family::piecewise_constant;

    for (std::size_t j = 0; j < box.n; ++j) {
        const Vec x0 = vec1(box.point(j));
        const ForwardPaths fwd =
            euler_maruyama(coeffs, grid.t_start(), x0, grid, noise, cfg.solver.n_workers);
        const BackwardSolution sol =
            solve_lsmc(fwd, f, g, tc, grid, noise, cfg.basis, cfg.solver);

        BasisEvaluator be(sol.basis, 1);
        be.set_domain(sol.basis_domain_lo, sol.basis_domain_hi);
        if (!be.in_domain(x0)) field.extrapolation_warning = true;

        for (std::size_t i = 0; i < N; ++i) {
            Vec zx(1);
            double cx;
            if (sol.constant_step[i]) {
                zx(0) = sol.z_coeff[i][0](0);
                cx = sol.y_coeff[i](0);
            } else {
                zx(0) = eval_basis_at(be, x0, sol.z_coeff[i][0]);
                cx = eval_basis_at(be, x0, sol.y_coeff[i]);
            }
            field.u(i, j) =
                solve_implicit_step(f, grid.node(i), x0, zx, cx, grid.dt(),
                                    cfg.solver.root_tol);
            field.grad(i, j) = zx(0);
        }
        field.u(N, j) = tc.h(x0);
        field.grad(N, j) = field.grad(N - 1, j);
    }

    if (grad_from_differences) {
        // piecewise-constant bases have no useful pointwise Z readout
        const double hx = box.h();
        for (std::size_t i = 0; i <= N; ++i) {
            for (std::size_t j = 0; j < box.n; ++j) {
                double du;
                if (j == 0)
                    du = (field.u(i, 1) - field.u(i, 0)) / hx;
                else if (j + 1 == box.n)
                    du = (field.u(i, j) - field.u(i, j - 1)) / hx;
                else
                    du = (field.u(i, j + 1) - field.u(i, j - 1)) / (2.0 * hx);
                const Vec xj = vec1(box.point(j));
                const Mat s = coeffs.diffusion(grid.node(i), xj);
                field.grad(i, j) = s(0, 0) * du;
            }
        }
    }
    return field;
}

namespace {

// trapezoid over the lattice, optionally on every 2nd point
double trapezoid_x(const RandomField& f, std::size_t i,
                   const std::function<double(std::size_t)>& integrand, std::size_t stride = 1) {
    const std::size_t n = f.n_x();
    double acc = 0.0;
    std::size_t prev = 0;
    for (std::size_t j = stride; j < n; j += stride) {
        acc += 0.5 * (integrand(prev) + integrand(j)) *
               (f.box().point(j) - f.box().point(prev));
        prev = j;
    }
    if (prev != n - 1)
        acc += 0.5 * (integrand(prev) + integrand(n - 1)) *
               (f.box().point(n - 1) - f.box().point(prev));
    (void)i;
    return acc;
}

} // namespace

WeightedNormResult weighted_norm(const RandomField& field, const WeightFunction& rho,
                                 double t_cut) {
    if (field.represents_unbounded && !rho.integrable_inverse(1))
        throw config_error("weighted_norm: non-integrable weight (kappa <= d) over an "
                           "unbounded box");

    auto compute = [&](std::size_t stride_x, std::size_t stride_t) {
        double total = 0.0, up = 0.0, gp = 0.0;
        for (std::size_t i = 0; i + stride_t < field.n_time(); i += stride_t) {
            if (field.t(i) >= t_cut - 1e-12) break;
            const double dt_loc = field.t(std::min(i + stride_t, field.n_time() - 1)) - field.t(i);
            auto ui = [&](std::size_t j) {
                const Vec xj = vec1(field.box().point(j));
                return sqr(field.u(i, j)) / rho.rho(xj);
            };
            auto gi = [&](std::size_t j) {
                const Vec xj = vec1(field.box().point(j));
                return sqr(field.grad(i, j)) / rho.rho(xj);
            };
            const double a = trapezoid_x(field, i, ui, stride_x);
            const double b = trapezoid_x(field, i, gi, stride_x);
            up += dt_loc * a;
            gp += dt_loc * b;
            total += dt_loc * (a + b);
        }
        return std::array<double, 3>{total, up, gp};
    };

    WeightedNormResult out;
    const auto fine = compute(1, 1);
    const auto coarse = compute(2, 2);
    out.value = fine[0];
    out.u_part = fine[1];
    out.grad_part = fine[2];
    out.refinement_delta = std::abs(fine[0] - coarse[0]);
    return out;
}

WeakFormOperator WeakFormOperator::for_constant_coefficients(const SdeCoefficients& coeffs) {
    if (!coeffs.constant_coefficients)
        throw mode_error("WeakFormOperator: coefficients are not constant; supply a_tilde and "
                         "div_term explicitly");
    WeakFormOperator op;
    op.a_tilde = [](double, const Vec& x) { return Vec::Zero(x.size()).eval(); };
    auto drift = coeffs.drift;
    op.div_term = [drift](double s, const Vec& x, const SpaceTimeTestFunction& psi) {
        // constant b, A~ = 0: div(b Psi) = b . grad Psi
        return drift(s, x).dot(psi.grad_x(s, x));
    };
    return op;
}

WeakFormResidual weak_form_residual(const RandomField& field, const SpaceTimeTestFunction& psi,
                                    const WeakFormOperator& ops, const GeneratorSpec& f,
                                    const NoiseCoefficientSpec& g, double r, double t) {
    if (!(r < t)) throw config_error("weak_form_residual: need r < t");
    if (!ops.div_term) throw config_error("weak_form_residual: missing div_term assembly");

    // locate node indices (r and t snap to lattice nodes)
    const auto locate = [&](double s) {
        std::size_t best = 0;
        double dist = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < field.n_time(); ++i) {
            const double d = std::abs(field.t(i) - s);
            if (d < dist) { dist = d; best = i; }
        }
        return best;
    };
    const std::size_t i_lo = locate(r);
    const std::size_t i_hi = locate(t);
    if (i_hi <= i_lo) throw config_error("weak_form_residual: interval shorter than a step");

    WeakFormResidual out;

    auto x_of = [&](std::size_t j) { return vec1(field.box().point(j)); };

    // time integrals, left-rectangle rule
    for (std::size_t i = i_lo; i < i_hi; ++i) {
        const double s = field.t(i);
        const double ds = field.t(i + 1) - field.t(i);
        out.time_derivative +=
            ds * trapezoid_x(field, i, [&](std::size_t j) {
                return field.u(i, j) * psi.dt(s, x_of(j));
            });
        // The gradient and divergence terms carry + signs on this side: with
        // -1/2 int (s*Du)(s*DPsi) - int u div((b-A~)Psi) = int (Lu) Psi, the
        // substitution -d_s u = Lu + f + g dB balances the boundary terms.
        // (Both the heat-equation and the g = 1 closed forms check out only
        // with this orientation.)
        out.gradient += ds * 0.5 * trapezoid_x(field, i, [&](std::size_t j) {
            const Vec xj = x_of(j);
            return field.grad(i, j) * psi.grad_x(s, xj)(0);
        });
        out.divergence += ds * trapezoid_x(field, i, [&](std::size_t j) {
            return field.u(i, j) * ops.div_term(s, x_of(j), psi);
        });
        if (f.f)
            out.f_term += ds * trapezoid_x(field, i, [&](std::size_t j) {
                const Vec xj = x_of(j);
                return psi.eval(s, xj) * f.f(s, xj, field.u(i, j), vec1(field.grad(i, j)));
            });
        // backward Ito term: right endpoint i+1 against dB_i
        if (g.g) {
            const double snext = field.t(i + 1);
            const double space_int = trapezoid_x(field, i + 1, [&](std::size_t j) {
                const Vec xj = x_of(j);
                const Vec gv = g.g(snext, xj, field.u(i + 1, j), vec1(field.grad(i + 1, j)));
                return psi.eval(snext, xj) * gv(0);
            });
            out.g_term += space_int * field.db(i, 0);
        }
    }

    out.boundary_lo = trapezoid_x(field, i_lo, [&](std::size_t j) {
        return field.u(i_lo, j) * psi.eval(field.t(i_lo), x_of(j));
    });
    out.boundary_hi = -trapezoid_x(field, i_hi, [&](std::size_t j) {
        return field.u(i_hi, j) * psi.eval(field.t(i_hi), x_of(j));
    });

    const double lhs = out.time_derivative + out.boundary_lo + out.boundary_hi + out.gradient +
                       out.divergence;
    const double rhs = out.f_term + out.g_term;
    out.residual = std::abs(lhs - rhs);
    return out;
}

TerminalTraceResult terminal_trace(std::span<const RandomField> fields,
                                   const SpatialTestFunction& phi,
                                   const std::function<double(const Vec&)>& h,
                                   bool finite_trace_requested, double q) {
    if (fields.empty()) throw config_error("terminal_trace: no fields");
    if (finite_trace_requested && phi.dist_to_singular_set <= 0.0)
        throw mode_error("terminal_trace: test-function support touches the singular set but a "
                         "finite trace was requested");

    const RandomField& f0 = fields.front();
    TerminalTraceResult out;

    // fine Simpson quadrature of the target over the phi support
    {
        double lo = f0.box().lo, hi = f0.box().hi;
        if (phi.has_support_box()) {
            lo = std::max(lo, phi.support_lo(0));
            hi = std::min(hi, phi.support_hi(0));
        }
        const std::size_t nq = 4096;
        const double hq = (hi - lo) / static_cast<double>(nq);
        double acc = 0.0;
        for (std::size_t k = 0; k <= nq; ++k) {
            const double x = lo + hq * static_cast<double>(k);
            const Vec xv = vec1(x);
            const double w = (k == 0 || k == nq) ? 1.0 : (k % 2 == 1 ? 4.0 : 2.0);
            const double hv = h(xv);
            const double pv = phi.eval(xv);
            acc += w * (pv == 0.0 ? 0.0 : hv * pv);
        }
        out.target = acc * hq / 3.0;
    }

    const double T = f0.t(f0.n_time() - 1);
    std::vector<double> vals(fields.size());
    for (std::size_t i = 0; i < f0.n_time(); ++i) {
        for (std::size_t b = 0; b < fields.size(); ++b) {
            const RandomField& fb = fields[b];
            vals[b] = 0.0;
            double acc = 0.0;
            for (std::size_t j = 0; j + 1 < fb.n_x(); ++j) {
                const double x0 = fb.box().point(j), x1 = fb.box().point(j + 1);
                acc += 0.5 *
                       (fb.u(i, j) * phi.eval(vec1(x0)) + fb.u(i, j + 1) * phi.eval(vec1(x1))) *
                       (x1 - x0);
            }
            vals[b] = acc;
        }
        const MeanVar mv = mean_var(vals);
        out.curve.push_back({f0.t(i), mv.mean, mv.std_err});
        if (q > 0.0 && f0.t(i) < T) {
            double phi_mass = 0.0;
            for (std::size_t j = 0; j + 1 < f0.n_x(); ++j) {
                const double x0 = f0.box().point(j), x1 = f0.box().point(j + 1);
                phi_mass += 0.5 * (phi.eval(vec1(x0)) + phi.eval(vec1(x1))) * (x1 - x0);
            }
            out.divergence_ref.push_back(std::pow(q * (T - f0.t(i)), -1.0 / q) * phi_mass);
        } else {
            out.divergence_ref.push_back(std::numeric_limits<double>::infinity());
        }
    }

    // the same target on the field lattice: trapezoid of h phi
    {
        double trap = 0.0;
        for (std::size_t j = 0; j + 1 < f0.n_x(); ++j) {
            const double x0 = f0.box().point(j), x1 = f0.box().point(j + 1);
            const double v0 = phi.eval(vec1(x0)) == 0.0 ? 0.0 : h(vec1(x0)) * phi.eval(vec1(x0));
            const double v1 = phi.eval(vec1(x1)) == 0.0 ? 0.0 : h(vec1(x1)) * phi.eval(vec1(x1));
            trap += 0.5 * (v0 + v1) * (x1 - x0);
        }
        out.target_lattice = trap;
    }
    return out;
}

MalliavinCheckResult malliavin_identity_check(const BackwardSolution& sol,
                                              const ForwardPaths& fwd,
                                              const SdeCoefficients& coeffs,
                                              const SpatialTestFunction& theta,
                                              const TimeGrid& grid, double t_lo) {
    if (!coeffs.constant_coefficients)
        throw mode_error("malliavin_identity_check: only constant coefficients are supported "
                         "(Gaussian density required)");
    if (!(coeffs.elliptic_lambda > 0.0))
        throw mode_error("malliavin_identity_check: sigma must be elliptic");
    if (!(t_lo > grid.t_start()))
        throw config_error("malliavin_identity_check: interval must start after the forward "
                           "start time (the density degenerates at t_start)");

    const std::size_t N = grid.n_steps();
    const std::size_t P = fwd.n_paths();
    const double dt = grid.dt();
    const Vec x_start = fwd.x_start();
    const Vec b = coeffs.drift(grid.t_start(), x_start);
    const Mat sig = coeffs.diffusion(grid.t_start(), x_start);
    const Mat a = sig * sig.transpose(); // sigma sigma^*

    auto psi_value = [&](double s, const Vec& x) {
        const double tau = s - grid.t_start();
        const Vec mean_dev = x - x_start - b * tau;
        const Mat cov_inv = (a * tau).inverse();
        const Vec grad_theta = theta.grad(x);
        const Mat hess_theta = theta.hess(x);
        const Vec grad_theta_sigma = sig.transpose() * grad_theta; // (grad theta sigma)_i
        double score_part = 0.0;
        for (Eigen::Index i = 0; i < sig.cols(); ++i) {
            // div(p sigma^i)/p = sigma^i . grad p / p = -sigma^i . cov_inv mean_dev
            const double score_i = -sig.col(i).dot(cov_inv * mean_dev);
            score_part += grad_theta_sigma(i) * score_i;
        }
        const double trace_part = (hess_theta * a).trace();
        return -score_part - trace_part; // grad sigma terms vanish for constant sigma
    };

    std::vector<double> diff(P), lhs_acc(P);
    for (std::size_t p = 0; p < P; ++p) {
        double lhs = 0.0, rhs = 0.0;
        for (std::size_t i = 0; i < N; ++i) {
            const double s = grid.node(i);
            if (s < t_lo) continue;
            const Vec x = fwd.point(p, i);
            const Vec grad_theta_sigma = sig.transpose() * theta.grad(x);
            double zdot = 0.0;
            for (std::size_t c = 0; c < sol.dim_z(); ++c)
                zdot += sol.z(p, i, c) * grad_theta_sigma(static_cast<Eigen::Index>(c));
            lhs += zdot * dt;
            rhs += sol.y(p, i) * psi_value(s, x) * dt;
        }
        diff[p] = lhs - rhs;
        lhs_acc[p] = lhs;
    }

    MalliavinCheckResult out;
    const MeanVar mv = mean_var(diff);
    out.gap = std::abs(mv.mean);
    out.se = mv.std_err;
    out.pass = out.gap <= 3.0 * out.se;
    out.lhs = mean(lhs_acc);
    out.rhs = out.lhs - mv.mean;
    return out;
}

} // namespace bdsde
