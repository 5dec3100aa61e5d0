#include <doctest.h>

#include <cmath>

#include "bdsde/errors.hpp"
#include "bdsde/field.hpp"
#include "bdsde/numerics.hpp"

using namespace bdsde;

namespace {

RegressionBasis constant_basis() {
    RegressionBasis b;
    b.family = RegressionBasis::Family::polynomial;
    b.degree = 0;
    b.ridge_lambda = 0.0;
    return b;
}

RegressionBasis linear_basis() {
    RegressionBasis b;
    b.family = RegressionBasis::Family::polynomial;
    b.degree = 1;
    b.ridge_lambda = 0.0;
    return b;
}

FieldBuildConfig cfg_of(RegressionBasis b, std::size_t budget) {
    FieldBuildConfig c;
    c.basis = b;
    c.w_budget = budget;
    return c;
}

} // namespace

TEST_CASE("g = 1 field is x-independent and equals B_T - B_t") {
    TimeGrid grid(0.0, 1.0, 32);
    SpatialGrid box{-1.0, 1.0, 5};
    SdeCoefficients sde = make_constant_sde(vec1(0.0), Mat::Identity(1, 1));
    TerminalCondition tc;
    tc.h = [](const Vec&) { return 0.0; };
    RandomField field = build_field(sde, make_zero_generator(),
                                    make_constant_noise_coefficient(1.0), tc, grid, box,
                                    31415, 0, cfg_of(constant_basis(), 128));
    // reconstruct B from the stored increments
    std::vector<double> b(33, 0.0);
    for (std::size_t i = 0; i < 32; ++i) b[i + 1] = b[i] + field.db(i, 0);
    for (std::size_t i = 0; i <= 32; ++i)
        for (std::size_t j = 0; j < 5; ++j) {
            CHECK(field.u(i, j) == doctest::Approx(b[32] - b[i]).epsilon(1e-10));
            if (i < 32) CHECK(std::abs(field.grad(i, j)) <= 1e-10);
        }
}

TEST_CASE("martingale terminal h(x) = x gives the field u(t,x) = x") {
    TimeGrid grid(0.0, 1.0, 32);
    SpatialGrid box{-1.0, 1.0, 9};
    SdeCoefficients sde = make_constant_sde(vec1(0.0), Mat::Identity(1, 1));
    TerminalCondition tc;
    tc.h = [](const Vec& x) { return x(0); };
    RandomField field = build_field(sde, make_zero_generator(), make_zero_noise_coefficient(),
                                    tc, grid, box, 2718, 0, cfg_of(linear_basis(), 4000));
    for (std::size_t i = 0; i <= 32; ++i)
        for (std::size_t j = 0; j < 9; ++j)
            CHECK(field.u(i, j) == doctest::Approx(box.point(j)).epsilon(0.05).scale(1.0));
    // sigma^* grad u = 1
    for (std::size_t j = 0; j < 9; ++j)
        CHECK(field.grad(16, j) == doctest::Approx(1.0).epsilon(0.1));
}

TEST_CASE("h = +inf field at one truncation level is the deterministic ladder value") {
    TimeGrid grid(0.0, 1.0, 32);
    SpatialGrid box{-1.0, 1.0, 3};
    SdeCoefficients sde = make_constant_sde(vec1(0.0), Mat::Identity(1, 1));
    TerminalCondition inf_tc;
    inf_tc.kind = TerminalCondition::Kind::singular;
    inf_tc.h = [](const Vec&) { return std::numeric_limits<double>::infinity(); };
    const TerminalCondition tc = truncate_terminal(inf_tc, 4.0);
    RandomField field = build_field(sde, make_power_law_generator(1.0),
                                    make_zero_noise_coefficient(), tc, grid, box, 999, 0,
                                    cfg_of(constant_basis(), 64));
    // oracle: scalar implicit Euler from 4
    std::vector<double> ref(33);
    ref[32] = 4.0;
    const double dt = grid.dt();
    for (std::size_t i = 32; i-- > 0;) {
        double u = ref[i + 1];
        for (int it = 0; it < 100; ++it) {
            const double fv = u + dt * u * u - ref[i + 1];
            u -= fv / (1.0 + 2.0 * dt * u);
            if (std::abs(fv) < 1e-14) break;
        }
        ref[i] = u;
    }
    for (std::size_t i = 0; i <= 32; ++i)
        for (std::size_t j = 0; j < 3; ++j)
            CHECK(field.u(i, j) == doctest::Approx(ref[i]).epsilon(1e-9));
}

TEST_CASE("weighted norm quadrature") {
    TimeGrid grid(0.0, 1.0, 16);
    SpatialGrid box{-1.0, 1.0, 33};

    SUBCASE("u = 0 gives 0; u = 1 on a unit horizon gives the box volume") {
        RandomField zero = RandomField::from_function(
            grid, box, [](double, double) { return 0.0; }, [](double, double) { return 0.0; });
        CHECK(weighted_norm(zero, WeightFunction{0.0}, 1.0).value == 0.0);

        RandomField one = RandomField::from_function(
            grid, box, [](double, double) { return 1.0; }, [](double, double) { return 0.0; });
        const WeightedNormResult n = weighted_norm(one, WeightFunction{0.0}, 1.0);
        CHECK(n.value == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(n.u_part == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(n.grad_part == 0.0);
    }

    SUBCASE("norm is monotone in the integrand") {
        RandomField small = RandomField::from_function(
            grid, box, [](double, double x) { return std::sin(x); },
            [](double, double x) { return std::cos(x); });
        RandomField big = RandomField::from_function(
            grid, box, [](double, double x) { return 2.0 * std::sin(x); },
            [](double, double x) { return 2.0 * std::cos(x); });
        const WeightFunction rho{1.5};
        CHECK(weighted_norm(small, rho, 1.0).value <= weighted_norm(big, rho, 1.0).value);
    }

    SUBCASE("unbounded-box proxy demands an integrable weight") {
        RandomField one = RandomField::from_function(
            grid, box, [](double, double) { return 1.0; }, [](double, double) { return 0.0; });
        one.represents_unbounded = true;
        CHECK_THROWS_AS(weighted_norm(one, WeightFunction{0.5}, 1.0), config_error);
        CHECK_NOTHROW(weighted_norm(one, WeightFunction{1.5}, 1.0));
    }

    SUBCASE("singular envelope: norm over [0, T - delta] grows like 1/delta for q = 1") {
        // quadrature of the bound function as the envelope oracle
        TimeGrid fine(0.0, 1.0, 512);
        auto envelope = [](double t, double x) {
            (void)x;
            return std::pow(std::max(1.0 - t, 1e-12), -1.0);
        };
        RandomField env = RandomField::from_function(fine, box, envelope,
                                                     [](double, double) { return 0.0; });
        const WeightFunction rho{0.0};
        auto exact = [](double delta) { return 2.0 * (1.0 / delta - 1.0); };
        for (double delta : {0.2, 0.1, 0.05}) {
            const WeightedNormResult n = weighted_norm(env, rho, 1.0 - delta);
            CHECK(std::abs(n.value - exact(delta)) <=
                  5.0 * n.refinement_delta + 0.02 * exact(delta) + 0.2);
        }
        const double r1 = weighted_norm(env, rho, 0.9).value;
        const double r2 = weighted_norm(env, rho, 0.95).value;
        CHECK(r2 / r1 == doctest::Approx(2.0).epsilon(0.25));
    }
}

TEST_CASE("weak-form residual assembly") {
    TimeGrid grid(0.0, 1.0, 64);
    SpatialGrid box{-3.0, 3.0, 97};
    SdeCoefficients sde = make_constant_sde(vec1(0.0), Mat::Identity(1, 1));
    const WeakFormOperator ops = WeakFormOperator::for_constant_coefficients(sde);
    const GeneratorSpec f0 = make_zero_generator();
    const NoiseCoefficientSpec g0 = make_zero_noise_coefficient();

    const double w = 0.7;
    auto u_fn = [w](double t, double x) {
        const double v = w * w + (1.0 - t);
        return w / std::sqrt(v) * std::exp(-0.5 * x * x / v);
    };
    auto grad_fn = [w, u_fn](double t, double x) {
        const double v = w * w + (1.0 - t);
        return -x / v * u_fn(t, x);
    };
    RandomField heat = RandomField::from_function(grid, box, u_fn, grad_fn);

    SUBCASE("zero test function gives a zero residual") {
        SpaceTimeTestFunction psi;
        psi.time_factor = [](double) { return 1.0; };
        psi.time_factor_dot = [](double) { return 0.0; };
        psi.space.value = [](const Vec&) { return 0.0; };
        psi.space.gradient = [](const Vec&) { return Vec::Zero(1).eval(); };
        const WeakFormResidual r = weak_form_residual(heat, psi, ops, f0, g0, 0.25, 0.75);
        CHECK(r.residual == 0.0);
    }

    SUBCASE("heat solution satisfies the weak form up to quadrature error") {
        const SpaceTimeTestFunction psi = affine_in_time(make_bump(-2.0, 2.0), 1.0, 0.5);
        const WeakFormResidual r = weak_form_residual(heat, psi, ops, f0, g0, 0.25, 0.75);
        CHECK(r.residual <= 2e-3); // O(dt + h_x^2) at this resolution
        CHECK(std::abs(r.g_term) == 0.0);
    }

    SUBCASE("assembly is linear in Psi, term by term") {
        const SpatialTestFunction phi1 = make_bump(-2.0, 2.0);
        const SpatialTestFunction phi2 = make_bump(-1.0, 1.5);
        SpatialTestFunction phi_c; // 2 phi1 + 3 phi2 with the shared time factor
        phi_c.value = [phi1, phi2](const Vec& x) {
            return 2.0 * phi1.value(x) + 3.0 * phi2.value(x);
        };
        phi_c.gradient = [phi1, phi2](const Vec& x) {
            return (2.0 * phi1.grad(x) + 3.0 * phi2.grad(x)).eval();
        };
        const SpaceTimeTestFunction p1 = affine_in_time(phi1, 1.0, 0.5);
        const SpaceTimeTestFunction p2 = affine_in_time(phi2, 1.0, 0.5);
        const SpaceTimeTestFunction pc = affine_in_time(phi_c, 1.0, 0.5);
        const WeakFormResidual ra = weak_form_residual(heat, p1, ops, f0, g0, 0.25, 0.75);
        const WeakFormResidual rb = weak_form_residual(heat, p2, ops, f0, g0, 0.25, 0.75);
        const WeakFormResidual rc = weak_form_residual(heat, pc, ops, f0, g0, 0.25, 0.75);
        auto lin = [](double a, double b, double c) {
            CHECK(c == doctest::Approx(2.0 * a + 3.0 * b).epsilon(1e-10).scale(1.0));
        };
        lin(ra.time_derivative, rb.time_derivative, rc.time_derivative);
        lin(ra.boundary_lo, rb.boundary_lo, rc.boundary_lo);
        lin(ra.boundary_hi, rb.boundary_hi, rc.boundary_hi);
        lin(ra.gradient, rb.gradient, rc.gradient);
        lin(ra.divergence, rb.divergence, rc.divergence);
        lin(ra.f_term, rb.f_term, rc.f_term);
        lin(ra.g_term, rb.g_term, rc.g_term);
    }
}

TEST_CASE("terminal trace") {
    TimeGrid grid(0.0, 1.0, 64);
    SpatialGrid box{-2.0, 2.0, 41};

    SUBCASE("phi = 0 gives a zero curve") {
        RandomField f = RandomField::from_function(
            grid, box, [](double, double x) { return std::cos(x); },
            [](double, double) { return 0.0; });
        SpatialTestFunction zero;
        zero.value = [](const Vec&) { return 0.0; };
        zero.dist_to_singular_set = 1.0;
        std::vector<RandomField> fields;
        fields.push_back(std::move(f));
        const TerminalTraceResult tr =
            terminal_trace(fields, zero, [](const Vec&) { return 1.0; }, true);
        for (const auto& p : tr.curve) CHECK(p.integral == 0.0);
        CHECK(tr.target == 0.0);
    }

    SUBCASE("time-constant field u = h reproduces the lattice target along the curve") {
        auto h = [](const Vec& x) { return std::exp(-x(0) * x(0)); };
        RandomField f = RandomField::from_function(
            grid, box, [](double, double x) { return std::exp(-x * x); },
            [](double, double) { return 0.0; });
        std::vector<RandomField> fields;
        fields.push_back(std::move(f));
        const SpatialTestFunction phi = make_bump(-1.0, 1.0, 1.0);
        const TerminalTraceResult tr = terminal_trace(fields, phi, h, true);
        for (const auto& p : tr.curve)
            CHECK(p.integral == doctest::Approx(tr.target_lattice).epsilon(1e-12));
        // lattice-vs-fine quadrature gap is small and measured
        CHECK(std::abs(tr.target_lattice - tr.target) <= 1e-3);
    }

    SUBCASE("support touching S with a finite-trace request is a mode error") {
        RandomField f = RandomField::from_function(
            grid, box, [](double, double) { return 1.0; }, [](double, double) { return 0.0; });
        std::vector<RandomField> fields;
        fields.push_back(std::move(f));
        const SpatialTestFunction phi = make_bump(-0.5, 0.5, 0.0); // touches S
        CHECK_THROWS_AS(terminal_trace(fields, phi, [](const Vec&) { return 1.0; }, true),
                        mode_error);
        CHECK_NOTHROW(terminal_trace(fields, phi, [](const Vec&) { return 1.0; }, false, 1.0));
    }
}

TEST_CASE("Malliavin identity check") {
    TimeGrid grid(0.0, 1.0, 32);
    DualBrownianPaths noise(grid, 1, 1, 4000, 112);
    SdeCoefficients sde = make_constant_sde(vec1(0.0), Mat::Identity(1, 1));
    ForwardPaths fwd = euler_maruyama(sde, 0.0, vec1(0.0), grid, noise);

    GeneratorSpec f0 = make_zero_generator();
    TerminalCondition tc;
    tc.h = [](const Vec& x) { return x(0); };
    RegressionBasis basis = linear_basis();
    BackwardSolution sol =
        solve_lsmc(fwd, f0, make_zero_noise_coefficient(), tc, grid, noise, basis);

    SUBCASE("constant theta: both sides vanish") {
        SpatialTestFunction theta;
        theta.value = [](const Vec&) { return 5.0; };
        theta.gradient = [](const Vec&) { return Vec::Zero(1).eval(); };
        theta.hessian = [](const Vec&) { return Mat::Zero(1, 1).eval(); };
        const MalliavinCheckResult r =
            malliavin_identity_check(sol, fwd, sde, theta, grid, 0.25);
        CHECK(r.lhs == 0.0);
        CHECK(r.rhs == doctest::Approx(0.0).epsilon(1e-14));
        CHECK(r.pass);
    }

    SUBCASE("linear case Z = 1: Gaussian integration by parts holds within 3 SE") {
        const SpatialTestFunction theta = make_bump(-2.0, 2.0);
        const MalliavinCheckResult r =
            malliavin_identity_check(sol, fwd, sde, theta, grid, 0.25);
        CHECK(r.pass);
        CHECK(r.se > 0.0);
    }

    SUBCASE("unsupported modes are refused") {
        SdeCoefficients varying = sde;
        varying.constant_coefficients = false;
        const SpatialTestFunction theta = make_bump(-2.0, 2.0);
        CHECK_THROWS_AS(malliavin_identity_check(sol, fwd, varying, theta, grid, 0.25),
                        mode_error);
        SdeCoefficients degenerate = make_constant_sde(vec1(0.0), Mat::Zero(1, 1));
        CHECK_THROWS_AS(malliavin_identity_check(sol, fwd, degenerate, theta, grid, 0.25),
                        mode_error);
        CHECK_THROWS_AS(malliavin_identity_check(sol, fwd, sde, theta, grid, 0.0),
                        config_error);
    }
}
