#include <doctest.h>

#include <cmath>
#include <numeric>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/solver.hpp"

using namespace bdsde;

namespace {

struct Setup {
    TimeGrid grid;
    DualBrownianPaths noise;
    ForwardPaths fwd;
};

Setup brownian_setup(std::size_t n_steps, std::size_t n_paths, std::uint64_t seed,
                     double x0 = 0.0, double sigma = 1.0) {
    TimeGrid grid(0.0, 1.0, n_steps);
    DualBrownianPaths noise(grid, 1, 1, n_paths, seed);
    SdeCoefficients sde = make_constant_sde(vec1(0.0), Mat::Constant(1, 1, sigma));
    ForwardPaths fwd = euler_maruyama(sde, 0.0, vec1(x0), grid, noise);
    return Setup{grid, std::move(noise), std::move(fwd)};
}

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

TerminalCondition constant_terminal(double v) {
    TerminalCondition tc;
    tc.h = [v](const Vec&) { return v; };
    tc.sup_h = v;
    return tc;
}

} // namespace

TEST_CASE("implicit power-law step: unique root, |y| <= |c|, tolerance holds") {
    GeneratorSpec f = make_power_law_generator(1.7);
    const Vec x = vec1(0.0), z = vec1(0.0);
    for (double c : {-3.0, -0.4, 0.0, 1e-8, 0.9, 7.5}) {
        const double y = solve_implicit_step(f, 0.3, x, z, c, 0.05, 1e-12);
        CHECK(std::abs(y) <= std::abs(c) + 1e-15);
        CHECK(y + 0.05 * y * std::pow(std::abs(y), 1.7) == doctest::Approx(c).epsilon(1e-10));
        CHECK(y * c >= 0.0);
    }
    // zero generator: step is the identity in c
    CHECK(solve_implicit_step(make_zero_generator(), 0.0, x, z, 1.23, 0.1, 1e-12) ==
          doctest::Approx(1.23).epsilon(1e-12));
    // general monotone branch (linear f solved by Newton): y(1 + dt) = c
    GeneratorSpec lin;
    lin.f = [](double, const Vec&, double y, const Vec&) { return -y; };
    lin.mu = 0.0;
    CHECK(solve_implicit_step(lin, 0.0, x, z, 2.0, 0.25, 1e-12) ==
          doctest::Approx(2.0 / 1.25).epsilon(1e-10));
}

TEST_CASE("paper counterexample: xi=0, f=0, g=1 gives Y = B_T - B_t, Z = 0") {
    Setup s = brownian_setup(32, 256, 1001);
    BackwardSolution sol =
        solve_lsmc(s.fwd, make_zero_generator(), make_constant_noise_coefficient(1.0),
                   constant_terminal(0.0), s.grid, s.noise, constant_basis());
    double err_y = 0.0, err_z = 0.0;
    for (std::size_t p = 0; p < 256; ++p) {
        for (std::size_t i = 0; i <= 32; ++i)
            err_y = std::max(err_y,
                             std::abs(sol.y(p, i) - (s.noise.b(32, 0) - s.noise.b(i, 0))));
        for (std::size_t i = 0; i < 32; ++i) err_z = std::max(err_z, std::abs(sol.z(p, i, 0)));
    }
    CHECK(err_y <= 1e-10);
    CHECK(err_z <= 1e-10);
}

TEST_CASE("deterministic power-law terminal follows the implicit Euler recursion exactly") {
    const std::size_t N = 64;
    Setup s = brownian_setup(N, 128, 1002, 0.0, 0.0); // sigma = 0: X frozen
    GeneratorSpec f = make_power_law_generator(1.0);
    BackwardSolution sol = solve_lsmc(s.fwd, f, make_zero_noise_coefficient(),
                                      constant_terminal(2.0), s.grid, s.noise,
                                      constant_basis());
    // the oracle: scalar implicit Euler for y' = y^2 backward from 2
    std::vector<double> ref(N + 1);
    ref[N] = 2.0;
    const double dt = s.grid.dt();
    for (std::size_t i = N; i-- > 0;) {
        double u = ref[i + 1];
        for (int it = 0; it < 100; ++it) {
            const double fv = u + dt * u * u - ref[i + 1];
            const double fd = 1.0 + 2.0 * dt * u;
            u -= fv / fd;
            if (std::abs(fv / fd) < 1e-14) break;
        }
        ref[i] = u;
    }
    for (std::size_t i = 0; i <= N; ++i)
        CHECK(sol.y(0, i) == doctest::Approx(ref[i]).epsilon(1e-9));
    // closed form Xi^m: |Y_0 - 2/3| small and O(dt)
    CHECK(std::abs(sol.y(0, 0) - 2.0 / 3.0) <= 3.0 * dt);
}

TEST_CASE("linear BSDE with xi = X_T matches the discrete and continuous closed forms") {
    const std::size_t N = 64, P = 8000;
    Setup s = brownian_setup(N, P, 1003);
    GeneratorSpec f;
    f.kind = GeneratorSpec::Kind::lipschitz;
    f.mu = 0.0;
    f.f = [](double, const Vec&, double y, const Vec&) { return -y; };
    TerminalCondition tc;
    tc.h = [](const Vec& x) { return x(0); };
    BackwardSolution sol = solve_lsmc(s.fwd, f, make_zero_noise_coefficient(), tc, s.grid,
                                      s.noise, linear_basis());
    const double dt = s.grid.dt();
    double worst_discrete = 0.0, worst_cont = 0.0;
    for (std::size_t i = 0; i <= N; i += 8) {
        double md = 0.0, mc = 0.0;
        for (std::size_t p = 0; p < P; ++p) {
            const double xv = s.fwd.x(p, i, 0);
            md += sqr(sol.y(p, i) - std::pow(1.0 + dt, -static_cast<double>(N - i)) * xv);
            mc += sqr(sol.y(p, i) - std::exp(-(1.0 - s.grid.node(i))) * xv);
        }
        worst_discrete = std::max(worst_discrete, std::sqrt(md / P));
        worst_cont = std::max(worst_cont, std::sqrt(mc / P));
    }
    CHECK(worst_discrete <= 0.03); // regression noise only
    CHECK(worst_cont <= 0.05);     // + O(dt) time discretization
    // Z should approximate sigma * du/dx = e^{-(T-t)} (1+dt)^{-...} ~ discount
    double zmid = 0.0;
    for (std::size_t p = 0; p < P; ++p) zmid += sol.z(p, N / 2, 0);
    zmid /= static_cast<double>(P);
    CHECK(zmid == doctest::Approx(std::exp(-0.5)).epsilon(0.1));
}

TEST_CASE("shift reduction: g = 1 and g = 0 and g = t") {
    const std::size_t N = 32, P = 256;
    Setup s = brownian_setup(N, P, 1004);

    SUBCASE("g = 1, f = 0, xi = 0: U is constant B_T, Y = B_T - B_t") {
        BackwardSolution sol = solve_shift_reduction(
            s.fwd, make_zero_generator(), make_constant_noise_coefficient(1.0),
            constant_terminal(0.0), s.grid, s.noise, constant_basis());
        for (std::size_t i = 0; i <= N; ++i)
            CHECK(std::abs(sol.y(0, i) - (s.noise.b(N, 0) - s.noise.b(i, 0))) <= 1e-10);
    }

    SUBCASE("g = 0 reduces to the plain solve") {
        GeneratorSpec f = make_power_law_generator(1.0);
        BackwardSolution a =
            solve_shift_reduction(s.fwd, f, make_zero_noise_coefficient(),
                                  constant_terminal(1.0), s.grid, s.noise, constant_basis());
        BackwardSolution b = solve_lsmc(s.fwd, f, make_zero_noise_coefficient(),
                                        constant_terminal(1.0), s.grid, s.noise,
                                        constant_basis());
        for (std::size_t p = 0; p < P; p += 50)
            for (std::size_t i = 0; i <= N; ++i)
                CHECK(a.y(p, i) == doctest::Approx(b.y(p, i)).epsilon(1e-13));
    }

    SUBCASE("g(t) = t: Y_t equals the tail backward integral; cross-check vs lsmc") {
        NoiseCoefficientSpec gt;
        gt.m = 1;
        gt.kg = 0.0;
        gt.eps = 0.0;
        gt.z_free = true;
        gt.g = [](double t, const Vec&, double, const Vec&) {
            return Vec::Constant(1, t).eval();
        };
        BackwardSolution a =
            solve_shift_reduction(s.fwd, make_zero_generator(), gt, constant_terminal(0.0),
                                  s.grid, s.noise, constant_basis());
        BackwardSolution b = solve_lsmc(s.fwd, make_zero_generator(), gt,
                                        constant_terminal(0.0), s.grid, s.noise,
                                        constant_basis());
        for (std::size_t i = 0; i <= N; ++i) {
            double tail = 0.0;
            for (std::size_t j = i; j < N; ++j) tail += s.grid.node(j + 1) * s.noise.db(j, 0);
            CHECK(std::abs(a.y(0, i) - tail) <= 1e-10);
            CHECK(std::abs(b.y(7, i) - tail) <= 1e-10);
        }
    }

    SUBCASE("y- or z-dependent g is refused") {
        NoiseCoefficientSpec gy;
        gy.m = 1;
        gy.g = [](double, const Vec&, double y, const Vec&) {
            return Vec::Constant(1, y).eval();
        };
        CHECK_THROWS_AS(solve_shift_reduction(s.fwd, make_zero_generator(), gy,
                                              constant_terminal(0.0), s.grid, s.noise,
                                              constant_basis()),
                        mode_error);
    }
}

TEST_CASE("Picard iteration") {
    const std::size_t N = 32, P = 2000;
    Setup s = brownian_setup(N, P, 1005);

    SUBCASE("g independent of (y,z) with z-free f converges one sweep past the first") {
        GeneratorSpec f;
        f.mu = 0.0;
        f.f = [](double, const Vec&, double y, const Vec&) { return -y; };
        PicardConfig cfg;
        cfg.max_sweeps = 4;
        cfg.stop_tol = 1e-20;
        auto [sol, trace] = picard_solve(s.fwd, f, make_constant_noise_coefficient(0.5),
                                         constant_terminal(1.0), s.grid, s.noise,
                                         constant_basis(), cfg);
        REQUIRE(trace.d.size() >= 2);
        CHECK(trace.d[0] > 1e-6);
        CHECK(trace.d[1] <= 1e-20);
        CHECK_FALSE(trace.non_contraction_warning);
    }

    SUBCASE("agreement with the direct solve within combined residuals") {
        GeneratorSpec f;
        f.mu = 0.0;
        f.kf = 1.0;
        f.cf = 1.0;
        f.f = [](double, const Vec&, double y, const Vec& z) { return -y + z(0); };
        NoiseCoefficientSpec g;
        g.m = 1;
        g.kg = 1.0;
        g.eps = 0.25;
        g.g = [](double, const Vec&, double y, const Vec& z) {
            return Vec::Constant(1, 0.2 * y + 0.4 * z(0)).eval();
        };
        TerminalCondition tc;
        tc.h = [](const Vec& x) { return std::exp(-0.5 * x(0) * x(0)); };
        tc.sup_h = 1.0;
        RegressionBasis basis = linear_basis();
        PicardConfig cfg;
        cfg.max_sweeps = 8;
        cfg.stop_tol = 1e-12;
        auto [psol, trace] = picard_solve(s.fwd, f, g, tc, s.grid, s.noise, basis, cfg);
        BackwardSolution dsol = solve_lsmc(s.fwd, f, g, tc, s.grid, s.noise, basis);
        double rms = 0.0;
        for (std::size_t i = 0; i <= N; ++i)
            for (std::size_t p = 0; p < P; ++p) rms += sqr(psol.y(p, i) - dsol.y(p, i));
        rms = std::sqrt(rms / static_cast<double>(P * (N + 1)));
        CHECK(rms <= 3.0 * (psol.pooled_residual() + dsol.pooled_residual()));
        // alpha default: 2 mu + 2 Kf/(1-eps) + 2 Kg/(1+eps)
        CHECK(trace.alpha ==
              doctest::Approx(2.0 / 0.75 + 2.0 / 1.25).epsilon(1e-12));
        CHECK(trace.eta == doctest::Approx(2.0 / 0.75).epsilon(1e-12));
    }
}

TEST_CASE("coupled comparison checker") {
    const std::size_t N = 16, P = 512;
    Setup s = brownian_setup(N, P, 1006);
    TerminalCondition tc;
    tc.h = [](const Vec& x) { return x(0); };

    BackwardSolution a = solve_lsmc(s.fwd, make_zero_generator(),
                                    make_zero_noise_coefficient(), tc, s.grid, s.noise,
                                    linear_basis());
    SUBCASE("identical runs compare clean at tol = 0") {
        BackwardSolution b = solve_lsmc(s.fwd, make_zero_generator(),
                                        make_zero_noise_coefficient(), tc, s.grid, s.noise,
                                        linear_basis());
        const ComparisonReport rep = compare_coupled(a, b, 0.0);
        CHECK(rep.n_violations == 0);
        CHECK(rep.max_violation == 0.0);
        CHECK(rep.xi_ordering_ok);
    }
    SUBCASE("shifting xi by one shifts Y by exactly one") {
        TerminalCondition tc2;
        tc2.h = [](const Vec& x) { return x(0) + 1.0; };
        BackwardSolution b = solve_lsmc(s.fwd, make_zero_generator(),
                                        make_zero_noise_coefficient(), tc2, s.grid, s.noise,
                                        linear_basis());
        for (std::size_t p = 0; p < P; p += 100)
            for (std::size_t i = 0; i <= N; ++i)
                CHECK(b.y(p, i) - a.y(p, i) == doctest::Approx(1.0).epsilon(1e-11));
        const ComparisonReport rep = compare_coupled(a, b, 1e-9);
        CHECK(rep.n_violations == 0);
    }
    SUBCASE("mismatched noise is a coupling error") {
        Setup s2 = brownian_setup(N, P, 999);
        BackwardSolution c = solve_lsmc(s2.fwd, make_zero_generator(),
                                        make_zero_noise_coefficient(), tc, s2.grid, s2.noise,
                                        linear_basis());
        CHECK_THROWS_AS(compare_coupled(a, c, 0.0), mode_error);
    }
}

TEST_CASE("permuting path order permutes the solution (no cross-path leakage)") {
    const std::size_t N = 8, P = 64;
    Setup s = brownian_setup(N, P, 1007);

    // permuted copies of the same noise and forward paths
    std::vector<std::size_t> perm(P);
    std::iota(perm.begin(), perm.end(), 0);
    std::reverse(perm.begin(), perm.end());
    std::vector<double> w(P * (N + 1)), b(N + 1);
    for (std::size_t i = 0; i <= N; ++i) b[i] = s.noise.b(i, 0);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i <= N; ++i) w[perm[p] * (N + 1) + i] = s.noise.w(p, i, 0);
    DualBrownianPaths pnoise =
        DualBrownianPaths::from_data(s.grid, 1, 1, std::move(w), std::move(b), s.noise.seed());
    ForwardPaths pfwd(P, N + 1, 1, 0.0, vec1(0.0));
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i <= N; ++i) pfwd.x(perm[p], i, 0) = s.fwd.x(p, i, 0);

    GeneratorSpec f = make_power_law_generator(1.0);
    TerminalCondition tc;
    tc.h = [](const Vec& x) { return std::abs(x(0)); };
    RegressionBasis basis = linear_basis();
    BackwardSolution orig = solve_lsmc(s.fwd, f, make_zero_noise_coefficient(), tc, s.grid,
                                       s.noise, basis);
    BackwardSolution permd = solve_lsmc(pfwd, f, make_zero_noise_coefficient(), tc, s.grid,
                                        pnoise, basis);
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i <= N; ++i)
            CHECK(orig.y(p, i) == doctest::Approx(permd.y(perm[p], i)).epsilon(1e-11));
}

TEST_CASE("bounded terminal keeps Y in range with a bin basis (discrete comparison)") {
    const std::size_t N = 32, P = 4000;
    Setup s = brownian_setup(N, P, 1008);
    GeneratorSpec f = make_power_law_generator(1.0);
    TerminalCondition tc;
    tc.h = [](const Vec& x) { return std::min(2.0, std::abs(x(0))); };
    tc.sup_h = 2.0;
    RegressionBasis basis;
    basis.family = RegressionBasis::Family::piecewise_constant;
    basis.bins = 8;
    basis.ridge_lambda = RegressionBasis::kAutoRidge;
    BackwardSolution sol = solve_lsmc(s.fwd, f, make_zero_noise_coefficient(), tc, s.grid,
                                      s.noise, basis);
    double lo = 1e300, hi = -1e300;
    for (std::size_t p = 0; p < P; ++p)
        for (std::size_t i = 0; i <= N; ++i) {
            lo = std::min(lo, sol.y(p, i));
            hi = std::max(hi, sol.y(p, i));
        }
    CHECK(lo >= -1e-12);
    CHECK(hi <= 2.0 + 1e-12);
}

TEST_CASE("solver rejects singular terminal data and inconsistent coupling") {
    Setup s = brownian_setup(8, 16, 1009);
    TerminalCondition singular;
    singular.kind = TerminalCondition::Kind::singular;
    singular.h = [](const Vec&) { return std::numeric_limits<double>::infinity(); };
    CHECK_THROWS_AS(solve_lsmc(s.fwd, make_zero_generator(), make_zero_noise_coefficient(),
                               singular, s.grid, s.noise, constant_basis()),
                    mode_error);
}
