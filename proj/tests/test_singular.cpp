#include <doctest.h>

#include <cmath>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/singular.hpp"

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

TerminalCondition infinite_terminal() {
    TerminalCondition tc;
    tc.kind = TerminalCondition::Kind::singular;
    tc.h = [](const Vec&) { return std::numeric_limits<double>::infinity(); };
    tc.in_singular_set = [](const Vec&) { return true; };
    tc.dist_to_singular_set = [](const Vec&) { return 0.0; };
    return tc;
}

double xi_closed_form(double q, double big_t, double t, double n) {
    return std::pow(q * (big_t - t) + std::pow(n, -q), -1.0 / q);
}

} // namespace

TEST_CASE("deterministic ladder h = +inf solves the truncation ODEs") {
    const std::size_t N = 64;
    Setup s = brownian_setup(N, 64, 2001, 0.0, 0.0);
    const double q = 1.0;
    const std::vector<double> levels{1.0, 2.0, 4.0};
    const std::vector<double> deltas = default_delta_schedule(1.0, 3);
    LadderResult lr = solve_singular_ladder(s.fwd, q, make_zero_noise_coefficient(),
                                            infinite_terminal(), levels, s.grid, s.noise,
                                            constant_basis(), deltas);

    SUBCASE("levels track the closed form with O(dt) error, halving under refinement") {
        double err_n64 = 0.0;
        for (std::size_t l = 0; l < levels.size(); ++l)
            for (std::size_t i = 0; i <= N; ++i)
                err_n64 = std::max(err_n64, std::abs(lr.solutions[l].y(0, i) -
                                                     xi_closed_form(q, 1.0, s.grid.node(i),
                                                                    levels[l])));
        CHECK(err_n64 <= 0.15);

        Setup s2 = brownian_setup(2 * N, 64, 2001, 0.0, 0.0);
        LadderResult lr2 = solve_singular_ladder(s2.fwd, q, make_zero_noise_coefficient(),
                                                 infinite_terminal(), levels, s2.grid,
                                                 s2.noise, constant_basis(), deltas);
        double err_n128 = 0.0;
        for (std::size_t l = 0; l < levels.size(); ++l)
            for (std::size_t i = 0; i <= 2 * N; ++i)
                err_n128 = std::max(err_n128, std::abs(lr2.solutions[l].y(0, i) -
                                                       xi_closed_form(q, 1.0, s2.grid.node(i),
                                                                      levels[l])));
        CHECK(err_n128 <= 0.62 * err_n64);
    }

    SUBCASE("ladder is exactly monotone and level gaps match the closed-form diffs") {
        CHECK(lr.monotone_fraction == 1.0);
        CHECK(lr.monotone_fraction_wide == 1.0);
        // deterministic run equals the discrete comparison ladder node by node
        CHECK(lr.hard_discrete_violations == 0);
        // and sits O(dt) above the continuous truncation formula (the implicit
        // step freezes the drift at the left endpoint)
        CHECK(lr.max_level_bound_excess > 0.0);
        CHECK(lr.max_level_bound_excess <= 0.7);
        // gap at t = 0 between levels n and n' is Xi^{n'}_0 - Xi^n_0 up to O(dt)
        const double gap01 = lr.sup_gaps[0][0]; // delta = T/8, pair (1,2)
        const double closed = xi_closed_form(q, 1.0, 0.0, 2.0) - xi_closed_form(q, 1.0, 0.0, 1.0);
        // sup over [0, T - T/8]; for q = 1 the gap grows toward T, compare there
        const double t_cut = 1.0 - deltas[0];
        const double closed_cut =
            xi_closed_form(q, 1.0, t_cut, 2.0) - xi_closed_form(q, 1.0, t_cut, 1.0);
        CHECK(gap01 >= closed - 0.05);
        CHECK(gap01 <= closed_cut + 0.1);
    }
}

TEST_CASE("ladder saturates once levels pass the bound of h") {
    const std::size_t N = 32;
    Setup s = brownian_setup(N, 1024, 2002);
    TerminalCondition tc;
    tc.kind = TerminalCondition::Kind::singular; // declared singular, actually bounded by 1
    tc.h = [](const Vec& x) { return std::max(0.0, 1.0 - std::abs(x(0))); };
    tc.in_singular_set = [](const Vec&) { return false; };
    tc.dist_to_singular_set = [](const Vec&) { return 1e9; };
    RegressionBasis basis;
    basis.family = RegressionBasis::Family::piecewise_constant;
    basis.bins = 8;
    basis.ridge_lambda = RegressionBasis::kAutoRidge;
    const std::vector<double> levels{0.5, 2.0, 4.0};
    LadderResult lr = solve_singular_ladder(s.fwd, 1.0, make_zero_noise_coefficient(), tc,
                                            levels, s.grid, s.noise, basis, {});
    // levels 2 and 4 truncate nothing: identical solutions, zero gap
    for (std::size_t p = 0; p < 64; ++p)
        for (std::size_t i = 0; i <= N; ++i)
            CHECK(lr.solutions[1].y(p, i) == lr.solutions[2].y(p, i));
    for (const auto& gaps : lr.sup_gaps) CHECK(gaps[1] == 0.0);
    CHECK(lr.monotone_fraction == 1.0);
}

TEST_CASE("a priori bound arithmetic") {
    // fabricate a one-path solution pinned at known values
    const std::size_t N = 4;
    TimeGrid grid(0.0, 1.0, N);
    BackwardSolution sol(1, N, 1);

    SUBCASE("universal bound at q = 2, T - t = 0.5 is exactly 1") {
        // node 2 has T - t = 0.5
        for (std::size_t i = 0; i <= N; ++i) sol.y(0, i) = 0.0;
        sol.y(0, 2) = 1.0;
        const BoundViolationReport rep = check_apriori_bound(sol, grid, 2.0, 100.0);
        CHECK(rep.universal_excess[2] == doctest::Approx(0.0).epsilon(1e-12));
    }
    SUBCASE("level bound at q = 1, T - t = 0.25, n = 2 is 4/3") {
        for (std::size_t i = 0; i <= N; ++i) sol.y(0, i) = 0.0;
        sol.y(0, 3) = 4.0 / 3.0 + 0.1; // node 3: T - t = 0.25
        const BoundViolationReport rep = check_apriori_bound(sol, grid, 1.0, 2.0);
        CHECK(rep.level_excess[3] == doctest::Approx(0.1).epsilon(1e-9));
        CHECK(rep.hard_violations >= 1);
    }
}

TEST_CASE("solver output respects the level bound up to the root tolerance") {
    const std::size_t N = 32;
    Setup s = brownian_setup(N, 2000, 2003, 1.0);
    TerminalCondition tc;
    tc.kind = TerminalCondition::Kind::singular;
    tc.h = [](const Vec& x) {
        const double a = std::abs(x(0));
        return a == 0.0 ? std::numeric_limits<double>::infinity() : 1.0 / a;
    };
    tc.in_singular_set = [](const Vec& x) { return x(0) == 0.0; };
    tc.dist_to_singular_set = [](const Vec& x) { return std::abs(x(0)); };
    RegressionBasis basis;
    basis.family = RegressionBasis::Family::piecewise_constant;
    basis.bins = 8;
    basis.ridge_lambda = RegressionBasis::kAutoRidge;
    const std::vector<double> levels{1.0, 4.0};
    LadderResult lr = solve_singular_ladder(s.fwd, 1.0, make_zero_noise_coefficient(), tc,
                                            levels, s.grid, s.noise, basis, {});
    CHECK(lr.hard_bound_violations == 0);   // MC tolerance covers the O(dt) overshoot
    CHECK(lr.hard_discrete_violations == 0); // exact discrete domination
    CHECK(lr.monotone_fraction == 1.0); // bin means preserve order exactly
}

TEST_CASE("ladder requires the vanishing-at-zero hypothesis and ordered levels") {
    Setup s = brownian_setup(8, 16, 2004);
    NoiseCoefficientSpec g = make_constant_noise_coefficient(1.0); // g(t,y,0) = 1 != 0
    const std::vector<double> levels{1.0, 2.0};
    CHECK_THROWS_AS(solve_singular_ladder(s.fwd, 1.0, g, infinite_terminal(), levels, s.grid,
                                          s.noise, constant_basis(), {}),
                    mode_error);
    const std::vector<double> bad{2.0, 1.0};
    CHECK_THROWS_AS(solve_singular_ladder(s.fwd, 1.0, make_zero_noise_coefficient(),
                                          infinite_terminal(), bad, s.grid, s.noise,
                                          constant_basis(), {}),
                    config_error);
}

TEST_CASE("Z-moment estimates") {
    const std::size_t N = 8;
    TimeGrid grid(0.0, 1.0, N);

    SUBCASE("Z = 0 passes every bound; kappa = 1 when g = 0") {
        BackwardSolution sol(4, N, 1); // all zeros
        const SingularEstimates est = estimate_z_moments(sol, grid, 1.0, 0.0, 0.0);
        CHECK(est.kappa == 1.0);
        CHECK(est.z_weighted_bound == doctest::Approx(8.0)); // (8+0)/1 * 1^{-2}
        CHECK(est.z_weighted_moment == 0.0);
        CHECK(est.all_pass);
    }
    SUBCASE("kappa and the bound formulas track the declared constants") {
        BackwardSolution sol(4, N, 1);
        const SingularEstimates est = estimate_z_moments(sol, grid, 2.0, 3.0, 0.5);
        CHECK(est.kappa == doctest::Approx((1.0 + 3.0) / 0.5)); // (1 + Kg T)/(1 - eps)
        CHECK(est.z_weighted_bound ==
              doctest::Approx((8.0 + 3.0) / 0.5 * std::pow(2.0, -1.0)));
        CHECK(est.kappa >= 1.0);
    }
    SUBCASE("a large fabricated Z fails the truncated bound") {
        BackwardSolution sol(4, N, 1);
        for (std::size_t p = 0; p < 4; ++p)
            for (std::size_t i = 0; i < N; ++i) sol.z(p, i, 0) = 50.0;
        const SingularEstimates est = estimate_z_moments(sol, grid, 1.0, 0.0, 0.0);
        CHECK_FALSE(est.all_pass);
    }
}

TEST_CASE("floor-gap reports") {
    const std::size_t N = 32;

    SUBCASE("h >= 1/m already: the floor changes nothing, gap is exactly zero") {
        Setup s = brownian_setup(N, 512, 2005);
        TerminalCondition tc;
        tc.h = [](const Vec& x) { return 1.0 + std::max(0.0, 1.0 - std::abs(x(0))); };
        const FloorGapReport rep =
            floor_ladder_gap(s.fwd, 1.0, make_zero_noise_coefficient(), tc, 4.0, 2.0, s.grid,
                             s.noise, constant_basis());
        CHECK(rep.sup_gap_sq == 0.0);
        CHECK(rep.pass);
    }

    SUBCASE("h = 0: closed forms give gap^2 = 1/m^2 at T, within the bound") {
        Setup s = brownian_setup(N, 128, 2006, 0.0, 0.0);
        TerminalCondition tc;
        tc.h = [](const Vec&) { return 0.0; };
        for (double m : {2.0, 4.0}) {
            const FloorGapReport rep =
                floor_ladder_gap(s.fwd, 1.0, make_zero_noise_coefficient(), tc, 1.0, m,
                                 s.grid, s.noise, constant_basis());
            // Y^n = 0; Ytilde is the ODE from 1/m, largest at the terminal node
            CHECK(rep.sup_gap_sq == doctest::Approx(1.0 / (m * m)).epsilon(1e-10));
            CHECK(rep.bound == doctest::Approx(std::exp(1.0) / (m * m)).epsilon(1e-12));
            CHECK(rep.pass);
        }
    }

    SUBCASE("gap scales like 1/m^2 (log-log regression oracle)") {
        Setup s = brownian_setup(N, 4000, 2007);
        TerminalCondition tc;
        tc.h = [](const Vec& x) { return std::max(0.0, 1.0 - std::abs(x(0))); };
        RegressionBasis basis;
        basis.family = RegressionBasis::Family::piecewise_constant;
        basis.bins = 8;
        basis.ridge_lambda = RegressionBasis::kAutoRidge;
        std::vector<double> log_m, log_gap;
        for (double m : {2.0, 4.0, 8.0}) {
            const FloorGapReport rep = floor_ladder_gap(
                s.fwd, 1.0, make_zero_noise_coefficient(), tc, 2.0, m, s.grid, s.noise, basis);
            CHECK(rep.pass);
            log_m.push_back(std::log(m));
            log_gap.push_back(std::log(rep.sup_gap_sq));
        }
        const double slope = fit_slope(log_m, log_gap);
        CHECK(slope <= -1.5); // ~ -2 for the 1/m^2 law
    }
}

TEST_CASE("terminal behavior report") {
    const std::size_t N = 64;

    SUBCASE("bounded Lipschitz h: mean-square gap shrinks like delta") {
        Setup s = brownian_setup(N, 4000, 2008);
        TerminalCondition tc;
        tc.kind = TerminalCondition::Kind::singular; // API expects ladder input
        tc.h = [](const Vec& x) { return std::max(0.0, 1.0 - std::abs(x(0))); };
        tc.in_singular_set = [](const Vec&) { return false; };
        tc.dist_to_singular_set = [](const Vec&) { return 1e9; };
        RegressionBasis basis;
        basis.family = RegressionBasis::Family::piecewise_constant;
        basis.bins = 16;
        basis.ridge_lambda = RegressionBasis::kAutoRidge;
        const std::vector<double> levels{2.0};
        LadderResult lr = solve_singular_ladder(s.fwd, 1.0, make_zero_noise_coefficient(), tc,
                                                levels, s.grid, s.noise, basis, {});
        const std::vector<double> deltas{0.25, 0.125, 0.0625};
        const TraceReport rep =
            terminal_behavior(lr, tc, s.fwd, s.grid, deltas, true, 0.0, -1.0);
        REQUIRE(rep.rows.size() == 3);
        // regular-case oracle: E(h(X_T) - E[h|F_{T-d}])^2 <= Lip^2 d (sigma = 1);
        // allow 4x for the solver noise and drift of the power-law step
        for (const auto& row : rep.rows) {
            CHECK(row.n_on_k == 4000);
            CHECK(row.ms_gap_on_k <= 4.0 * row.delta + 9.0 * sqr(lr.pooled_residual));
        }
        CHECK(rep.rows[2].ms_gap_on_k <= rep.rows[0].ms_gap_on_k);
        CHECK(rep.within_theorem_hypotheses);
    }

    SUBCASE("h = +inf: growth ratio approaches 1 as the level grows") {
        Setup s = brownian_setup(N, 64, 2009, 0.0, 0.0);
        const std::vector<double> levels{4.0, 64.0, 256.0};
        LadderResult lr = solve_singular_ladder(s.fwd, 1.0, make_zero_noise_coefficient(),
                                                infinite_terminal(), levels, s.grid, s.noise,
                                                constant_basis(), {});
        const std::vector<double> deltas{0.125};
        const TraceReport rep =
            terminal_behavior(lr, infinite_terminal(), s.fwd, s.grid, deltas, false);
        REQUIRE(rep.rows.size() == 1);
        // oracle: the level-n discrete ladder value at T - delta, times delta
        auto oracle_ratio = [&](double n) {
            const std::vector<double> xi = discrete_comparison_ladder(1.0, n, s.grid);
            return xi[N - 8] * 0.125;
        };
        CHECK(rep.rows[0].n_near_s == 64);
        CHECK(rep.rows[0].growth_ratio == doctest::Approx(oracle_ratio(256.0)).epsilon(1e-8));
        // the truncation deficit closes with the level (discretization keeps
        // the fixed-dt envelope above 1)
        CHECK(std::abs(oracle_ratio(64.0) - 1.0) < std::abs(oracle_ratio(4.0) - 1.0));
        // every path sits on S, none on a compact away from it
        CHECK(rep.rows[0].n_on_k == 0);
        CHECK(rep.insufficient_samples == false);
    }
}
