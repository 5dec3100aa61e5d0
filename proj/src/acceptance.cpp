#include "bdsde/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "bdsde/errors.hpp"
#include "bdsde/field.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/report.hpp"
#include "bdsde/scenario.hpp"
#include "bdsde/singular.hpp"
#include "bdsde/solver.hpp"

namespace bdsde {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Bundle {
    Scenario sc;
    TimeGrid grid;
    DualBrownianPaths noise;
    SdeCoefficients sde;
    ForwardPaths fwd;
    GeneratorSpec f;
    NoiseCoefficientSpec g;
    TerminalCondition tc;
    SolverOptions opts;
};

struct Pass {
    const AcceptanceOptions* opts = nullptr;
    fs::path dir;
    std::size_t workers = 1;
    json constants = json::object();
    // ladders reused across criteria within one pass
    std::optional<LadderResult> inv_abs_ladder;
    std::optional<TimeGrid> inv_abs_grid;
    std::optional<LadderResult> inf_ladder;
    std::optional<TimeGrid> inf_grid;
};

Scenario load_scenario(const Pass& ctx, const std::string& file) {
    Scenario sc = parse_scenario_file(ctx.opts->scenario_dir / file);
    if (ctx.opts->seed_override) sc.seed = *ctx.opts->seed_override;
    return sc;
}

Bundle make_bundle(const Pass& ctx, Scenario sc, std::uint64_t b_index = 0) {
    TimeGrid grid = make_grid(sc);
    DualBrownianPaths noise(grid, sc.d, sc.m, sc.n_paths, sc.seed, ctx.workers, b_index);
    SdeCoefficients sde = make_sde(sc);
    Vec x0(static_cast<Eigen::Index>(sc.x0.size()));
    for (std::size_t i = 0; i < sc.x0.size(); ++i) x0(static_cast<Eigen::Index>(i)) = sc.x0[i];
    ForwardPaths fwd = euler_maruyama(sde, grid.t_start(), x0, grid, noise, ctx.workers);
    GeneratorSpec f = make_generator(sc);
    NoiseCoefficientSpec g = make_noise_coefficient(sc);
    TerminalCondition tc = make_terminal(sc);
    SolverOptions opts = make_solver_options(sc, ctx.workers);
    return Bundle{std::move(sc), grid,         std::move(noise), sde, std::move(fwd),
                  std::move(f),  std::move(g), std::move(tc),    opts};
}

const LadderResult& inv_abs_ladder(Pass& ctx) {
    if (!ctx.inv_abs_ladder) {
        Bundle b = make_bundle(ctx, load_scenario(ctx, "singular_inv_abs.json"));
        ctx.inv_abs_grid = b.grid;
        ctx.inv_abs_ladder = solve_singular_ladder(b.fwd, b.sc.f_q, b.g, b.tc, b.sc.levels,
                                                   b.grid, b.noise, b.sc.basis,
                                                   b.sc.delta_schedule, b.opts);
    }
    return *ctx.inv_abs_ladder;
}

const LadderResult& inf_ladder(Pass& ctx) {
    if (!ctx.inf_ladder) {
        Bundle b = make_bundle(ctx, load_scenario(ctx, "trace_inf.json"));
        ctx.inf_grid = b.grid;
        ctx.inf_ladder = solve_singular_ladder(b.fwd, b.sc.f_q, b.g, b.tc, b.sc.levels, b.grid,
                                               b.noise, b.sc.basis, b.sc.delta_schedule,
                                               b.opts);
    }
    return *ctx.inf_ladder;
}

std::string fmt(double v) { return format17(v); }

// ---- criterion 1: backward-integral oracle -------------------------------

CriterionResult c1_backward_oracle(Pass& ctx) {
    CriterionResult r{1, "backward-integral oracle (xi=0, f=0, g=1)"};
    Bundle b = make_bundle(ctx, load_scenario(ctx, "oracle_g1.json"));
    BackwardSolution sol = solve_lsmc(b.fwd, b.f, b.g, b.tc, b.grid, b.noise, b.sc.basis,
                                      b.opts);
    const std::size_t N = b.grid.n_steps();
    double err_y = 0.0, err_z = 0.0;
    for (std::size_t p = 0; p < sol.n_paths(); ++p) {
        for (std::size_t i = 0; i <= N; ++i) {
            const double ref = b.noise.b(N, 0) - b.noise.b(i, 0);
            err_y = std::max(err_y, std::abs(sol.y(p, i) - ref));
        }
        for (std::size_t i = 0; i < N; ++i)
            err_z = std::max(err_z, std::abs(sol.z(p, i, 0)));
    }
    r.pass = err_y <= 1e-10 && err_z <= 1e-10;
    r.detail = "max|Y-(B_T-B_t)|=" + fmt(err_y) + " max|Z|=" + fmt(err_z) + " (tol 1e-10)";
    write_solution_csv(ctx.dir / "c01_solution.csv", sol, b.grid);
    return r;
}

// ---- criterion 2: deterministic singular oracle --------------------------

double xi_constant_error(Pass& ctx, std::size_t n_steps) {
    Scenario sc = load_scenario(ctx, "xi_constant_powerlaw.json");
    sc.n_steps = n_steps;
    Bundle b = make_bundle(ctx, std::move(sc));
    BackwardSolution sol = solve_lsmc(b.fwd, b.f, b.g, b.tc, b.grid, b.noise, b.sc.basis,
                                      b.opts);
    // Xi^m_0 = (q T + m^{-q})^{-1/q} with (q, T, m) = (1, 1, 2) -> 2/3
    const double exact = 2.0 / 3.0;
    double err = 0.0;
    for (std::size_t p = 0; p < sol.n_paths(); ++p)
        err = std::max(err, std::abs(sol.y(p, 0) - exact));
    if (n_steps == 256) write_solution_csv(ctx.dir / "c02_solution_n256.csv", sol, b.grid);
    return err;
}

CriterionResult c2_deterministic_oracle(Pass& ctx) {
    CriterionResult r{2, "deterministic singular oracle Xi^m (q=1, T=1, m=2)"};
    const double e256 = xi_constant_error(ctx, 256);
    const double e512 = xi_constant_error(ctx, 512);
    r.pass = e256 <= 0.01 && e512 <= 0.6 * e256;
    r.detail = "|Y_0-2/3|: N=256 -> " + fmt(e256) + ", N=512 -> " + fmt(e512) +
               " (need <=0.01 and halving)";
    return r;
}

// ---- criterion 3: a priori bound ------------------------------------------

CriterionResult c3_apriori_bound(Pass& ctx) {
    CriterionResult r{3, "a priori bound vs (q(T-t)+n^-q)^{-1/q} and its discrete analogue"};
    // Monte-Carlo scenarios carry the stated tol = root tol + 3x residual and
    // are checked against the closed formula. Deterministic oracles have zero
    // residual while the implicit scheme sits O(dt) above the closed formula
    // near T, so for them the provable check is domination by the discrete
    // comparison ladder (same recursion from the deterministic terminal);
    // their formula excess is still reported.
    std::size_t hard_mc = 0, hard_disc = 0;
    double worst_mc = -1e300, worst_disc = -1e300, reported_formula = -1e300;

    {
        Bundle b = make_bundle(ctx, load_scenario(ctx, "xi_constant_powerlaw.json"));
        BackwardSolution sol = solve_lsmc(b.fwd, b.f, b.g, b.tc, b.grid, b.noise, b.sc.basis,
                                          b.opts);
        const auto rep = check_apriori_bound(sol, b.grid, b.sc.f_q, 2.0, b.opts.root_tol);
        hard_disc += rep.hard_discrete_violations;
        worst_disc = std::max(worst_disc, rep.max_discrete_excess);
        reported_formula = std::max(reported_formula, rep.max_level_excess);
    }
    {
        Bundle b = make_bundle(ctx, load_scenario(ctx, "floor_gap.json"));
        const TerminalCondition tc2 = truncate_terminal(b.tc, b.sc.levels.at(0));
        BackwardSolution sol = solve_lsmc(b.fwd, b.f, b.g, tc2, b.grid, b.noise, b.sc.basis,
                                          b.opts);
        const auto rep =
            check_apriori_bound(sol, b.grid, b.sc.f_q, b.sc.levels.at(0), b.opts.root_tol);
        hard_mc += rep.hard_violations;
        worst_mc = std::max(worst_mc, rep.max_level_excess);
        hard_disc += rep.hard_discrete_violations;
        worst_disc = std::max(worst_disc, rep.max_discrete_excess);
    }
    {
        const LadderResult& lr = inv_abs_ladder(ctx);
        hard_mc += lr.hard_bound_violations;
        worst_mc = std::max(worst_mc, lr.max_level_bound_excess);
        hard_disc += lr.hard_discrete_violations;
        worst_disc = std::max(worst_disc, lr.max_discrete_excess);
        write_ladder_csv(ctx.dir / "c03_ladder_inv_abs.csv", lr, *ctx.inv_abs_grid);
    }
    {
        const LadderResult& lr = inf_ladder(ctx);
        hard_disc += lr.hard_discrete_violations;
        worst_disc = std::max(worst_disc, lr.max_discrete_excess);
        reported_formula = std::max(reported_formula, lr.max_level_bound_excess);
        write_ladder_csv(ctx.dir / "c03_ladder_inf.csv", lr, *ctx.inf_grid);
    }
    r.pass = hard_mc == 0 && hard_disc == 0;
    r.detail = "formula violations (MC)=" + std::to_string(hard_mc) + " worst=" +
               fmt(worst_mc) + "; discrete-ladder violations=" + std::to_string(hard_disc) +
               " worst=" + fmt(worst_disc) +
               "; deterministic formula overshoot (reported)=" + fmt(reported_formula);
    return r;
}

// ---- criterion 4: ladder monotonicity -------------------------------------

CriterionResult c4_ladder_monotonicity(Pass& ctx) {
    CriterionResult r{4, "ladder monotonicity under coupled noise"};
    const LadderResult& a = inv_abs_ladder(ctx);
    const LadderResult& b = inf_ladder(ctx);
    r.pass = a.monotone_fraction >= 0.999 && a.monotone_fraction_wide == 1.0 &&
             b.monotone_fraction >= 0.999 && b.monotone_fraction_wide == 1.0;
    r.detail = "inv_abs: frac=" + fmt(a.monotone_fraction) + "/wide=" +
               fmt(a.monotone_fraction_wide) + " inf: frac=" + fmt(b.monotone_fraction) +
               "/wide=" + fmt(b.monotone_fraction_wide);
    return r;
}

// ---- criterion 5: comparison principle ------------------------------------

CriterionResult c5_comparison(Pass& ctx) {
    CriterionResult r{5, "comparison principle (shift by 1 exact; coupled pairs ordered)"};
    Bundle b = make_bundle(ctx, load_scenario(ctx, "comparison_shift.json"));
    BackwardSolution y1 = solve_lsmc(b.fwd, b.f, b.g, b.tc, b.grid, b.noise, b.sc.basis,
                                     b.opts);
    TerminalCondition tc2 = b.tc;
    auto h1 = b.tc.h;
    tc2.h = [h1](const Vec& x) { return h1(x) + 1.0; };
    BackwardSolution y2 = solve_lsmc(b.fwd, b.f, b.g, tc2, b.grid, b.noise, b.sc.basis, b.opts);

    double max_dev = 0.0;
    for (std::size_t p = 0; p < y1.n_paths(); ++p)
        for (std::size_t i = 0; i <= y1.n_steps(); ++i)
            max_dev = std::max(max_dev, std::abs(y2.y(p, i) - y1.y(p, i) - 1.0));

    const LadderResult& lr = inv_abs_ladder(ctx);
    const double tol = lr.monotonicity_tol;
    const ComparisonReport rep = compare_coupled(lr.solutions[1], lr.solutions[2], tol);

    r.pass = max_dev <= 1e-10 && rep.n_violations == 0 && rep.xi_ordering_ok;
    r.detail = "max|Y2-Y1-1|=" + fmt(max_dev) + "; power-law pair violations=" +
               std::to_string(rep.n_violations) + " at tol=" + fmt(tol);
    write_solution_csv(ctx.dir / "c05_shifted.csv", y2, b.grid);
    return r;
}

// ---- criterion 6: Picard contraction ---------------------------------------

CriterionResult c6_picard(Pass& ctx) {
    CriterionResult r{6, "Picard contraction (eps=0.25: ratio <= 0.725) and LSMC agreement"};
    Bundle b = make_bundle(ctx, load_scenario(ctx, "picard_lipschitz.json"));
    auto [psol, trace] = picard_solve(b.fwd, b.f, b.g, b.tc, b.grid, b.noise, b.sc.basis,
                                      make_picard_config(b.sc), b.opts);
    ctx.constants["picard_alpha"] = trace.alpha;
    ctx.constants["picard_eta"] = trace.eta;

    bool ratios_ok = trace.d.size() >= 3;
    double worst_ratio = 0.0;
    for (std::size_t k = 2; k < trace.d.size(); ++k) {
        if (trace.d[k - 1] == 0.0) continue;
        const double ratio = trace.d[k] / trace.d[k - 1];
        worst_ratio = std::max(worst_ratio, ratio);
        if (ratio > 0.625 + 0.1) ratios_ok = false;
    }

    BackwardSolution dsol = solve_lsmc(b.fwd, b.f, b.g, b.tc, b.grid, b.noise, b.sc.basis,
                                       b.opts);
    double gap_sq = 0.0;
    for (std::size_t i = 0; i <= b.grid.n_steps(); ++i)
        gap_sq += pairwise_sum(psol.n_paths(), [&](std::size_t p) {
                      return sqr(psol.y(p, i) - dsol.y(p, i));
                  }) /
                  static_cast<double>(psol.n_paths());
    const double gap = std::sqrt(gap_sq / static_cast<double>(b.grid.n_steps() + 1));
    const double combined = 3.0 * (psol.pooled_residual() + dsol.pooled_residual());

    r.pass = ratios_ok && gap <= combined && !trace.non_contraction_warning;
    r.detail = "sweeps=" + std::to_string(trace.sweeps) + " worst ratio=" + fmt(worst_ratio) +
               " gap=" + fmt(gap) + " (allow " + fmt(combined) + ")";

    CsvFile csv(ctx.dir / "c06_picard_trace.csv", {"sweep", "weighted_gap"});
    for (std::size_t k = 0; k < trace.d.size(); ++k)
        csv.row({std::to_string(k + 1), fmt(trace.d[k])});
    write_solution_csv(ctx.dir / "c06_solution.csv", psol, b.grid);
    return r;
}

// ---- criterion 7: Z-moment bounds ------------------------------------------

CriterionResult c7_z_moments(Pass& ctx) {
    CriterionResult r{7, "Z-moment bounds (weighted and truncated)"};
    const LadderResult& lr = inv_abs_ladder(ctx);
    const TimeGrid& grid = *ctx.inv_abs_grid;
    const SingularEstimates est = estimate_z_moments(lr.top(), grid, lr.q, 0.0, 0.0);
    ctx.constants["kappa"] = est.kappa;
    ctx.constants["z_weighted_bound"] = est.z_weighted_bound;

    r.pass = est.all_pass && est.kappa == 1.0; // g = 0 here, so kappa must be 1
    r.detail = "weighted=" + fmt(est.z_weighted_moment) + " <= " + fmt(est.z_weighted_bound) +
               "+3SE; truncated rows=" + std::to_string(est.truncated.size()) +
               (est.all_pass ? " all pass" : " FAIL");

    CsvFile csv(ctx.dir / "c07_zmoments.csv", {"t", "moment", "se", "bound", "pass"});
    for (const auto& row : est.truncated)
        csv.row({fmt(row.t), fmt(row.moment), fmt(row.se), fmt(row.bound),
                 row.pass ? "1" : "0"});
    return r;
}

// ---- criterion 8: floor-gap bound ------------------------------------------

CriterionResult c8_floor_gap(Pass& ctx) {
    CriterionResult r{8, "floor-gap Gronwall bound e^{(1+Kg)T}/m^2"};
    Bundle b = make_bundle(ctx, load_scenario(ctx, "floor_gap.json"));
    bool all = true;
    std::ostringstream os;
    CsvFile csv(ctx.dir / "c08_floor_gaps.csv",
                {"m", "sup_gap_sq", "se", "bound", "pass"});
    for (double m : b.sc.floors) {
        const FloorGapReport rep = floor_ladder_gap(b.fwd, b.sc.f_q, b.g, b.tc,
                                                    b.sc.levels.at(0), m, b.grid, b.noise,
                                                    b.sc.basis, b.opts);
        all = all && rep.pass;
        os << " m=" << m << ": " << fmt(rep.sup_gap_sq) << "<=" << fmt(rep.bound);
        csv.row({fmt(m), fmt(rep.sup_gap_sq), fmt(rep.se_at_sup), fmt(rep.bound),
                 rep.pass ? "1" : "0"});
    }
    r.pass = all;
    r.detail = os.str();
    return r;
}

// ---- criterion 9: weak-form residual ---------------------------------------

CriterionResult c9_weak_form(Pass& ctx) {
    CriterionResult r{9, "weak-form residual refinement slopes"};
    std::vector<WeakFormRow> rows;

    // (a) heat scenario, analytic field, joint refinement
    Scenario heat = load_scenario(ctx, "heat_field.json");
    const double w = heat.h_width;
    std::vector<double> log_dt, log_res;
    const SdeCoefficients sde = make_sde(heat);
    const WeakFormOperator ops = WeakFormOperator::for_constant_coefficients(sde);
    const GeneratorSpec f0 = make_generator(heat);
    const NoiseCoefficientSpec g0 = make_noise_coefficient(heat);
    for (int level = 0; level < 4; ++level) {
        const std::size_t n_steps = 32u << level;
        const std::size_t n_x = (48u << level) + 1;
        TimeGrid grid(0.0, heat.t_end, n_steps);
        SpatialGrid box{heat.box.lo, heat.box.hi, n_x};
        auto u_fn = [w, T = heat.t_end](double t, double x) {
            const double v = w * w + (T - t);
            return w / std::sqrt(v) * std::exp(-0.5 * x * x / v);
        };
        auto grad_fn = [w, T = heat.t_end, u_fn](double t, double x) {
            const double v = w * w + (T - t);
            return -x / v * u_fn(t, x);
        };
        RandomField field = RandomField::from_function(grid, box, u_fn, grad_fn);
        const SpaceTimeTestFunction psi = affine_in_time(make_bump(-2.0, 2.0), 1.0, 0.5);
        const WeakFormResidual res = weak_form_residual(field, psi, ops, f0, g0, 0.25, 0.75);
        log_dt.push_back(std::log(grid.dt()));
        log_res.push_back(std::log(std::max(res.residual, 1e-300)));
        rows.push_back({"heat_residual", 0.25, 0.75, res.residual, level});
    }
    const double heat_slope = fit_slope(log_dt, log_res);

    // (b) g = 1 scenario, built fields, time refinement
    Scenario gsc = load_scenario(ctx, "g1_field.json");
    const SdeCoefficients gsde = make_sde(gsc);
    const WeakFormOperator gops = WeakFormOperator::for_constant_coefficients(gsde);
    const GeneratorSpec gf = make_generator(gsc);
    const NoiseCoefficientSpec gg = make_noise_coefficient(gsc);
    const TerminalCondition gtc = make_terminal(gsc);
    std::vector<double> g_log_dt, g_log_res, g_avg;
    for (int level = 0; level < 4; ++level) {
        const std::size_t n_steps = 32u << level;
        TimeGrid grid(0.0, gsc.t_end, n_steps);
        FieldBuildConfig fc;
        fc.w_budget = gsc.w_budget;
        fc.basis = gsc.basis;
        fc.solver = make_solver_options(gsc, ctx.workers);
        std::vector<double> res_b;
        for (std::size_t bi = 0; bi < gsc.n_b; ++bi) {
            RandomField field = build_field(gsde, gf, gg, gtc, grid, gsc.box, gsc.seed, bi, fc);
            const SpaceTimeTestFunction psi =
                quadratic_in_time(make_bump(-0.9, 0.9), 1.0, 0.5, 1.0);
            const WeakFormResidual res =
                weak_form_residual(field, psi, gops, gf, gg, 0.25, 0.75);
            res_b.push_back(std::abs(res.residual));
        }
        const double avg = mean(res_b);
        g_avg.push_back(avg);
        g_log_dt.push_back(std::log(grid.dt()));
        g_log_res.push_back(std::log(std::max(avg, 1e-300)));
        rows.push_back({"g1_residual_avg", 0.25, 0.75, avg, level});
    }
    const double g_slope = fit_slope(g_log_dt, g_log_res);
    const bool g_decreasing = g_avg.back() <= 0.6 * g_avg.front();

    r.pass = heat_slope >= 0.8 && g_slope >= 0.25 && g_decreasing;
    r.detail = "heat slope=" + fmt(heat_slope) + " (need >=0.8); g1 slope=" + fmt(g_slope) +
               " final/initial=" + fmt(g_avg.back() / g_avg.front());
    write_weakform_csv(ctx.dir / "c09_weakform.csv", rows);
    return r;
}

// ---- criterion 10: terminal trace ------------------------------------------

CriterionResult c10_terminal_trace(Pass& ctx) {
    CriterionResult r{10, "terminal trace (bounded target; singular divergence)"};

    // (a) bounded h against int h phi
    Scenario bsc = load_scenario(ctx, "trace_bounded.json");
    const SdeCoefficients bsde = make_sde(bsc);
    const GeneratorSpec bf = make_generator(bsc);
    const NoiseCoefficientSpec bg = make_noise_coefficient(bsc);
    const TerminalCondition btc = make_terminal(bsc);
    TimeGrid bgrid = make_grid(bsc);
    FieldBuildConfig bfc;
    bfc.w_budget = bsc.w_budget;
    bfc.basis = bsc.basis;
    bfc.solver = make_solver_options(bsc, ctx.workers);
    std::vector<RandomField> fields;
    for (std::size_t bi = 0; bi < bsc.n_b; ++bi)
        fields.push_back(build_field(bsde, bf, bg, btc, bgrid, bsc.box, bsc.seed, bi, bfc));
    const SpatialTestFunction phi = make_bump(bsc.phi_lo, bsc.phi_hi,
                                              std::numeric_limits<double>::infinity());
    const TerminalTraceResult tr = terminal_trace(fields, phi, btc.h, true);
    const std::size_t node = bgrid.n_steps() - 4; // t = T - 4 dt
    const double quad_allow = std::abs(tr.target_lattice - tr.target);
    const double gap_a = std::abs(tr.curve[node].integral - tr.target);
    const double tol_a = quad_allow + 3.0 * tr.curve[node].se;
    const bool pass_a = gap_a <= tol_a;
    write_trace_csv(ctx.dir / "c10_trace_bounded.csv", tr);

    // (b) h = +inf: divergence tracking at the top ladder level
    Scenario isc = load_scenario(ctx, "trace_inf.json");
    const SdeCoefficients isde = make_sde(isc);
    const GeneratorSpec fi = make_generator(isc);
    const NoiseCoefficientSpec gi = make_noise_coefficient(isc);
    const TerminalCondition tci = make_terminal(isc);
    TimeGrid igrid = make_grid(isc);
    FieldBuildConfig ifc;
    ifc.w_budget = isc.w_budget;
    ifc.basis = isc.basis;
    ifc.solver = make_solver_options(isc, ctx.workers);
    const double top = isc.levels.back();
    const TerminalCondition tci_top = truncate_terminal(tci, top);
    RandomField ifield = build_field(isde, fi, gi, tci_top, igrid, isc.box, isc.seed, 0, ifc);
    const SpatialTestFunction iphi = make_bump(isc.phi_lo, isc.phi_hi, 0.0);
    std::vector<RandomField> one;
    one.push_back(std::move(ifield));
    const TerminalTraceResult itr = terminal_trace(one, iphi, tci.h, false, isc.f_q);
    bool pass_b = true;
    double worst_ratio_dev = 0.0;
    for (std::size_t i = 0; i < itr.curve.size(); ++i) {
        const double t = itr.curve[i].t;
        if (t < isc.t_end / 2.0 || t > isc.t_end - 4.0 * igrid.dt() + 1e-12) continue;
        const double ratio = itr.curve[i].integral / itr.divergence_ref[i];
        worst_ratio_dev = std::max(worst_ratio_dev, std::abs(ratio - 1.0));
        if (std::abs(ratio - 1.0) > 0.10) pass_b = false;
    }
    write_trace_csv(ctx.dir / "c10_trace_inf.csv", itr);

    r.pass = pass_a && pass_b;
    r.detail = "bounded gap=" + fmt(gap_a) + " (tol " + fmt(tol_a) + "); singular worst |ratio-1|=" +
               fmt(worst_ratio_dev) + " (allow 0.10)";
    return r;
}

// ---- criterion 11: Malliavin identity --------------------------------------

CriterionResult c11_malliavin(Pass& ctx) {
    CriterionResult r{11, "Malliavin integration-by-parts identity (constant coefficients)"};
    Bundle b = make_bundle(ctx, load_scenario(ctx, "linear_malliavin.json"));
    BackwardSolution sol = solve_lsmc(b.fwd, b.f, b.g, b.tc, b.grid, b.noise, b.sc.basis,
                                      b.opts);
    const SpatialTestFunction theta = make_bump(-2.0, 2.0);
    const MalliavinCheckResult res =
        malliavin_identity_check(sol, b.fwd, b.sde, theta, b.grid, 0.25);
    r.pass = res.pass;
    r.detail = "lhs=" + fmt(res.lhs) + " rhs=" + fmt(res.rhs) + " gap=" + fmt(res.gap) +
               " 3SE=" + fmt(3.0 * res.se);
    CsvFile csv(ctx.dir / "c11_malliavin.csv", {"lhs", "rhs", "gap", "se"});
    csv.row({fmt(res.lhs), fmt(res.rhs), fmt(res.gap), fmt(res.se)});
    return r;
}

std::vector<CriterionResult> run_pass(Pass& ctx) {
    fs::create_directories(ctx.dir);
    std::vector<CriterionResult> out;
    const auto timed = [&](auto&& fn) {
        const auto start = std::chrono::steady_clock::now();
        CriterionResult r = fn(ctx);
        r.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                             .count();
        out.push_back(std::move(r));
    };
    timed(c1_backward_oracle);
    timed(c2_deterministic_oracle);
    timed(c3_apriori_bound);
    timed(c4_ladder_monotonicity);
    timed(c5_comparison);
    timed(c6_picard);
    timed(c7_z_moments);
    timed(c8_floor_gap);
    timed(c9_weak_form);
    timed(c10_terminal_trace);
    timed(c11_malliavin);
    return out;
}

// byte comparison of the CSV sets of two artifact directories
bool csv_sets_identical(const fs::path& a, const fs::path& b, std::string& why) {
    std::vector<fs::path> files;
    for (const auto& e : fs::directory_iterator(a))
        if (e.path().extension() == ".csv") files.push_back(e.path().filename());
    std::sort(files.begin(), files.end());
    std::size_t matched = 0;
    for (const auto& name : files) {
        std::ifstream fa(a / name, std::ios::binary);
        std::ifstream fb(b / name, std::ios::binary);
        if (!fb) {
            why = "missing " + (b / name).string();
            return false;
        }
        std::stringstream sa, sb;
        sa << fa.rdbuf();
        sb << fb.rdbuf();
        if (sa.str() != sb.str()) {
            why = "differs: " + name.string();
            return false;
        }
        ++matched;
    }
    why = std::to_string(matched) + " files byte-identical";
    return true;
}

} // namespace

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opts) {
    Pass main_pass;
    main_pass.opts = &opts;
    main_pass.dir = opts.out_dir / "artifacts";
    main_pass.workers = opts.n_workers;

    const auto t0 = std::chrono::steady_clock::now();
    std::vector<CriterionResult> results = run_pass(main_pass);

    if (!opts.skip_reproducibility) {
        CriterionResult r12{12, "reproducibility (re-run and 1-vs-8 workers byte-identical)"};
        const auto start = std::chrono::steady_clock::now();

        Pass rerun;
        rerun.opts = &opts;
        rerun.dir = opts.out_dir / "repro_rerun";
        rerun.workers = opts.n_workers;
        run_pass(rerun);

        Pass wide;
        wide.opts = &opts;
        wide.dir = opts.out_dir / "repro_workers8";
        wide.workers = 8;
        run_pass(wide);

        std::string why_a, why_b;
        const bool same_a = csv_sets_identical(main_pass.dir, rerun.dir, why_a);
        const bool same_b = csv_sets_identical(main_pass.dir, wide.dir, why_b);
        r12.pass = same_a && same_b;
        r12.detail = "rerun: " + why_a + "; workers8: " + why_b;
        r12.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back(std::move(r12));
    }

    // verify manifest
    json manifest;
    manifest["tool"] = "bdsde_cli verify";
    manifest["version"] = "0.1.0";
    manifest["compiler"] = __VERSION__;
    manifest["workers"] = opts.n_workers;
    manifest["seed_override"] = opts.seed_override ? json(*opts.seed_override) : json();
    manifest["derived_constants"] = main_pass.constants;
    json checks = json::array();
    bool all = true;
    for (const auto& r : results) {
        checks.push_back({{"id", r.id},
                          {"name", r.name},
                          {"pass", r.pass},
                          {"detail", r.detail},
                          {"wall_seconds", r.wall_seconds}});
        all = all && r.pass;
    }
    manifest["checks"] = checks;
    manifest["all_pass"] = all;
    json hashes = json::object();
    for (const auto& e : fs::directory_iterator(opts.scenario_dir))
        if (e.path().extension() == ".json") {
            const Scenario sc = parse_scenario_file(e.path());
            hashes[e.path().filename().string()] = sc.hash();
        }
    manifest["scenario_hashes"] = hashes;
    manifest["total_wall_seconds"] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fs::create_directories(opts.out_dir);
    write_json(opts.out_dir / "verify_manifest.json", manifest);

    return results;
}

} // namespace bdsde
