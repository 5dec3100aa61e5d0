#include "bdsde/singular.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"

namespace bdsde {

namespace {

double universal_bound(double q, double time_to_go) {
    if (time_to_go <= 0.0) return std::numeric_limits<double>::infinity();
    return std::pow(q * time_to_go, -1.0 / q);
}

double level_bound(double q, double time_to_go, double n) {
    return std::pow(q * std::max(time_to_go, 0.0) + std::pow(n, -q), -1.0 / q);
}

} // namespace

std::vector<double> discrete_comparison_ladder(double q, double level, const TimeGrid& grid,
                                               double root_tol) {
    const GeneratorSpec f = make_power_law_generator(q);
    const Vec x = Vec::Zero(1), z = Vec::Zero(1);
    std::vector<double> y(grid.n_steps() + 1);
    y[grid.n_steps()] = level;
    for (std::size_t i = grid.n_steps(); i-- > 0;)
        y[i] = solve_implicit_step(f, grid.node(i), x, z, y[i + 1], grid.dt(), root_tol);
    return y;
}

BoundViolationReport check_apriori_bound(const BackwardSolution& sol, const TimeGrid& grid,
                                         double q, double level_n, double root_tol) {
    if (!(q > 0)) throw config_error("check_apriori_bound: q must be > 0");
    const std::size_t N = sol.n_steps();
    const std::size_t P = sol.n_paths();
    BoundViolationReport rep;
    rep.tol = root_tol + 3.0 * sol.pooled_residual();
    rep.discrete_tol =
        2.0 * static_cast<double>(N) * root_tol + 3.0 * sol.pooled_residual();
    const std::vector<double> xi_disc = discrete_comparison_ladder(q, level_n, grid, root_tol);
    rep.universal_excess.assign(N + 1, -std::numeric_limits<double>::infinity());
    rep.level_excess.assign(N + 1, -std::numeric_limits<double>::infinity());
    rep.discrete_excess.assign(N + 1, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i <= N; ++i) {
        const double ttg = grid.t_end() - grid.node(i);
        const double ub = universal_bound(q, ttg);
        const double lb = level_bound(q, ttg, level_n);
        double ue = -std::numeric_limits<double>::infinity();
        double le = ue, de = ue;
        for (std::size_t p = 0; p < P; ++p) {
            ue = std::max(ue, sol.y(p, i) - ub);
            le = std::max(le, sol.y(p, i) - lb);
            de = std::max(de, sol.y(p, i) - xi_disc[i]);
        }
        rep.universal_excess[i] = ue;
        rep.level_excess[i] = le;
        rep.discrete_excess[i] = de;
        rep.max_universal_excess = std::max(rep.max_universal_excess, ue);
        rep.max_level_excess = std::max(rep.max_level_excess, le);
        rep.max_discrete_excess = std::max(rep.max_discrete_excess, de);
        if (le > rep.tol) ++rep.hard_violations;
        if (de > rep.discrete_tol) ++rep.hard_discrete_violations;
    }
    return rep;
}

std::vector<double> default_delta_schedule(double T, std::size_t levels) {
    std::vector<double> out(levels);
    double d = T / 8.0;
    for (std::size_t j = 0; j < levels; ++j, d *= 0.5) out[j] = d;
    return out;
}

LadderResult solve_singular_ladder(const ForwardPaths& fwd, double q,
                                   const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                                   std::span<const double> levels, const TimeGrid& grid,
                                   const DualBrownianPaths& noise, const RegressionBasis& basis,
                                   std::span<const double> delta_schedule,
                                   const SolverOptions& opts) {
    if (!g.vanishing_at_zero)
        throw mode_error("solve_singular_ladder: g(t,y,0) = 0 is required for the singular "
                         "bounds; declare vanishing_at_zero");
    if (levels.empty()) throw config_error("solve_singular_ladder: no levels");
    for (std::size_t j = 1; j < levels.size(); ++j)
        if (!(levels[j] > levels[j - 1]))
            throw config_error("solve_singular_ladder: levels must be strictly increasing");

    LadderResult lr;
    lr.q = q;
    lr.root_tol = opts.root_tol;
    lr.levels.assign(levels.begin(), levels.end());
    lr.delta_schedule.assign(delta_schedule.begin(), delta_schedule.end());
    if (lr.delta_schedule.empty()) lr.delta_schedule = default_delta_schedule(grid.t_end());

    GeneratorSpec f = make_power_law_generator(q);
    for (double n : levels) {
        const TerminalCondition tcn = truncate_terminal(tc, n);
        lr.solutions.push_back(solve_lsmc(fwd, f, g, tcn, grid, noise, basis, opts));
    }

    // pooled residual across levels sets the violation tolerance
    double rr = 0.0;
    for (const auto& s : lr.solutions) rr += sqr(s.pooled_residual());
    lr.pooled_residual = std::sqrt(rr / static_cast<double>(lr.solutions.size()));
    lr.monotonicity_tol = opts.root_tol + 3.0 * lr.pooled_residual;
    const double wide_tol = opts.root_tol + 5.0 * lr.pooled_residual;

    const std::size_t N = grid.n_steps();
    const std::size_t P = fwd.n_paths();

    std::size_t pairs = 0, ok = 0, ok_wide = 0;
    for (std::size_t j = 0; j + 1 < lr.solutions.size(); ++j) {
        const auto& lo = lr.solutions[j];
        const auto& hi = lr.solutions[j + 1];
        for (std::size_t p = 0; p < P; ++p)
            for (std::size_t i = 0; i <= N; ++i) {
                const double defect = lo.y(p, i) - hi.y(p, i);
                lr.max_monotonicity_defect = std::max(lr.max_monotonicity_defect, defect);
                ++pairs;
                if (defect <= lr.monotonicity_tol) ++ok;
                if (defect <= wide_tol) ++ok_wide;
            }
    }
    lr.monotone_fraction = pairs ? static_cast<double>(ok) / static_cast<double>(pairs) : 1.0;
    lr.monotone_fraction_wide =
        pairs ? static_cast<double>(ok_wide) / static_cast<double>(pairs) : 1.0;

    for (std::size_t j = 0; j < lr.solutions.size(); ++j) {
        const auto rep =
            check_apriori_bound(lr.solutions[j], grid, q, lr.levels[j], opts.root_tol);
        lr.max_level_bound_excess = std::max(lr.max_level_bound_excess, rep.max_level_excess);
        lr.hard_bound_violations += rep.hard_violations;
        lr.max_discrete_excess = std::max(lr.max_discrete_excess, rep.max_discrete_excess);
        lr.hard_discrete_violations += rep.hard_discrete_violations;
    }

    // level-to-level sup gaps on [0, T - delta]
    lr.sup_gaps.resize(lr.delta_schedule.size());
    for (std::size_t di = 0; di < lr.delta_schedule.size(); ++di) {
        const double cutoff = grid.t_end() - lr.delta_schedule[di];
        for (std::size_t j = 0; j + 1 < lr.solutions.size(); ++j) {
            const auto& lo = lr.solutions[j];
            const auto& hi = lr.solutions[j + 1];
            double sup = 0.0;
            for (std::size_t i = 0; i <= N && grid.node(i) <= cutoff + 1e-12; ++i) {
                const double gap = pairwise_sum(P, [&](std::size_t p) {
                                       return std::abs(hi.y(p, i) - lo.y(p, i));
                                   }) /
                                   static_cast<double>(P);
                sup = std::max(sup, gap);
            }
            lr.sup_gaps[di].push_back(sup);
        }
    }
    return lr;
}

SingularEstimates estimate_z_moments(const BackwardSolution& sol, const TimeGrid& grid, double q,
                                     double kg, double eps) {
    if (!(q > 0)) throw config_error("estimate_z_moments: q must be > 0");
    if (eps >= 1.0) throw config_error("estimate_z_moments: eps must be < 1");
    const std::size_t N = sol.n_steps();
    const std::size_t P = sol.n_paths();
    const double T = grid.t_end();
    const double dt = grid.dt();

    SingularEstimates est;
    est.kappa = (1.0 + kg * T) / (1.0 - eps);
    est.z_weighted_bound = (8.0 + kg * T) / (1.0 - eps) * std::pow(q, -2.0 / q);

    auto z_sq = [&](std::size_t p, std::size_t i) {
        double s = 0.0;
        for (std::size_t c = 0; c < sol.dim_z(); ++c) s += sqr(sol.z(p, i, c));
        return s;
    };

    // per-path weighted integrals give the Monte-Carlo standard error
    std::vector<double> per_path(P, 0.0);
    for (std::size_t p = 0; p < P; ++p) {
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i)
            acc += std::pow(T - grid.node(i), 2.0 / q) * z_sq(p, i) * dt;
        per_path[p] = acc;
    }
    const MeanVar w = mean_var(per_path);
    est.z_weighted_moment = w.mean;
    est.z_weighted_moment_se = w.std_err;
    est.weighted_pass = w.mean <= est.z_weighted_bound + 3.0 * w.std_err;
    est.all_pass = est.weighted_pass;

    // truncated moments E int_0^t |Z|^2 at every interior node
    std::vector<double> running(P, 0.0);
    for (std::size_t i = 0; i + 1 <= N; ++i) {
        for (std::size_t p = 0; p < P; ++p) running[p] += z_sq(p, i) * dt;
        const double t = grid.node(i + 1);
        if (t >= T) break;
        const MeanVar mv = mean_var(running);
        SingularEstimates::TruncatedRow row;
        row.t = t;
        row.moment = mv.mean;
        row.se = mv.std_err;
        row.bound = est.kappa / std::pow(q * (T - t), 2.0 / q);
        row.pass = row.moment <= row.bound + 3.0 * row.se;
        est.all_pass = est.all_pass && row.pass;
        est.truncated.push_back(row);
    }
    return est;
}

TraceReport terminal_behavior(const LadderResult& ladder, const TerminalCondition& tc,
                              const ForwardPaths& fwd, const TimeGrid& grid,
                              std::span<const double> delta_schedule, bool theorem_hypotheses,
                              double margin_k, double margin_s) {
    const auto& top = ladder.top();
    const std::size_t N = grid.n_steps();
    const std::size_t P = fwd.n_paths();
    const double T = grid.t_end();

    TraceReport rep;
    rep.within_theorem_hypotheses = theorem_hypotheses;
    rep.tol = ladder.monotonicity_tol;

    auto dist_to_s = [&](const Vec& x) {
        if (tc.dist_to_singular_set) return tc.dist_to_singular_set(x);
        if (tc.in_singular_set) return tc.in_singular_set(x) ? 0.0 : margin_k + 1.0;
        return std::numeric_limits<double>::infinity(); // no singular set declared
    };

    std::vector<double> deltas(delta_schedule.begin(), delta_schedule.end());
    if (deltas.empty()) deltas = ladder.delta_schedule;

    for (double delta : deltas) {
        TraceReport::Row row;
        row.delta = delta;
        // nearest grid node to T - delta
        std::size_t node = N;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i <= N; ++i) {
            const double d = std::abs(grid.node(i) - (T - delta));
            if (d < best) { best = d; node = i; }
        }
        if (node == N && N > 0) node = N - 1;
        row.t = grid.node(node);
        row.below_resolution = delta < 4.0 * grid.dt();

        double ss = 0.0, liminf_defect = -std::numeric_limits<double>::infinity();
        std::size_t n_k = 0;
        double ratio_sum = 0.0;
        std::size_t n_s = 0;
        for (std::size_t p = 0; p < P; ++p) {
            const Vec xT = fwd.point(p, N);
            const double hv = tc.h(xT);
            const double dist = dist_to_s(xT);
            const double yv = top.y(p, node);
            if (dist >= margin_k && std::isfinite(hv)) {
                ss += sqr(yv - hv);
                liminf_defect = std::max(liminf_defect,
                                         std::min(hv, ladder.levels.back()) - yv);
                ++n_k;
            }
            if (dist <= margin_s) {
                ratio_sum += yv;
                ++n_s;
            }
        }
        row.n_on_k = n_k;
        row.ms_gap_on_k = n_k ? ss / static_cast<double>(n_k) : 0.0;
        row.liminf_defect = n_k ? liminf_defect : 0.0;
        row.n_near_s = n_s;
        if (n_s > 0) {
            const double ref = std::pow(ladder.q * delta, -1.0 / ladder.q);
            row.growth_ratio = (ratio_sum / static_cast<double>(n_s)) / ref;
        }
        if (n_k == 0 && n_s == 0) rep.insufficient_samples = true;
        rep.rows.push_back(row);
    }
    return rep;
}

FloorGapReport floor_ladder_gap(const ForwardPaths& fwd, double q,
                                const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                                double n, double m, const TimeGrid& grid,
                                const DualBrownianPaths& noise, const RegressionBasis& basis,
                                const SolverOptions& opts) {
    GeneratorSpec f = make_power_law_generator(q);
    const TerminalCondition tc_n = truncate_terminal(tc, n);
    const TerminalCondition tc_nm = floor_terminal(tc, n, m);
    const BackwardSolution y_n = solve_lsmc(fwd, f, g, tc_n, grid, noise, basis, opts);
    const BackwardSolution y_nm = solve_lsmc(fwd, f, g, tc_nm, grid, noise, basis, opts);

    FloorGapReport rep;
    rep.n = n;
    rep.m = m;
    rep.bound = std::exp((1.0 + g.kg) * grid.t_end()) / (m * m);

    const std::size_t N = grid.n_steps();
    const std::size_t P = fwd.n_paths();
    std::vector<double> sq(P);
    for (std::size_t i = 0; i <= N; ++i) {
        for (std::size_t p = 0; p < P; ++p) sq[p] = sqr(y_nm.y(p, i) - y_n.y(p, i));
        const MeanVar mv = mean_var(sq);
        if (mv.mean > rep.sup_gap_sq) {
            rep.sup_gap_sq = mv.mean;
            rep.se_at_sup = mv.std_err;
            rep.argmax_node = i;
        }
    }
    rep.pass = rep.sup_gap_sq <= rep.bound + 3.0 * rep.se_at_sup;
    return rep;
}

} // namespace bdsde
