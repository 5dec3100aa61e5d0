#pragma once

#include <span>
#include <vector>

#include "bdsde/solver.hpp"

namespace bdsde {

/// The discrete comparison ladder: the implicit-Euler solution of the
/// deterministic-terminal equation y_i + dt y_i^{1+q} = y_{i+1}, y_N = level.
/// By the comparison principle this dominates every level-n solution node by
/// node, exactly, for range-preserving bases; it is the discrete analogue of
/// the closed-form truncation bound (which the scheme overshoots by O(dt)
/// near T, since the implicit step freezes the drift at the left endpoint).
std::vector<double> discrete_comparison_ladder(double q, double level, const TimeGrid& grid,
                                               double root_tol = 1e-12);

/// Per-node report of the a priori bounds: the continuous formulas
/// (q(T-t))^{-1/q} and (q(T-t)+n^{-q})^{-1/q}, plus the provable discrete
/// comparison ladder.
struct BoundViolationReport {
    std::vector<double> universal_excess; // per node, max over paths (can be -inf-like)
    std::vector<double> level_excess;
    std::vector<double> discrete_excess;  // vs the discrete comparison ladder
    double max_universal_excess = 0.0;
    double max_level_excess = 0.0;
    double max_discrete_excess = 0.0;
    double tol = 0.0;          // root tol + 3 x pooled regression residual
    double discrete_tol = 0.0; // 2 N root tol + 3 x pooled residual
    std::size_t hard_violations = 0;          // level-formula excesses beyond tol
    std::size_t hard_discrete_violations = 0; // discrete-ladder excesses beyond tol
};

BoundViolationReport check_apriori_bound(const BackwardSolution& sol, const TimeGrid& grid,
                                         double q, double level_n, double root_tol = 1e-12);

/// Truncation-ladder output: coupled solutions per level plus the monotonicity
/// and bound diagnostics of the construction.
struct LadderResult {
    double q = 1.0; // power-law exponent of the run
    std::vector<double> levels;
    std::vector<BackwardSolution> solutions;

    double pooled_residual = 0.0;
    double root_tol = 1e-12;
    double monotonicity_tol = 0.0;       // root tol + 3 x pooled residual
    double monotone_fraction = 0.0;      // (path, node) pairs with Y^j <= Y^{j+1} + tol
    double monotone_fraction_wide = 0.0; // same with 5 residuals
    double max_monotonicity_defect = 0.0;

    double max_level_bound_excess = 0.0;
    std::size_t hard_bound_violations = 0;
    double max_discrete_excess = 0.0;
    std::size_t hard_discrete_violations = 0;

    std::vector<double> delta_schedule;
    // sup over nodes t <= T - delta of mean_p |Y^{n_{j+1}} - Y^{n_j}|, per delta per pair
    std::vector<std::vector<double>> sup_gaps;

    const BackwardSolution& top() const { return solutions.back(); }
};

/// Runs solve_lsmc per truncation level on the same coupled noise and collects
/// the ladder diagnostics. Requires g(t,y,0) = 0 (declared), levels strictly
/// increasing.
LadderResult solve_singular_ladder(const ForwardPaths& fwd, double q,
                                   const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                                   std::span<const double> levels, const TimeGrid& grid,
                                   const DualBrownianPaths& noise, const RegressionBasis& basis,
                                   std::span<const double> delta_schedule,
                                   const SolverOptions& opts = {});

/// Empirical Z moments against the a priori bounds of the singular case.
struct SingularEstimates {
    double kappa = 1.0;               // (1 + K_g T) / (1 - eps)
    double z_weighted_moment = 0.0;   // E int_0^T (T-s)^{2/q} |Z_s|^2 ds
    double z_weighted_moment_se = 0.0;
    double z_weighted_bound = 0.0;    // (8 + K_g T)/(1 - eps) q^{-2/q}
    bool weighted_pass = true;

    struct TruncatedRow {
        double t;
        double moment; // E int_0^t |Z|^2
        double se;
        double bound;  // kappa / (q (T-t))^{2/q}
        bool pass;
    };
    std::vector<TruncatedRow> truncated;
    bool all_pass = true;
};

SingularEstimates estimate_z_moments(const BackwardSolution& sol, const TimeGrid& grid, double q,
                                     double kg, double eps);

/// Behavior of Y near T: mean-square gap against h(X_T) on a compact set away
/// from the singular set, blow-up ratio against (q delta)^{-1/q} near it, and
/// the discrete liminf check Y_{T-delta} >= (h ^ n_top) - tol.
struct TraceReport {
    struct Row {
        double delta = 0.0;
        double t = 0.0;           // nearest grid node to T - delta
        double ms_gap_on_k = 0.0; // E[(Y_{T-delta} - h(X_T))^2 ; X_T in K]
        std::size_t n_on_k = 0;
        double growth_ratio = 0.0; // mean Y_{T-delta} / (q delta)^{-1/q} near S
        std::size_t n_near_s = 0;
        double liminf_defect = 0.0; // max over K of (h^n_top) - Y_{T-delta}
        bool below_resolution = false; // delta < 4 dt: regression noise dominates
    };
    std::vector<Row> rows;
    bool within_theorem_hypotheses = false;
    bool insufficient_samples = false;
    double tol = 0.0;
};

TraceReport terminal_behavior(const LadderResult& ladder, const TerminalCondition& tc,
                              const ForwardPaths& fwd, const TimeGrid& grid,
                              std::span<const double> delta_schedule,
                              bool theorem_hypotheses, double margin_k = 0.25,
                              double margin_s = 0.1);

/// Default delta schedule 2^{-j} T / 8, j = 0..levels-1.
std::vector<double> default_delta_schedule(double T, std::size_t levels = 4);

/// Coupled gap between the level-n solution and its 1/m-floored variant,
/// against the Gronwall bound e^{(1+K_g)T} / m^2.
struct FloorGapReport {
    double n = 0.0;
    double m = 0.0;
    double sup_gap_sq = 0.0; // sup_t E |Ytilde^{n,m}_t - Y^n_t|^2
    double se_at_sup = 0.0;
    double bound = 0.0;
    std::size_t argmax_node = 0;
    bool pass = true;
};

FloorGapReport floor_ladder_gap(const ForwardPaths& fwd, double q,
                                const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                                double n, double m, const TimeGrid& grid,
                                const DualBrownianPaths& noise, const RegressionBasis& basis,
                                const SolverOptions& opts = {});

} // namespace bdsde
