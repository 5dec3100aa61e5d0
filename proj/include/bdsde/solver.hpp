#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "bdsde/drivers.hpp"
#include "bdsde/noise.hpp"
#include "bdsde/regression.hpp"
#include "bdsde/sde.hpp"

namespace bdsde {

struct SolverOptions {
    double root_tol = 1e-12; // absolute tolerance of the implicit drift solve
    std::size_t n_workers = 1;
};

/// Sampled (Y, Z) on the grid for one realized backward path B, together with
/// the per-step regression functions that produced them. Y values at step i
/// are functions of (X_{t_i}, dB_j for j >= i) only; future W enters only
/// through the ensemble regressions, which are permutation-invariant.
class BackwardSolution {
public:
    BackwardSolution(std::size_t n_paths, std::size_t n_steps, std::size_t dim_z);

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_steps() const { return n_steps_; }
    std::size_t dim_z() const { return dim_z_; }

    double y(std::size_t p, std::size_t node) const { return y_[p * (n_steps_ + 1) + node]; }
    double& y(std::size_t p, std::size_t node) { return y_[p * (n_steps_ + 1) + node]; }
    double z(std::size_t p, std::size_t step, std::size_t c = 0) const {
        return z_[(p * n_steps_ + step) * dim_z_ + c];
    }
    double& z(std::size_t p, std::size_t step, std::size_t c = 0) {
        return z_[(p * n_steps_ + step) * dim_z_ + c];
    }

    // per-step regression functions (continuation and Z), for field readout
    std::vector<Eigen::VectorXd> y_coeff;                // [N]
    std::vector<std::vector<Eigen::VectorXd>> z_coeff;   // [N][dim_z]
    std::vector<double> y_residual_rms;                  // [N]
    std::vector<double> z_residual_rms;                  // [N]
    std::vector<double> cond_estimate;                   // [N]
    // steps where X carries no spread (the start node, or sigma = 0): the
    // conditional expectation degenerates to the plain mean and the step
    // regressed on the constant basis instead
    std::vector<char> constant_step;                     // [N]

    RegressionBasis basis;
    double basis_domain_lo = 0.0, basis_domain_hi = 0.0; // resolved domain
    std::uint64_t b_seed = 0;
    std::uint64_t b_index = 0;
    double dt = 0.0;
    double t_start = 0.0;

    /// sqrt(mean over steps of y residual^2): the regression-noise scale that
    /// violation tolerances are derived from.
    double pooled_residual() const;

    std::vector<double>& y_data() { return y_; }
    const std::vector<double>& y_data() const { return y_; }

private:
    std::size_t n_paths_, n_steps_, dim_z_;
    std::vector<double> y_;
    std::vector<double> z_;
};

/// One implicit backward-Euler drift step: the root y of
///   y - dt f(t, x, y, z) = c.
/// Monotone f makes the equation strictly increasing in y; for the power law
/// the root satisfies |y| <= |c| and the bracket [-|c|, |c|] always holds.
double solve_implicit_step(const GeneratorSpec& f, double t, const Vec& x,
                           const Vec& z, double c, double dt, double tol);

/// Least-squares Monte-Carlo backward recursion with the shared B path fixed:
///   (1) Z_i  <- regression of centered Y_{i+1} dW_i / dt on basis(X_i)
///   (2) Q_i  <- Y_{i+1} + g(t_{i+1}, X_{i+1}, Y_{i+1}, Z_{i+1}) dB_i
///   (3) C_i  <- regression of Q_i on basis(X_i)
///   (4) Y_i  <- root of y - dt f(t_i, X_i, y, Z_i) = C_i(X_i).
/// Step (1) centers the target by its own basis projection: the projection is
/// X_i-measurable, hence conditionally orthogonal to dW_i, so the estimator
/// keeps the same conditional expectation with far smaller variance (and is
/// exact when Y_{i+1} is X-independent). Z at the terminal node is taken 0.
BackwardSolution solve_lsmc(const ForwardPaths& fwd, const GeneratorSpec& f,
                            const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                            const TimeGrid& grid, const DualBrownianPaths& noise,
                            const RegressionBasis& basis, const SolverOptions& opts = {});

/// Shift-reduction mode for g depending on (t, B-path) only: solves the
/// ordinary BSDE for U = Y + int_0^t g dB with generator f(t, u - shift) and
/// terminal zeta = xi + int_0^T g dB, then shifts back. Probes g for y/z
/// dependence and refuses with mode_error if it is found.
BackwardSolution solve_shift_reduction(const ForwardPaths& fwd, const GeneratorSpec& f,
                                       const NoiseCoefficientSpec& g,
                                       const TerminalCondition& tc, const TimeGrid& grid,
                                       const DualBrownianPaths& noise,
                                       const RegressionBasis& basis,
                                       const SolverOptions& opts = {});

struct PicardConfig {
    std::size_t max_sweeps = 12;
    std::optional<double> alpha; // default 2 mu + 2 K_f/(1-eps) + 2 K_g/(1+eps)
    std::optional<double> eta;   // recorded; default 2/(1-eps)
    double stop_tol = 1e-10;
};

struct ContractionTrace {
    std::vector<double> d;       // D_k = E int e^{alpha s}(|dY|^2 + |dZ|^2) ds per sweep
    double alpha = 0.0;
    double eta = 0.0;
    std::size_t sweeps = 0;
    bool non_contraction_warning = false; // D_k grew three sweeps in a row
};

/// Picard iteration of the paper's fixed-point scheme: sweep k+1 solves with
/// f(t,., y, Z^k) implicit in y and g frozen at (Y^k, Z^k).
std::pair<BackwardSolution, ContractionTrace>
picard_solve(const ForwardPaths& fwd, const GeneratorSpec& f, const NoiseCoefficientSpec& g,
             const TerminalCondition& tc, const TimeGrid& grid, const DualBrownianPaths& noise,
             const RegressionBasis& basis, const PicardConfig& cfg,
             const SolverOptions& opts = {});

struct ComparisonReport {
    std::size_t n_pairs = 0;      // (path, node) pairs checked
    std::size_t n_violations = 0; // Y1 > Y2 + tol
    double max_violation = 0.0;   // max over pairs of Y1 - Y2
    double violation_fraction = 0.0;
    double tol = 0.0;
    bool xi_ordering_ok = true;   // xi1 <= xi2 held on all sampled paths
    std::vector<std::size_t> violations_per_node;
};

/// Coupled comparison checker of two solutions on the same grid and noise.
ComparisonReport compare_coupled(const BackwardSolution& a, const BackwardSolution& b,
                                 double tol);

/// Resolves the basis domain (from data if requested) and returns the
/// evaluator used by a solve; exposed for field readout.
BasisEvaluator resolve_basis(const RegressionBasis& basis, const ForwardPaths& fwd);

} // namespace bdsde
