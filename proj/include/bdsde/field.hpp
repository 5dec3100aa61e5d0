#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "bdsde/singular.hpp"
#include "bdsde/solver.hpp"
#include "bdsde/testfunc.hpp"

namespace bdsde {

/// rho(x) = (1 + |x|)^kappa; rho^{-1} is integrable over R^d iff kappa > d.
struct WeightFunction {
    double kappa = 0.0;
    double rho(const Vec& x) const { return std::pow(1.0 + x.norm(), kappa); }
    bool integrable_inverse(std::size_t d) const { return kappa > static_cast<double>(d); }
};

/// Uniform 1-d lattice over [lo, hi] with n >= 2 nodes.
struct SpatialGrid {
    double lo = -1.0;
    double hi = 1.0;
    std::size_t n = 2;

    double h() const { return (hi - lo) / static_cast<double>(n - 1); }
    double point(std::size_t j) const { return lo + h() * static_cast<double>(j); }
};

/// u(t, x) = Y_t^{t,x} sampled on time nodes x spatial lattice for one
/// realized B path, together with the sigma^* grad u readout.
class RandomField {
public:
    RandomField(std::vector<double> time_nodes, SpatialGrid box, std::size_t m);

    std::size_t n_time() const { return time_nodes_.size(); }
    std::size_t n_x() const { return box_.n; }
    double t(std::size_t i) const { return time_nodes_[i]; }
    const SpatialGrid& box() const { return box_; }
    std::size_t m() const { return m_; }

    double u(std::size_t i, std::size_t j) const { return u_[i * box_.n + j]; }
    double& u(std::size_t i, std::size_t j) { return u_[i * box_.n + j]; }
    double grad(std::size_t i, std::size_t j) const { return grad_[i * box_.n + j]; }
    double& grad(std::size_t i, std::size_t j) { return grad_[i * box_.n + j]; }

    double db(std::size_t step, std::size_t comp = 0) const { return db_[step * m_ + comp]; }
    std::vector<double>& db_data() { return db_; }
    const std::vector<double>& db_data() const { return db_; }

    std::uint64_t b_seed = 0;
    std::uint64_t b_index = 0;
    bool represents_unbounded = false; // set when the box stands in for R^d
    bool extrapolation_warning = false;

    /// Analytic field for quadrature/diagnostic oracles: u_fn(t,x) and the
    /// sigma^* grad u readout grad_fn(t,x).
    static RandomField from_function(const TimeGrid& grid, const SpatialGrid& box,
                                     const std::function<double(double, double)>& u_fn,
                                     const std::function<double(double, double)>& grad_fn,
                                     std::span<const double> db = {});

private:
    std::vector<double> time_nodes_;
    SpatialGrid box_;
    std::size_t m_;
    std::vector<double> u_;    // [n_time x n_x]
    std::vector<double> grad_; // [n_time x n_x], sigma^* grad u (d = 1)
    std::vector<double> db_;   // [(n_time - 1) x m]
};

struct FieldBuildConfig {
    std::size_t w_budget = 4000; // forward paths per grid point
    RegressionBasis basis;
    SolverOptions solver;
};

/// One backward solve per lattice point x: forward paths start at (t_0, x),
/// the whole time column u(., x) is read from the per-step regression
/// functions evaluated at x (with the implicit drift root applied at x), and
/// sigma^* grad u comes from the Z regression (central differences of u when
/// the basis is piecewise constant). All points share the same B path.
RandomField build_field(const SdeCoefficients& coeffs, const GeneratorSpec& f,
                        const NoiseCoefficientSpec& g, const TerminalCondition& tc,
                        const TimeGrid& grid, const SpatialGrid& box, std::uint64_t seed,
                        std::uint64_t b_index, const FieldBuildConfig& cfg);

struct WeightedNormResult {
    double value = 0.0;            // E-free single-path norm of |u|^2 + |grad|^2
    double u_part = 0.0;
    double grad_part = 0.0;
    double refinement_delta = 0.0; // vs. coarsened lattice quadrature
};

/// Weighted Sobolev norm int_{t0}^{T-delta} int_box (|u|^2 + |s* grad u|^2)
/// rho^{-1} dx ds, trapezoid in x and left-rectangle in t.
WeightedNormResult weighted_norm(const RandomField& field, const WeightFunction& rho,
                                 double t_cut);

/// div((b - A~) Psi)(s, x) assembly for the weak form. For constant sigma,
/// A~ = 0 and the term reduces to b . grad Psi.
struct WeakFormOperator {
    std::function<Vec(double, const Vec&)> a_tilde;  // optional, default 0
    std::function<double(double, const Vec&, const SpaceTimeTestFunction&)> div_term;

    static WeakFormOperator for_constant_coefficients(const SdeCoefficients& coeffs);
};

struct WeakFormResidual {
    double time_derivative = 0.0; // int int u dPsi/ds
    double boundary_lo = 0.0;     // + int u(r) Psi(r)
    double boundary_hi = 0.0;     // - int u(t) Psi(t)
    double gradient = 0.0;        // + 1/2 int int (s*Du)(s*DPsi)
    double divergence = 0.0;      // + int int u div((b - A~)Psi)
    double f_term = 0.0;          // int int Psi f
    double g_term = 0.0;          // int int Psi g dB (right-endpoint rule)
    double residual = 0.0;        // |LHS - RHS|
};

/// Assembles every term of the weak formulation on [r, t] by quadrature and
/// returns |LHS - RHS| with the term breakdown.
WeakFormResidual weak_form_residual(const RandomField& field, const SpaceTimeTestFunction& psi,
                                    const WeakFormOperator& ops, const GeneratorSpec& f,
                                    const NoiseCoefficientSpec& g, double r, double t);

struct TraceCurvePoint {
    double t = 0.0;
    double integral = 0.0; // int u(t, x) phi(x) dx (mean over B fields)
    double se = 0.0;       // across B fields
};

struct TerminalTraceResult {
    std::vector<TraceCurvePoint> curve;
    double target = 0.0;         // int h phi dx (fine Simpson quadrature)
    double target_lattice = 0.0; // same integral on the field lattice (trapezoid);
                                 // |target_lattice - target| is the quadrature allowance
    std::vector<double> divergence_ref; // (q(T-t))^{-1/q} int phi per curve point
};

/// t -> int u(t,x) phi(x) dx against the target int h phi dx; phi must avoid
/// the singular set when a finite trace is requested. Averages over the given
/// B realizations of the field.
TerminalTraceResult terminal_trace(std::span<const RandomField> fields,
                                   const SpatialTestFunction& phi,
                                   const std::function<double(const Vec&)>& h,
                                   bool finite_trace_requested, double q = 0.0);

struct MalliavinCheckResult {
    double lhs = 0.0; // E int Z . grad theta sigma dr
    double rhs = 0.0; // E int Y psi(r, X_r) dr
    double gap = 0.0;
    double se = 0.0;  // standard error of the per-path difference
    bool pass = true; // gap <= 3 se
};

/// Gaussian-density Malliavin integration-by-parts check, constant b/sigma
/// only: psi = -(grad theta sigma) . score - Trace(D^2 theta sigma sigma^*),
/// with the Gaussian score in closed form. Elliptic sigma required.
MalliavinCheckResult malliavin_identity_check(const BackwardSolution& sol,
                                              const ForwardPaths& fwd,
                                              const SdeCoefficients& coeffs,
                                              const SpatialTestFunction& theta,
                                              const TimeGrid& grid, double t_lo);

} // namespace bdsde
