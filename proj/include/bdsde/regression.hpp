#pragma once

#include <Eigen/Dense>

#include "bdsde/types.hpp"
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bdsde/sde.hpp"

namespace bdsde {

/// Basis family for the per-step conditional-expectation regressions.
/// polynomial: monomials of total degree <= degree.
/// piecewise_constant: indicator per bin of the domain box (d = 1).
/// local_linear: per-bin {1, x} pair (d = 1).
struct RegressionBasis {
    enum class Family { polynomial, piecewise_constant, local_linear };

    Family family = Family::polynomial;
    std::size_t degree = 1;
    std::size_t bins = 8;
    double domain_lo = -1.0;
    double domain_hi = 1.0;
    bool domain_from_data = true; // derive the box from the sampled X values

    /// kAutoRidge resolves per step to 1e-8 * trace(Gram) / basis size; the
    /// exact oracles pin 0 instead.
    double ridge_lambda = kAutoRidge;

    static constexpr double kAutoRidge = -1.0;

    std::string family_name() const;
};

/// Evaluates the basis functions of a RegressionBasis on points of R^dim.
class BasisEvaluator {
public:
    BasisEvaluator(const RegressionBasis& spec, std::size_t dim);

    std::size_t size() const { return n_basis_; }
    std::size_t dim() const { return dim_; }
    const RegressionBasis& spec() const { return spec_; }

    /// Writes the n_basis values phi_j(x) into out. Points outside the domain
    /// clamp to the boundary (reported upstream as extrapolation).
    void eval(const Vec& x, std::span<double> out) const;

    bool in_domain(const Vec& x) const;

    /// Rescales the domain box (used when domain_from_data).
    void set_domain(double lo, double hi);

private:
    std::size_t bin_of(double x) const;

    RegressionBasis spec_;
    std::size_t dim_;
    std::size_t n_basis_;
    std::vector<std::vector<unsigned>> exponents_; // polynomial only
};

/// phi(x) . coeff for a single point.
double eval_basis_at(const BasisEvaluator& basis, const Vec& x,
                     const Eigen::VectorXd& coeff);

struct FitResult {
    Eigen::VectorXd coeff;
    double residual_rms = 0.0;
    double cond_estimate = 0.0;
};

/// All regressions of one backward step share the design matrix at one time
/// node; the Gram matrix is accumulated once over a fixed pairwise tree (so
/// results are bit-identical for any worker count) and its factorization is
/// reused for every target.
class StepRegression {
public:
    StepRegression(const BasisEvaluator& basis, const ForwardPaths& fwd, std::size_t node,
                   double ridge_lambda, std::size_t n_workers);

    FitResult fit(std::span<const double> target) const;

    /// y_hat[p] = phi(X_p) . coeff
    void predict(const Eigen::VectorXd& coeff, std::span<double> out) const;

    double cond_estimate() const { return cond_; }
    std::size_t n_paths() const { return n_paths_; }

private:
    const BasisEvaluator& basis_;
    std::size_t n_paths_;
    std::size_t n_basis_;
    double ridge_;
    std::size_t n_workers_;
    std::vector<double> features_; // [n_paths x n_basis]
    Eigen::MatrixXd gram_;
    Eigen::LDLT<Eigen::MatrixXd> ldlt_;
    double cond_ = 0.0;
};

/// Fixed-tree pairwise accumulation of `slots` parallel sums over n items.
/// leaf_fn(lo, hi, acc) adds the sum over items [lo, hi) into acc[slots]
/// (already zeroed). The reduction tree depends only on n, never on the
/// worker count.
void pairwise_accumulate(std::size_t n, std::size_t slots,
                         const std::function<void(std::size_t, std::size_t, double*)>& leaf_fn,
                         double* out, std::size_t n_workers);

} // namespace bdsde
