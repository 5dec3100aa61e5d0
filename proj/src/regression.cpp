#include "bdsde/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/parallel.hpp"

namespace bdsde {

namespace {
constexpr std::size_t kLeaf = 16;
} // namespace

std::string RegressionBasis::family_name() const {
    switch (family) {
        case Family::polynomial: return "polynomial";
        case Family::piecewise_constant: return "piecewise_constant";
        case Family::local_linear: return "local_linear";
    }
    return "?";
}

BasisEvaluator::BasisEvaluator(const RegressionBasis& spec, std::size_t dim)
    : spec_(spec), dim_(dim) {
    if (dim == 0) throw config_error("BasisEvaluator: dim must be >= 1");
    switch (spec.family) {
        case RegressionBasis::Family::polynomial: {
            // multivariate monomials with total degree <= degree
            std::vector<unsigned> e(dim, 0);
            std::function<void(std::size_t, unsigned)> rec = [&](std::size_t pos, unsigned left) {
                if (pos == dim) {
                    exponents_.push_back(e);
                    return;
                }
                for (unsigned k = 0; k <= left; ++k) {
                    e[pos] = k;
                    rec(pos + 1, left - k);
                }
                e[pos] = 0;
            };
            rec(0, static_cast<unsigned>(spec.degree));
            // order by total degree, then lexicographically: constant first
            std::sort(exponents_.begin(), exponents_.end(),
                      [](const auto& a, const auto& b) {
                          unsigned sa = 0, sb = 0;
                          for (auto v : a) sa += v;
                          for (auto v : b) sb += v;
                          if (sa != sb) return sa < sb;
                          return a < b;
                      });
            n_basis_ = exponents_.size();
            break;
        }
        case RegressionBasis::Family::piecewise_constant:
            if (dim != 1)
                throw config_error("piecewise_constant basis: only d = 1 supported");
            if (spec.bins == 0) throw config_error("piecewise_constant basis: bins must be >= 1");
            n_basis_ = spec.bins;
            break;
        case RegressionBasis::Family::local_linear:
            if (dim != 1) throw config_error("local_linear basis: only d = 1 supported");
            if (spec.bins == 0) throw config_error("local_linear basis: bins must be >= 1");
            n_basis_ = 2 * spec.bins;
            break;
    }
    if (n_basis_ == 0) throw config_error("BasisEvaluator: empty basis");
}

void BasisEvaluator::set_domain(double lo, double hi) {
    if (!(hi > lo)) {
        // degenerate data range (all paths identical); widen artificially
        const double c = lo;
        lo = c - 1.0;
        hi = c + 1.0;
    }
    spec_.domain_lo = lo;
    spec_.domain_hi = hi;
}

bool BasisEvaluator::in_domain(const Vec& x) const {
    for (Eigen::Index c = 0; c < x.size(); ++c)
        if (x(c) < spec_.domain_lo || x(c) > spec_.domain_hi) return false;
    return true;
}

void BasisEvaluator::eval(const Vec& x, std::span<double> out) const {
    switch (spec_.family) {
        case RegressionBasis::Family::polynomial: {
            // affine map of the domain onto [-1,1] keeps the Gram well scaled
            const double c = 0.5 * (spec_.domain_lo + spec_.domain_hi);
            const double r = 0.5 * (spec_.domain_hi - spec_.domain_lo);
            for (std::size_t j = 0; j < n_basis_; ++j) {
                double v = 1.0;
                for (std::size_t k = 0; k < dim_; ++k) {
                    const double u = (x(static_cast<Eigen::Index>(k)) - c) / r;
                    for (unsigned p = 0; p < exponents_[j][k]; ++p) v *= u;
                }
                out[j] = v;
            }
            break;
        }
        case RegressionBasis::Family::piecewise_constant: {
            std::fill(out.begin(), out.end(), 0.0);
            out[bin_of(x(0))] = 1.0;
            break;
        }
        case RegressionBasis::Family::local_linear: {
            std::fill(out.begin(), out.end(), 0.0);
            const std::size_t b = bin_of(x(0));
            const double c = 0.5 * (spec_.domain_lo + spec_.domain_hi);
            const double r = 0.5 * (spec_.domain_hi - spec_.domain_lo);
            out[2 * b] = 1.0;
            out[2 * b + 1] = (x(0) - c) / r;
            break;
        }
    }
}

std::size_t BasisEvaluator::bin_of(double x) const {
    const double w = (spec_.domain_hi - spec_.domain_lo) / static_cast<double>(spec_.bins);
    if (x <= spec_.domain_lo) return 0;
    if (x >= spec_.domain_hi) return spec_.bins - 1;
    auto b = static_cast<std::size_t>((x - spec_.domain_lo) / w);
    return std::min(b, spec_.bins - 1);
}

void pairwise_accumulate(std::size_t n, std::size_t slots,
                         const std::function<void(std::size_t, std::size_t, double*)>& leaf_fn,
                         double* out, std::size_t n_workers) {
    const std::size_t n_leaves = (n + kLeaf - 1) / kLeaf;
    std::vector<double> partials(n_leaves * slots, 0.0);
    parallel_for(n_leaves, n_workers, [&](std::size_t l) {
        leaf_fn(l * kLeaf, std::min(n, (l + 1) * kLeaf), partials.data() + l * slots);
    });
    // fixed pairwise tree over leaf partials
    std::function<void(std::size_t, std::size_t, double*)> reduce =
        [&](std::size_t lo, std::size_t cnt, double* acc) {
            if (cnt == 1) {
                const double* src = partials.data() + lo * slots;
                for (std::size_t s = 0; s < slots; ++s) acc[s] += src[s];
                return;
            }
            const std::size_t half = cnt / 2;
            std::vector<double> right(slots, 0.0);
            reduce(lo, half, acc);
            reduce(lo + half, cnt - half, right.data());
            for (std::size_t s = 0; s < slots; ++s) acc[s] += right[s];
        };
    std::fill(out, out + slots, 0.0);
    if (n_leaves > 0) reduce(0, n_leaves, out);
}

StepRegression::StepRegression(const BasisEvaluator& basis, const ForwardPaths& fwd,
                               std::size_t node, double ridge_lambda, std::size_t n_workers)
    : basis_(basis), n_paths_(fwd.n_paths()), n_basis_(basis.size()), ridge_(ridge_lambda),
      n_workers_(n_workers) {
    if (ridge_lambda < 0 && ridge_lambda != RegressionBasis::kAutoRidge)
        throw config_error("StepRegression: ridge must be >= 0 or auto");
    features_.resize(n_paths_ * n_basis_);
    parallel_for(n_paths_, n_workers_, [&](std::size_t p) {
        basis_.eval(fwd.point(p, node),
                    std::span<double>(features_.data() + p * n_basis_, n_basis_));
    });

    // Gram = Phi^T Phi over a fixed pairwise tree
    const std::size_t slots = n_basis_ * n_basis_;
    std::vector<double> g(slots, 0.0);
    pairwise_accumulate(
        n_paths_, slots,
        [&](std::size_t lo, std::size_t hi, double* acc) {
            for (std::size_t p = lo; p < hi; ++p) {
                const double* row = features_.data() + p * n_basis_;
                for (std::size_t j = 0; j < n_basis_; ++j)
                    for (std::size_t k = j; k < n_basis_; ++k)
                        acc[j * n_basis_ + k] += row[j] * row[k];
            }
        },
        g.data(), n_workers_);

    gram_.resize(static_cast<Eigen::Index>(n_basis_), static_cast<Eigen::Index>(n_basis_));
    for (std::size_t j = 0; j < n_basis_; ++j)
        for (std::size_t k = j; k < n_basis_; ++k) {
            gram_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(k)) =
                g[j * n_basis_ + k];
            gram_(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                g[j * n_basis_ + k];
        }

    if (ridge_ == RegressionBasis::kAutoRidge)
        ridge_ = 1e-8 * gram_.trace() / static_cast<double>(n_basis_);

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_);
    const double emax = es.eigenvalues().maxCoeff();
    const double emin = es.eigenvalues().minCoeff();
    cond_ = emin > 0 ? emax / emin : std::numeric_limits<double>::infinity();
    if (ridge_ == 0.0 && (emin <= 0 || emin < emax * 1e-13))
        throw numerical_error("singular regression: rank-deficient Gram matrix without ridge "
                              "(cond ~ " + std::to_string(cond_) + ")");

    Eigen::MatrixXd reg = gram_;
    if (ridge_ > 0.0)
        reg += ridge_ * Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(n_basis_),
                                                  static_cast<Eigen::Index>(n_basis_));
    ldlt_.compute(reg);
    if (ldlt_.info() != Eigen::Success)
        throw numerical_error("singular regression: LDLT factorization failed");
}

FitResult StepRegression::fit(std::span<const double> target) const {
    if (target.size() != n_paths_) throw shape_error("StepRegression::fit: target length");
    std::vector<double> rhs(n_basis_, 0.0);
    pairwise_accumulate(
        n_paths_, n_basis_,
        [&](std::size_t lo, std::size_t hi, double* acc) {
            for (std::size_t p = lo; p < hi; ++p) {
                const double* row = features_.data() + p * n_basis_;
                const double y = target[p];
                for (std::size_t j = 0; j < n_basis_; ++j) acc[j] += row[j] * y;
            }
        },
        rhs.data(), n_workers_);

    FitResult out;
    Eigen::VectorXd b(static_cast<Eigen::Index>(n_basis_));
    for (std::size_t j = 0; j < n_basis_; ++j) b(static_cast<Eigen::Index>(j)) = rhs[j];
    out.coeff = ldlt_.solve(b);
    out.cond_estimate = cond_;

    // residual RMS via the same fixed tree
    double ss = 0.0;
    pairwise_accumulate(
        n_paths_, 1,
        [&](std::size_t lo, std::size_t hi, double* acc) {
            for (std::size_t p = lo; p < hi; ++p) {
                const double* row = features_.data() + p * n_basis_;
                double pred = 0.0;
                for (std::size_t j = 0; j < n_basis_; ++j)
                    pred += row[j] * out.coeff(static_cast<Eigen::Index>(j));
                acc[0] += sqr(target[p] - pred);
            }
        },
        &ss, n_workers_);
    out.residual_rms = std::sqrt(ss / static_cast<double>(n_paths_));
    return out;
}

void StepRegression::predict(const Eigen::VectorXd& coeff, std::span<double> out) const {
    if (out.size() != n_paths_) throw shape_error("StepRegression::predict: output length");
    parallel_for(n_paths_, n_workers_, [&](std::size_t p) {
        const double* row = features_.data() + p * n_basis_;
        double v = 0.0;
        for (std::size_t j = 0; j < n_basis_; ++j)
            v += row[j] * coeff(static_cast<Eigen::Index>(j));
        out[p] = v;
    });
}

double eval_basis_at(const BasisEvaluator& basis, const Vec& x,
                     const Eigen::VectorXd& coeff) {
    std::vector<double> phi(basis.size());
    basis.eval(x, phi);
    double v = 0.0;
    for (std::size_t j = 0; j < basis.size(); ++j)
        v += phi[j] * coeff(static_cast<Eigen::Index>(j));
    return v;
}

} // namespace bdsde
