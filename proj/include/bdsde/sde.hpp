#pragma once

#include <Eigen/Dense>

#include "bdsde/types.hpp"
#include <cstddef>
#include <functional>
#include <vector>

#include "bdsde/noise.hpp"
#include "bdsde/testfunc.hpp"

namespace bdsde {

/// Drift/diffusion pair of the forward diffusion, with the assumption flags a
/// scenario declares for it. Flags are declared by the scenario author and
/// spot-checked on probe points, never proven.
struct SdeCoefficients {
    std::function<Vec(double, const Vec&)> drift;    // b(t,x): R^d
    std::function<Mat(double, const Vec&)> diffusion; // sigma(t,x): d x k

    double lipschitz_K = 0.0;
    bool bounded = false;           // (B)
    double elliptic_lambda = 0.0;   // (E), 0 = not claimed
    bool constant_coefficients = false;

    std::size_t dim_x = 1;
    std::size_t dim_w = 1;
};

SdeCoefficients make_constant_sde(const Vec& b, const Mat& sigma);

/// Euler-Maruyama sample paths of the forward diffusion on the grid nodes.
/// Nodes at or before the start time hold the start point.
class ForwardPaths {
public:
    ForwardPaths(std::size_t n_paths, std::size_t n_nodes, std::size_t d, double t_start,
                 Vec x_start);

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_nodes() const { return n_nodes_; }
    std::size_t d() const { return d_; }
    double t_start() const { return t_start_; }
    const Vec& x_start() const { return x_start_; }

    double x(std::size_t path, std::size_t node, std::size_t comp = 0) const {
        return x_[(path * n_nodes_ + node) * d_ + comp];
    }
    double& x(std::size_t path, std::size_t node, std::size_t comp = 0) {
        return x_[(path * n_nodes_ + node) * d_ + comp];
    }
    Vec point(std::size_t path, std::size_t node) const;
    const double* x_ptr(std::size_t path, std::size_t node) const {
        return x_.data() + (path * n_nodes_ + node) * d_;
    }

private:
    std::size_t n_paths_, n_nodes_, d_;
    double t_start_;
    Vec x_start_;
    std::vector<double> x_;
};

/// X_{i+1} = X_i + b(t_i, X_i) dt + sigma(t_i, X_i) dW_i, frozen at x for
/// nodes before the start time. Throws numerical_error naming the step if a
/// coefficient evaluates non-finite.
ForwardPaths euler_maruyama(const SdeCoefficients& coeffs, double t_start,
                            const Vec& x_start, const TimeGrid& grid,
                            const DualBrownianPaths& noise, std::size_t n_workers = 1);

/// L theta = 1/2 Trace(sigma sigma^* D^2 theta) + b . grad theta.
double apply_generator(const SdeCoefficients& coeffs, const SpatialTestFunction& theta,
                       double t, const Vec& x);

/// Spot-check of declared flags (finiteness, ellipticity) on probe points.
struct SdeProbeReport {
    bool finite_ok = true;
    bool elliptic_ok = true;
    std::string detail;
};

SdeProbeReport probe_sde(const SdeCoefficients& coeffs, double t_lo, double t_hi,
                         std::size_t probes, std::uint64_t seed);

} // namespace bdsde
