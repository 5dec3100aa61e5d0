#pragma once

#include <Eigen/Dense>

#include "bdsde/types.hpp"
#include <functional>
#include <limits>
#include <optional>

namespace bdsde {

/// Smooth spatial test function with optional analytic derivatives. When
/// gradient/hessian are not supplied they are formed by central differences
/// with step h = cbrt(eps) * max(1, |x|).
struct SpatialTestFunction {
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient; // optional
    std::function<Mat(const Vec&)> hessian;  // optional

    Vec support_lo; // empty = unbounded support
    Vec support_hi;
    double dist_to_singular_set = std::numeric_limits<double>::infinity();

    bool has_support_box() const { return support_lo.size() > 0; }

    double eval(const Vec& x) const { return value(x); }
    Vec grad(const Vec& x) const;
    Mat hess(const Vec& x) const;
};

/// Separable space-time test function Psi(s, x) = w(s) * phi(x) with analytic
/// time derivative, as needed by the weak-form assembly.
struct SpaceTimeTestFunction {
    std::function<double(double)> time_factor;
    std::function<double(double)> time_factor_dot;
    SpatialTestFunction space;

    double eval(double s, const Vec& x) const {
        return time_factor(s) * space.eval(x);
    }
    double dt(double s, const Vec& x) const {
        return time_factor_dot(s) * space.eval(x);
    }
    Vec grad_x(double s, const Vec& x) const {
        return time_factor(s) * space.grad(x);
    }
};

/// C-infinity bump supported on (lo, hi) (1-d):
/// phi(x) = exp(-1 / (1 - u^2)) with u the affine map of (lo,hi) onto (-1,1).
SpatialTestFunction make_bump(double lo, double hi, double dist_to_s = 0.0);

/// Gaussian-shaped smooth function (unbounded support, for generator tests).
SpatialTestFunction make_gaussian(double center, double width);

/// Constant-in-time lift of a spatial function.
SpaceTimeTestFunction constant_in_time(SpatialTestFunction phi);

/// Psi(s,x) = (a + b s) * phi(x).
SpaceTimeTestFunction affine_in_time(SpatialTestFunction phi, double a, double b);

/// Psi(s,x) = (a + b s + c s^2) * phi(x). A curved time factor keeps the
/// time-quadrature error of the weak form visible (an affine one cancels it
/// identically for x-independent fields).
SpaceTimeTestFunction quadratic_in_time(SpatialTestFunction phi, double a, double b, double c);

} // namespace bdsde
