#include "bdsde/testfunc.hpp"

#include <cmath>

#include "bdsde/errors.hpp"

namespace bdsde {

namespace {

double fd_step(const Vec& x) {
    const double eps = std::numeric_limits<double>::epsilon();
    return std::cbrt(eps) * std::max(1.0, x.norm());
}

} // namespace

Vec SpatialTestFunction::grad(const Vec& x) const {
    if (gradient) return gradient(x);
    if (!value) throw config_error("SpatialTestFunction: no value function");
    const double h = fd_step(x);
    Vec g(x.size());
    Vec xp = x, xm = x;
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        xp(i) = x(i) + h;
        xm(i) = x(i) - h;
        g(i) = (value(xp) - value(xm)) / (2.0 * h);
        xp(i) = x(i);
        xm(i) = x(i);
    }
    return g;
}

Mat SpatialTestFunction::hess(const Vec& x) const {
    if (hessian) return hessian(x);
    if (!value) throw config_error("SpatialTestFunction: no value function");
    const double h = fd_step(x);
    const Eigen::Index n = x.size();
    Mat H(n, n);
    const double f0 = value(x);
    Vec xa = x;
    for (Eigen::Index i = 0; i < n; ++i) {
        xa(i) = x(i) + h;
        const double fp = value(xa);
        xa(i) = x(i) - h;
        const double fm = value(xa);
        xa(i) = x(i);
        H(i, i) = (fp - 2.0 * f0 + fm) / (h * h);
        for (Eigen::Index j = i + 1; j < n; ++j) {
            xa(i) = x(i) + h; xa(j) = x(j) + h;
            const double fpp = value(xa);
            xa(j) = x(j) - h;
            const double fpm = value(xa);
            xa(i) = x(i) - h; xa(j) = x(j) + h;
            const double fmp = value(xa);
            xa(j) = x(j) - h;
            const double fmm = value(xa);
            xa(i) = x(i); xa(j) = x(j);
            H(i, j) = H(j, i) = (fpp - fpm - fmp + fmm) / (4.0 * h * h);
        }
    }
    return H;
}

SpatialTestFunction make_bump(double lo, double hi, double dist_to_s) {
    if (!(hi > lo)) throw config_error("make_bump: need hi > lo");
    const double c = 0.5 * (lo + hi);
    const double r = 0.5 * (hi - lo);
    auto u_of = [c, r](double x) { return (x - c) / r; };

    SpatialTestFunction f;
    f.support_lo = Vec::Constant(1, lo);
    f.support_hi = Vec::Constant(1, hi);
    f.dist_to_singular_set = dist_to_s;
    f.value = [u_of](const Vec& x) {
        const double u = u_of(x(0));
        if (std::abs(u) >= 1.0) return 0.0;
        return std::exp(-1.0 / (1.0 - u * u));
    };
    f.gradient = [u_of, r](const Vec& x) {
        Vec g(1);
        const double u = u_of(x(0));
        if (std::abs(u) >= 1.0) { g(0) = 0.0; return g; }
        const double w = 1.0 - u * u;
        g(0) = std::exp(-1.0 / w) * (-2.0 * u / (w * w)) / r;
        return g;
    };
    f.hessian = [u_of, r](const Vec& x) {
        Mat H(1, 1);
        const double u = u_of(x(0));
        if (std::abs(u) >= 1.0) { H(0, 0) = 0.0; return H; }
        const double w = 1.0 - u * u;
        // d/du of -2u/w^2 * e^{-1/w}:  e^{-1/w} * (6u^2 - 2)/w^4 + e^{-1/w} * 4u^2/w^4 * (-1/w) ...
        const double e = std::exp(-1.0 / w);
        const double first = (-2.0 / (w * w) - 8.0 * u * u / (w * w * w)) * e;
        const double second = (-2.0 * u / (w * w)) * e * (-2.0 * u / (w * w));
        H(0, 0) = (first + second) / (r * r);
        return H;
    };
    return f;
}

SpatialTestFunction make_gaussian(double center, double width) {
    if (!(width > 0)) throw config_error("make_gaussian: need width > 0");
    SpatialTestFunction f;
    f.value = [center, width](const Vec& x) {
        const double u = (x(0) - center) / width;
        return std::exp(-0.5 * u * u);
    };
    f.gradient = [center, width](const Vec& x) {
        Vec g(1);
        const double u = (x(0) - center) / width;
        g(0) = -u / width * std::exp(-0.5 * u * u);
        return g;
    };
    f.hessian = [center, width](const Vec& x) {
        Mat H(1, 1);
        const double u = (x(0) - center) / width;
        H(0, 0) = (u * u - 1.0) / (width * width) * std::exp(-0.5 * u * u);
        return H;
    };
    return f;
}

SpaceTimeTestFunction constant_in_time(SpatialTestFunction phi) {
    SpaceTimeTestFunction p;
    p.time_factor = [](double) { return 1.0; };
    p.time_factor_dot = [](double) { return 0.0; };
    p.space = std::move(phi);
    return p;
}

SpaceTimeTestFunction affine_in_time(SpatialTestFunction phi, double a, double b) {
    SpaceTimeTestFunction p;
    p.time_factor = [a, b](double s) { return a + b * s; };
    p.time_factor_dot = [b](double) { return b; };
    p.space = std::move(phi);
    return p;
}

SpaceTimeTestFunction quadratic_in_time(SpatialTestFunction phi, double a, double b, double c) {
    SpaceTimeTestFunction p;
    p.time_factor = [a, b, c](double s) { return a + b * s + c * s * s; };
    p.time_factor_dot = [b, c](double s) { return b + 2.0 * c * s; };
    p.space = std::move(phi);
    return p;
}

} // namespace bdsde
