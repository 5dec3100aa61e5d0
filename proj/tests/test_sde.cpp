#include <doctest.h>

#include <cmath>

#include "bdsde/errors.hpp"
#include "bdsde/numerics.hpp"
#include "bdsde/sde.hpp"

using namespace bdsde;

namespace {

SdeCoefficients scalar_sde(std::function<double(double, double)> b,
                           std::function<double(double, double)> s) {
    SdeCoefficients c;
    c.dim_x = 1;
    c.dim_w = 1;
    c.drift = [b](double t, const Vec& x) { return vec1(b(t, x(0))); };
    c.diffusion = [s](double t, const Vec& x) {
        Mat m(1, 1);
        m(0, 0) = s(t, x(0));
        return m;
    };
    return c;
}

} // namespace

TEST_CASE("degenerate coefficients freeze or translate the path") {
    TimeGrid g(0.0, 1.0, 32);
    DualBrownianPaths noise(g, 1, 1, 8, 3);

    SdeCoefficients frozen = make_constant_sde(vec1(0.0), Mat::Zero(1, 1));
    ForwardPaths xf = euler_maruyama(frozen, 0.0, vec1(1.5), g, noise);
    for (std::size_t p = 0; p < 8; ++p)
        for (std::size_t i = 0; i <= 32; ++i) CHECK(xf.x(p, i, 0) == 1.5);

    SdeCoefficients unit = make_constant_sde(vec1(0.0), Mat::Identity(1, 1));
    ForwardPaths xu = euler_maruyama(unit, 0.0, vec1(2.0), g, noise);
    for (std::size_t p = 0; p < 8; ++p)
        for (std::size_t i = 0; i <= 32; ++i)
            CHECK(xu.x(p, i, 0) ==
                  doctest::Approx(2.0 + noise.w(p, i, 0) - noise.w(p, 0, 0)).epsilon(1e-13));
}

TEST_CASE("paths before the start time stay at the start point") {
    TimeGrid g(0.0, 1.0, 16);
    DualBrownianPaths noise(g, 1, 1, 4, 9);
    SdeCoefficients unit = make_constant_sde(vec1(0.0), Mat::Identity(1, 1));
    ForwardPaths x = euler_maruyama(unit, 0.5, vec1(3.0), g, noise);
    for (std::size_t p = 0; p < 4; ++p) {
        for (std::size_t i = 0; i <= 8; ++i) CHECK(x.x(p, i, 0) == 3.0);
        CHECK(x.x(p, 16, 0) != 3.0);
    }
}

TEST_CASE("self-refinement oracle: strong error halves with dt for additive noise") {
    // d=1, b(x) = -x, sigma = 0.5; reference on the fine grid, coarse runs on
    // summed increments of the same path (the oracle lives here, in the test)
    const std::size_t NF = 2048, P = 512;
    TimeGrid gf(0.0, 1.0, NF);
    DualBrownianPaths noise(gf, 1, 1, P, 101);

    SdeCoefficients ou = scalar_sde([](double, double x) { return -x; },
                                    [](double, double) { return 0.5; });
    ForwardPaths x_lib = euler_maruyama(ou, 0.0, vec1(1.0), gf, noise);

    auto euler_ref = [&](std::size_t p, std::size_t n_coarse) {
        const std::size_t stride = NF / n_coarse;
        const double dt = 1.0 / static_cast<double>(n_coarse);
        double x = 1.0;
        for (std::size_t i = 0; i < n_coarse; ++i) {
            const double dw =
                noise.w(p, (i + 1) * stride, 0) - noise.w(p, i * stride, 0);
            x += -x * dt + 0.5 * dw;
        }
        return x;
    };

    // the library result at full resolution equals the hand-rolled recursion
    for (std::size_t p = 0; p < P; p += 100)
        CHECK(x_lib.x(p, NF, 0) == doctest::Approx(euler_ref(p, NF)).epsilon(1e-12));

    double e128 = 0.0, e256 = 0.0;
    for (std::size_t p = 0; p < P; ++p) {
        const double ref = x_lib.x(p, NF, 0);
        e128 += sqr(euler_ref(p, 128) - ref);
        e256 += sqr(euler_ref(p, 256) - ref);
    }
    e128 = std::sqrt(e128 / P);
    e256 = std::sqrt(e256 / P);
    CHECK(e256 <= 0.7 * e128); // additive noise: first-order strong rate
}

TEST_CASE("non-finite coefficients raise a numerical error naming the step") {
    TimeGrid g(0.0, 1.0, 8);
    DualBrownianPaths noise(g, 1, 1, 1, 4);
    SdeCoefficients bad = scalar_sde(
        [](double t, double) { return t > 0.4 ? std::numeric_limits<double>::quiet_NaN() : 0.0; },
        [](double, double) { return 1.0; });
    CHECK_THROWS_AS(euler_maruyama(bad, 0.0, vec1(0.0), g, noise), numerical_error);
}

TEST_CASE("generator examples") {
    SdeCoefficients unit2;
    unit2.dim_x = 2;
    unit2.dim_w = 2;
    unit2.drift = [](double, const Vec& x) { return Vec::Zero(x.size()).eval(); };
    unit2.diffusion = [](double, const Vec&) { return Mat::Identity(2, 2).eval(); };

    SpatialTestFunction constant;
    constant.value = [](const Vec&) { return 3.0; };
    Vec x(2);
    x << 0.3, -0.7;
    CHECK(apply_generator(unit2, constant, 0.0, x) == doctest::Approx(0.0).epsilon(1e-8));

    // |x|^2 in d = 2 with b = 0, sigma = I: L theta = 2
    SpatialTestFunction sq;
    sq.value = [](const Vec& v) { return v.squaredNorm(); };
    CHECK(apply_generator(unit2, sq, 0.0, x) == doctest::Approx(2.0).epsilon(1e-6));

    // analytic vs finite-difference agreement within O(h^2)
    SdeCoefficients drifty;
    drifty.dim_x = 1;
    drifty.dim_w = 1;
    drifty.drift = [](double, const Vec& xv) { return vec1(0.5 - xv(0)); };
    drifty.diffusion = [](double, const Vec& xv) {
        Mat m(1, 1);
        m(0, 0) = 1.0 + 0.1 * xv(0) * xv(0);
        return m;
    };
    SpatialTestFunction smooth = make_gaussian(0.2, 0.8); // analytic derivatives
    SpatialTestFunction fd;
    fd.value = smooth.value; // derivatives via central differences
    const Vec p = vec1(0.4);
    const double la = apply_generator(drifty, smooth, 0.0, p);
    const double lf = apply_generator(drifty, fd, 0.0, p);
    CHECK(la == doctest::Approx(lf).epsilon(1e-6));

    // linearity in theta
    SpatialTestFunction square1d;
    square1d.value = [](const Vec& v) { return v(0) * v(0); };
    SpatialTestFunction sum;
    auto smooth_value = smooth.value;
    sum.value = [smooth_value](const Vec& v) { return smooth_value(v) + 2.0 * v(0) * v(0); };
    CHECK(apply_generator(drifty, sum, 0.0, p) ==
          doctest::Approx(lf + 2.0 * apply_generator(drifty, square1d, 0.0, p)).epsilon(1e-5));

    SpatialTestFunction empty;
    CHECK_THROWS_AS(apply_generator(drifty, empty, 0.0, p), config_error);
}

TEST_CASE("Euler-Maruyama is monotone in the start point (coupled noise, d=1)") {
    TimeGrid g(0.0, 1.0, 64);
    DualBrownianPaths noise(g, 1, 1, 128, 55);
    SdeCoefficients ou = scalar_sde([](double, double x) { return -x; },
                                    [](double, double) { return 0.5; });
    ForwardPaths lo = euler_maruyama(ou, 0.0, vec1(0.0), g, noise);
    ForwardPaths hi = euler_maruyama(ou, 0.0, vec1(0.5), g, noise);
    for (std::size_t p = 0; p < 128; ++p)
        for (std::size_t i = 0; i <= 64; ++i) CHECK(lo.x(p, i, 0) <= hi.x(p, i, 0) + 1e-14);
}

TEST_CASE("probe report flags ellipticity claims") {
    SdeCoefficients flat = make_constant_sde(vec1(0.0), Mat::Zero(1, 1));
    flat.elliptic_lambda = 0.5; // wrong claim: sigma = 0
    const SdeProbeReport rep = probe_sde(flat, 0.0, 1.0, 64, 11);
    CHECK(rep.finite_ok);
    CHECK_FALSE(rep.elliptic_ok);
}
