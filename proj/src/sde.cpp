#include "bdsde/sde.hpp"

#include <cmath>
#include <string>

#include "bdsde/errors.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/rng.hpp"

namespace bdsde {

SdeCoefficients make_constant_sde(const Vec& b, const Mat& sigma) {
    SdeCoefficients c;
    c.dim_x = static_cast<std::size_t>(b.size());
    c.dim_w = static_cast<std::size_t>(sigma.cols());
    if (sigma.rows() != b.size()) throw shape_error("make_constant_sde: sigma rows != b size");
    c.drift = [b](double, const Vec&) { return b; };
    c.diffusion = [sigma](double, const Vec&) { return sigma; };
    c.constant_coefficients = true;
    c.bounded = true;
    c.lipschitz_K = 0.0;
    // constant sigma: elliptic iff sigma sigma^* positive definite
    Mat a = sigma * sigma.transpose();
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    c.elliptic_lambda = es.eigenvalues().minCoeff() > 0 ? es.eigenvalues().minCoeff() : 0.0;
    return c;
}

ForwardPaths::ForwardPaths(std::size_t n_paths, std::size_t n_nodes, std::size_t d,
                           double t_start, Vec x_start)
    : n_paths_(n_paths), n_nodes_(n_nodes), d_(d), t_start_(t_start),
      x_start_(std::move(x_start)), x_(n_paths * n_nodes * d, 0.0) {}

Vec ForwardPaths::point(std::size_t path, std::size_t node) const {
    Vec p(static_cast<Eigen::Index>(d_));
    for (std::size_t c = 0; c < d_; ++c) p(static_cast<Eigen::Index>(c)) = x(path, node, c);
    return p;
}

ForwardPaths euler_maruyama(const SdeCoefficients& coeffs, double t_start,
                            const Vec& x_start, const TimeGrid& grid,
                            const DualBrownianPaths& noise, std::size_t n_workers) {
    const std::size_t d = coeffs.dim_x;
    const std::size_t k = coeffs.dim_w;
    if (static_cast<std::size_t>(x_start.size()) != d)
        throw shape_error("euler_maruyama: x_start dimension mismatch");
    if (noise.d() != k)
        throw shape_error("euler_maruyama: W dimension differs from sigma columns");
    if (t_start < grid.t_start() - 1e-12 || t_start > grid.t_end())
        throw config_error("euler_maruyama: start time outside grid");

    const std::size_t N = grid.n_steps();
    ForwardPaths out(noise.n_paths(), N + 1, d, t_start, x_start);

    parallel_for(noise.n_paths(), n_workers, [&](std::size_t p) {
        Vec xi = x_start;
        Vec dw(static_cast<Eigen::Index>(k));
        for (std::size_t c = 0; c < d; ++c) out.x(p, 0, c) = x_start(static_cast<Eigen::Index>(c));
        for (std::size_t i = 0; i < N; ++i) {
            const double ti = grid.node(i);
            if (ti < t_start) {
                // frozen before the start time
                for (std::size_t c = 0; c < d; ++c)
                    out.x(p, i + 1, c) = x_start(static_cast<Eigen::Index>(c));
                continue;
            }
            const Vec b = coeffs.drift(ti, xi);
            const Mat s = coeffs.diffusion(ti, xi);
            if (!b.allFinite() || !s.allFinite())
                throw numerical_error("euler_maruyama: non-finite coefficients at step " +
                                      std::to_string(i) + " (t=" + std::to_string(ti) + ")");
            for (std::size_t c = 0; c < k; ++c)
                dw(static_cast<Eigen::Index>(c)) = noise.dw(p, i, c);
            xi = xi + b * grid.dt() + s * dw;
            if (!xi.allFinite())
                throw numerical_error("euler_maruyama: path blow-up at step " +
                                      std::to_string(i + 1));
            for (std::size_t c = 0; c < d; ++c)
                out.x(p, i + 1, c) = xi(static_cast<Eigen::Index>(c));
        }
    });
    return out;
}

double apply_generator(const SdeCoefficients& coeffs, const SpatialTestFunction& theta,
                       double t, const Vec& x) {
    if (!theta.value && !theta.gradient)
        throw config_error("apply_generator: test function supplies no derivatives and no "
                           "value for finite differences");
    const Vec g = theta.grad(x);
    const Mat H = theta.hess(x);
    const Vec b = coeffs.drift(t, x);
    const Mat s = coeffs.diffusion(t, x);
    const Mat a = s * s.transpose();
    return 0.5 * (a * H).trace() + b.dot(g);
}

SdeProbeReport probe_sde(const SdeCoefficients& coeffs, double t_lo, double t_hi,
                         std::size_t probes, std::uint64_t seed) {
    SdeProbeReport rep;
    SplitStream rs(seed, SplitStream::Kind::probe, 0);
    for (std::size_t i = 0; i < probes; ++i) {
        const double t = t_lo + (t_hi - t_lo) * rs.next_uniform();
        Vec x(static_cast<Eigen::Index>(coeffs.dim_x));
        for (Eigen::Index c = 0; c < x.size(); ++c) x(c) = rs.next_normal();
        const Vec b = coeffs.drift(t, x);
        const Mat s = coeffs.diffusion(t, x);
        if (!b.allFinite() || !s.allFinite()) {
            rep.finite_ok = false;
            rep.detail = "non-finite coefficient at probe " + std::to_string(i);
            break;
        }
        if (coeffs.elliptic_lambda > 0.0) {
            Mat a = s * s.transpose();
            Vec y(x.size());
            for (Eigen::Index c = 0; c < y.size(); ++c) y(c) = rs.next_normal();
            const double yn = y.squaredNorm();
            if (yn > 0 && y.dot(a * y) < coeffs.elliptic_lambda * yn * (1.0 - 1e-12)) {
                rep.elliptic_ok = false;
                rep.detail = "ellipticity violated at probe " + std::to_string(i);
            }
        }
    }
    return rep;
}

} // namespace bdsde
