#include "bdsde/noise.hpp"

#include <cmath>

#include "bdsde/errors.hpp"
#include "bdsde/parallel.hpp"
#include "bdsde/rng.hpp"

namespace bdsde {

TimeGrid::TimeGrid(double t_start, double t_end, std::size_t n_steps)
    : t_start_(t_start), t_end_(t_end), n_steps_(n_steps) {
    if (n_steps == 0) throw config_error("TimeGrid: n_steps must be >= 1");
    if (!(t_end > t_start)) throw config_error("TimeGrid: need t_end > t_start");
    dt_ = (t_end - t_start) / static_cast<double>(n_steps);
    nodes_.resize(n_steps + 1);
    for (std::size_t i = 0; i <= n_steps; ++i)
        nodes_[i] = t_start + dt_ * static_cast<double>(i);
    nodes_[n_steps] = t_end;
}

DualBrownianPaths::DualBrownianPaths(const TimeGrid& grid, std::size_t d, std::size_t m,
                                     std::size_t n_paths, std::uint64_t seed,
                                     std::size_t n_workers, std::uint64_t b_index)
    : d_(d), m_(m), n_paths_(n_paths), n_nodes_(grid.n_steps() + 1), seed_(seed),
      b_index_(b_index) {
    if (d == 0 || m == 0) throw config_error("DualBrownianPaths: dimensions must be >= 1");
    if (n_paths == 0) throw config_error("DualBrownianPaths: n_paths must be >= 1");

    const double sqrt_dt = std::sqrt(grid.dt());
    const std::size_t N = grid.n_steps();

    b_.assign(n_nodes_ * m_, 0.0);
    SplitStream bs(seed, SplitStream::Kind::backward_noise, b_index);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t k = 0; k < m_; ++k)
            b_[(i + 1) * m_ + k] = b_[i * m_ + k] + sqrt_dt * bs.next_normal();

    w_.assign(n_paths_ * n_nodes_ * d_, 0.0);
    parallel_for(n_paths_, n_workers, [&](std::size_t p) {
        SplitStream ws(seed, SplitStream::Kind::forward_noise, p);
        double* path = w_.data() + p * n_nodes_ * d_;
        for (std::size_t i = 0; i < N; ++i)
            for (std::size_t k = 0; k < d_; ++k)
                path[(i + 1) * d_ + k] = path[i * d_ + k] + sqrt_dt * ws.next_normal();
    });
}

DualBrownianPaths DualBrownianPaths::from_data(const TimeGrid& grid, std::size_t d,
                                               std::size_t m, std::vector<double> w,
                                               std::vector<double> b, std::uint64_t seed,
                                               std::uint64_t b_index) {
    const std::size_t n_nodes = grid.n_steps() + 1;
    if (b.size() % (n_nodes * m) != 0 || b.size() != n_nodes * m)
        throw shape_error("DualBrownianPaths::from_data: b size mismatch");
    if (w.size() % (n_nodes * d) != 0)
        throw shape_error("DualBrownianPaths::from_data: w size mismatch");
    DualBrownianPaths out(grid, d, m, w.size() / (n_nodes * d), seed, 1, b_index);
    out.w_ = std::move(w);
    out.b_ = std::move(b);
    return out;
}

double forward_ito(std::span<const double> integrand_left, std::span<const double> dw) {
    if (integrand_left.size() != dw.size())
        throw shape_error("forward_ito: integrand and increment lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < dw.size(); ++i) s += integrand_left[i] * dw[i];
    return s;
}

double backward_ito(std::span<const double> integrand_right, std::span<const double> db) {
    if (integrand_right.size() != db.size())
        throw shape_error("backward_ito: integrand and increment lengths differ");
    double s = 0.0;
    for (std::size_t i = 0; i < db.size(); ++i) s += integrand_right[i] * db[i];
    return s;
}

} // namespace bdsde
