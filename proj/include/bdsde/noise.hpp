#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace bdsde {

/// Uniform partition t_0 < ... < t_N of [t_start, t_end].
class TimeGrid {
public:
    TimeGrid(double t_start, double t_end, std::size_t n_steps);

    double t_start() const { return t_start_; }
    double t_end() const { return t_end_; }
    std::size_t n_steps() const { return n_steps_; }
    double dt() const { return dt_; }
    double node(std::size_t i) const { return nodes_[i]; }
    std::span<const double> nodes() const { return nodes_; }

private:
    double t_start_;
    double t_end_;
    std::size_t n_steps_;
    double dt_;
    std::vector<double> nodes_;
};

/// The two independent Brownian motions of a run: n_paths forward paths W
/// (d components each) and a single backward path B (m components) shared by
/// every W path. Both start at zero; increments are drawn from disjoint
/// substreams of the same seed, one stream per W path plus one for B.
class DualBrownianPaths {
public:
    DualBrownianPaths(const TimeGrid& grid, std::size_t d, std::size_t m,
                      std::size_t n_paths, std::uint64_t seed, std::size_t n_workers = 1,
                      std::uint64_t b_index = 0);

    /// Wraps externally supplied node values (w: [n_paths][n_nodes][d],
    /// b: [n_nodes][m]); used by coupling tests and grid-coarsening oracles.
    static DualBrownianPaths from_data(const TimeGrid& grid, std::size_t d, std::size_t m,
                                       std::vector<double> w, std::vector<double> b,
                                       std::uint64_t seed, std::uint64_t b_index = 0);

    std::size_t n_paths() const { return n_paths_; }
    std::size_t n_nodes() const { return n_nodes_; }
    std::size_t d() const { return d_; }
    std::size_t m() const { return m_; }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t b_index() const { return b_index_; }

    double w(std::size_t path, std::size_t node, std::size_t comp = 0) const {
        return w_[(path * n_nodes_ + node) * d_ + comp];
    }
    double dw(std::size_t path, std::size_t step, std::size_t comp = 0) const {
        return w(path, step + 1, comp) - w(path, step, comp);
    }
    double b(std::size_t node, std::size_t comp = 0) const { return b_[node * m_ + comp]; }
    double db(std::size_t step, std::size_t comp = 0) const {
        return b(step + 1, comp) - b(step, comp);
    }

private:
    std::size_t d_, m_, n_paths_, n_nodes_;
    std::uint64_t seed_, b_index_;
    std::vector<double> w_; // [n_paths][n_nodes][d]
    std::vector<double> b_; // [n_nodes][m]
};

/// Left-endpoint Ito sum  sum_i integrand[i] * dw[i]  over N steps.
double forward_ito(std::span<const double> integrand_left, std::span<const double> dw);

/// Right-endpoint (backward Ito) sum  sum_i integrand[i] * db[i], where
/// integrand[i] is the value at the right node t_{i+1}. The right-endpoint
/// rule is the defining discretization of the backward integral.
double backward_ito(std::span<const double> integrand_right, std::span<const double> db);

} // namespace bdsde
