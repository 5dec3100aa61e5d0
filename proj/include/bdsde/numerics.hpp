#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace bdsde {

// Pairwise (cascade) summation. Fixed recursion tree, so the result is
// independent of how work is distributed across threads and the rounding
// error stays O(log n) instead of O(n). All path reductions in the solver
// go through this.
double pairwise_sum(std::span<const double> v);

// Pairwise sum of f(i) for i in [0, n).
double pairwise_sum(std::size_t n, const std::function<double(std::size_t)>& f);

double mean(std::span<const double> v);

struct MeanVar {
    double mean = 0.0;
    double var = 0.0;     // unbiased sample variance
    double std_err = 0.0; // sqrt(var / n)
    std::size_t n = 0;
};

MeanVar mean_var(std::span<const double> v);

/// Slope of the least-squares line of y against x (used for log-log rate fits).
double fit_slope(std::span<const double> x, std::span<const double> y);

inline double sqr(double x) { return x * x; }

} // namespace bdsde
