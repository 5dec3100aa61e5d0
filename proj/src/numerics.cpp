#include "bdsde/numerics.hpp"

#include "bdsde/errors.hpp"

namespace bdsde {

namespace {

constexpr std::size_t kLeafSize = 64;

double pairwise_span(const double* v, std::size_t n) {
    if (n <= kLeafSize) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += v[i];
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_span(v, half) + pairwise_span(v + half, n - half);
}

double pairwise_fn(std::size_t lo, std::size_t n, const std::function<double(std::size_t)>& f) {
    if (n <= kLeafSize) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i) s += f(lo + i);
        return s;
    }
    const std::size_t half = n / 2;
    return pairwise_fn(lo, half, f) + pairwise_fn(lo + half, n - half, f);
}

} // namespace

double pairwise_sum(std::span<const double> v) { return pairwise_span(v.data(), v.size()); }

double pairwise_sum(std::size_t n, const std::function<double(std::size_t)>& f) {
    return pairwise_fn(0, n, f);
}

double mean(std::span<const double> v) {
    if (v.empty()) return 0.0;
    return pairwise_sum(v) / static_cast<double>(v.size());
}

MeanVar mean_var(std::span<const double> v) {
    MeanVar r;
    r.n = v.size();
    if (r.n == 0) return r;
    r.mean = mean(v);
    if (r.n == 1) return r;
    const double m = r.mean;
    const double ss = pairwise_sum(v.size(), [&](std::size_t i) { return sqr(v[i] - m); });
    r.var = ss / static_cast<double>(r.n - 1);
    r.std_err = std::sqrt(r.var / static_cast<double>(r.n));
    return r;
}

double fit_slope(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2)
        throw shape_error("fit_slope: need two equally sized samples of length >= 2");
    const double mx = mean(x);
    const double my = mean(y);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += sqr(x[i] - mx);
    }
    if (sxx == 0.0) throw numerical_error("fit_slope: degenerate abscissae");
    return sxy / sxx;
}

} // namespace bdsde
