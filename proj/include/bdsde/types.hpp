#pragma once

#include <Eigen/Dense>

namespace bdsde {

/// Spatial dimension cap for v1. Points, drifts and noise values live in
/// fixed-capacity Eigen vectors so the per-path hot loops never touch the
/// heap.
constexpr int kMaxDim = 8;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxDim,
                          kMaxDim>;

inline Vec vec1(double x) {
    Vec v(1);
    v(0) = x;
    return v;
}

} // namespace bdsde
