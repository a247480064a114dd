#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "circuitdiff/nn.hpp"

namespace testing {

inline double rel_err(double a, double b) {
    const double scale = std::max(std::abs(a), std::abs(b));
    return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline std::vector<double> random_vector(std::size_t n, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = u(rng);
    return v;
}

inline circuitdiff::nn::Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                                             double lo = -1.0, double hi = 1.0) {
    return circuitdiff::nn::Matrix(rows, cols, random_vector(rows * cols, seed, lo, hi));
}

}  // namespace testing
