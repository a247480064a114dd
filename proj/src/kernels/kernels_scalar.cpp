#include <cmath>

#include "circuitdiff/kernels.hpp"

namespace circuitdiff::kernels {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpby(double ax, const double* x, double by, const double* y, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = ax * x[i] + by * y[i];
}

void gemm_abt(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < n; ++j) c[i * n + j] = dot(a + i * k, b + j * k, k);
    }
}

void gemm_atb_acc(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t r = 0; r < m; ++r) {
        for (std::size_t i = 0; i < n; ++i) axpy(a[r * n + i], b + r * k, c + i * k, k);
    }
}

void gemm_ab(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        double* row = c + i * k;
        for (std::size_t j = 0; j < k; ++j) row[j] = 0.0;
        for (std::size_t p = 0; p < n; ++p) axpy(a[i * n + p], b + p * k, row, k);
    }
}

void adam_update(double* param, const double* grad, double* m1, double* m2, std::size_t n,
                 const AdamCoefficients& c) {
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grad[i];
        m1[i] = c.beta1 * m1[i] + (1.0 - c.beta1) * g;
        m2[i] = c.beta2 * m2[i] + (1.0 - c.beta2) * (g * g);
        const double mhat = m1[i] / c.bias_correction1;
        const double vhat = m2[i] / c.bias_correction2;
        param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

constexpr KernelTable kScalar{Isa::Scalar, dot, axpy, axpby, gemm_abt, gemm_atb_acc, gemm_ab, adam_update};

}  // namespace

const KernelTable& scalar_kernels() noexcept { return kScalar; }

}  // namespace circuitdiff::kernels
