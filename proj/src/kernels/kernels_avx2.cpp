// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include <cmath>

#include "circuitdiff/kernels.hpp"

namespace circuitdiff::kernels {

namespace {

inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    }
    double s = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void axpby(double ax, const double* x, double by, const double* y, double* out, std::size_t n) {
    const __m256d va = _mm256_set1_pd(ax);
    const __m256d vb = _mm256_set1_pd(by);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d t = _mm256_mul_pd(vb, _mm256_loadu_pd(y + i));
        _mm256_storeu_pd(out + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), t));
    }
    for (; i < n; ++i) out[i] = ax * x[i] + by * y[i];
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
    const __m256d b1 = _mm256_set1_pd(c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2);
    const __m256d ob1 = _mm256_set1_pd(1.0 - c.beta1);
    const __m256d ob2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
    const __m256d lr = _mm256_set1_pd(c.lr);
    const __m256d eps = _mm256_set1_pd(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        // Same operation order as the scalar kernel, no fused ops: results
        // are bit-identical.
        const __m256d m = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m1 + i)), _mm256_mul_pd(ob1, g));
        const __m256d v =
            _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(m2 + i)), _mm256_mul_pd(ob2, _mm256_mul_pd(g, g)));
        _mm256_storeu_pd(m1 + i, m);
        _mm256_storeu_pd(m2 + i, v);
        const __m256d mhat = _mm256_div_pd(m, bc1);
        const __m256d vhat = _mm256_div_pd(v, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m1[i] = c.beta1 * m1[i] + (1.0 - c.beta1) * g;
        m2[i] = c.beta2 * m2[i] + (1.0 - c.beta2) * (g * g);
        const double mhat = m1[i] / c.bias_correction1;
        const double vhat = m2[i] / c.bias_correction2;
        param[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
    }
}

constexpr KernelTable kAvx2{Isa::Avx2, dot, axpy, axpby, gemm_abt, gemm_atb_acc, gemm_ab, adam_update};

}  // namespace

const KernelTable* avx2_kernels() noexcept { return &kAvx2; }

}  // namespace circuitdiff::kernels
