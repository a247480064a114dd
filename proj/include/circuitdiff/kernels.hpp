#pragma once

// Data-parallel inner loops used by the dense network and the diffusion
// sampler. Each kernel has a scalar reference implementation and, on x86-64,
// an AVX2+FMA variant; the variant is chosen once at runtime from CPUID and can
// be forced with CIRCUITDIFF_ISA=scalar|avx2. All matrices are row-major.

#include <cstddef>
#include <optional>
#include <string_view>

namespace circuitdiff::kernels {

enum class Isa { Scalar, Avx2 };

std::string_view isa_name(Isa isa) noexcept;
std::optional<Isa> parse_isa(std::string_view name) noexcept;

struct AdamCoefficients {
    double lr;
    double beta1;
    double beta2;
    double eps;
    double bias_correction1;  // 1 - beta1^step
    double bias_correction2;  // 1 - beta2^step
};

struct KernelTable {
    Isa isa;

    double (*dot)(const double* a, const double* b, std::size_t n);
    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // out = ax * x + by * y
    void (*axpby)(double ax, const double* x, double by, const double* y, double* out, std::size_t n);
    // c[m x n] = a[m x k] * b[n x k]^T
    void (*gemm_abt)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
    // c[n x k] += a[m x n]^T * b[m x k]
    void (*gemm_atb_acc)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
    // c[m x k] = a[m x n] * b[n x k]
    void (*gemm_ab)(const double* a, const double* b, double* c, std::size_t m, std::size_t n, std::size_t k);
    void (*adam_update)(double* param, const double* grad, double* m1, double* m2, std::size_t n,
                        const AdamCoefficients& c);
};

const KernelTable& scalar_kernels() noexcept;
/// Null when the build has no AVX2 variant (non-x86 targets).
const KernelTable* avx2_kernels() noexcept;

bool cpu_supports(Isa isa) noexcept;
Isa best_available() noexcept;

/// The process-wide table: honours CIRCUITDIFF_ISA on first use, otherwise the
/// best ISA the CPU supports.
const KernelTable& active() noexcept;
/// Forces a table; returns false (and changes nothing) if the ISA is not
/// available on this build or CPU.
bool set_active(Isa isa) noexcept;

}  // namespace circuitdiff::kernels
