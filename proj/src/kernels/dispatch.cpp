#include <atomic>
#include <cstdlib>

#include "circuitdiff/kernels.hpp"

namespace circuitdiff::kernels {

#if !defined(CIRCUITDIFF_HAVE_AVX2)
const KernelTable* avx2_kernels() noexcept { return nullptr; }
#endif

std::string_view isa_name(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "unknown";
}

std::optional<Isa> parse_isa(std::string_view name) noexcept {
    if (name == "scalar") return Isa::Scalar;
    if (name == "avx2") return Isa::Avx2;
    return std::nullopt;
}

bool cpu_supports(Isa isa) noexcept {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2:
#if defined(CIRCUITDIFF_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
    }
    return false;
}

Isa best_available() noexcept { return cpu_supports(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar; }

namespace {

const KernelTable* table_for(Isa isa) noexcept {
    if (!cpu_supports(isa)) return nullptr;
    return isa == Isa::Avx2 ? avx2_kernels() : &scalar_kernels();
}

const KernelTable* initial_table() noexcept {
    if (const char* env = std::getenv("CIRCUITDIFF_ISA")) {
        if (auto isa = parse_isa(env)) {
            if (const auto* t = table_for(*isa)) return t;
        }
    }
    return table_for(best_available());
}

std::atomic<const KernelTable*>& slot() noexcept {
    static std::atomic<const KernelTable*> current{initial_table()};
    return current;
}

}  // namespace

const KernelTable& active() noexcept { return *slot().load(std::memory_order_acquire); }

bool set_active(Isa isa) noexcept {
    const auto* t = table_for(isa);
    if (t == nullptr) return false;
    slot().store(t, std::memory_order_release);
    return true;
}

}  // namespace circuitdiff::kernels
