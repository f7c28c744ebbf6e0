#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace protovae::numgrad {

namespace {

bool cpu_has_avx2() {
#if PROTOVAE_HAVE_AVX2 && (defined(__GNUC__) || defined(__clang__))
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable* detect() {
    const char* env = std::getenv("PROTOVAE_KERNELS");
    const std::string_view forced = env ? env : "";
    if (forced == "scalar") return &detail::kScalarTable;
    if (const KernelTable* simd = avx2_kernels()) return simd;
    return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& active() {
    static std::atomic<const KernelTable*> table{detect()};
    return table;
}

}  // namespace

const KernelTable& scalar_kernels() {
    return detail::kScalarTable;
}

const KernelTable* avx2_kernels() {
#if PROTOVAE_HAVE_AVX2
    static const bool supported = cpu_has_avx2();
    return supported ? &detail::kAvx2Table : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& kernels() {
    return *active().load(std::memory_order_relaxed);
}

bool select_kernels(KernelIsa isa) {
    const KernelTable* table = isa == KernelIsa::scalar ? &detail::kScalarTable : avx2_kernels();
    if (!table) return false;
    active().store(table, std::memory_order_relaxed);
    return true;
}

}  // namespace protovae::numgrad
