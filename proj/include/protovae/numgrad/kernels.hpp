#pragma once

#include <cstddef>
#include <string_view>

namespace protovae::numgrad {

// Data-parallel inner loops. Each ISA provides a complete table; the active
// table is picked once at startup from CPUID and can be overridden with the
// PROTOVAE_KERNELS environment variable ("scalar" or "avx2").
//
// The scalar table is the reference. SIMD tables must agree with it to
// rounding (tests/unit/test_kernels.cpp), but are not bit-identical to it:
// accumulation order differs. Determinism holds per table.

struct AdamCoefficients {
    double lr;
    double beta1;
    double beta2;
    double eps;
    double bias1;  // 1 / (1 - beta1^t)
    double bias2;  // 1 / (1 - beta2^t)
};

struct KernelTable {
    std::string_view name;

    // c = a * b (or c += a * b when accumulate), all row-major, a is m x k, b is k x n.
    void (*gemm)(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b, double* c,
                 bool accumulate);

    // y += alpha * x
    void (*axpy)(std::size_t n, double alpha, const double* x, double* y);

    // out = a + b, out = a * b (out may alias either input)
    void (*add)(std::size_t n, const double* a, const double* b, double* out);
    void (*mul)(std::size_t n, const double* a, const double* b, double* out);

    double (*dot)(std::size_t n, const double* a, const double* b);
    double (*squared_distance)(std::size_t n, const double* a, const double* b);

    // In-place Adam update of one parameter block.
    void (*adam_update)(std::size_t n, double* param, const double* grad, double* m, double* v,
                        const AdamCoefficients& c);
};

enum class KernelIsa { scalar, avx2 };

const KernelTable& scalar_kernels();

/// Null when the binary was built without AVX2 support or the CPU lacks AVX2+FMA.
const KernelTable* avx2_kernels();

/// Table used by every numeric routine in the library.
const KernelTable& kernels();

/// Force a table. Returns false (and changes nothing) if it is unavailable.
bool select_kernels(KernelIsa isa);

}  // namespace protovae::numgrad
