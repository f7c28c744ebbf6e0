// AVX2 + FMA kernels. Functions carry target attributes instead of the whole
// translation unit being built with -mavx2, so no AVX2 code can leak into
// inline functions shared with the scalar path.

#include "kernels_impl.hpp"

#if PROTOVAE_HAVE_AVX2

#include <immintrin.h>

#include <algorithm>
#include <cmath>

#define PROTOVAE_AVX2 __attribute__((target("avx2,fma")))

namespace protovae::numgrad::detail {

namespace {

constexpr std::size_t kBlockK = 256;
constexpr std::size_t kBlockN = 256;

PROTOVAE_AVX2 inline double hsum(__m256d v) {
    const __m128d lo = _mm256_castpd256_pd128(v);
    const __m128d hi = _mm256_extractf128_pd(v, 1);
    const __m128d s = _mm_add_pd(lo, hi);
    return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// C[R x 4*V] += A[R x kc] * B[kc x 4*V] for one register tile.
template <int R, int V>
PROTOVAE_AVX2 void tile(std::size_t kc, const double* a, std::size_t lda, const double* b, std::size_t ldb,
                        double* c, std::size_t ldc) {
    __m256d acc[R][V];
#pragma GCC unroll 4
    for (int r = 0; r < R; ++r)
#pragma GCC unroll 2
        for (int v = 0; v < V; ++v) acc[r][v] = _mm256_loadu_pd(c + r * ldc + 4 * v);

    for (std::size_t p = 0; p < kc; ++p) {
        __m256d bv[V];
#pragma GCC unroll 2
        for (int v = 0; v < V; ++v) bv[v] = _mm256_loadu_pd(b + p * ldb + 4 * v);
#pragma GCC unroll 4
        for (int r = 0; r < R; ++r) {
            const __m256d av = _mm256_broadcast_sd(a + r * lda + p);
#pragma GCC unroll 2
            for (int v = 0; v < V; ++v) acc[r][v] = _mm256_fmadd_pd(av, bv[v], acc[r][v]);
        }
    }

#pragma GCC unroll 4
    for (int r = 0; r < R; ++r)
#pragma GCC unroll 2
        for (int v = 0; v < V; ++v) _mm256_storeu_pd(c + r * ldc + 4 * v, acc[r][v]);
}

template <int R>
PROTOVAE_AVX2 void row_strip(std::size_t nc, std::size_t kc, const double* a, std::size_t lda, const double* b,
                             std::size_t ldb, double* c, std::size_t ldc) {
    std::size_t j = 0;
    for (; j + 8 <= nc; j += 8) tile<R, 2>(kc, a, lda, b + j, ldb, c + j, ldc);
    for (; j + 4 <= nc; j += 4) tile<R, 1>(kc, a, lda, b + j, ldb, c + j, ldc);
    for (; j < nc; ++j) {
        for (int r = 0; r < R; ++r) {
            double s = c[r * ldc + j];
            for (std::size_t p = 0; p < kc; ++p) s += a[r * lda + p] * b[p * ldb + j];
            c[r * ldc + j] = s;
        }
    }
}

PROTOVAE_AVX2 void gemm_avx2(std::size_t m, std::size_t n, std::size_t k, const double* a, const double* b,
                             double* c, bool accumulate) {
    if (!accumulate) std::fill(c, c + m * n, 0.0);
    for (std::size_t pc = 0; pc < k; pc += kBlockK) {
        const std::size_t kc = std::min(kBlockK, k - pc);
        for (std::size_t jc = 0; jc < n; jc += kBlockN) {
            const std::size_t nc = std::min(kBlockN, n - jc);
            const double* bblk = b + pc * n + jc;
            std::size_t i = 0;
            for (; i + 4 <= m; i += 4) row_strip<4>(nc, kc, a + i * k + pc, k, bblk, n, c + i * n + jc, n);
            switch (m - i) {
                case 3: row_strip<3>(nc, kc, a + i * k + pc, k, bblk, n, c + i * n + jc, n); break;
                case 2: row_strip<2>(nc, kc, a + i * k + pc, k, bblk, n, c + i * n + jc, n); break;
                case 1: row_strip<1>(nc, kc, a + i * k + pc, k, bblk, n, c + i * n + jc, n); break;
                default: break;
            }
        }
    }
}

// add / mul / axpy / adam use separate multiply and add instructions (no FMA)
// so they round exactly like the scalar reference.

PROTOVAE_AVX2 void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(y + i, _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
    for (; i < n; ++i) y[i] += alpha * x[i];
}

PROTOVAE_AVX2 void add_avx2(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] + b[i];
}

PROTOVAE_AVX2 void mul_avx2(std::size_t n, const double* a, const double* b, double* out) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    for (; i < n; ++i) out[i] = a[i] * b[i];
}

PROTOVAE_AVX2 double dot_avx2(std::size_t n, const double* a, const double* b) {
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
        s1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), s1);
    }
    for (; i + 4 <= n; i += 4) s0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), s0);
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

PROTOVAE_AVX2 double squared_distance_avx2(std::size_t n, const double* a, const double* b) {
    __m256d s0 = _mm256_setzero_pd(), s1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        const __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4));
        s0 = _mm256_fmadd_pd(d0, d0, s0);
        s1 = _mm256_fmadd_pd(d1, d1, s1);
    }
    for (; i + 4 <= n; i += 4) {
        const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i));
        s0 = _mm256_fmadd_pd(d, d, s0);
    }
    double s = hsum(_mm256_add_pd(s0, s1));
    for (; i < n; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

PROTOVAE_AVX2 void adam_update_avx2(std::size_t n, double* param, const double* grad, double* m, double* v,
                                    const AdamCoefficients& c) {
    const __m256d b1 = _mm256_set1_pd(c.beta1), nb1 = _mm256_set1_pd(1.0 - c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2), nb2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bias1 = _mm256_set1_pd(c.bias1), bias2 = _mm256_set1_pd(c.bias2);
    const __m256d lr = _mm256_set1_pd(c.lr), eps = _mm256_set1_pd(c.eps);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d g = _mm256_loadu_pd(grad + i);
        const __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(nb1, g));
        const __m256d vi =
            _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)), _mm256_mul_pd(_mm256_mul_pd(nb2, g), g));
        _mm256_storeu_pd(m + i, mi);
        _mm256_storeu_pd(v + i, vi);
        const __m256d m_hat = _mm256_mul_pd(mi, bias1);
        const __m256d v_hat = _mm256_mul_pd(vi, bias2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        _mm256_storeu_pd(param + i, _mm256_sub_pd(_mm256_loadu_pd(param + i), step));
    }
    for (; i < n; ++i) {
        const double g = grad[i];
        m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g;
        v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g * g;
        const double m_hat = m[i] * c.bias1;
        const double v_hat = v[i] * c.bias2;
        param[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.eps);
    }
}

}  // namespace

const KernelTable kAvx2Table{
    .name = "avx2",
    .gemm = gemm_avx2,
    .axpy = axpy_avx2,
    .add = add_avx2,
    .mul = mul_avx2,
    .dot = dot_avx2,
    .squared_distance = squared_distance_avx2,
    .adam_update = adam_update_avx2,
};

}  // namespace protovae::numgrad::detail

#endif  // PROTOVAE_HAVE_AVX2
