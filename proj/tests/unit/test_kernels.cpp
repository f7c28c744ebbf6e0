// Every SIMD table must agree with the scalar reference on the same inputs.

#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <vector>

#include "protovae/numgrad/kernels.hpp"

using namespace protovae::numgrad;

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist;
    std::vector<double> v(n);
    for (auto& x : v) x = dist(rng);
    return v;
}

class SimdEquivalence : public ::testing::Test {
protected:
    void SetUp() override {
        simd_ = avx2_kernels();
        if (!simd_) GTEST_SKIP() << "no SIMD table on this machine";
    }
    const KernelTable& ref_ = scalar_kernels();
    const KernelTable* simd_ = nullptr;
    std::mt19937_64 rng_{1234};
};

}  // namespace

TEST_F(SimdEquivalence, GemmOddShapes) {
    // Sizes straddle the 4x8 register tile and the 256 cache blocks.
    const std::size_t shapes[][3] = {{1, 1, 1}, {3, 5, 7}, {4, 8, 1}, {5, 13, 9}, {17, 300, 40}, {7, 9, 300}, {33, 270, 260}};
    for (const auto& s : shapes) {
        const std::size_t m = s[0], n = s[1], k = s[2];
        const auto a = random_vector(m * k, rng_);
        const auto b = random_vector(k * n, rng_);
        const auto init = random_vector(m * n, rng_);
        for (bool accumulate : {false, true}) {
            auto c_ref = init, c_simd = init;
            ref_.gemm(m, n, k, a.data(), b.data(), c_ref.data(), accumulate);
            simd_->gemm(m, n, k, a.data(), b.data(), c_simd.data(), accumulate);
            for (std::size_t i = 0; i < m * n; ++i)
                ASSERT_NEAR(c_ref[i], c_simd[i], 1e-11 * (1.0 + std::abs(c_ref[i])))
                    << "m=" << m << " n=" << n << " k=" << k << " i=" << i;
        }
    }
}

TEST_F(SimdEquivalence, ElementwiseKernelsAreBitIdentical) {
    for (std::size_t n : {0u, 1u, 3u, 4u, 9u, 1001u}) {
        const auto a = random_vector(n, rng_);
        const auto b = random_vector(n, rng_);
        std::vector<double> r1(n), r2(n);
        ref_.add(n, a.data(), b.data(), r1.data());
        simd_->add(n, a.data(), b.data(), r2.data());
        EXPECT_EQ(r1, r2);
        ref_.mul(n, a.data(), b.data(), r1.data());
        simd_->mul(n, a.data(), b.data(), r2.data());
        EXPECT_EQ(r1, r2);
        auto y1 = b, y2 = b;
        ref_.axpy(n, -0.37, a.data(), y1.data());
        simd_->axpy(n, -0.37, a.data(), y2.data());
        EXPECT_EQ(y1, y2);
    }
}

TEST_F(SimdEquivalence, Reductions) {
    for (std::size_t n : {0u, 1u, 5u, 8u, 40u, 784u}) {
        const auto a = random_vector(n, rng_);
        const auto b = random_vector(n, rng_);
        const double tol = 1e-12 * static_cast<double>(n + 1);
        EXPECT_NEAR(ref_.dot(n, a.data(), b.data()), simd_->dot(n, a.data(), b.data()), tol);
        EXPECT_NEAR(ref_.squared_distance(n, a.data(), b.data()), simd_->squared_distance(n, a.data(), b.data()), tol);
    }
}

TEST_F(SimdEquivalence, AdamUpdateIsBitIdentical) {
    const std::size_t n = 37;
    const auto g = random_vector(n, rng_);
    auto p1 = random_vector(n, rng_), p2 = p1;
    std::vector<double> m1(n, 0.1), v1(n, 0.2), m2 = m1, v2 = v1;
    const AdamCoefficients c{.lr = 1e-3, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .bias1 = 10.0, .bias2 = 1000.0};
    ref_.adam_update(n, p1.data(), g.data(), m1.data(), v1.data(), c);
    simd_->adam_update(n, p2.data(), g.data(), m2.data(), v2.data(), c);
    EXPECT_EQ(p1, p2);
    EXPECT_EQ(m1, m2);
    EXPECT_EQ(v1, v2);
}

TEST(KernelDispatch, SelectScalarAndBack) {
    const std::string_view before = kernels().name;
    ASSERT_TRUE(select_kernels(KernelIsa::scalar));
    EXPECT_EQ(kernels().name, "scalar");
    if (avx2_kernels()) {
        ASSERT_TRUE(select_kernels(KernelIsa::avx2));
        EXPECT_EQ(kernels().name, "avx2");
    } else {
        EXPECT_FALSE(select_kernels(KernelIsa::avx2));
    }
    select_kernels(before == "avx2" ? KernelIsa::avx2 : KernelIsa::scalar);
}
