#pragma once

// Central finite-difference oracle. Test-only: it never calls backward().

#include <algorithm>
#include <cmath>
#include <functional>

#include "protovae/numgrad/tensor.hpp"

namespace protovae::testing {

inline numgrad::Tensor numeric_gradient(const std::function<double()>& f, numgrad::Tensor& param,
                                        double step = 1e-5) {
    numgrad::Tensor grad(param.shape());
    for (std::size_t i = 0; i < param.size(); ++i) {
        const double saved = param[i];
        param[i] = saved + step;
        const double up = f();
        param[i] = saved - step;
        const double down = f();
        param[i] = saved;
        grad[i] = (up - down) / (2.0 * step);
    }
    return grad;
}

/// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor). The floor keeps entries whose
/// true gradient is zero from dividing finite-difference noise by zero.
inline double max_relative_error(const numgrad::Tensor& a, const numgrad::Tensor& b, double floor = 1e-6) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max({std::abs(a[i]), std::abs(b[i]), floor});
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

}  // namespace protovae::testing
