#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "protovae/numgrad/graph.hpp"
#include "protovae/numgrad/tensor.hpp"

namespace protovae::numgrad {

struct AdamState {
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// One Adam update with bias correction over parallel lists of parameters and
/// gradients. Moments are allocated on the first call. Throws
/// OptimizationError naming the parameter if a gradient holds NaN or Inf.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               std::span<const std::string> names, AdamState& state, double lr);

/// Convenience wrapper over graph parameters: reads each Var's grad.
class Adam {
public:
    explicit Adam(std::vector<Var> params, double lr = 5e-4);

    void step();
    double learning_rate() const { return lr_; }
    void set_learning_rate(double lr) { lr_ = lr; }
    const AdamState& state() const { return state_; }

private:
    std::vector<Var> params_;
    std::vector<std::string> names_;
    AdamState state_;
    double lr_;
};

}  // namespace protovae::numgrad
