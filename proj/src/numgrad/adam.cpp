#include "protovae/numgrad/adam.hpp"

#include <cmath>

#include "protovae/error.hpp"
#include "protovae/numgrad/kernels.hpp"

namespace protovae::numgrad {

void adam_step(std::span<Tensor* const> params, std::span<const Tensor* const> grads,
               std::span<const std::string> names, AdamState& state, double lr) {
    if (params.size() != grads.size()) throw ShapeError("adam_step: parameter and gradient counts differ");
    if (!(lr >= 0.0) || !std::isfinite(lr)) throw ContractError("adam_step: learning rate must be finite and >= 0");

    if (state.first_moment.empty()) {
        for (const Tensor* p : params) {
            state.first_moment.push_back(Tensor::zeros(p->shape()));
            state.second_moment.push_back(Tensor::zeros(p->shape()));
        }
    }
    if (state.first_moment.size() != params.size()) throw ShapeError("adam_step: state tracks a different parameter set");

    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string label = i < names.size() && !names[i].empty() ? names[i] : "#" + std::to_string(i);
        if (grads[i]->shape() != params[i]->shape() || state.first_moment[i].shape() != params[i]->shape()) {
            throw ShapeError("adam_step: shape mismatch for parameter " + label);
        }
        if (!grads[i]->all_finite()) throw OptimizationError("adam_step: non-finite gradient for parameter " + label);
    }

    ++state.step;
    const double t = static_cast<double>(state.step);
    const AdamCoefficients c{
        .lr = lr,
        .beta1 = state.beta1,
        .beta2 = state.beta2,
        .eps = state.eps,
        .bias1 = 1.0 / (1.0 - std::pow(state.beta1, t)),
        .bias2 = 1.0 / (1.0 - std::pow(state.beta2, t)),
    };
    const auto& kt = kernels();
    for (std::size_t i = 0; i < params.size(); ++i) {
        kt.adam_update(params[i]->size(), params[i]->data(), grads[i]->data(), state.first_moment[i].data(),
                       state.second_moment[i].data(), c);
    }
}

Adam::Adam(std::vector<Var> params, double lr) : params_(std::move(params)), lr_(lr) {
    for (const auto& p : params_) {
        if (!p.requires_grad()) throw ContractError("Adam: every parameter must require a gradient");
        names_.push_back(p.name());
    }
}

void Adam::step() {
    std::vector<Tensor*> values;
    std::vector<const Tensor*> grads;
    for (auto& p : params_) {
        values.push_back(&p.mutable_value());
        grads.push_back(&p.grad());
    }
    adam_step(values, grads, names_, state_, lr_);
}

}  // namespace protovae::numgrad
