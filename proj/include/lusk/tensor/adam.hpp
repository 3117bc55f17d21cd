#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lusk/tensor/tensor.hpp"

namespace lusk {

template <typename T>
struct AdamState {
    std::size_t step = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::vector<std::vector<T>> first_moment;
    std::vector<std::vector<T>> second_moment;
};

// One bias-corrected Adam update using the gradients stored on `params`.
// Gradients are validated before any parameter is touched.
template <typename T>
void adam_step(std::vector<Tensor<T>>& params, AdamState<T>& state, double lr)
{
    if (!(lr > 0.0)) throw std::invalid_argument("adam_step: learning rate must be positive");
    if (state.first_moment.empty()) {
        for (const auto& p : params) {
            state.first_moment.emplace_back(p.numel(), T(0));
            state.second_moment.emplace_back(p.numel(), T(0));
        }
    }
    if (state.first_moment.size() != params.size()) {
        throw ShapeError("adam_step: state tracks " + std::to_string(state.first_moment.size()) +
                         " parameters, got " + std::to_string(params.size()));
    }
    for (std::size_t i = 0; i < params.size(); ++i) {
        const auto& p = params[i];
        if (p.grad().size() != p.numel() || state.first_moment[i].size() != p.numel()) {
            throw ShapeError("adam_step: gradient/moment size mismatch for parameter '" +
                             p.name() + "' of shape " + to_string(p.shape()));
        }
        for (T g : p.grad()) {
            if (!std::isfinite(g)) {
                throw NumericError("adam_step: non-finite gradient in parameter '" + p.name() + "'");
            }
        }
    }

    ++state.step;
    const double c1 = 1.0 - std::pow(state.beta1, double(state.step));
    const double c2 = 1.0 - std::pow(state.beta2, double(state.step));
    const T b1 = T(state.beta1), b2 = T(state.beta2);
    for (std::size_t i = 0; i < params.size(); ++i) {
        auto values = params[i].values_mut();
        auto grad = params[i].grad();
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        for (std::size_t j = 0; j < values.size(); ++j) {
            const T g = grad[j];
            m[j] = b1 * m[j] + (T(1) - b1) * g;
            v[j] = b2 * v[j] + (T(1) - b2) * g * g;
            const double mhat = double(m[j]) / c1;
            const double vhat = double(v[j]) / c2;
            values[j] -= T(lr * mhat / (std::sqrt(vhat) + state.epsilon));
        }
    }
}

} // namespace lusk
