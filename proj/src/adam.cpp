#include "warpgrid/adam.hpp"

#include <cmath>
#include <stdexcept>

namespace warpgrid {

void adam_step(AdamState& state, std::span<float> params, std::span<const float> grads) {
    if (params.size() != grads.size()) throw std::invalid_argument("adam_step: shape mismatch");
    if (state.m.empty()) {
        state.m.assign(params.size(), 0.0);
        state.v.assign(params.size(), 0.0);
    }
    if (state.m.size() != params.size())
        throw std::invalid_argument("adam_step: state does not match parameter buffer");

    state.step += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
    for (size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g;
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g * g;
        const double m_hat = state.m[i] / bc1;
        const double v_hat = state.v[i] / bc2;
        params[i] -= static_cast<float>(state.learning_rate * m_hat / (std::sqrt(v_hat) + state.epsilon));
    }
}

}  // namespace warpgrid
