#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace warpgrid {

// First-order moment state for one parameter buffer.
struct AdamState {
    double learning_rate = 0.0001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    int64_t step = 0;
    std::vector<double> m, v;

    explicit AdamState(double lr = 0.0001) : learning_rate(lr) {}
};

// Standard bias-corrected update; sizes the moment buffers on first use and
// throws std::invalid_argument on a later shape mismatch.
void adam_step(AdamState& state, std::span<float> params, std::span<const float> grads);

}  // namespace warpgrid
