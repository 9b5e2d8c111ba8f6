#pragma once

#include <cstdint>
#include <vector>

#include "vawi/tensor.hpp"

namespace vawi {

// Adam with decoupled weight decay. Decay is applied to the parameter value
// before the moment update, so a zero gradient still shrinks the weights.
struct AdamState {
    std::uint64_t step_count = 0;
    std::vector<std::vector<double>> first_moment;
    std::vector<std::vector<double>> second_moment;
    double lr = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.0;
};

AdamState make_adam_state(const std::vector<Tensor>& params, double lr, double weight_decay,
                          double beta1 = 0.9, double beta2 = 0.999, double epsilon = 1e-8);

// One update over explicit gradients. lr_scale multiplies the effective
// learning rate (warmup schedules). Shapes must match the state.
void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr_scale = 1.0);

// Convenience form reading gradients accumulated on the tensors themselves.
// A parameter with an empty grad buffer contributes a zero gradient.
void adam_step(std::vector<Tensor>& params, AdamState& state, double lr_scale = 1.0);

// Linear warmup to 1.0 over the first round(warmup_fraction * total_steps)
// steps, constant afterwards. step is 1-based.
double warmup_lr_multiplier(std::uint64_t step, std::uint64_t total_steps,
                            double warmup_fraction);

} // namespace vawi
