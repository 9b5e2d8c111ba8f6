#include "vawi/adam.hpp"

#include <cmath>
#include <string>

namespace vawi {

AdamState make_adam_state(const std::vector<Tensor>& params, double lr, double weight_decay,
                          double beta1, double beta2, double epsilon) {
    AdamState st;
    st.lr = lr;
    st.weight_decay = weight_decay;
    st.beta1 = beta1;
    st.beta2 = beta2;
    st.epsilon = epsilon;
    st.first_moment.reserve(params.size());
    st.second_moment.reserve(params.size());
    for (const auto& p : params) {
        st.first_moment.emplace_back(p.size(), 0.0);
        st.second_moment.emplace_back(p.size(), 0.0);
    }
    return st;
}

void adam_step(std::vector<Tensor>& params, const std::vector<std::vector<double>>& grads,
               AdamState& state, double lr_scale) {
    if (params.size() != state.first_moment.size() || grads.size() != params.size()) {
        throw DimensionError("adam_step: parameter/gradient/state count mismatch (" +
                             std::to_string(params.size()) + " params, " +
                             std::to_string(grads.size()) + " grads, " +
                             std::to_string(state.first_moment.size()) + " moments)");
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const double lr = state.lr * lr_scale;
    const double bc1 = 1.0 - std::pow(state.beta1, t);
    const double bc2 = 1.0 - std::pow(state.beta2, t);

    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        auto& value = params[pi].mutable_data();
        const auto& g = grads[pi];
        auto& m = state.first_moment[pi];
        auto& v = state.second_moment[pi];
        if (g.size() != value.size() || m.size() != value.size()) {
            throw DimensionError("adam_step: shape mismatch at parameter " +
                                 std::to_string(pi) + " (" + params[pi].shape_string() +
                                 " vs grad length " + std::to_string(g.size()) + ")");
        }
        for (std::size_t i = 0; i < value.size(); ++i) {
            if (state.weight_decay != 0.0) value[i] -= lr * state.weight_decay * value[i];
            m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
            v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            value[i] -= lr * mhat / (std::sqrt(vhat) + state.epsilon);
        }
    }
}

void adam_step(std::vector<Tensor>& params, AdamState& state, double lr_scale) {
    std::vector<std::vector<double>> grads;
    grads.reserve(params.size());
    for (const auto& p : params) {
        auto g = p.grad();
        if (g.empty()) {
            grads.emplace_back(p.size(), 0.0);
        } else {
            grads.emplace_back(g.begin(), g.end());
        }
    }
    adam_step(params, grads, state, lr_scale);
}

double warmup_lr_multiplier(std::uint64_t step, std::uint64_t total_steps,
                            double warmup_fraction) {
    const auto warmup_steps = static_cast<std::uint64_t>(
        std::llround(warmup_fraction * static_cast<double>(total_steps)));
    if (warmup_steps == 0 || step > warmup_steps) return 1.0;
    return static_cast<double>(step) / static_cast<double>(warmup_steps);
}

} // namespace vawi
