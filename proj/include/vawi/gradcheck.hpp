#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "vawi/tensor.hpp"

namespace vawi {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    std::size_t worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t coords_checked = 0;
};

// Central-difference check of backward() against (f(p+eps) - f(p-eps)) / 2eps.
// f must rebuild the loss from the current parameter values and be
// deterministic (fix any RNG streams inside f). The error per coordinate is
// |fd - analytic| / max(1, |fd|, |analytic|), so near-zero gradients are
// compared absolutely instead of blowing up the ratio.
//
// max_coords_per_tensor == 0 checks every coordinate; otherwise coordinates
// are sampled with an even stride, which keeps large models tractable.
GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double eps = 1e-5,
                                  std::size_t max_coords_per_tensor = 0);

} // namespace vawi
