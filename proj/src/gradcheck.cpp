#include "vawi/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace vawi {

GradCheckReport finite_diff_check(const std::function<Tensor()>& f,
                                  const std::vector<std::pair<std::string, Tensor>>& params,
                                  double eps, std::size_t max_coords_per_tensor) {
    for (const auto& [name, p] : params) {
        (void)name;
        const_cast<Tensor&>(p).zero_grad();
    }

    Tensor loss = f();
    loss.backward();

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const auto& [name, p] : params) {
        (void)name;
        auto g = p.grad();
        if (g.empty()) {
            analytic.emplace_back(p.size(), 0.0);
        } else {
            analytic.emplace_back(g.begin(), g.end());
        }
    }

    GradCheckReport report;
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        Tensor p = params[pi].second;
        auto& value = p.mutable_data();
        const std::size_t n = value.size();
        std::size_t stride = 1;
        if (max_coords_per_tensor > 0 && n > max_coords_per_tensor) {
            stride = (n + max_coords_per_tensor - 1) / max_coords_per_tensor;
        }
        for (std::size_t i = 0; i < n; i += stride) {
            const double saved = value[i];
            value[i] = saved + eps;
            const double fp = f().item();
            value[i] = saved - eps;
            const double fm = f().item();
            value[i] = saved;

            const double numeric = (fp - fm) / (2.0 * eps);
            const double an = analytic[pi][i];
            const double denom = std::max({1.0, std::fabs(numeric), std::fabs(an)});
            const double rel = std::fabs(numeric - an) / denom;
            ++report.coords_checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.worst_param = params[pi].first;
                report.worst_index = i;
                report.worst_analytic = an;
                report.worst_numeric = numeric;
            }
        }
    }
    return report;
}

} // namespace vawi
