#ifndef EULER_ATTN_GRADCHECK_HPP
#define EULER_ATTN_GRADCHECK_HPP

// Central finite-difference verification of reverse-mode gradients. Used by
// the test suite and by the `verify gradient` check, so it lives in the
// library rather than in test code.

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "autograd.hpp"

namespace euler_attn {

struct GradCheckReport {
    double max_rel_err = 0.0;
    double max_abs_err = 0.0;
    std::string worst;   // "leaf_index[flat_index]" of the worst element
    std::size_t checked = 0;
    bool pass = true;
};

// `build_loss` must rebuild the forward graph from the given leaves on every
// call and return a scalar. Relative error uses max(|fd|, |analytic|) with a
// floor so near-zero gradients compare absolutely.
inline GradCheckReport check_gradients(const std::function<Tensor()>& build_loss,
                                       std::vector<Tensor> leaves,
                                       double h = 1e-6,
                                       double tol = 1e-5,
                                       double abs_floor = 1e-8) {
    for (auto& leaf : leaves) leaf.zero_grad();
    Tensor loss = build_loss();
    backward(loss);

    std::vector<std::vector<double>> analytic;
    analytic.reserve(leaves.size());
    for (auto& leaf : leaves) analytic.push_back(leaf.grad());

    GradCheckReport report;
    for (std::size_t li = 0; li < leaves.size(); ++li) {
        auto& vals = leaves[li].leaf_value();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            double saved = vals[i];
            vals[i] = saved + h;
            double up = build_loss().item();
            vals[i] = saved - h;
            double down = build_loss().item();
            vals[i] = saved;
            double fd = (up - down) / (2.0 * h);
            double a = analytic[li][i];
            double abs_err = std::fabs(fd - a);
            double denom = std::max({abs_floor, std::fabs(fd), std::fabs(a)});
            double rel = abs_err / denom;
            ++report.checked;
            if (rel > report.max_rel_err) {
                report.max_rel_err = rel;
                report.max_abs_err = abs_err;
                report.worst = std::to_string(li) + "[" + std::to_string(i) + "]";
            }
            if (rel >= tol && abs_err >= abs_floor) report.pass = false;
        }
    }
    return report;
}

} // namespace euler_attn

#endif
