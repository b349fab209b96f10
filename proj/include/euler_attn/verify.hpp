#ifndef EULER_ATTN_VERIFY_HPP
#define EULER_ATTN_VERIFY_HPP

// Self-contained property checks over the polar attention pipeline. Each
// check states one invariant the library is supposed to satisfy and reports
// its worst observed error. The fault switch deliberately mis-initializes
// the adaptive rotation so a broken setup is visibly caught; a harness that
// cannot fail proves nothing.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "attention.hpp"
#include "gradcheck.hpp"
#include "model.hpp"
#include "polar.hpp"
#include "random.hpp"

namespace euler_attn {

struct CheckResult {
    std::string name;
    bool pass;
    std::string detail;
};

struct VerifyOptions {
    std::uint64_t seed = 0;
    bool inject_fault = false; // start the adaptive rotation at delta = 1.1
};

namespace detail {

inline std::string err_detail(double err, double tol) {
    std::ostringstream ss;
    ss.precision(3);
    ss << std::scientific << "max err " << err << " (tol " << tol << ")";
    return ss.str();
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

} // namespace detail

// Cartesian -> polar -> cartesian reproduces the input.
inline CheckResult check_round_trip(const VerifyOptions& opts) {
    double tol = 1e-9, worst = 0.0;
    Rng rng = Rng(opts.seed).fork("round_trip");
    for (std::size_t d : {2UL, 8UL, 64UL}) {
        Tensor x = Tensor::from({4, d}, rng.normal_vec(4 * d, 0.0, 2.0));
        Tensor back = inverse_transform(euler_transform(x));
        worst = std::max(worst, detail::max_abs_diff(back.value(), x.value()));
    }
    return {"round-trip", worst < tol, detail::err_detail(worst, tol)};
}

// The polar form of the dot product equals the plain real dot product.
inline CheckResult check_polar_dot(const VerifyOptions& opts) {
    double tol = 1e-9, worst = 0.0;
    Rng rng = Rng(opts.seed).fork("polar_dot");
    for (std::size_t d : {2UL, 6UL, 64UL}) {
        Tensor a = Tensor::from({3, d}, rng.normal_vec(3 * d));
        Tensor b = Tensor::from({3, d}, rng.normal_vec(3 * d));
        Tensor pd = polar_dot(euler_transform(a), euler_transform(b));
        for (std::size_t r = 0; r < 3; ++r) {
            double dot = 0.0;
            for (std::size_t j = 0; j < d; ++j) dot += a.value()[r * d + j] * b.value()[r * d + j];
            worst = std::max(worst, std::abs(pd.value()[r] - dot));
        }
    }
    return {"polar-dot-consistency", worst < tol, detail::err_detail(worst, tol)};
}

// Rotating by an angle and then by its negative restores the vector.
inline CheckResult check_rotation_cancellation(const VerifyOptions& opts) {
    double tol = 1e-9, worst = 0.0;
    Rng rng = Rng(opts.seed).fork("rotation");
    for (double angle : {0.3, 2.9, -14.0, 200.0}) {
        Tensor x = Tensor::from({2, 8}, rng.normal_vec(16));
        PolarPair p = euler_transform(x);
        Tensor a = Tensor::full({2, 4}, angle);
        Tensor back = inverse_transform(rotate(rotate(p, a), neg(a)));
        worst = std::max(worst, detail::max_abs_diff(back.value(), x.value()));
    }
    return {"rotation-cancellation", worst < tol, detail::err_detail(worst, tol)};
}

// With the rotation started at delta = 1 and bias = 0 the adaptive scores
// collapse to the fixed rotary scores. The injected fault lands here.
inline CheckResult check_rotary_special_case(const VerifyOptions& opts) {
    double tol = 1e-9, worst = 0.0;
    Rng rng = Rng(opts.seed).fork("special_case");
    std::size_t n = 6, dh = 8;
    Tensor q = Tensor::from({1, n * dh}, rng.normal_vec(n * dh));
    Tensor k = Tensor::from({1, n * dh}, rng.normal_vec(n * dh));
    Tensor Q3 = reshape(q, {1, n, dh}), K3 = reshape(k, {1, n, dh});

    std::vector<AdaptiveParams> adapt;
    adapt.push_back(make_adaptive(dh / 2));
    if (opts.inject_fault)
        for (auto& v : adapt[0].delta.leaf_value()) v = 1.1;
    Tensor g = Tensor::from({dh / 2}, frequency_schedule(dh));

    Tensor adapted = euler_scores(Q3, K3, adapt, g).scores;
    EncodingSpec spec;
    spec.kind = EncodingKind::RoPE;
    Tensor fixed = baseline_scores(Q3, K3, spec);
    worst = detail::max_abs_diff(adapted.value(), fixed.value());
    return {"rotary-special-case", worst < tol, detail::err_detail(worst, tol)};
}

// Attention scores depend on positions only through their differences.
inline CheckResult check_shift_invariance(const VerifyOptions& opts) {
    double tol = 1e-9, worst = 0.0;
    Rng rng = Rng(opts.seed).fork("shift");
    std::size_t n = 5, dh = 8;
    Tensor Q3 = reshape(Tensor::from({1, n * dh}, rng.normal_vec(n * dh)), {1, n, dh});
    Tensor K3 = reshape(Tensor::from({1, n * dh}, rng.normal_vec(n * dh)), {1, n, dh});
    std::vector<AdaptiveParams> adapt;
    adapt.push_back(make_adaptive(dh / 2));
    Rng prng = Rng(opts.seed).fork("shift_params");
    for (auto& v : adapt[0].delta.leaf_value()) v = prng.uniform(0.5, 1.5);
    for (auto& v : adapt[0].bias.leaf_value()) v = prng.uniform(-1.0, 1.0);
    Tensor g = Tensor::from({dh / 2}, frequency_schedule(dh));

    auto base_positions = detail::default_positions(n);
    Tensor base = euler_scores(Q3, K3, adapt, g, base_positions).scores;
    for (double s : {1.0, 5.0, 17.0}) {
        auto shifted = base_positions;
        for (auto& p : shifted) p += s;
        Tensor moved = euler_scores(Q3, K3, adapt, g, shifted).scores;
        worst = std::max(worst, detail::max_abs_diff(moved.value(), base.value()));
    }
    return {"shift-invariance", worst < tol, detail::err_detail(worst, tol)};
}

// Reverse-mode gradients through the polar rotation agree with finite
// differences.
inline CheckResult check_gradient(const VerifyOptions& opts) {
    double tol = 1e-4;
    Rng rng = Rng(opts.seed).fork("gradient");
    std::size_t n = 3, dh = 4;
    Tensor q = Tensor::from({1, n * dh}, rng.normal_vec(n * dh), true);
    Tensor k = Tensor::from({1, n * dh}, rng.normal_vec(n * dh), true);
    AdaptiveParams adapt = make_adaptive(dh / 2);
    Tensor g = Tensor::from({dh / 2}, frequency_schedule(dh));

    auto build = [&]() {
        std::vector<AdaptiveParams> heads = {adapt};
        Tensor scores = euler_scores(reshape(q, {1, n, dh}), reshape(k, {1, n, dh}), heads, g).scores;
        return sum_all(attend(scores, reshape(mul_scalar(q, 0.5), {1, n, dh}), true));
    };
    auto report = check_gradients(build, {q, k, adapt.delta, adapt.bias}, 1e-6, tol);
    std::ostringstream ss;
    ss.precision(3);
    ss << std::scientific << "max rel err " << report.max_rel_err << " over " << report.checked
       << " entries (tol " << tol << ")";
    return {"gradient-check", report.pass, ss.str()};
}

// The closed-form distance derivative of the score matches finite
// differences of the score itself.
inline CheckResult check_decay_formula(const VerifyOptions& opts) {
    double tol = 1e-5, worst = 0.0;
    Rng rng = Rng(opts.seed).fork("decay");
    std::size_t half = 4;
    std::vector<double> g = frequency_schedule(2 * half);
    for (int trial = 0; trial < 5; ++trial) {
        std::vector<double> lq = rng.normal_vec(half, 1.0, 0.2), lk = rng.normal_vec(half, 1.0, 0.2);
        std::vector<double> tq = rng.normal_vec(half), tk = rng.normal_vec(half);
        std::vector<double> delta = rng.normal_vec(half, 1.0, 0.1), bias = rng.normal_vec(half, 0.0, 0.3);
        double dist = rng.uniform(0.0, 8.0), h = 1e-6;
        double analytic = decay_gradient(lq, lk, tq, tk, delta, bias, g, dist);
        double fd = (pair_score(lq, tq, lk, tk, delta, bias, g, dist + h) -
                     pair_score(lq, tq, lk, tk, delta, bias, g, dist - h)) /
                    (2.0 * h);
        worst = std::max(worst, std::abs(analytic - fd));
    }
    return {"decay-formula", worst < tol, detail::err_detail(worst, tol)};
}

inline std::vector<CheckResult> run_verification(const VerifyOptions& opts = {}) {
    return {check_round_trip(opts),       check_polar_dot(opts),
            check_rotation_cancellation(opts), check_rotary_special_case(opts),
            check_shift_invariance(opts), check_gradient(opts),
            check_decay_formula(opts)};
}

} // namespace euler_attn

#endif
