#ifndef EULER_ATTN_POLAR_HPP
#define EULER_ATTN_POLAR_HPP

// Complex-vector view of real embeddings. A real vector of even width d is
// read as d/2 complex numbers: the first half supplies real parts, the
// second half imaginary parts. Attention then works on modulus and phase.

#include <stdexcept>
#include <string>

#include "autograd.hpp"

namespace euler_attn {

// Keeps the modulus differentiable at the origin. Round-trip error from the
// floor is ~eps/(2*modulus), far below any tolerance used on non-degenerate
// inputs.
inline constexpr double kModulusEps = 1e-12;

struct PolarPair {
    Tensor modulus; // (..., d/2), nonnegative
    Tensor phase;   // (..., d/2), canonical in (-pi, pi]
};

inline PolarPair euler_transform(const Tensor& x) {
    if (x.shape().empty() || x.shape().back() % 2 != 0)
        throw std::invalid_argument("euler_transform needs an even last dimension, got " +
                                    shape_str(x.shape()));
    std::size_t half = x.shape().back() / 2;
    Tensor re = slice_cols(x, 0, half);
    Tensor im = slice_cols(x, half, half);
    PolarPair p;
    p.modulus = sqrt_t(add_scalar(add(mul(re, re), mul(im, im)), kModulusEps));
    p.phase = wrap_phase(atan2t(im, re)); // atan2 can return -pi exactly; fold it to +pi
    return p;
}

inline Tensor inverse_transform(const PolarPair& p) {
    return concat_cols(mul(p.modulus, cos_t(p.phase)), mul(p.modulus, sin_t(p.phase)));
}

// Rotation by a broadcastable angle. Pure phase shift; the modulus is shared
// with the input.
inline PolarPair rotate(const PolarPair& p, const Tensor& angle) {
    return {p.modulus, wrap_phase(add(p.phase, angle))};
}

// Row-aligned complex dot product: sum_t |a_t||b_t| cos(phase_a - phase_b).
// Computed by mapping back to real vectors and summing the elementwise
// product, which is one trig pass instead of two.
inline Tensor polar_dot(const PolarPair& a, const PolarPair& b) {
    return row_sum(mul(inverse_transform(a), inverse_transform(b)));
}

} // namespace euler_attn

#endif
