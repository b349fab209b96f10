#ifndef EULER_ATTN_ATTENTION_HPP
#define EULER_ATTN_ATTENTION_HPP

// Multi-head attention scores under the different positional encoders. The
// euler path rotates query/key phases; baselines either leave scores alone,
// rotate coordinate pairs (RoPE) or add a distance bias (ALiBi). All score
// functions work on per-head stacks of shape (h, N, d_head).

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include "autograd.hpp"
#include "encodings.hpp"
#include "polar.hpp"

namespace euler_attn {

// Learnable phase adaptation for one head: scale on the semantic difference
// plus a query-side bias. Initialized to the identity (delta=1, b=0), where
// the adaptive score equals the vanilla one.
struct AdaptiveParams {
    Tensor delta;
    Tensor bias;
};

inline AdaptiveParams make_adaptive(std::size_t half_dim) {
    return {Tensor::full({half_dim}, 1.0, true), Tensor::zeros({half_dim}, true)};
}

namespace detail {

inline std::vector<double> default_positions(std::size_t n) {
    std::vector<double> p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = static_cast<double>(i);
    return p;
}

inline Tensor head_block(const Tensor& stacked, std::size_t head, std::size_t n) {
    return take_rows(reshape(stacked, {stacked.dim(0) * n, stacked.dim(2)}), head * n, n);
}

} // namespace detail

// Learned per-position rotation of the summed input embedding. With the
// rotary shift disabled this degenerates to the plain sum. P may be an empty
// handle for encoders without an additive table.
inline Tensor encode_input(const Tensor& E, const Tensor& P, const Tensor& psi) {
    Tensor x = P.defined() ? add(E, P) : E;
    if (!psi.defined()) return x;
    std::size_t n = x.dim(0);
    if (n > psi.dim(0))
        throw std::invalid_argument("sequence length " + std::to_string(n) +
                                    " exceeds the rotary table (" + std::to_string(psi.dim(0)) + ")");
    return inverse_transform(rotate(euler_transform(x), take_rows(psi, 0, n)));
}

struct RotatedQK {
    Tensor q, k;          // (N, d_head) after rotation, ready for the dot product
    Tensor theta_q, theta_k; // (N, d_head/2) adapted phases before position rotation
};

// The O(N d) portion of the euler attention path for one head: polar
// transform, phase adaptation, position-proportional rotation, and the map
// back to real coordinates. `adapt` may be null for the vanilla encoder.
inline RotatedQK euler_rotate_qk(const Tensor& q, const Tensor& k,
                                 const AdaptiveParams* adapt, const Tensor& g,
                                 const std::vector<double>& positions) {
    std::size_t n = q.dim(0);
    if (positions.size() != n)
        throw std::invalid_argument("positions length does not match the sequence");
    PolarPair pq = euler_transform(q);
    PolarPair pk = euler_transform(k);
    Tensor tq = pq.phase, tk = pk.phase;
    if (adapt) {
        tq = add(mul(tq, adapt->delta), adapt->bias); // bias enters on the query side only
        tk = mul(tk, adapt->delta);
    }
    RotatedQK out;
    out.theta_q = wrap_phase(tq);
    out.theta_k = wrap_phase(tk);
    Tensor pos = Tensor::from({n, 1}, std::vector<double>(positions));
    Tensor alpha = mul(pos, g); // (N, d_head/2)
    out.q = inverse_transform(rotate({pq.modulus, tq}, alpha));
    out.k = inverse_transform(rotate({pk.modulus, tk}, alpha));
    return out;
}

struct ScoreRecord {
    Tensor scores;               // (h, N, N), scaled by 1/sqrt(d_head)
    std::vector<Tensor> theta_q; // per head, (N, d_head/2)
    std::vector<Tensor> theta_k;
};

// score[m,n] = sum_t lamQ lamK cos(delta (thetaQ - thetaK) + b + (m-n) g_t),
// scaled by 1/sqrt(d_head). `adapt` holds one entry per head, or is empty
// for the vanilla encoder (delta=1, b=0).
inline ScoreRecord euler_scores(const Tensor& Q, const Tensor& K,
                                const std::vector<AdaptiveParams>& adapt,
                                const Tensor& g,
                                std::vector<double> positions = {}) {
    if (Q.shape().size() != 3 || K.shape().size() != 3)
        throw std::invalid_argument("euler_scores expects (h, N, d_head) stacks");
    std::size_t h = Q.dim(0), n = Q.dim(1), dh = Q.dim(2);
    if (dh % 2 != 0) throw std::invalid_argument("head dimension must be even");
    if (!adapt.empty() && adapt.size() != h)
        throw std::invalid_argument("adaptive parameter count does not match heads");
    if (positions.empty()) positions = detail::default_positions(n);
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    ScoreRecord rec;
    std::vector<Tensor> score_parts;
    for (std::size_t i = 0; i < h; ++i) {
        Tensor q = detail::head_block(Q, i, n);
        Tensor k = detail::head_block(K, i, n);
        RotatedQK r = euler_rotate_qk(q, k, adapt.empty() ? nullptr : &adapt[i], g, positions);
        score_parts.push_back(mul_scalar(matmul(r.q, transpose(r.k)), scale));
        rec.theta_q.push_back(r.theta_q);
        rec.theta_k.push_back(r.theta_k);
    }
    rec.scores = reshape(vstack(score_parts), {h, n, n});
    return rec;
}

// Scores for the non-euler encoders. LearnedAbs and Sinusoidal act at the
// input embedding, so here they reduce to the plain scaled dot product.
inline Tensor baseline_scores(const Tensor& Q, const Tensor& K, const EncodingSpec& spec,
                              std::vector<double> positions = {}) {
    if (Q.shape().size() != 3 || K.shape().size() != 3)
        throw std::invalid_argument("baseline_scores expects (h, N, d_head) stacks");
    if (is_euler(spec.kind))
        throw std::invalid_argument("baseline_scores does not cover the euler kinds");
    std::size_t h = Q.dim(0), n = Q.dim(1), dh = Q.dim(2);
    if (positions.empty()) positions = detail::default_positions(n);
    double scale = 1.0 / std::sqrt(static_cast<double>(dh));

    std::vector<Tensor> parts;
    switch (spec.kind) {
        case EncodingKind::None:
        case EncodingKind::LearnedAbs:
        case EncodingKind::Sinusoidal: {
            for (std::size_t i = 0; i < h; ++i)
                parts.push_back(mul_scalar(
                    matmul(detail::head_block(Q, i, n), transpose(detail::head_block(K, i, n))),
                    scale));
            break;
        }
        case EncodingKind::RoPE: {
            if (dh % 2 != 0) throw std::invalid_argument("head dimension must be even");
            std::size_t half = dh / 2;
            auto sched = frequency_schedule(dh, spec.angle_base);
            std::vector<double> cs(n * half), sn(n * half);
            for (std::size_t m = 0; m < n; ++m)
                for (std::size_t t = 0; t < half; ++t) {
                    cs[m * half + t] = std::cos(positions[m] * sched[t]);
                    sn[m * half + t] = std::sin(positions[m] * sched[t]);
                }
            Tensor c = Tensor::from({n, half}, std::move(cs));
            Tensor s = Tensor::from({n, half}, std::move(sn));
            auto spin = [&](const Tensor& x) {
                Tensor a = slice_cols(x, 0, half);
                Tensor b = slice_cols(x, half, half);
                return concat_cols(sub(mul(a, c), mul(b, s)), add(mul(a, s), mul(b, c)));
            };
            for (std::size_t i = 0; i < h; ++i)
                parts.push_back(mul_scalar(
                    matmul(spin(detail::head_block(Q, i, n)),
                           transpose(spin(detail::head_block(K, i, n)))),
                    scale));
            break;
        }
        case EncodingKind::ALiBi: {
            auto slopes = alibi_slopes(h);
            for (std::size_t i = 0; i < h; ++i) {
                std::vector<double> bias(n * n);
                for (std::size_t m = 0; m < n; ++m)
                    for (std::size_t j = 0; j < n; ++j)
                        bias[m * n + j] = -slopes[i] * (positions[m] - positions[j]);
                parts.push_back(add(
                    mul_scalar(matmul(detail::head_block(Q, i, n),
                                      transpose(detail::head_block(K, i, n))),
                               scale),
                    Tensor::from({n, n}, std::move(bias))));
            }
            break;
        }
        default:
            throw std::invalid_argument("unknown encoding kind");
    }
    return reshape(vstack(parts), {h, n, n});
}

// Softmax attention weights under the causal/padding mask. Row m may attend
// itself always (keeps every row well-defined) and keys n with
// first_valid <= n (<= m when causal).
inline Tensor attention_weights(const Tensor& scores, bool causal, std::size_t first_valid = 0) {
    if (scores.shape().size() != 3 || scores.dim(1) != scores.dim(2))
        throw std::invalid_argument("attention_weights expects (h, N, N) scores");
    std::size_t n = scores.dim(1);
    if (first_valid > n) throw std::invalid_argument("first_valid exceeds the sequence length");
    std::vector<double> bias(n * n, 0.0);
    for (std::size_t m = 0; m < n; ++m)
        for (std::size_t j = 0; j < n; ++j) {
            bool allowed = j == m || ((!causal || j <= m) && j >= first_valid);
            if (!allowed) bias[m * n + j] = -1e30;
        }
    return softmax_rows(add(scores, Tensor::from({n, n}, std::move(bias))));
}

inline Tensor attend_with(const Tensor& weights, const Tensor& V) {
    if (V.shape().size() != 3) throw std::invalid_argument("attend expects (h, N, d_head) values");
    std::size_t h = V.dim(0), n = V.dim(1);
    std::vector<Tensor> parts;
    for (std::size_t i = 0; i < h; ++i)
        parts.push_back(matmul(detail::head_block(weights, i, n), detail::head_block(V, i, n)));
    return reshape(vstack(parts), {h, n, V.dim(2)});
}

inline Tensor attend(const Tensor& scores, const Tensor& V, bool causal, std::size_t first_valid = 0) {
    return attend_with(attention_weights(scores, causal, first_valid), V);
}

// Closed-form attention score between one query/key content pair at
// continuous relative distance D, before 1/sqrt(d_head) scaling. delta/bias
// may be empty for the vanilla case.
inline double pair_score(const std::vector<double>& lam_q, const std::vector<double>& theta_q,
                         const std::vector<double>& lam_k, const std::vector<double>& theta_k,
                         const std::vector<double>& delta, const std::vector<double>& bias,
                         const std::vector<double>& g, double dist) {
    double acc = 0.0;
    for (std::size_t t = 0; t < g.size(); ++t) {
        double d = delta.empty() ? 1.0 : delta[t];
        double b = bias.empty() ? 0.0 : bias[t];
        acc += lam_q[t] * lam_k[t] * std::cos(d * (theta_q[t] - theta_k[t]) + b + dist * g[t]);
    }
    return acc;
}

// Analytic d(pair_score)/dD: -sum_t lamQ lamK g_t sin(delta dS + b + D g_t).
inline double decay_gradient(const std::vector<double>& lam_q, const std::vector<double>& lam_k,
                             const std::vector<double>& theta_q, const std::vector<double>& theta_k,
                             const std::vector<double>& delta, const std::vector<double>& bias,
                             const std::vector<double>& g, double dist) {
    double acc = 0.0;
    for (std::size_t t = 0; t < g.size(); ++t) {
        double d = delta.empty() ? 1.0 : delta[t];
        double b = bias.empty() ? 0.0 : bias[t];
        acc -= lam_q[t] * lam_k[t] * g[t] *
               std::sin(d * (theta_q[t] - theta_k[t]) + b + dist * g[t]);
    }
    return acc;
}

} // namespace euler_attn

#endif
