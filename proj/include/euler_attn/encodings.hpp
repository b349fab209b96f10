#ifndef EULER_ATTN_ENCODINGS_HPP
#define EULER_ATTN_ENCODINGS_HPP

// Positional-encoding selection and the fixed schedules shared by the
// rotation-based encoders and the baselines.

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace euler_attn {

enum class EncodingKind {
    None,
    LearnedAbs,
    Sinusoidal,
    RoPE,
    ALiBi,
    EulerVanilla,
    EulerAdaptive,
};

struct EncodingSpec {
    EncodingKind kind = EncodingKind::EulerAdaptive;
    bool use_rotary_input_embedding = true; // learned per-position phase shift at the input
    double angle_base = 10000.0;
    // Ablation switches for the rotation frequencies; meaningful for the
    // euler kinds only.
    bool learnable_freq = false; // train g instead of keeping the fixed schedule
    bool zero_freq = false;      // g = 0: relative rotation disabled
};

inline bool is_euler(EncodingKind k) {
    return k == EncodingKind::EulerVanilla || k == EncodingKind::EulerAdaptive;
}

// Kinds whose input embedding includes a learned absolute position table.
// The euler kinds keep the additive table alongside the rotary shift.
inline bool has_learned_positions(EncodingKind k) {
    return k == EncodingKind::LearnedAbs || is_euler(k);
}

inline const char* kind_name(EncodingKind k) {
    switch (k) {
        case EncodingKind::None: return "none";
        case EncodingKind::LearnedAbs: return "learned-abs";
        case EncodingKind::Sinusoidal: return "sinusoidal";
        case EncodingKind::RoPE: return "rope";
        case EncodingKind::ALiBi: return "alibi";
        case EncodingKind::EulerVanilla: return "euler-vanilla";
        case EncodingKind::EulerAdaptive: return "euler-adaptive";
    }
    throw std::logic_error("unreachable encoding kind");
}

inline EncodingKind kind_from_name(const std::string& name) {
    for (EncodingKind k : {EncodingKind::None, EncodingKind::LearnedAbs, EncodingKind::Sinusoidal,
                           EncodingKind::RoPE, EncodingKind::ALiBi, EncodingKind::EulerVanilla,
                           EncodingKind::EulerAdaptive})
        if (name == kind_name(k)) return k;
    throw std::invalid_argument("unknown encoding kind: " + name);
}

// Rotation frequencies g_t = base^(-2t / d_head), t = 0 .. d_head/2 - 1.
// g_0 = 1 and the sequence is strictly positive and non-increasing.
inline std::vector<double> frequency_schedule(std::size_t d_head, double base = 10000.0) {
    if (d_head % 2 != 0) throw std::invalid_argument("frequency_schedule needs an even head dimension");
    std::vector<double> g(d_head / 2);
    for (std::size_t t = 0; t < g.size(); ++t)
        g[t] = std::pow(base, -2.0 * static_cast<double>(t) / static_cast<double>(d_head));
    return g;
}

// Classic fixed table: even columns sin, odd columns cos, frequency falling
// with the column pair index.
inline std::vector<double> sinusoidal_table(std::size_t n, std::size_t d, double base = 10000.0) {
    std::vector<double> table(n * d);
    for (std::size_t pos = 0; pos < n; ++pos)
        for (std::size_t i = 0; i < d / 2; ++i) {
            double angle = static_cast<double>(pos) *
                           std::pow(base, -2.0 * static_cast<double>(i) / static_cast<double>(d));
            table[pos * d + 2 * i] = std::sin(angle);
            table[pos * d + 2 * i + 1] = std::cos(angle);
        }
    return table;
}

// Geometric head slopes 2^(-8i/h) for heads i = 1..h.
inline std::vector<double> alibi_slopes(std::size_t h) {
    std::vector<double> s(h);
    for (std::size_t i = 0; i < h; ++i)
        s[i] = std::pow(2.0, -8.0 * static_cast<double>(i + 1) / static_cast<double>(h));
    return s;
}

} // namespace euler_attn

#endif
