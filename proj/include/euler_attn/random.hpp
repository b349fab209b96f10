#ifndef EULER_ATTN_RANDOM_HPP
#define EULER_ATTN_RANDOM_HPP

// Seeded RNG with named sub-streams. Distributions are implemented by hand
// (std:: distributions vary across standard libraries, which would break
// reproducibility of recorded runs).

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace euler_attn {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

} // namespace detail

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed), eng_(detail::splitmix64(seed)) {}

    std::uint64_t seed() const { return seed_; }

    // Independent stream derived from this seed and a label. Forking with the
    // same label always yields the same stream regardless of draws made here.
    Rng fork(const std::string& label) const {
        return Rng(detail::splitmix64(seed_ ^ detail::fnv1a(label)));
    }

    double uniform() {
        return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * uniform();
    }

    // Inclusive on both ends, unbiased via rejection.
    std::uint64_t uniform_int(std::uint64_t lo, std::uint64_t hi) {
        std::uint64_t span = hi - lo + 1;
        if (span == 0) return eng_(); // full 64-bit range
        std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return lo + x % span;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Box-Muller with a cached spare.
    double normal(double mean = 0.0, double stddev = 1.0) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1, u2;
        do { u1 = uniform(); } while (u1 <= 0.0);
        u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        spare_ = r * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    std::vector<double> normal_vec(std::size_t n, double mean = 0.0, double stddev = 1.0) {
        std::vector<double> out(n);
        for (auto& v : out) v = normal(mean, stddev);
        return out;
    }

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(0, i - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 eng_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

} // namespace euler_attn

#endif
