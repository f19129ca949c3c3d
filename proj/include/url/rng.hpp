#pragma once

#include <cmath>
#include <cstdint>

namespace url {

// Counter-friendly splitmix64 generator. The standard library engines are
// deterministic but their distributions are implementation-defined, so the
// uniform/gaussian mappings are spelled out here to keep generated data
// reproducible across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(mix(seed ^ 0x6A09E667F3BCC909ULL)) {}

    // Independent stream derived from (seed, stream id).
    static Rng stream(std::uint64_t seed, std::uint64_t stream_id) {
        Rng r(seed);
        r.state_ = mix(r.state_ + mix(stream_id * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL));
        return r;
    }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Box-Muller; second deviate is cached.
    double gaussian(double mean, double stddev) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return mean + stddev * r * std::cos(a);
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Uniform integer in [0, n). Rejection-free modulo bias is negligible for
    // the index ranges used here, but keep it unbiased anyway.
    std::uint64_t next_below(std::uint64_t n) {
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t v = next_u64();
            if (v >= threshold) return v % n;
        }
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace url
