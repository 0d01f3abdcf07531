#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace shdbench {

// Self-contained deterministic generator. The std:: distributions are
// implementation-defined, so uniform/normal draws are produced here directly
// and every seeded run is byte-reproducible.
class Rng {
public:
    explicit Rng(uint64_t seed) { state_ = splitmix(seed + 0x9E3779B97F4A7C15ULL); }

    static uint64_t splitmix(uint64_t x) {
        x += 0x9E3779B97F4A7C15ULL;
        x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
        x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
        return x ^ (x >> 31);
    }

    uint64_t next_u64() {
        // xorshift128+ seeded from splitmix stream
        if (!init_) {
            s0_ = splitmix(state_);
            s1_ = splitmix(s0_);
            init_ = true;
        }
        uint64_t x = s0_;
        const uint64_t y = s1_;
        s0_ = y;
        x ^= x << 23;
        s1_ = x ^ y ^ (x >> 17) ^ (y >> 26);
        return s1_ + y;
    }

    /// Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Inclusive integer range.
    int64_t uniform_int(int64_t lo, int64_t hi) {
        const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
        return lo + static_cast<int64_t>(next_u64() % span);
    }

    /// Standard normal via Box-Muller (no cached spare, keeps the stream simple).
    double normal() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    double normal(double mean, double sd) { return mean + sd * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const size_t j = static_cast<size_t>(next_u64() % i);
            std::swap(v[i - 1], v[j]);
        }
    }

    /// Independent substream, e.g. one per record or per model seed.
    Rng fork(uint64_t stream) const {
        return Rng(splitmix(state_ ^ splitmix(stream + 0x5851F42D4C957F2DULL)));
    }

private:
    uint64_t state_ = 0;
    uint64_t s0_ = 0, s1_ = 0;
    bool init_ = false;
};

}  // namespace shdbench
