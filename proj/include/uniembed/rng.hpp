#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace uniembed {

// xoshiro256** by Blackman & Vigna, seeded through splitmix64. Every random
// draw in the project goes through this generator so that runs are exactly
// reproducible from a single 64-bit seed, independent of the standard
// library's distribution internals.
class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& word : state_) word = splitmix64(x);
    }

    std::uint64_t next() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53 bits of mantissa.
    double u01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }

    // Uniform integer in [0, n), n > 0. Lemire's method with rejection, no
    // modulo bias.
    std::uint64_t bounded(std::uint64_t n) {
        unsigned __int128 m = static_cast<unsigned __int128>(next()) * n;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < n) {
            const std::uint64_t threshold = (0 - n) % n;
            while (lo < threshold) {
                m = static_cast<unsigned __int128>(next()) * n;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    // Standard normal via Box-Muller; consumes exactly two uniforms per call.
    double normal() {
        const double u1 = 1.0 - u01();  // (0, 1], keeps log finite
        const double u2 = u01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    std::vector<double> normal_vec(int dim) {
        std::vector<double> v(static_cast<std::size_t>(dim));
        for (auto& x : v) x = normal();
        return v;
    }

    // Random direction on the unit sphere.
    std::vector<double> unit_vec(int dim) {
        for (;;) {
            auto v = normal_vec(dim);
            double norm2 = 0.0;
            for (double x : v) norm2 += x * x;
            if (norm2 > 1e-18) {
                const double inv = 1.0 / std::sqrt(norm2);
                for (auto& x : v) x *= inv;
                return v;
            }
        }
    }

    // In-place Fisher-Yates shuffle.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            const std::size_t j = static_cast<std::size_t>(bounded(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    static constexpr double kPi = 3.14159265358979323846;

    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& x) {
        std::uint64_t z = (x += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_[4];
};

// Seed offsets for the pipeline stages, all derived from one run seed so a
// single --seed flag pins the whole experiment.
namespace seed_offset {
constexpr std::uint64_t generate = 0;
constexpr std::uint64_t net_init = 1;
constexpr std::uint64_t sampling = 2;
constexpr std::uint64_t label_noise = 3;
constexpr std::uint64_t distill = 4;
constexpr std::uint64_t finetune = 5;
}  // namespace seed_offset

}  // namespace uniembed
