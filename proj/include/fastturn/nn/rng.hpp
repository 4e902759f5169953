#pragma once

#include <cstdint>
#include <string_view>

namespace fastturn::nn {

// SplitMix64: splittable 64-bit generator. Every random draw in the project
// goes through this class, so corpora and training runs reproduce bit-exactly
// across runs and platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // uniform in [0, 1), 53-bit mantissa
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // inclusive range
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Irwin-Hall sum of 12 uniforms: mean 0, variance exactly 1. Avoids libm
    // transcendentals so the stream is identical on every platform.
    double gaussian() {
        double s = 0.0;
        for (int i = 0; i < 12; ++i) s += next_double();
        return s - 6.0;
    }

    // Child stream keyed by a label; does not advance this stream.
    Rng fork(std::string_view tag) const {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (char c : tag) {
            h ^= static_cast<unsigned char>(c);
            h *= 0x100000001b3ULL;
        }
        return Rng(mix(state_ ^ h));
    }

    Rng fork(std::uint64_t salt) const { return Rng(mix(state_ ^ (salt * 0x9e3779b97f4a7c15ULL))); }

    // Stateless counter-based draw: one double in [0,1) from a key tuple.
    static double unit_at(std::uint64_t key, std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = mix(key ^ mix(a ^ mix(b)));
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace fastturn::nn
