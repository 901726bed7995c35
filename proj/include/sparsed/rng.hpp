#pragma once

#include <cstdint>
#include <random>

namespace sparsed {

// Deterministic random stream used everywhere seeded values are needed.
//
// The engine is std::mt19937_64, whose output sequence is fully specified by
// the C++ standard, and the mapping to doubles is the usual 53-bit trick
// u = (x >> 11) * 2^-53, so two builds with the same seed produce identical
// streams on any platform. std::uniform_real_distribution is avoided on
// purpose: its output is implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double next_double(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, n). n must be >= 1.
    int next_int(int n) {
        return static_cast<int>(engine_() % static_cast<std::uint64_t>(n));
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace sparsed
