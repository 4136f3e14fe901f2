#pragma once

#include <cstdint>
#include <cmath>
#include <stdexcept>
#include <string>

namespace biome {

// Error taxonomy shared by the library and the CLI exit-code mapping:
// InputError -> 2, NumericalError -> 3, ShapeError -> 4.
struct InputError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
    if (!cond) throw InputError(msg);
}
inline void require_shape(bool cond, const std::string& msg) {
    if (!cond) throw ShapeError(msg);
}

// Deterministic PRNG. splitmix64 core with an explicit Box-Muller normal so
// streams are identical across compilers and standard libraries.
class Rng {
public:
    explicit Rng(uint64_t seed = 0) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double uniform() { return (next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Integer in [0, n).
    uint64_t below(uint64_t n) { return next_u64() % n; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        double u2 = uniform();
        // Avoid log(0).
        if (u1 < 1e-300) u1 = 1e-300;
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Derive an independent stream, e.g. per step or per layer.
    Rng fork(uint64_t salt) {
        return Rng(next_u64() ^ (salt * 0x9e3779b97f4a7c15ull + 0x7f4a7c15ull));
    }

private:
    uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

// FNV-1a, used for content hashes in manifests and teacher-immutability checks.
inline uint64_t fnv1a(const void* data, size_t n, uint64_t h = 0xcbf29ce484222325ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

constexpr double kPi = 3.14159265358979323846264338327950288;

inline int next_pow2(int n) {
    int p = 1;
    while (p < n) p <<= 1;
    return p;
}

inline bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace biome
