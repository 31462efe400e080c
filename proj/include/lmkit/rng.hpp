#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <string>

namespace lmkit {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Deterministic RNG used everywhere randomness is needed. Uniform and normal
// draws are hand-rolled on top of mt19937_64 so results do not depend on the
// standard library's distribution implementations, and so the full stream
// state round-trips through checkpoints as a single string.
class Rng {
  public:
    Rng() : engine_(0) {}
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal(double mean = 0.0, double stddev = 1.0) {
        // Box-Muller without spare caching: state stays just the engine.
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        return mean + stddev * r * std::cos(2.0 * M_PI * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) {
        // Rejection-free modulo is fine here; n is tiny compared to 2^64.
        return engine_() % n;
    }

    std::string serialize() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    static Rng deserialize(const std::string& state) {
        Rng r;
        std::istringstream is(state);
        is >> r.engine_;
        return r;
    }

  private:
    std::mt19937_64 engine_;
};

// Independent stream derived from a base seed and up to three indices
// (e.g. prompt index, iteration). Streams never collide in practice and are
// stable across runs, which is what makes concurrent sampling deterministic.
inline Rng derive_rng(std::uint64_t seed, std::uint64_t a = 0, std::uint64_t b = 0,
                      std::uint64_t c = 0) {
    std::uint64_t h = splitmix64(seed);
    h = splitmix64(h ^ (a + 0x1000003));
    h = splitmix64(h ^ (b + 0x2000003));
    h = splitmix64(h ^ (c + 0x3000003));
    return Rng(h);
}

}  // namespace lmkit
