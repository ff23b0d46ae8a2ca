#pragma once

#include <cstdint>
#include <limits>
#include <random>

namespace gridflow {

/// splitmix64 finalizer, used to derive independent stream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// mt19937_64 with portable real/integer draws (no reliance on
/// implementation-defined std distributions), so streams are reproducible
/// across standard libraries.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Stream for (seed, index); independent of how many other streams exist.
    static Rng stream(std::uint64_t seed, std::uint64_t index) { return Rng(mix64(mix64(seed) ^ mix64(index + 1))); }

    /// Uniform in [0, 1) with 53 random bits.
    double canonical() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Uniform in [lo, hi]; returns lo when hi <= lo.
    double uniform(double lo, double hi) {
        if (!(hi > lo)) return lo;
        return lo + (hi - lo) * canonical();
    }

    /// Uniform integer in [lo, hi] by rejection sampling.
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        std::uint64_t const span = static_cast<std::uint64_t>(hi - lo) + 1;
        std::uint64_t const limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % span;
        std::uint64_t draw;
        do {
            draw = engine_();
        } while (draw >= limit);
        return lo + static_cast<std::int64_t>(draw % span);
    }

    std::uint64_t next() { return engine_(); }

  private:
    std::mt19937_64 engine_;
};

}  // namespace gridflow
