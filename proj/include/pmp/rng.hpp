#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace pmp {

/// Seeded pseudo-random source. Equal seeds produce bit-identical streams;
/// Gaussian draws use Box-Muller so the stream does not depend on the
/// standard library's distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, n). n must be nonzero.
    std::uint64_t bounded(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller; the second variate of each pair is cached.
    double gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Circularly symmetric complex Gaussian CN(0, var): real and imaginary
    /// parts are independent N(0, var/2).
    std::complex<double> cgaussian(double var = 1.0) {
        const double s = std::sqrt(var * 0.5);
        const double re = gaussian();
        const double im = gaussian();
        return {s * re, s * im};
    }

  private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Sub-seed derivation: the master seed plus a path of indices (frame,
/// stream id, ...) maps to an independent stream seed. Used everywhere a
/// worker needs its own generator, so results do not depend on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = detail::splitmix64(master);
    for (std::uint64_t p : path) h = detail::splitmix64(h ^ detail::splitmix64(p));
    return h;
}

/// Stream ids for per-frame sub-seeds.
enum class Stream : std::uint64_t {
    channel = 1,
    payload = 2,
    noise = 3,
};

inline std::uint64_t frame_seed(std::uint64_t master, std::uint64_t frame, Stream s,
                                std::uint64_t extra = 0) {
    return derive_seed(master, {frame, static_cast<std::uint64_t>(s), extra});
}

}  // namespace pmp
