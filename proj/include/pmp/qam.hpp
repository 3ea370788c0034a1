#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <span>

#include "pmp/errors.hpp"
#include "pmp/fft.hpp"

namespace pmp {

/// Gray-labeled 16-QAM with independent per-axis mapping: bits (b0,b1) select
/// the in-phase level, (b2,b3) the quadrature level, with 00 -> -3, 01 -> -1,
/// 11 -> +1, 10 -> +3 over sqrt(10). Average constellation energy is 1.
struct Qam16 {
    static constexpr double axis_level(unsigned two_bits) {
        switch (two_bits) {
            case 0b00: return -3.0;
            case 0b01: return -1.0;
            case 0b11: return +1.0;
            default: return +3.0;  // 0b10
        }
    }

    /// label = b0 b1 b2 b3, b0 most significant.
    static cplx point(unsigned label) {
        const double s = 1.0 / std::sqrt(10.0);
        return {axis_level((label >> 2) & 0x3u) * s, axis_level(label & 0x3u) * s};
    }

    static const std::array<cplx, 16>& points() {
        static const std::array<cplx, 16> table = [] {
            std::array<cplx, 16> t{};
            for (unsigned i = 0; i < 16; ++i) t[i] = point(i);
            return t;
        }();
        return table;
    }
};

/// Maps a bit stream (4 bits per symbol, first bit most significant) to scaled
/// 16-QAM symbols; scale is the per-user amplitude factor.
inline CVec map_16qam_gray(std::span<const std::uint8_t> bits, double scale) {
    if (bits.size() % 4 != 0) throw DimensionError("bit count must be divisible by 4");
    CVec symbols(bits.size() / 4);
    for (std::size_t k = 0; k < symbols.size(); ++k) {
        const unsigned label = (unsigned(bits[4 * k] & 1u) << 3) | (unsigned(bits[4 * k + 1] & 1u) << 2) |
                               (unsigned(bits[4 * k + 2] & 1u) << 1) | unsigned(bits[4 * k + 3] & 1u);
        symbols[k] = Qam16::point(label) * scale;
    }
    return symbols;
}

/// Max-log LLRs for the model y = gain * u + n, u drawn from the unit-energy
/// 16-QAM table and n ~ CN(0, n0). Positive LLR means bit 0 is more likely.
inline std::array<double, 4> soft_demap(cplx y, double gain, double n0) {
    if (!(gain > 0.0) || !(n0 > 0.0)) throw DimensionError("gain and noise variance must be positive");
    std::array<double, 4> min0{}, min1{};
    min0.fill(1e300);
    min1.fill(1e300);
    const auto& table = Qam16::points();
    for (unsigned label = 0; label < 16; ++label) {
        const cplx d = y - gain * table[label];
        const double dist = d.real() * d.real() + d.imag() * d.imag();
        for (unsigned b = 0; b < 4; ++b) {
            const bool bit = (label >> (3 - b)) & 1u;
            double& slot = bit ? min1[b] : min0[b];
            if (dist < slot) slot = dist;
        }
    }
    std::array<double, 4> llr{};
    for (unsigned b = 0; b < 4; ++b) llr[b] = (min1[b] - min0[b]) / n0;
    return llr;
}

}  // namespace pmp
