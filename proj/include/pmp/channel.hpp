#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>
#include <vector>

#include "pmp/errors.hpp"
#include "pmp/linalg.hpp"
#include "pmp/rng.hpp"

namespace pmp {

/// Frequency-selective MIMO channel: T time-domain tap matrices and the
/// derived per-tone responses H_w = sum_t taps[t] * e^{-j 2 pi w t / W}
/// (zero-based tap delay on zero-based bin index).
struct ChannelRealization {
    std::size_t users = 0;     // M
    std::size_t antennas = 0;  // N
    std::size_t tones = 0;     // W
    std::vector<CMat> taps;    // T matrices, each M x N
    std::vector<CMat> freq;    // W matrices, each M x N
};

inline ChannelRealization channel_from_taps(std::vector<CMat> taps, std::size_t tones) {
    if (taps.empty()) throw DimensionError("channel needs at least one tap");
    if (taps.size() > tones) throw DimensionError("more taps than tones");
    const std::size_t m = taps[0].rows(), n = taps[0].cols();
    for (const CMat& t : taps)
        if (t.rows() != m || t.cols() != n) throw DimensionError("inconsistent tap dimensions");

    ChannelRealization chan;
    chan.users = m;
    chan.antennas = n;
    chan.tones = tones;
    chan.taps = std::move(taps);
    chan.freq.reserve(tones);
    for (std::size_t w = 0; w < tones; ++w) {
        CMat hw(m, n);
        for (std::size_t t = 0; t < chan.taps.size(); ++t) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(w) *
                               static_cast<double>(t) / static_cast<double>(tones);
            const cplx ph{std::cos(ang), std::sin(ang)};
            const CMat& tap = chan.taps[t];
            for (std::size_t i = 0; i < m * n; ++i) hw.data()[i] += tap.data()[i] * ph;
        }
        chan.freq.push_back(std::move(hw));
    }
    return chan;
}

/// Draws a tap-delay-line channel with i.i.d. CN(0,1) tap entries. Entries are
/// drawn tap-major, then row-major within each tap matrix.
inline ChannelRealization draw_channel(Rng& rng, std::size_t n_antennas, std::size_t m_users,
                                       std::size_t n_taps, std::size_t tones) {
    std::vector<CMat> taps;
    taps.reserve(n_taps);
    for (std::size_t t = 0; t < n_taps; ++t) {
        CMat tap(m_users, n_antennas);
        for (std::size_t i = 0; i < m_users * n_antennas; ++i) tap.data()[i] = rng.cgaussian(1.0);
        taps.push_back(std::move(tap));
    }
    return channel_from_taps(std::move(taps), tones);
}

}  // namespace pmp
