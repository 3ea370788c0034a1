#pragma once

#include <bit>
#include <cstdint>
#include <span>
#include <vector>

#include "pmp/errors.hpp"

namespace pmp {

/// Rate-1/2 feed-forward convolutional code. Generators are read MSB-first
/// with the current input bit in the most significant tap position. The
/// encoder appends no tail bits; decoding starts in state 0 and traces back
/// from the best final state.
struct CodeSpec {
    unsigned g0 = 0133;  // octal
    unsigned g1 = 0171;  // octal
    unsigned constraint_length = 7;

    unsigned state_count() const { return 1u << (constraint_length - 1); }
};

/// Two output bits per input bit, g0 stream first.
inline std::vector<std::uint8_t> conv_encode(std::span<const std::uint8_t> bits,
                                             const CodeSpec& code = {}) {
    if (bits.empty()) throw DimensionError("empty input to encoder");
    const unsigned k = code.constraint_length;
    std::vector<std::uint8_t> out;
    out.reserve(2 * bits.size());
    unsigned state = 0;  // previous k-1 inputs, most recent in the MSB
    for (std::uint8_t b : bits) {
        const unsigned full = (unsigned(b & 1u) << (k - 1)) | state;
        out.push_back(static_cast<std::uint8_t>(std::popcount(full & code.g0) & 1));
        out.push_back(static_cast<std::uint8_t>(std::popcount(full & code.g1) & 1));
        state = full >> 1;
    }
    return out;
}

/// Soft-input Viterbi decoder. llrs holds one value per coded bit (positive
/// favors bit 0); the path metric is maximized. Ties prefer the lower-index
/// predecessor state, and the final state is unconstrained.
inline std::vector<std::uint8_t> viterbi_decode(std::span<const double> llrs, std::size_t n_info,
                                                const CodeSpec& code = {}) {
    if (llrs.size() != 2 * n_info) throw DimensionError("llr count must be twice the info length");
    const unsigned k = code.constraint_length;
    const unsigned states = code.state_count();
    const unsigned low_mask = (states >> 1) - 1;  // keeps state bits below the input tap

    // Emitted coded bits for the transition (state, input).
    std::vector<std::uint8_t> emit0(states * 2), emit1(states * 2);
    for (unsigned s = 0; s < states; ++s)
        for (unsigned x = 0; x < 2; ++x) {
            const unsigned full = (x << (k - 1)) | s;
            emit0[s * 2 + x] = static_cast<std::uint8_t>(std::popcount(full & code.g0) & 1);
            emit1[s * 2 + x] = static_cast<std::uint8_t>(std::popcount(full & code.g1) & 1);
        }

    constexpr double kNegInf = -1e300;
    std::vector<double> metric(states, kNegInf), next(states, kNegInf);
    metric[0] = 0.0;
    std::vector<std::uint8_t> decision(n_info * states);

    for (std::size_t t = 0; t < n_info; ++t) {
        const double l0 = llrs[2 * t], l1 = llrs[2 * t + 1];
        std::fill(next.begin(), next.end(), kNegInf);
        for (unsigned ns = 0; ns < states; ++ns) {
            const unsigned x = ns >> (k - 2);
            const unsigned base = (ns & low_mask) << 1;
            double best = kNegInf;
            std::uint8_t best_d = 0;
            for (unsigned d = 0; d < 2; ++d) {
                const unsigned s = base | d;
                if (metric[s] == kNegInf) continue;
                const double branch = (emit0[s * 2 + x] ? -l0 : l0) + (emit1[s * 2 + x] ? -l1 : l1);
                const double cand = metric[s] + branch;
                if (cand > best) {  // strict: ties keep the lower predecessor
                    best = cand;
                    best_d = static_cast<std::uint8_t>(d);
                }
            }
            next[ns] = best;
            decision[t * states + ns] = best_d;
        }
        metric.swap(next);
    }

    unsigned state = 0;
    double best = metric[0];
    for (unsigned s = 1; s < states; ++s)
        if (metric[s] > best) {
            best = metric[s];
            state = s;
        }

    std::vector<std::uint8_t> bits(n_info);
    for (std::size_t t = n_info; t-- > 0;) {
        bits[t] = static_cast<std::uint8_t>(state >> (k - 2));
        state = ((state & low_mask) << 1) | decision[t * states + state];
    }
    return bits;
}

}  // namespace pmp
