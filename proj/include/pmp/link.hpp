#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "pmp/channel.hpp"
#include "pmp/conv_code.hpp"
#include "pmp/errors.hpp"
#include "pmp/linalg.hpp"
#include "pmp/precoders.hpp"
#include "pmp/qam.hpp"
#include "pmp/rng.hpp"
#include "pmp/toneplan.hpp"

namespace pmp {

/// Seeded uniform random permutation; position i of the interleaved stream
/// carries input bit perm[i].
struct Interleaver {
    std::vector<std::uint32_t> perm;

    static Interleaver draw(Rng& rng, std::size_t n) {
        Interleaver il;
        il.perm.resize(n);
        for (std::size_t i = 0; i < n; ++i) il.perm[i] = static_cast<std::uint32_t>(i);
        for (std::size_t i = n; i-- > 1;) {
            const std::size_t j = rng.bounded(i + 1);
            std::swap(il.perm[i], il.perm[j]);
        }
        return il;
    }

    template <typename T>
    std::vector<T> apply(std::span<const T> in) const {
        std::vector<T> out(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[i] = in[perm[i]];
        return out;
    }

    template <typename T>
    std::vector<T> invert(std::span<const T> in) const {
        std::vector<T> out(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) out[perm[i]] = in[i];
        return out;
    }
};

/// One user's coded transmission for one OFDM symbol: info bits, coded and
/// interleaved bits, and the Gray-mapped symbols (one per data tone, energy
/// 1/M after scaling).
struct UserPayload {
    std::vector<std::uint8_t> info_bits;
    std::vector<std::uint8_t> coded_bits;  // interleaved order, as transmitted
    Interleaver interleaver;
    CVec symbols;
};

/// Draws information bits and runs them through encoder, interleaver and
/// mapper. data_tones * 4 coded bits = data_tones * 2 info bits per symbol.
inline UserPayload make_payload(Rng& rng, std::size_t data_tones, double symbol_scale,
                                const CodeSpec& code = {}) {
    UserPayload p;
    const std::size_t n_info = 2 * data_tones;
    p.info_bits.resize(n_info);
    for (auto& b : p.info_bits) b = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    std::vector<std::uint8_t> coded = conv_encode(p.info_bits, code);
    p.interleaver = Interleaver::draw(rng, coded.size());
    p.coded_bits = p.interleaver.apply<std::uint8_t>(coded);
    p.symbols = map_16qam_gray(p.coded_bits, symbol_scale);
    return p;
}

/// Per-active-tone symbol vectors s_w (ascending bin order) assembled from the
/// users' payloads: user m's k-th symbol rides the k-th active tone.
inline std::vector<CVec> assemble_tone_symbols(const std::vector<UserPayload>& payloads,
                                               std::size_t data_tones) {
    std::vector<CVec> s(data_tones, CVec(payloads.size()));
    for (std::size_t m = 0; m < payloads.size(); ++m) {
        if (payloads[m].symbols.size() != data_tones)
            throw DimensionError("payload symbol count does not match data tones");
        for (std::size_t k = 0; k < data_tones; ++k) s[k][m] = payloads[m].symbols[k];
    }
    return s;
}

/// Adds i.i.d. CN(0, n0) noise in place.
inline void apply_awgn(std::span<cplx> y, double n0, Rng& rng) {
    if (!(n0 >= 0.0)) throw DimensionError("noise variance must be nonnegative");
    if (n0 == 0.0) return;
    for (cplx& v : y) v += rng.cgaussian(n0);
}

inline double n0_from_snr_db(double snr_db) { return std::pow(10.0, -snr_db / 10.0); }

/// Noise floor used for LLR scaling when noise is disabled.
inline constexpr double kNoiselessN0 = 1e-12;

/// Effective per-tone, per-user symbol gains [H_w G_w]_{u,u} of the
/// matched-filter precoder G_w = H_w^H: the squared row norm of H_w.
inline std::vector<double> mf_effective_gains(const TonePlan& plan,
                                              const ChannelRealization& chan) {
    std::vector<double> gains(plan.active.size() * chan.users);
    for (std::size_t k = 0; k < plan.active.size(); ++k) {
        const CMat& h = chan.freq[plan.active[k]];
        for (std::size_t u = 0; u < chan.users; ++u)
            gains[k * chan.users + u] =
                norm2_sq(std::span<const cplx>(h.row(u), chan.antennas));
    }
    return gains;
}

/// Transmits a frame over the per-tone channel, demaps with the genie gain
/// [H_w G_w]_{u,u} / sqrt(P), deinterleaves and decodes each user. Returns
/// one block-error flag per user (1 = at least one info bit wrong).
///
/// symbol_gain holds the per-tone, per-user diagonal [H_w G_w]_{u,u} (row
/// major, tone-major); empty means the identity (exact for precoders that
/// enforce the data constraints, e.g. LS, and the declared rule for PMP and
/// clipped LS, whose distortion is treated as noise).
///
/// snr_db == nullopt disables noise. Noise is drawn per active tone
/// (ascending bin) and per user within a tone, independent of the precoder.
inline std::vector<std::uint8_t> run_link(const TxFrame& frame, const TonePlan& plan,
                                          const ChannelRealization& chan,
                                          const std::vector<UserPayload>& payloads,
                                          std::optional<double> snr_db, Rng& noise_rng,
                                          const CodeSpec& code = {},
                                          std::span<const double> symbol_gain = {}) {
    const std::size_t m = chan.users;
    const std::size_t data_tones = plan.active.size();
    if (payloads.size() != m) throw DimensionError("one payload per user required");
    if (frame.freq.rows() != plan.tones || frame.freq.cols() != chan.antennas)
        throw DimensionError("frame does not match plan/channel");
    if (!symbol_gain.empty() && symbol_gain.size() != data_tones * m)
        throw DimensionError("one symbol gain per tone and user required");
    if (!(frame.power > 0.0)) throw DegenerateFrameError("cannot transmit an all-zero frame");

    const double inv_sqrt_p = 1.0 / std::sqrt(frame.power);
    const double n0 = snr_db ? n0_from_snr_db(*snr_db) : 0.0;
    const double llr_n0 = snr_db ? n0 : kNoiselessN0;
    const double base_gain = inv_sqrt_p / std::sqrt(static_cast<double>(m));  // unit-table scale

    // received[k*m + u]: user u's sample on the k-th active tone
    CVec received(data_tones * m);
    CVec xw(chan.antennas), yw(m);
    for (std::size_t k = 0; k < data_tones; ++k) {
        const std::size_t wi = plan.active[k];
        for (std::size_t ni = 0; ni < chan.antennas; ++ni)
            xw[ni] = frame.freq(wi, ni) * inv_sqrt_p;
        matvec(chan.freq[wi], xw, yw);
        apply_awgn(yw, n0, noise_rng);
        std::copy(yw.begin(), yw.end(), received.begin() + k * m);
    }

    std::vector<std::uint8_t> block_error(m, 0);
    std::vector<double> llrs(4 * data_tones);
    for (std::size_t u = 0; u < m; ++u) {
        for (std::size_t k = 0; k < data_tones; ++k) {
            const double gain =
                symbol_gain.empty() ? base_gain : base_gain * symbol_gain[k * m + u];
            const auto l = soft_demap(received[k * m + u], gain, llr_n0);
            for (unsigned b = 0; b < 4; ++b) llrs[4 * k + b] = l[b];
        }
        const std::vector<double> deint = payloads[u].interleaver.invert<double>(llrs);
        const std::vector<std::uint8_t> decoded =
            viterbi_decode(deint, payloads[u].info_bits.size(), code);
        block_error[u] = decoded != payloads[u].info_bits ? 1 : 0;
    }
    return block_error;
}

}  // namespace pmp
