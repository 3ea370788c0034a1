#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "pmp/channel.hpp"
#include "pmp/errors.hpp"
#include "pmp/fft.hpp"
#include "pmp/linalg.hpp"
#include "pmp/ofdm.hpp"
#include "pmp/pmp_operator.hpp"
#include "pmp/solver.hpp"
#include "pmp/toneplan.hpp"

namespace pmp {

/// One OFDM symbol worth of transmit signals, pre-normalization.
/// time row n is the per-antenna sample vector, freq row w the per-tone
/// vector x_w; the two views are consistent through the DFT convention
/// (freq = forward DFT of time, per antenna). power = sum_w ||x_w||^2.
struct TxFrame {
    CMat time;  // N x W
    CMat freq;  // W x N
    double power = 0.0;
};

namespace detail {

inline double frame_power(const CMat& freq) {
    double p = 0.0;
    for (std::size_t i = 0, count = freq.rows() * freq.cols(); i < count; ++i)
        p += std::norm(freq.data()[i]);
    return p;
}

inline TxFrame frame_from_freq(CMat freq) {
    const std::size_t w = freq.rows(), n = freq.cols();
    TxFrame frame;
    frame.time = CMat(n, w);
    Fft fft(w);
    CVec tmp(w);
    for (std::size_t ni = 0; ni < n; ++ni) {
        for (std::size_t wi = 0; wi < w; ++wi) tmp[wi] = freq(wi, ni);
        fft.inverse(tmp.data());
        std::copy(tmp.begin(), tmp.end(), frame.time.row(ni));
    }
    frame.power = frame_power(freq);
    frame.freq = std::move(freq);
    return frame;
}

inline TxFrame frame_from_time(CMat time) {
    const std::size_t n = time.rows(), w = time.cols();
    TxFrame frame;
    frame.freq = CMat(w, n);
    Fft fft(w);
    CVec tmp(w);
    for (std::size_t ni = 0; ni < n; ++ni) {
        std::copy_n(time.row(ni), w, tmp.begin());
        fft.forward(tmp.data());
        for (std::size_t wi = 0; wi < w; ++wi) frame.freq(wi, ni) = tmp[wi];
    }
    frame.power = frame_power(frame.freq);
    frame.time = std::move(time);
    return frame;
}

inline void check_symbols(const std::vector<CVec>& s, const TonePlan& plan,
                          const ChannelRealization& chan) {
    if (chan.tones != plan.tones) throw DimensionError("channel/plan tone count mismatch");
    if (s.size() != plan.active.size())
        throw DimensionError("one symbol vector per active tone required");
    for (const CVec& v : s)
        if (v.size() != chan.users) throw DimensionError("symbol vector length must equal user count");
}

}  // namespace detail

/// Least-squares (zero-forcing) precoder: x_w = H_w^+ s_w on active tones,
/// zero on inactive tones.
inline TxFrame precode_ls(const std::vector<CVec>& s, const TonePlan& plan,
                          const ChannelRealization& chan) {
    detail::check_symbols(s, plan, chan);
    const std::size_t m = chan.users, n = chan.antennas;
    CMat freq(plan.tones, n);
    CVec z(m);
    for (std::size_t k = 0; k < plan.active.size(); ++k) {
        const std::size_t wi = plan.active[k];
        const CMat& hw = chan.freq[wi];
        CMat gram(m, m);
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < m; ++j) {
                cplx acc = 0.0;
                for (std::size_t c = 0; c < n; ++c) acc += hw(i, c) * std::conj(hw(j, c));
                gram(i, j) = acc;
            }
        try {
            detail::cholesky_inplace(gram);
        } catch (const SingularMatrixError&) {
            throw SingularMatrixError("rank-deficient channel on tone " + std::to_string(wi));
        }
        std::copy(s[k].begin(), s[k].end(), z.begin());
        detail::cholesky_solve(gram, z);
        matvec_herm(hw, z, std::span<cplx>(freq.row(wi), n));
    }
    return detail::frame_from_freq(std::move(freq));
}

/// Matched-filter precoder: x_w = H_w^H s_w on active tones.
inline TxFrame precode_mf(const std::vector<CVec>& s, const TonePlan& plan,
                          const ChannelRealization& chan) {
    detail::check_symbols(s, plan, chan);
    CMat freq(plan.tones, chan.antennas);
    for (std::size_t k = 0; k < plan.active.size(); ++k) {
        const std::size_t wi = plan.active[k];
        matvec_herm(chan.freq[wi], s[k], std::span<cplx>(freq.row(wi), chan.antennas));
    }
    return detail::frame_from_freq(std::move(freq));
}

namespace detail {

/// Largest clip level whose truncated signal meets the target ratio
/// 2W * level^2 / energy(level) <= target. Returns the signal's peak
/// component when no clipping is needed (all-zero signals included).
inline double clip_level_for_par(std::span<const cplx> a, double target_linear) {
    const std::size_t w = a.size();
    std::vector<double> comps;
    comps.reserve(2 * w);
    for (const cplx& z : a) {
        comps.push_back(std::abs(z.real()));
        comps.push_back(std::abs(z.imag()));
    }
    std::sort(comps.begin(), comps.end());
    const std::size_t c = comps.size();  // 2W
    const double peak = comps.back();
    if (peak == 0.0) return 0.0;  // degenerate antenna: pass through

    std::vector<double> prefix(c + 1, 0.0);
    for (std::size_t i = 0; i < c; ++i) prefix[i + 1] = prefix[i] + comps[i] * comps[i];

    // Ratio at level comps[k-1] with the top (c-k) components clipped there.
    const auto ratio_at = [&](std::size_t k) {
        const double lvl = comps[k - 1];
        const double energy = prefix[k] + static_cast<double>(c - k) * lvl * lvl;
        return static_cast<double>(c) * lvl * lvl / energy;
    };
    if (ratio_at(c) <= target_linear) return peak;  // already meets the target

    // Below the first nonzero component the ratio is the constant c/(c-zeros);
    // a target under that floor is unreachable, so clip there and stop.
    std::size_t zeros = 0;
    while (zeros < c && comps[zeros] == 0.0) ++zeros;
    if (ratio_at(zeros + 1) > target_linear) return comps[zeros];

    // The ratio is nondecreasing in the level; find the segment containing the
    // crossing and solve c*l^2 = target * (prefix[k] + (c-k) l^2) in it.
    std::size_t lo = zeros + 1, hi = c;  // ratio_at(lo) <= target < ratio_at(hi)
    while (hi - lo > 1) {
        const std::size_t mid = (lo + hi) / 2;
        if (ratio_at(mid) <= target_linear)
            lo = mid;
        else
            hi = mid;
    }
    const double denom = static_cast<double>(c) - target_linear * static_cast<double>(c - lo);
    double level = comps[lo - 1];
    if (denom > 0.0) {
        const double cand = std::sqrt(target_linear * prefix[lo] / denom);
        level = std::clamp(cand, comps[lo - 1], comps[hi - 1]);
    }
    return level;
}

}  // namespace detail

/// Least-squares precoding followed by per-antenna truncation of the real and
/// imaginary parts of the time-domain samples, at the largest level whose
/// ratio 2W*||.||_inf~^2 / ||.||_2^2 does not exceed the target. Spectral
/// constraints are not re-enforced afterwards.
inline TxFrame precode_ls_clip(const std::vector<CVec>& s, const TonePlan& plan,
                               const ChannelRealization& chan, double target_par_db) {
    TxFrame ls = precode_ls(s, plan, chan);
    const double target = std::pow(10.0, target_par_db / 10.0);
    const std::size_t n = chan.antennas, w = plan.tones;
    bool clipped = false;
    for (std::size_t ni = 0; ni < n; ++ni) {
        std::span<cplx> row(ls.time.row(ni), w);
        const double level = detail::clip_level_for_par(row, target);
        double peak = 0.0;
        for (const cplx& z : row)
            peak = std::max({peak, std::abs(z.real()), std::abs(z.imag())});
        if (level >= peak) continue;
        for (cplx& z : row)
            z = {std::clamp(z.real(), -level, level), std::clamp(z.imag(), -level, level)};
        clipped = true;
    }
    if (!clipped) return ls;
    return detail::frame_from_time(std::move(ls.time));
}

struct PmpSettings {
    double lambda = 0.25;
    std::size_t iterations = 2000;
    std::optional<TargetPrecoder> emulate;
    double sigma_tol = 1e-6;
    std::size_t sigma_max_iter = 3000;
};

struct PmpOutcome {
    TxFrame frame;
    double sigma_estimate = 0.0;
    double lipschitz = 0.0;
    double residual_norm = 0.0;  // ||b - C a|| at the returned iterate
    SolverResult solver;
};

/// Joint precoding / modulation / peak reduction: solves the l_inf-regularized
/// least-squares relaxation of the constraint system over the stacked
/// time-domain signals and maps the iterate back to a transmit frame.
inline PmpOutcome precode_pmp_detailed(const std::vector<CVec>& s, const TonePlan& plan,
                                       const ChannelRealization& chan, const PmpSettings& cfg,
                                       const SolverOptions& solver_opt_base = {}) {
    detail::check_symbols(s, plan, chan);
    PmpProblem problem = build_pmp_problem(s, plan, chan, cfg.emulate);
    RealPmpProblem real = to_real(problem);

    double sigma;
    double inflate = 1.001;  // headroom over the power-method tolerance
    try {
        sigma = sigma_max(real.op, cfg.sigma_tol, cfg.sigma_max_iter);
    } catch (const ConvergenceError& e) {
        sigma = e.last_estimate;  // still a usable lower estimate; widen the margin
        inflate = 1.01;
    }

    LinfLsProblem lp;
    lp.op = &real.op;
    lp.target = std::move(real.target);
    lp.lambda = cfg.lambda;
    lp.lipschitz = 2.0 * (inflate * sigma) * (inflate * sigma);

    SolverOptions opt = solver_opt_base;
    opt.iterations = cfg.iterations;
    SolverResult result = fitra(lp, opt);

    PmpOutcome out;
    out.sigma_estimate = sigma;
    out.lipschitz = lp.lipschitz;

    CVec a_bar = to_complex(result.x);
    const std::size_t n = chan.antennas, w = plan.tones;
    // the solver variable lives in the unitary-transform scale; the frame's
    // time view uses the idft convention (frequency = forward DFT of time)
    CMat time(n, w);
    const double down = 1.0 / std::sqrt(static_cast<double>(w));
    for (std::size_t i = 0; i < n * w; ++i) time.data()[i] = a_bar[i] * down;

    CVec constraint(problem.op.output_dim());
    problem.op.apply(a_bar, constraint);
    double rss = 0.0;
    for (std::size_t i = 0; i < constraint.size(); ++i)
        rss += std::norm(problem.target[i] - constraint[i]);
    out.residual_norm = std::sqrt(rss);

    out.frame = detail::frame_from_time(std::move(time));
    out.solver = std::move(result);
    return out;
}

inline TxFrame precode_pmp(const std::vector<CVec>& s, const TonePlan& plan,
                           const ChannelRealization& chan, double lambda,
                           std::size_t iterations) {
    PmpSettings cfg;
    cfg.lambda = lambda;
    cfg.iterations = iterations;
    return precode_pmp_detailed(s, plan, chan, cfg).frame;
}

}  // namespace pmp
