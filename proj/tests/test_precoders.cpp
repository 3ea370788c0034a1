#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "pmp/metrics.hpp"
#include "pmp/precoders.hpp"

using namespace pmp;

namespace {

CVec random_cvec(Rng& rng, std::size_t n) {
    CVec v(n);
    for (auto& z : v) z = rng.cgaussian(1.0);
    return v;
}

std::vector<CVec> random_symbols(Rng& rng, std::size_t tones, std::size_t users) {
    std::vector<CVec> s(tones);
    for (auto& v : s) v = random_cvec(rng, users);
    return s;
}

ChannelRealization orthonormal_row_channel(Rng& rng, std::size_t users, std::size_t antennas,
                                           std::size_t tones) {
    // Gram-Schmidt on random rows, reused for every tone via a single tap
    CMat tap(users, antennas);
    for (std::size_t i = 0; i < users; ++i) {
        CVec row = random_cvec(rng, antennas);
        for (std::size_t j = 0; j < i; ++j) {
            const cplx proj = cdot(std::span<const cplx>(tap.row(j), antennas), row);
            for (std::size_t c = 0; c < antennas; ++c) row[c] -= proj * tap(j, c);
        }
        const double nrm = norm2(std::span<const cplx>(row));
        for (std::size_t c = 0; c < antennas; ++c) tap(i, c) = row[c] / nrm;
    }
    std::vector<CMat> taps{tap};
    return channel_from_taps(std::move(taps), tones);
}

double residual_norm(const TxFrame& frame, const std::vector<CVec>& s, const TonePlan& plan,
                     const ChannelRealization& chan) {
    const PmpProblem p = build_pmp_problem(s, plan, chan);
    const double up = std::sqrt(double(plan.tones));
    CVec a_bar(chan.antennas * plan.tones);
    for (std::size_t n = 0; n < chan.antennas; ++n)
        for (std::size_t t = 0; t < plan.tones; ++t)
            a_bar[n * plan.tones + t] = frame.time(n, t) * up;
    CVec out(p.op.output_dim());
    p.op.apply(a_bar, out);
    double err = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) err += std::norm(p.target[i] - out[i]);
    return std::sqrt(err);
}

double max_antenna_par_db(const TxFrame& frame) {
    double worst = 0.0;
    for (std::size_t n = 0; n < frame.time.rows(); ++n)
        worst = std::max(
            worst, par_linear(std::span<const cplx>(frame.time.row(n), frame.time.cols())));
    return to_db(worst);
}

}  // namespace

TEST_CASE("ls precoding with orthonormal rows reduces to the conjugate transpose") {
    Rng rng(301);
    const TonePlan plan = TonePlan::from_active(8, {0, 1, 2, 3, 4, 5, 6, 7});
    const ChannelRealization chan = orthonormal_row_channel(rng, 2, 5, 8);
    const auto s = random_symbols(rng, 8, 2);
    const TxFrame frame = precode_ls(s, plan, chan);
    for (std::size_t k = 0; k < 8; ++k) {
        CVec want(5);
        matvec_herm(chan.freq[k], s[k], want);
        for (std::size_t c = 0; c < 5; ++c) CHECK(std::abs(frame.freq(k, c) - want[c]) <= 1e-12);
        CVec recv(2);
        matvec(chan.freq[k], std::span<const cplx>(frame.freq.row(k), 5), recv);
        for (std::size_t u = 0; u < 2; ++u) CHECK(std::abs(recv[u] - s[k][u]) <= 1e-10);
    }
}

TEST_CASE("ls frames satisfy both constraint families") {
    Rng rng(302);
    const TonePlan plan = TonePlan::from_active(16, {2, 3, 7, 11});
    const ChannelRealization chan = draw_channel(rng, 6, 2, 3, 16);
    const auto s = random_symbols(rng, 4, 2);
    const TxFrame frame = precode_ls(s, plan, chan);
    CHECK(residual_norm(frame, s, plan, chan) <= 1e-9);
    CHECK(obr_linear(frame.freq, plan) == 0.0);
    for (std::size_t wi : plan.inactive)
        for (std::size_t c = 0; c < 6; ++c) CHECK(std::abs(frame.freq(wi, c)) == 0.0);
}

TEST_CASE("ls reports the offending tone for a rank-deficient channel") {
    CMat tap(2, 4);
    for (std::size_t c = 0; c < 4; ++c) {
        tap(0, c) = cplx{1.0, 0.0};
        tap(1, c) = cplx{2.0, 0.0};
    }
    std::vector<CMat> taps{tap};
    const ChannelRealization chan = channel_from_taps(std::move(taps), 4);
    const TonePlan plan = TonePlan::all_active(4);
    std::vector<CVec> s(4, CVec(2, cplx{1.0, 0.0}));
    CHECK_THROWS_AS(precode_ls(s, plan, chan), SingularMatrixError);
}

TEST_CASE("matched filter is maximum-ratio transmission for one user") {
    Rng rng(303);
    const TonePlan plan = TonePlan::all_active(4);
    const ChannelRealization chan = draw_channel(rng, 3, 1, 1, 4);
    std::vector<CVec> s(4, CVec(1));
    for (auto& v : s) v[0] = rng.cgaussian(1.0);
    const TxFrame frame = precode_mf(s, plan, chan);
    CHECK(obr_linear(frame.freq, plan) == 0.0);
    for (std::size_t k = 0; k < 4; ++k) {
        CVec recv(1);
        matvec(chan.freq[k], std::span<const cplx>(frame.freq.row(k), 3), recv);
        const double gain = norm2_sq(std::span<const cplx>(chan.freq[k].row(0), 3));
        CHECK(std::abs(recv[0] - gain * s[k][0]) <= 1e-10 * gain);
    }
}

TEST_CASE("matched-filter interference shrinks with the antenna count") {
    Rng rng(304);
    const auto mean_leakage = [&](std::size_t antennas) {
        double off = 0.0, diag = 0.0;
        for (int draw = 0; draw < 10000; ++draw) {
            CMat h(2, antennas);
            for (std::size_t i = 0; i < 2 * antennas; ++i) h.data()[i] = rng.cgaussian(1.0);
            cplx g01 = 0.0;
            double g00 = 0.0, g11 = 0.0;
            for (std::size_t c = 0; c < antennas; ++c) {
                g01 += h(0, c) * std::conj(h(1, c));
                g00 += std::norm(h(0, c));
                g11 += std::norm(h(1, c));
            }
            off += std::abs(g01);
            diag += 0.5 * (g00 + g11);
        }
        return off / diag;
    };
    const double r10 = mean_leakage(10);
    const double r100 = mean_leakage(100);
    CHECK(r100 < r10);
    CHECK(r100 < 0.2);
}

TEST_CASE("clipping at the worst-case bound leaves the ls frame untouched") {
    Rng rng(305);
    const TonePlan plan = TonePlan::from_active(16, {1, 2, 3, 5, 8, 13});
    const ChannelRealization chan = draw_channel(rng, 5, 2, 2, 16);
    const auto s = random_symbols(rng, 6, 2);
    const TxFrame ls = precode_ls(s, plan, chan);
    const double worst_case_db = to_db(2.0 * 16.0);
    const TxFrame clipped = precode_ls_clip(s, plan, chan, worst_case_db);
    for (std::size_t i = 0; i < 16 * 5; ++i) CHECK(clipped.freq.data()[i] == ls.freq.data()[i]);
}

TEST_CASE("clipping meets a 4 dB target on every antenna") {
    Rng rng(306);
    const TonePlan plan = TonePlan::ieee80211n_40mhz();
    const ChannelRealization chan = draw_channel(rng, 12, 3, 4, 128);
    const auto s = random_symbols(rng, plan.active.size(), 3);
    const TxFrame frame = precode_ls_clip(s, plan, chan, 4.0);
    for (std::size_t n = 0; n < 12; ++n) {
        const double par = to_db(par_linear(std::span<const cplx>(frame.time.row(n), 128)));
        CHECK(par <= 4.0 + 1e-9);
    }
    CHECK(obr_linear(frame.freq, plan) > 0.0);
}

TEST_CASE("constant-envelope signals are never clipped") {
    // craft symbols so the ls solution is a +-1+-j time-domain signal
    Rng rng(307);
    const std::size_t w = 8;
    std::vector<CMat> taps;
    CMat tap(1, 1);
    tap(0, 0) = cplx{0.8, -0.6};
    taps.push_back(tap);
    const ChannelRealization chan = channel_from_taps(std::move(taps), w);
    const TonePlan plan = TonePlan::all_active(w);

    CVec time(w);
    for (auto& z : time) {
        const double sr = rng.next_u64() & 1 ? 1.0 : -1.0;
        const double si = rng.next_u64() & 1 ? 1.0 : -1.0;
        z = cplx{sr, si};
    }
    const CVec freq = dft(time);
    std::vector<CVec> s(w, CVec(1));
    for (std::size_t k = 0; k < w; ++k) s[k][0] = chan.freq[k](0, 0) * freq[k];

    const TxFrame frame = precode_ls_clip(s, plan, chan, 0.0);
    for (std::size_t k = 0; k < w; ++k)
        CHECK(std::abs(frame.time(0, k) - time[k]) <= 1e-10);
    CHECK(par_linear(std::span<const cplx>(frame.time.row(0), w)) ==
          Catch::Approx(1.0).margin(1e-10));
}

TEST_CASE("pmp with zero symbols returns the all-zero frame") {
    Rng rng(308);
    const TonePlan plan = TonePlan::from_active(8, {1, 2, 6});
    const ChannelRealization chan = draw_channel(rng, 4, 2, 2, 8);
    std::vector<CVec> s(3, CVec(2, cplx{0.0, 0.0}));
    const TxFrame frame = precode_pmp(s, plan, chan, 0.25, 50);
    for (std::size_t i = 0; i < 8 * 4; ++i) CHECK(std::abs(frame.time.data()[i]) == 0.0);
}

TEST_CASE("pmp without a penalty approaches the stacked least-squares solution") {
    Rng rng(309);
    const TonePlan plan = TonePlan::from_active(16, {0, 1, 2, 4, 5, 7, 9, 10, 11, 13, 14, 15});
    const ChannelRealization chan = draw_channel(rng, 8, 2, 2, 16);
    const auto s = random_symbols(rng, plan.active.size(), 2);

    PmpSettings cfg;
    cfg.lambda = 0.0;
    cfg.iterations = 4000;
    const PmpOutcome outcome = precode_pmp_detailed(s, plan, chan, cfg);
    CHECK(outcome.residual_norm <= 1e-5);

    // materialize the real-embedded operator and compare to its least-norm solve
    const PmpProblem problem = build_pmp_problem(s, plan, chan);
    const RealPmpProblem real = to_real(problem);
    const std::size_t rows = real.op.rows(), cols = real.op.cols();
    std::vector<double> dense(rows * cols);
    std::vector<double> e(cols, 0.0), col(rows);
    for (std::size_t j = 0; j < cols; ++j) {
        e[j] = 1.0;
        real.op.apply(e, col);
        e[j] = 0.0;
        for (std::size_t i = 0; i < rows; ++i) dense[i * cols + j] = col[i];
    }
    const std::vector<double> want = oracles::least_norm_solution(dense, rows, cols, real.target);
    CVec want_c = to_complex(want);
    const double down = 1.0 / std::sqrt(double(plan.tones));
    double err = 0.0, ref = 0.0;
    for (std::size_t n = 0; n < chan.antennas; ++n)
        for (std::size_t k = 0; k < plan.tones; ++k) {
            err += std::norm(outcome.frame.time(n, k) - want_c[n * plan.tones + k] * down);
            ref += std::norm(want_c[n * plan.tones + k] * down);
        }
    CHECK(std::sqrt(err) <= 1e-3 * std::sqrt(ref));
}

TEST_CASE("pmp never does worse than ls on peak ratio across a penalty sweep") {
    Rng rng(310);
    const TonePlan plan = TonePlan::from_active(16, {0, 1, 2, 4, 5, 7, 9, 10, 11, 13, 14, 15});
    for (int instance = 0; instance < 5; ++instance) {
        const ChannelRealization chan = draw_channel(rng, 12, 2, 2, 16);
        const auto s = random_symbols(rng, plan.active.size(), 2);
        const TxFrame ls = precode_ls(s, plan, chan);
        const double ls_par_db = max_antenna_par_db(ls);
        double best = 1e300;
        for (double lambda : {1.0 / 1024, 1.0 / 64, 1.0 / 16, 0.25, 1.0, 4.0}) {
            const TxFrame pmp_frame = precode_pmp(s, plan, chan, lambda, 1500);
            best = std::min(best, max_antenna_par_db(pmp_frame));
        }
        CHECK(best <= ls_par_db + 0.1);
    }
}

TEST_CASE("near-exact peak minimizers have the predicted support and bound") {
    // flat-fading real instances: M = 2 users, N = 8 antennas
    Rng rng(311);
    for (int instance = 0; instance < 3; ++instance) {
        const std::size_t m = 2, n = 8;
        std::vector<double> mat(m * n);
        for (double& x : mat) x = rng.gaussian();
        DenseRealOperator op(m, n, mat);
        std::vector<double> s(m);
        for (double& x : s) x = rng.gaussian();

        const std::vector<double> x = oracles::linf_min_continuation(op, s);
        const double peak = norm_inf(x);
        std::size_t at_peak = 0;
        for (double v : x)
            if (std::abs(v) >= 0.99 * peak) ++at_peak;
        CHECK(at_peak >= n - m + 1);

        const double par = double(n) * peak * peak / norm2_sq(std::span<const double>(x));
        CHECK(par <= double(n) / double(n - m + 1) * 1.05);
    }
}

TEST_CASE("emulated matched-filter target changes the data blocks") {
    Rng rng(312);
    const TonePlan plan = TonePlan::from_active(8, {1, 5});
    const ChannelRealization chan = draw_channel(rng, 4, 2, 2, 8);
    const auto s = random_symbols(rng, 2, 2);
    const PmpProblem def = build_pmp_problem(s, plan, chan);
    const PmpProblem mf = build_pmp_problem(s, plan, chan, TargetPrecoder::matched_filter);
    double diff = 0.0;
    for (std::size_t i = 0; i < 4; ++i) diff += std::abs(def.target[i] - mf.target[i]);
    CHECK(diff > 1e-6);
    CVec xw(4), want(2);
    matvec_herm(chan.freq[1], s[0], xw);
    matvec(chan.freq[1], xw, want);
    CHECK(std::abs(mf.target[0] - want[0]) <= 1e-12);
    CHECK(std::abs(mf.target[1] - want[1]) <= 1e-12);
}

TEST_CASE("frame time and frequency views stay consistent") {
    Rng rng(313);
    const TonePlan plan = TonePlan::from_active(16, {0, 2, 3, 5, 8, 13});
    const ChannelRealization chan = draw_channel(rng, 6, 2, 3, 16);
    const auto s = random_symbols(rng, 6, 2);
    for (const TxFrame& frame :
         {precode_ls(s, plan, chan), precode_mf(s, plan, chan),
          precode_ls_clip(s, plan, chan, 3.0), precode_pmp(s, plan, chan, 0.25, 120)}) {
        double scale = 0.0;
        for (std::size_t i = 0; i < 16 * 6; ++i)
            scale = std::max(scale, std::abs(frame.freq.data()[i]));
        for (std::size_t n = 0; n < 6; ++n) {
            CVec row(frame.time.row(n), frame.time.row(n) + 16);
            const CVec f = dft(row);
            for (std::size_t w = 0; w < 16; ++w)
                CHECK(std::abs(f[w] - frame.freq(w, n)) <= 1e-10 * std::max(1.0, scale));
        }
        double p = 0.0;
        for (std::size_t i = 0; i < 16 * 6; ++i) p += std::norm(frame.freq.data()[i]);
        CHECK(frame.power == Catch::Approx(p).epsilon(1e-12));
    }
}
