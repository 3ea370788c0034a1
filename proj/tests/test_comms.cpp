#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "pmp/conv_code.hpp"
#include "pmp/link.hpp"
#include "pmp/qam.hpp"

using namespace pmp;

namespace {

std::vector<std::uint8_t> random_bits(Rng& rng, std::size_t n) {
    std::vector<std::uint8_t> bits(n);
    for (auto& b : bits) b = static_cast<std::uint8_t>(rng.next_u64() >> 63);
    return bits;
}

/// Exact log-sum LLR over the 16-point constellation.
std::array<double, 4> exact_llr(cplx y, double gain, double n0) {
    std::array<double, 4> num{}, den{};
    num.fill(0.0);
    den.fill(0.0);
    for (unsigned label = 0; label < 16; ++label) {
        const cplx d = y - gain * Qam16::points()[label];
        const double p = std::exp(-(d.real() * d.real() + d.imag() * d.imag()) / n0);
        for (unsigned b = 0; b < 4; ++b) {
            if ((label >> (3 - b)) & 1u)
                den[b] += p;
            else
                num[b] += p;
        }
    }
    std::array<double, 4> llr{};
    for (unsigned b = 0; b < 4; ++b) llr[b] = std::log(num[b]) - std::log(den[b]);
    return llr;
}

}  // namespace

TEST_CASE("encoding the all-zero word gives the all-zero stream") {
    const std::vector<std::uint8_t> bits(20, 0);
    for (std::uint8_t b : conv_encode(bits)) CHECK(b == 0);
}

TEST_CASE("encoder impulse response spells out the generators") {
    std::vector<std::uint8_t> impulse{1, 0, 0, 0, 0, 0, 0};
    const std::vector<std::uint8_t> out = conv_encode(impulse);
    REQUIRE(out.size() == 14);
    // 0133 octal = 1011011, 0171 octal = 1111001, MSB first
    const std::vector<int> g0{1, 0, 1, 1, 0, 1, 1};
    const std::vector<int> g1{1, 1, 1, 1, 0, 0, 1};
    for (std::size_t t = 0; t < 7; ++t) {
        CHECK(int(out[2 * t]) == g0[t]);
        CHECK(int(out[2 * t + 1]) == g1[t]);
    }
}

TEST_CASE("216 information bits encode to 432 coded bits") {
    Rng rng(401);
    CHECK(conv_encode(random_bits(rng, 216)).size() == 432);
    CHECK_THROWS_AS(conv_encode(std::vector<std::uint8_t>{}), DimensionError);
}

TEST_CASE("constellation has unit average energy") {
    double acc = 0.0;
    for (const cplx& p : Qam16::points()) acc += std::norm(p);
    CHECK(acc / 16.0 == Catch::Approx(1.0).margin(1e-15));
}

TEST_CASE("adjacent constellation points differ in exactly one bit") {
    const auto& pts = Qam16::points();
    const double step = 2.0 / std::sqrt(10.0);
    for (unsigned a = 0; a < 16; ++a)
        for (unsigned b = a + 1; b < 16; ++b) {
            const double d = std::abs(pts[a] - pts[b]);
            if (std::abs(d - step) < 1e-9) {
                const unsigned diff = a ^ b;
                CHECK(std::popcount(diff) == 1);
            }
        }
}

TEST_CASE("label 0000 maps to the lower-left corner with the user scale") {
    const std::vector<std::uint8_t> bits{0, 0, 0, 0};
    const double scale = 1.0 / std::sqrt(7.0);  // arbitrary per-user scaling
    const CVec sym = map_16qam_gray(bits, scale);
    REQUIRE(sym.size() == 1);
    const cplx want = cplx{-3.0, -3.0} / std::sqrt(10.0) * scale;
    CHECK(std::abs(sym[0] - want) <= 1e-15);
    CHECK_THROWS_AS(map_16qam_gray(std::vector<std::uint8_t>{1, 0, 1}, 1.0), DimensionError);
}

TEST_CASE("mapped symbols carry energy 1/M on average") {
    Rng rng(402);
    const std::size_t m = 5;
    const std::vector<std::uint8_t> bits = random_bits(rng, 4000);
    const CVec sym = map_16qam_gray(bits, 1.0 / std::sqrt(double(m)));
    double acc = 0.0;
    for (const cplx& s : sym) acc += std::norm(s);
    CHECK(acc / double(sym.size()) == Catch::Approx(1.0 / double(m)).epsilon(0.1));
}

TEST_CASE("awgn is disabled at zero variance and reproducible by seed") {
    CVec y{cplx{1.0, -1.0}, cplx{0.5, 0.25}};
    const CVec orig = y;
    Rng rng(403);
    apply_awgn(y, 0.0, rng);
    CHECK(y == orig);

    CVec y1 = orig, y2 = orig;
    Rng r1(404), r2(404);
    apply_awgn(y1, 0.3, r1);
    apply_awgn(y2, 0.3, r2);
    CHECK(y1 == y2);
}

TEST_CASE("awgn empirical variance matches the snr definition") {
    Rng rng(405);
    const double n0 = n0_from_snr_db(10.0);  // 0.1
    double acc = 0.0;
    const std::size_t n = 1000000;
    CVec y(1);
    for (std::size_t i = 0; i < n; ++i) {
        y[0] = 0.0;
        apply_awgn(y, n0, rng);
        acc += std::norm(y[0]);
    }
    CHECK(acc / double(n) == Catch::Approx(0.1).epsilon(0.01));
}

TEST_CASE("llr signs on a clean constellation point recover its label") {
    const double n0 = 1e-6;
    for (unsigned label = 0; label < 16; ++label) {
        const cplx y = Qam16::points()[label] * 0.7;
        const auto llr = soft_demap(y, 0.7, n0);
        for (unsigned b = 0; b < 4; ++b) {
            const bool bit = (label >> (3 - b)) & 1u;
            if (bit)
                CHECK(llr[b] < 0.0);  // positive means bit 0
            else
                CHECK(llr[b] > 0.0);
        }
    }
}

TEST_CASE("the origin is equidistant for the axis-sign bits") {
    const auto llr = soft_demap(cplx{0.0, 0.0}, 1.0, 1.0);
    CHECK(llr[0] == 0.0);  // first bit of the I axis
    CHECK(llr[2] == 0.0);  // first bit of the Q axis
    CHECK(llr[1] != 0.0);
    CHECK(llr[3] != 0.0);
}

TEST_CASE("max-log llrs stay within log 4 of the exact marginals") {
    Rng rng(406);
    for (int trial = 0; trial < 500; ++trial) {
        const cplx y{2.4 * (rng.uniform() - 0.5), 2.4 * (rng.uniform() - 0.5)};
        const double n0 = 0.05 + rng.uniform();
        const auto approx = soft_demap(y, 1.0, n0);
        const auto exact = exact_llr(y, 1.0, n0);
        for (unsigned b = 0; b < 4; ++b)
            CHECK(std::abs(approx[b] - exact[b]) <= std::log(4.0) + 1e-9);
    }
}

TEST_CASE("noiseless map/demap/decode chain is error free") {
    Rng rng(407);
    const CodeSpec code;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::vector<std::uint8_t> info = random_bits(rng, 216);
        const std::vector<std::uint8_t> coded = conv_encode(info, code);
        const CVec sym = map_16qam_gray(coded, 1.0);
        std::vector<double> llrs;
        llrs.reserve(432);
        for (const cplx& s : sym) {
            const auto l = soft_demap(s, 1.0, kNoiselessN0);
            llrs.insert(llrs.end(), l.begin(), l.end());
        }
        const std::vector<std::uint8_t> decoded = viterbi_decode(llrs, 216, code);
        REQUIRE(decoded == info);
    }
}

TEST_CASE("a single flipped coded bit is corrected") {
    Rng rng(408);
    const std::vector<std::uint8_t> info = random_bits(rng, 216);
    std::vector<std::uint8_t> coded = conv_encode(info);
    coded[101] ^= 1;
    std::vector<double> llrs(432);
    for (std::size_t i = 0; i < 432; ++i) llrs[i] = coded[i] ? -4.0 : 4.0;
    CHECK(viterbi_decode(llrs, 216) == info);
}

TEST_CASE("all-zero llrs decode to a deterministic valid word") {
    const std::vector<double> llrs(432, 0.0);
    const std::vector<std::uint8_t> a = viterbi_decode(llrs, 216);
    const std::vector<std::uint8_t> b = viterbi_decode(llrs, 216);
    REQUIRE(a.size() == 216);
    CHECK(a == b);
}

TEST_CASE("interleaver round trip is the identity for many seeds") {
    for (std::uint64_t seed = 0; seed < 300; ++seed) {
        Rng rng(seed);
        const Interleaver il = Interleaver::draw(rng, 432);
        Rng data_rng(seed + 1000);
        const std::vector<std::uint8_t> data = random_bits(data_rng, 432);
        const std::vector<std::uint8_t> round =
            il.invert<std::uint8_t>(il.apply<std::uint8_t>(data));
        REQUIRE(round == data);
    }
}

TEST_CASE("payloads fit the tone budget") {
    Rng rng(409);
    const UserPayload p = make_payload(rng, 108, 1.0 / std::sqrt(10.0));
    CHECK(p.info_bits.size() == 216);
    CHECK(p.coded_bits.size() == 432);
    CHECK(p.symbols.size() == 108);
}

TEST_CASE("noise-free ls transmission decodes every user") {
    Rng rng(410);
    const TonePlan plan = TonePlan::ieee80211n_40mhz();
    for (int frame_idx = 0; frame_idx < 3; ++frame_idx) {
        const ChannelRealization chan = draw_channel(rng, 12, 3, 4, 128);
        std::vector<UserPayload> payloads;
        for (std::size_t u = 0; u < 3; ++u)
            payloads.push_back(make_payload(rng, 108, 1.0 / std::sqrt(3.0)));
        const auto s = assemble_tone_symbols(payloads, 108);
        const TxFrame frame = precode_ls(s, plan, chan);
        Rng noise(0);
        const auto errors = run_link(frame, plan, chan, payloads, std::nullopt, noise);
        for (std::uint8_t e : errors) CHECK(e == 0);
    }
}

TEST_CASE("noise-free pmp transmission decodes once the residual is small") {
    Rng rng(411);
    const TonePlan plan = TonePlan::ieee80211n_40mhz();
    const ChannelRealization chan = draw_channel(rng, 24, 2, 4, 128);
    std::vector<UserPayload> payloads;
    for (std::size_t u = 0; u < 2; ++u)
        payloads.push_back(make_payload(rng, 108, 1.0 / std::sqrt(2.0)));
    const auto s = assemble_tone_symbols(payloads, 108);

    PmpSettings cfg;
    cfg.lambda = 1e-5;
    cfg.iterations = 2500;
    const PmpOutcome outcome = precode_pmp_detailed(s, plan, chan, cfg);
    double b_norm = 0.0;
    for (const auto& sv : s) b_norm += norm2_sq(std::span<const cplx>(sv));
    REQUIRE(outcome.residual_norm / std::sqrt(b_norm) <= 1e-6);

    Rng noise(0);
    const auto errors = run_link(outcome.frame, plan, chan, payloads, std::nullopt, noise);
    for (std::uint8_t e : errors) CHECK(e == 0);
}

TEST_CASE("link results are reproducible given the seed") {
    Rng rng(412);
    const TonePlan plan = TonePlan::ieee80211n_40mhz();
    const ChannelRealization chan = draw_channel(rng, 8, 2, 4, 128);
    std::vector<UserPayload> payloads;
    for (std::size_t u = 0; u < 2; ++u)
        payloads.push_back(make_payload(rng, 108, 1.0 / std::sqrt(2.0)));
    const auto s = assemble_tone_symbols(payloads, 108);
    const TxFrame frame = precode_ls(s, plan, chan);
    Rng n1(77), n2(77);
    const auto e1 = run_link(frame, plan, chan, payloads, 6.0, n1);
    const auto e2 = run_link(frame, plan, chan, payloads, 6.0, n2);
    CHECK(e1 == e2);
}
