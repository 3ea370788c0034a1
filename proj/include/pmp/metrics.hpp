#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pmp/errors.hpp"
#include "pmp/linalg.hpp"
#include "pmp/toneplan.hpp"

namespace pmp {

inline double to_db(double linear) { return 10.0 * std::log10(linear); }
inline double from_db(double db) { return std::pow(10.0, db / 10.0); }

/// Peak-to-average ratio of one antenna's time-domain signal:
/// 2W * max(|Re|, |Im|)^2 / ||a||_2^2, in [1, 2W].
inline double par_linear(std::span<const cplx> a) {
    const double energy = norm2_sq(a);
    if (energy == 0.0) throw DegenerateFrameError("PAR undefined for an all-zero signal");
    const double peak = norm_inf_tilde(a);
    return 2.0 * static_cast<double>(a.size()) * peak * peak / energy;
}

/// Empirical exceedance probability Prob{PAR > grid point}, grid in dB.
inline std::vector<double> ccdf(std::span<const double> par_samples_linear,
                                std::span<const double> grid_db) {
    std::vector<double> sorted_db(par_samples_linear.size());
    for (std::size_t i = 0; i < sorted_db.size(); ++i) sorted_db[i] = to_db(par_samples_linear[i]);
    std::sort(sorted_db.begin(), sorted_db.end());
    std::vector<double> out(grid_db.size());
    for (std::size_t g = 0; g < grid_db.size(); ++g) {
        const auto it = std::upper_bound(sorted_db.begin(), sorted_db.end(), grid_db[g]);
        out[g] = static_cast<double>(sorted_db.end() - it) / static_cast<double>(sorted_db.size());
    }
    return out;
}

/// 99th percentile of the PAR samples (linear interpolation between order
/// statistics), returned in dB. Requires at least 100 samples.
inline double par_star_db(std::span<const double> par_samples_linear) {
    if (par_samples_linear.size() < 100)
        throw StatisticsError("par_star needs at least 100 samples");
    std::vector<double> v(par_samples_linear.begin(), par_samples_linear.end());
    std::sort(v.begin(), v.end());
    const double h = 0.99 * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const double frac = h - static_cast<double>(lo);
    const double q = (lo + 1 < v.size()) ? v[lo] + frac * (v[lo + 1] - v[lo]) : v[lo];
    return to_db(q);
}

/// Out-of-band power ratio of a frequency-domain frame (rows are x_w):
/// |T| * sum_{inactive} ||x_w||^2 / (|T^c| * sum_{active} ||x_w||^2).
inline double obr_linear(const CMat& freq, const TonePlan& plan) {
    if (freq.rows() != plan.tones) throw DimensionError("frame/plan tone count mismatch");
    const auto tone_power = [&](std::size_t wi) {
        double p = 0.0;
        for (std::size_t c = 0; c < freq.cols(); ++c) p += std::norm(freq(wi, c));
        return p;
    };
    double in_band = 0.0, out_band = 0.0;
    for (std::size_t wi : plan.active) in_band += tone_power(wi);
    for (std::size_t wi : plan.inactive) out_band += tone_power(wi);
    if (in_band == 0.0) throw DegenerateFrameError("OBR undefined without in-band power");
    if (plan.inactive.empty()) return 0.0;
    return static_cast<double>(plan.active.size()) * out_band /
           (static_cast<double>(plan.inactive.size()) * in_band);
}

/// Mean block-error flag across users and frames.
inline double ser(std::span<const std::uint8_t> outcomes) {
    if (outcomes.empty()) throw StatisticsError("no decode outcomes");
    std::size_t errors = 0;
    for (std::uint8_t o : outcomes) errors += o ? 1 : 0;
    return static_cast<double>(errors) / static_cast<double>(outcomes.size());
}

/// Minimum SNR reaching the target error rate, by log-linear interpolation
/// between the first bracketing pair of grid points. Zero rates are floored
/// at 1e-12 for the interpolation.
inline double snr_operating_point_db(std::span<const double> snr_db, std::span<const double> ser_vals,
                                     double target = 0.01) {
    if (snr_db.size() != ser_vals.size() || snr_db.size() < 2)
        throw StatisticsError("operating point needs matching snr/ser arrays");
    for (std::size_t i = 0; i + 1 < snr_db.size(); ++i) {
        if (ser_vals[i] >= target && ser_vals[i + 1] < target) {
            const double f0 = std::log10(std::max(ser_vals[i], 1e-12));
            const double f1 = std::log10(std::max(ser_vals[i + 1], 1e-12));
            const double ft = std::log10(target);
            if (f0 == f1) return snr_db[i];
            return snr_db[i] + (snr_db[i + 1] - snr_db[i]) * (ft - f0) / (f1 - f0);
        }
        if (ser_vals[i] == target) return snr_db[i];
    }
    if (ser_vals.back() == target) return snr_db.back();
    throw NotBracketedError("error-rate curve does not cross the target rate");
}

/// Per-frame measurement bundle produced by the harness.
struct MetricRecord {
    std::vector<double> par;                 // per-antenna linear PAR
    double obr = 0.0;                        // linear
    std::vector<std::uint8_t> block_errors;  // per user
    double snr_db = 0.0;
    std::string precoder;
    std::uint64_t seed = 0;
};

}  // namespace pmp
