#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <vector>

#include "pmp/errors.hpp"

namespace pmp {

/// Truncation level of the l_inf proximal map: the nonnegative alpha
/// minimizing  lambda*alpha + (L/2) * sum_i ((|w_i| - alpha)_+)^2,
/// i.e. the root of sum_i (|w_i| - alpha)_+ = lambda/L, clamped at zero.
///
/// Exact closed form: with the magnitudes sorted descending u_1 >= u_2 >= ...,
/// the candidate for a support of size k is (sum_{i<=k} u_i - lambda/L)/k,
/// accepted when it falls into the k-th magnitude interval. Magnitudes that
/// cannot exceed the level (below max|w| - lambda/L) are pruned up front.
inline double trunc_level(std::span<const double> w, double lambda, double lipschitz) {
    if (w.empty()) return 0.0;
    double peak = 0.0;
    for (double x : w) {
        const double a = std::abs(x);
        if (a > peak) peak = a;
    }
    if (!std::isfinite(peak)) return std::numeric_limits<double>::quiet_NaN();
    if (!(lambda > 0.0)) return peak;
    if (peak == 0.0) return 0.0;

    const double budget = lambda / lipschitz;
    const double threshold = peak - budget;
    std::vector<double> mags;
    mags.reserve(64);
    for (double x : w) {
        const double a = std::abs(x);
        if (a > threshold) mags.push_back(a);
    }
    std::sort(mags.begin(), mags.end(), std::greater<>());

    const double floor_level = std::max(threshold, 0.0);
    double csum = 0.0;
    for (std::size_t k = 0; k < mags.size(); ++k) {
        csum += mags[k];
        const double cand = (csum - budget) / static_cast<double>(k + 1);
        const double lower = (k + 1 < mags.size()) ? mags[k + 1] : floor_level;
        if (cand >= lower) return std::max(cand, 0.0);
    }
    return 0.0;  // budget >= sum of magnitudes: full truncation
}

/// Same level via bisection on the monotone stationarity condition
/// f(alpha) = lambda - L * sum_i (|w_i| - alpha)_+ over [0, max|w|].
/// Terminates at absolute bracket width <= tol.
inline double trunc_level_bisect(std::span<const double> w, double lambda, double lipschitz,
                                 double tol = 0.0) {
    if (w.empty()) return 0.0;
    double peak = 0.0;
    for (double x : w) peak = std::max(peak, std::abs(x));
    if (!(lambda > 0.0) || peak == 0.0) return lambda > 0.0 ? 0.0 : peak;
    if (tol <= 0.0) tol = 1e-12 * std::max(1.0, peak);

    const auto excess = [&](double alpha) {
        double s = 0.0;
        for (double x : w) {
            const double d = std::abs(x) - alpha;
            if (d > 0.0) s += d;
        }
        return s;
    };
    const double budget = lambda / lipschitz;
    if (excess(0.0) <= budget) return 0.0;

    double lo = 0.0, hi = peak;
    while (hi - lo > tol) {
        const double mid = 0.5 * (lo + hi);
        if (excess(mid) > budget)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

/// Element-wise truncation to [-level, +level].
inline void truncate(std::span<double> w, double level) {
    for (double& x : w) x = std::min(std::max(x, -level), level);
}

inline std::vector<double> truncated(std::span<const double> w, double level) {
    std::vector<double> out(w.begin(), w.end());
    truncate(out, level);
    return out;
}

}  // namespace pmp
