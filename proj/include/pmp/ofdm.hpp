#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "pmp/errors.hpp"
#include "pmp/linalg.hpp"

namespace pmp {

/// Re-orders W per-tone vectors of length N (user orientation) into N
/// per-antenna vectors of length W: [x_1 ... x_W] = [a_1 ... a_N]^T.
inline std::vector<CVec> users_to_antennas(const std::vector<CVec>& x) {
    if (x.empty()) throw DimensionError("empty tone list");
    const std::size_t w = x.size(), n = x[0].size();
    for (const CVec& v : x)
        if (v.size() != n) throw DimensionError("inconsistent tone vector lengths");
    std::vector<CVec> a(n, CVec(w));
    for (std::size_t wi = 0; wi < w; ++wi)
        for (std::size_t ni = 0; ni < n; ++ni) a[ni][wi] = x[wi][ni];
    return a;
}

inline std::vector<CVec> antennas_to_users(const std::vector<CVec>& a) {
    return users_to_antennas(a);  // the mapping is its own inverse (transpose)
}

/// Scales a frequency-domain frame (rows are the per-tone vectors x_w) to
/// unit total transmit power. Returns the scaled frame and the original
/// power P = sum_w ||x_w||^2.
inline std::pair<CMat, double> normalize_frame(const CMat& freq) {
    double p = 0.0;
    for (std::size_t i = 0, count = freq.rows() * freq.cols(); i < count; ++i)
        p += std::norm(freq.data()[i]);
    if (p == 0.0) throw DegenerateFrameError("cannot normalize an all-zero frame");
    CMat out = freq;
    const double s = 1.0 / std::sqrt(p);
    for (std::size_t i = 0, count = out.rows() * out.cols(); i < count; ++i) out.data()[i] *= s;
    return {std::move(out), p};
}

}  // namespace pmp
