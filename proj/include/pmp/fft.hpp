#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <vector>

#include "pmp/errors.hpp"

namespace pmp {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

/// Radix-2 transform plan for a fixed power-of-two length W.
///
/// Convention: forward() is the unnormalized DFT with kernel e^{-j2*pi*k*l/W},
/// backward() its conjugate transpose (unnormalized), and inverse() carries
/// the 1/W factor, so inverse(forward(a)) == a and
/// ||forward(a)||^2 == W * ||a||^2.
class Fft {
  public:
    explicit Fft(std::size_t w) : w_(w) {
        if (w == 0 || (w & (w - 1)) != 0)
            throw DimensionError("fft length must be a positive power of two");
        log2w_ = 0;
        while ((std::size_t{1} << log2w_) < w) ++log2w_;
        bitrev_.resize(w);
        for (std::size_t i = 0; i < w; ++i) {
            std::size_t r = 0;
            for (std::size_t b = 0; b < log2w_; ++b) r |= ((i >> b) & 1u) << (log2w_ - 1 - b);
            bitrev_[i] = r;
        }
        twiddle_.resize(w / 2 + (w == 1 ? 1 : 0));
        for (std::size_t k = 0; k < w / 2; ++k) {
            const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(w);
            twiddle_[k] = {std::cos(ang), std::sin(ang)};
        }
    }

    std::size_t size() const { return w_; }

    void forward(cplx* a) const { transform<false>(a); }
    void backward(cplx* a) const { transform<true>(a); }

    void inverse(cplx* a) const {
        transform<true>(a);
        const double s = 1.0 / static_cast<double>(w_);
        for (std::size_t i = 0; i < w_; ++i) a[i] *= s;
    }

  private:
    template <bool Conj>
    void transform(cplx* a) const {
        for (std::size_t i = 0; i < w_; ++i) {
            const std::size_t r = bitrev_[i];
            if (r > i) std::swap(a[i], a[r]);
        }
        for (std::size_t len = 2; len <= w_; len <<= 1) {
            const std::size_t half = len >> 1;
            const std::size_t step = w_ / len;
            for (std::size_t base = 0; base < w_; base += len) {
                for (std::size_t k = 0; k < half; ++k) {
                    const cplx tw = twiddle_[k * step];
                    const double twr = tw.real();
                    const double twi = Conj ? -tw.imag() : tw.imag();
                    const cplx u = a[base + k];
                    const cplx v = a[base + k + half];
                    const double tr = v.real() * twr - v.imag() * twi;
                    const double ti = v.real() * twi + v.imag() * twr;
                    a[base + k] = {u.real() + tr, u.imag() + ti};
                    a[base + k + half] = {u.real() - tr, u.imag() - ti};
                }
            }
        }
    }

    std::size_t w_;
    std::size_t log2w_ = 0;
    std::vector<std::size_t> bitrev_;
    std::vector<cplx> twiddle_;
};

inline CVec dft(const CVec& a) {
    CVec out = a;
    Fft(a.size()).forward(out.data());
    return out;
}

inline CVec idft(const CVec& a) {
    CVec out = a;
    Fft(a.size()).inverse(out.data());
    return out;
}

}  // namespace pmp
