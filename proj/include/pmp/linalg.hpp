#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pmp/errors.hpp"
#include "pmp/fft.hpp"
#include "pmp/rng.hpp"

namespace pmp {

/// Dense complex matrix, row-major. Dimensions are fixed at construction.
class CMat {
  public:
    CMat() : rows_(0), cols_(0) {}
    CMat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols) {
        if (rows == 0 || cols == 0) throw DimensionError("matrix dimensions must be positive");
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    cplx& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
    const cplx& operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

    cplx* row(std::size_t r) { return data_.data() + r * cols_; }
    const cplx* row(std::size_t r) const { return data_.data() + r * cols_; }

    cplx* data() { return data_.data(); }
    const cplx* data() const { return data_.data(); }

    const CVec& values() const { return data_; }

  private:
    std::size_t rows_, cols_;
    CVec data_;
};

inline double norm2_sq(std::span<const cplx> v) {
    double s = 0.0;
    for (const cplx& z : v) s += z.real() * z.real() + z.imag() * z.imag();
    return s;
}

inline double norm2_sq(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double norm2(std::span<const cplx> v) { return std::sqrt(norm2_sq(v)); }
inline double norm2(std::span<const double> v) { return std::sqrt(norm2_sq(v)); }

/// <x, y> = x^H y.
inline cplx cdot(std::span<const cplx> x, std::span<const cplx> y) {
    cplx s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += std::conj(x[i]) * y[i];
    return s;
}

inline double dot(std::span<const double> x, std::span<const double> y) {
    double s = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
    return s;
}

/// max over entries of max(|Re|, |Im|).
inline double norm_inf_tilde(std::span<const cplx> v) {
    double m = 0.0;
    for (const cplx& z : v) {
        const double re = std::abs(z.real());
        const double im = std::abs(z.imag());
        if (re > m) m = re;
        if (im > m) m = im;
    }
    return m;
}

inline double norm_inf(std::span<const double> v) {
    double m = 0.0;
    for (double x : v) {
        const double a = std::abs(x);
        if (a > m) m = a;
    }
    return m;
}

/// y = H x
inline void matvec(const CMat& h, std::span<const cplx> x, std::span<cplx> y) {
    if (x.size() != h.cols() || y.size() != h.rows()) throw DimensionError("matvec shape mismatch");
    for (std::size_t m = 0; m < h.rows(); ++m) {
        const cplx* row = h.row(m);
        double re = 0.0, im = 0.0;
        for (std::size_t n = 0; n < h.cols(); ++n) {
            re += row[n].real() * x[n].real() - row[n].imag() * x[n].imag();
            im += row[n].real() * x[n].imag() + row[n].imag() * x[n].real();
        }
        y[m] = {re, im};
    }
}

/// y = H^H x
inline void matvec_herm(const CMat& h, std::span<const cplx> x, std::span<cplx> y) {
    if (x.size() != h.rows() || y.size() != h.cols()) throw DimensionError("matvec shape mismatch");
    for (std::size_t n = 0; n < h.cols(); ++n) y[n] = 0.0;
    for (std::size_t m = 0; m < h.rows(); ++m) {
        const cplx* row = h.row(m);
        const double xr = x[m].real(), xi = x[m].imag();
        for (std::size_t n = 0; n < h.cols(); ++n) {
            // conj(row[n]) * x[m]
            y[n] += cplx{row[n].real() * xr + row[n].imag() * xi,
                         row[n].real() * xi - row[n].imag() * xr};
        }
    }
}

namespace detail {

/// Cholesky factorization G = L L^H in place (lower triangle). Throws when a
/// pivot falls below rel_tol times the largest diagonal entry.
inline void cholesky_inplace(CMat& g, double rel_tol = 1e-12) {
    const std::size_t m = g.rows();
    double max_diag = 0.0;
    for (std::size_t i = 0; i < m; ++i) max_diag = std::max(max_diag, std::abs(g(i, i).real()));
    for (std::size_t j = 0; j < m; ++j) {
        double d = g(j, j).real();
        for (std::size_t k = 0; k < j; ++k) d -= std::norm(g(j, k));
        if (!(d > rel_tol * max_diag))
            throw SingularMatrixError("rank-deficient matrix in Cholesky factorization");
        const double lm = std::sqrt(d);
        g(j, j) = lm;
        for (std::size_t i = j + 1; i < m; ++i) {
            cplx s = g(i, j);
            for (std::size_t k = 0; k < j; ++k) s -= g(i, k) * std::conj(g(j, k));
            g(i, j) = s / lm;
        }
    }
}

/// Solves L L^H x = b given the factor from cholesky_inplace.
inline void cholesky_solve(const CMat& l, std::span<cplx> b) {
    const std::size_t m = l.rows();
    for (std::size_t i = 0; i < m; ++i) {
        cplx s = b[i];
        for (std::size_t k = 0; k < i; ++k) s -= l(i, k) * b[k];
        b[i] = s / l(i, i).real();
    }
    for (std::size_t ii = m; ii-- > 0;) {
        cplx s = b[ii];
        for (std::size_t k = ii + 1; k < m; ++k) s -= std::conj(l(k, ii)) * b[k];
        b[ii] = s / l(ii, ii).real();
    }
}

}  // namespace detail

/// Pseudo-inverse of a full-row-rank matrix (M <= N): H^H (H H^H)^{-1}.
inline CMat pinv_rows(const CMat& h, double rel_tol = 1e-12) {
    const std::size_t m = h.rows(), n = h.cols();
    if (m > n) throw DimensionError("pinv_rows requires rows <= cols");
    CMat gram(m, m);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) {
            cplx s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += h(i, k) * std::conj(h(j, k));
            gram(i, j) = s;
        }
    detail::cholesky_inplace(gram, rel_tol);
    CMat out(n, m);
    CVec col(m);
    for (std::size_t j = 0; j < m; ++j) {
        for (std::size_t i = 0; i < m; ++i) col[i] = (i == j) ? 1.0 : 0.0;
        detail::cholesky_solve(gram, col);
        // out column j = H^H * col
        for (std::size_t k = 0; k < n; ++k) {
            cplx s = 0.0;
            for (std::size_t i = 0; i < m; ++i) s += std::conj(h(i, k)) * col[i];
            out(k, j) = s;
        }
    }
    return out;
}

/// Abstract real linear map with an adjoint; the solver and the power method
/// work against this interface so operators never need to be materialized.
class RealLinearOperator {
  public:
    virtual ~RealLinearOperator() = default;
    virtual std::size_t rows() const = 0;
    virtual std::size_t cols() const = 0;
    virtual void apply(std::span<const double> x, std::span<double> y) const = 0;
    virtual void adjoint(std::span<const double> y, std::span<double> x) const = 0;
};

class DenseRealOperator final : public RealLinearOperator {
  public:
    DenseRealOperator(std::size_t rows, std::size_t cols, std::vector<double> row_major)
        : rows_(rows), cols_(cols), a_(std::move(row_major)) {
        if (a_.size() != rows * cols) throw DimensionError("dense operator storage mismatch");
    }

    std::size_t rows() const override { return rows_; }
    std::size_t cols() const override { return cols_; }

    void apply(std::span<const double> x, std::span<double> y) const override {
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            const double* row = a_.data() + i * cols_;
            for (std::size_t j = 0; j < cols_; ++j) s += row[j] * x[j];
            y[i] = s;
        }
    }

    void adjoint(std::span<const double> y, std::span<double> x) const override {
        for (std::size_t j = 0; j < cols_; ++j) x[j] = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* row = a_.data() + i * cols_;
            for (std::size_t j = 0; j < cols_; ++j) x[j] += row[j] * y[i];
        }
    }

    double entry(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

  private:
    std::size_t rows_, cols_;
    std::vector<double> a_;
};

inline constexpr std::uint64_t kPowerMethodSeed = 0x706f776974657261ULL;

/// Largest singular value by power iteration on A^T A. The start vector is a
/// seeded pseudo-random unit vector, so estimates are reproducible. Stops when
/// the relative change of the estimate falls below tol; otherwise throws a
/// ConvergenceError carrying the last estimate.
inline double sigma_max(const RealLinearOperator& op, double tol = 1e-6,
                        std::size_t max_iter = 1000, std::uint64_t seed = kPowerMethodSeed) {
    const std::size_t n = op.cols(), m = op.rows();
    if (n == 0) throw DimensionError("operator with zero input dimension");
    Rng rng(seed);
    std::vector<double> v(n), u(m);
    for (double& x : v) x = rng.gaussian();
    double nv = norm2(std::span<const double>(v));
    if (nv == 0.0) v[0] = nv = 1.0;
    for (double& x : v) x /= nv;

    double sigma = 0.0;
    for (std::size_t it = 1; it <= max_iter; ++it) {
        op.apply(v, std::span<double>(u));
        const double est = norm2(std::span<const double>(u));
        op.adjoint(u, std::span<double>(v));
        const double nz = norm2(std::span<const double>(v));
        if (nz == 0.0) return 0.0;  // A v = 0 with unit v: operator is zero on this vector chain
        for (double& x : v) x /= nz;
        if (it > 1 && std::abs(est - sigma) <= tol * std::max(est, 1e-300)) return est;
        sigma = est;
    }
    throw ConvergenceError("power method did not converge", sigma, max_iter);
}

}  // namespace pmp
