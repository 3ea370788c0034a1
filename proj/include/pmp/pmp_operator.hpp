#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "pmp/channel.hpp"
#include "pmp/errors.hpp"
#include "pmp/fft.hpp"
#include "pmp/linalg.hpp"
#include "pmp/toneplan.hpp"

namespace pmp {

/// Matrix-free joint precoding/shaping constraint map.
///
/// Input: stacked per-antenna time-domain signals a = [a_1; ...; a_N]
/// (length N*W) in the unitary-transform scale. Per antenna the unitary DFT
/// (forward DFT over sqrt(W)) produces the frequency signal, tones are
/// re-ordered to per-tone vectors x_w, and the output stacks H_w x_w for
/// active tones (ascending bin) followed by x_w for inactive tones
/// (ascending bin). The adjoint runs the chain backwards with conjugate
/// transposes. Nothing is ever materialized as a dense matrix.
///
/// The unitary scale keeps the transform an isometry, so regularization
/// weights on the time-domain signal mean the same thing regardless of W.
///
/// The channel is referenced, not owned; it must outlive the operator.
class PmpOperator {
  public:
    PmpOperator(TonePlan plan, const ChannelRealization& chan)
        : plan_(std::move(plan)),
          chan_(&chan),
          fft_(plan_.tones),
          unit_scale_(1.0 / std::sqrt(static_cast<double>(plan_.tones))) {
        if (chan.tones != plan_.tones) throw DimensionError("channel/plan tone count mismatch");
    }

    std::size_t input_dim() const { return chan_->antennas * plan_.tones; }
    std::size_t output_dim() const {
        return chan_->users * plan_.active.size() + chan_->antennas * plan_.inactive.size();
    }

    const TonePlan& plan() const { return plan_; }
    const ChannelRealization& channel() const { return *chan_; }

    void apply(std::span<const cplx> a, std::span<cplx> out) const {
        const std::size_t n = chan_->antennas, w = plan_.tones, m = chan_->users;
        if (a.size() != input_dim() || out.size() != output_dim())
            throw DimensionError("operator apply shape mismatch");
        CVec& x = scratch(w * n);  // tone-major: x[wi*n + ni]
        CVec& tmp = scratch_row(w);
        for (std::size_t ni = 0; ni < n; ++ni) {
            std::copy(a.begin() + ni * w, a.begin() + (ni + 1) * w, tmp.begin());
            fft_.forward(tmp.data());
            for (std::size_t wi = 0; wi < w; ++wi) x[wi * n + ni] = tmp[wi] * unit_scale_;
        }
        std::size_t pos = 0;
        for (std::size_t wi : plan_.active) {
            matvec(chan_->freq[wi], std::span<const cplx>(x.data() + wi * n, n),
                   out.subspan(pos, m));
            pos += m;
        }
        for (std::size_t wi : plan_.inactive) {
            std::copy_n(x.data() + wi * n, n, out.begin() + pos);
            pos += n;
        }
    }

    void adjoint(std::span<const cplx> b, std::span<cplx> out) const {
        const std::size_t n = chan_->antennas, w = plan_.tones, m = chan_->users;
        if (b.size() != output_dim() || out.size() != input_dim())
            throw DimensionError("operator adjoint shape mismatch");
        CVec& x = scratch(w * n);
        std::size_t pos = 0;
        for (std::size_t wi : plan_.active) {
            matvec_herm(chan_->freq[wi], b.subspan(pos, m), std::span<cplx>(x.data() + wi * n, n));
            pos += m;
        }
        for (std::size_t wi : plan_.inactive) {
            std::copy_n(b.begin() + pos, n, x.data() + wi * n);
            pos += n;
        }
        CVec& tmp = scratch_row(w);
        for (std::size_t ni = 0; ni < n; ++ni) {
            for (std::size_t wi = 0; wi < w; ++wi) tmp[wi] = x[wi * n + ni];
            fft_.backward(tmp.data());  // adjoint of the unitary DFT, up to the scale
            for (std::size_t wi = 0; wi < w; ++wi) out[ni * w + wi] = tmp[wi] * unit_scale_;
        }
    }

  private:
    // per-thread scratch: every entry is written before use, so no zero-fill
    static CVec& scratch(std::size_t size) {
        thread_local CVec buf;
        if (buf.size() < size) buf.resize(size);
        return buf;
    }
    static CVec& scratch_row(std::size_t size) {
        thread_local CVec buf;
        if (buf.size() < size) buf.resize(size);
        return buf;
    }

    TonePlan plan_;
    const ChannelRealization* chan_;
    Fft fft_;
    double unit_scale_;
};

enum class TargetPrecoder { pseudo_inverse, matched_filter };

/// Constraint system b = C a: the target stacks the data symbols s_w for
/// active tones followed by zero blocks for inactive tones.
struct PmpProblem {
    PmpOperator op;
    CVec target;  // b
};

/// data_symbols holds one length-M vector per active tone, in ascending bin
/// order. When emulate is set, the data block for tone w becomes
/// H_w P_w s_w with P_w the chosen per-tone precoder.
inline PmpProblem build_pmp_problem(const std::vector<CVec>& data_symbols, const TonePlan& plan,
                                    const ChannelRealization& chan,
                                    std::optional<TargetPrecoder> emulate = std::nullopt) {
    if (data_symbols.size() != plan.active.size())
        throw DimensionError("one symbol vector per active tone required");
    const std::size_t m = chan.users;
    for (const CVec& s : data_symbols)
        if (s.size() != m) throw DimensionError("symbol vector length must equal user count");

    PmpOperator op(plan, chan);
    CVec b(op.output_dim());
    std::size_t pos = 0;
    for (std::size_t k = 0; k < plan.active.size(); ++k) {
        const CMat& hw = chan.freq[plan.active[k]];
        std::span<cplx> block(b.data() + pos, m);
        if (!emulate) {
            std::copy(data_symbols[k].begin(), data_symbols[k].end(), block.begin());
        } else {
            CVec xw(chan.antennas);
            if (*emulate == TargetPrecoder::pseudo_inverse) {
                const CMat hdag = pinv_rows(hw);
                matvec(hdag, data_symbols[k], xw);
            } else {
                matvec_herm(hw, data_symbols[k], xw);
            }
            matvec(hw, xw, block);
        }
        pos += m;
    }
    // remaining entries stay zero (shaping constraints)
    return {std::move(op), std::move(b)};
}

/// Real embedding of the complex operator: acting on [Re a; Im a] it realizes
/// the block map [[Re C, -Im C], [Im C, Re C]] through complex applications,
/// so the l_inf norm of the real unknown equals max_n of the per-antenna
/// max(|Re|, |Im|) norm of the complex signal.
class RealEmbeddedOperator final : public RealLinearOperator {
  public:
    explicit RealEmbeddedOperator(PmpOperator op) : op_(std::move(op)) {}

    std::size_t rows() const override { return 2 * op_.output_dim(); }
    std::size_t cols() const override { return 2 * op_.input_dim(); }

    void apply(std::span<const double> x, std::span<double> y) const override {
        const std::size_t n = op_.input_dim(), m = op_.output_dim();
        CVec& a = buffer_in(n);
        CVec& out = buffer_out(m);
        for (std::size_t i = 0; i < n; ++i) a[i] = {x[i], x[n + i]};
        op_.apply(std::span<const cplx>(a.data(), n), std::span<cplx>(out.data(), m));
        for (std::size_t i = 0; i < m; ++i) {
            y[i] = out[i].real();
            y[m + i] = out[i].imag();
        }
    }

    void adjoint(std::span<const double> y, std::span<double> x) const override {
        const std::size_t n = op_.input_dim(), m = op_.output_dim();
        CVec& b = buffer_out(m);
        CVec& out = buffer_in(n);
        for (std::size_t i = 0; i < m; ++i) b[i] = {y[i], y[m + i]};
        op_.adjoint(std::span<const cplx>(b.data(), m), std::span<cplx>(out.data(), n));
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = out[i].real();
            x[n + i] = out[i].imag();
        }
    }

    const PmpOperator& complex_op() const { return op_; }

  private:
    static CVec& buffer_in(std::size_t size) {
        thread_local CVec buf;
        if (buf.size() < size) buf.resize(size);
        return buf;
    }
    static CVec& buffer_out(std::size_t size) {
        thread_local CVec buf;
        if (buf.size() < size) buf.resize(size);
        return buf;
    }

    PmpOperator op_;
};

struct RealPmpProblem {
    RealEmbeddedOperator op;
    std::vector<double> target;
};

inline std::vector<double> to_real(std::span<const cplx> v) {
    std::vector<double> out(2 * v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i].real();
        out[v.size() + i] = v[i].imag();
    }
    return out;
}

inline CVec to_complex(std::span<const double> x) {
    if (x.size() % 2 != 0) throw DimensionError("real embedding has even length");
    const std::size_t n = x.size() / 2;
    CVec out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = {x[i], x[n + i]};
    return out;
}

inline RealPmpProblem to_real(const PmpProblem& problem) {
    return {RealEmbeddedOperator(problem.op), to_real(problem.target)};
}

}  // namespace pmp
