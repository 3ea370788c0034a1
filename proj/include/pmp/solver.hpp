#pragma once

#include <chrono>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "pmp/errors.hpp"
#include "pmp/linalg.hpp"
#include "pmp/prox.hpp"

namespace pmp {

/// l_inf-regularized least squares over an abstract real operator:
/// minimize  lambda * ||x||_inf + ||target - A x||_2^2.
/// lipschitz must be at least 2 * sigma_max(A)^2 (the gradient's Lipschitz
/// constant); the operator is referenced, not owned.
struct LinfLsProblem {
    const RealLinearOperator* op = nullptr;
    std::vector<double> target;
    double lambda = 0.0;
    double lipschitz = 0.0;
};

struct SolverOptions {
    std::size_t iterations = 2000;          // K: fixed iteration count
    std::vector<double> start;              // x_0; empty means zero
    bool record_trace = false;              // per-iteration objective and level
    double rel_objective_stop = 0.0;        // early stop threshold; 0 disables
    std::vector<std::size_t> checkpoints;   // ascending iteration indices to snapshot
};

struct SolverResult {
    std::vector<double> x;
    std::size_t iterations_used = 0;
    std::vector<double> objective_trace;             // F(x_k), when recorded
    std::vector<double> level_trace;                 // alpha_k, when recorded
    std::vector<std::vector<double>> checkpoint_x;   // snapshots at requested iterations
    double seconds = 0.0;
};

inline double linf_ls_objective(const LinfLsProblem& p, std::span<const double> x) {
    std::vector<double> r(p.op->rows());
    p.op->apply(x, r);
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = p.target[i] - r[i];
    return p.lambda * norm_inf(x) + norm2_sq(std::span<const double>(r));
}

namespace detail {

template <bool Momentum>
SolverResult proximal_descent(const LinfLsProblem& p, const SolverOptions& opt) {
    if (p.op == nullptr) throw DimensionError("solver problem has no operator");
    const std::size_t n = p.op->cols(), m = p.op->rows();
    if (p.target.size() != m) throw DimensionError("target length does not match operator rows");
    if (opt.iterations == 0) throw DimensionError("iteration count must be at least 1");
    if (!(p.lipschitz > 0.0)) throw DimensionError("lipschitz constant must be positive");
    if (p.lambda < 0.0) throw DimensionError("regularization weight must be nonnegative");

    const auto t_start = std::chrono::steady_clock::now();

    std::vector<double> x_prev(n, 0.0);
    if (!opt.start.empty()) {
        if (opt.start.size() != n) throw DimensionError("start vector length mismatch");
        x_prev = opt.start;
    }
    std::vector<double> x = x_prev;
    std::vector<double> y = x_prev;
    std::vector<double> r(m), w(n);

    SolverResult result;
    const bool need_objective = opt.record_trace || opt.rel_objective_stop > 0.0;
    double t_k = 1.0;
    double f_prev = 0.0;
    const double step = 2.0 / p.lipschitz;
    std::size_t next_checkpoint = 0;
    std::size_t k = 1;

    for (; k <= opt.iterations; ++k) {
        // w = y - (2/L) A^T (A y - target)
        p.op->apply(y, r);
        for (std::size_t i = 0; i < m; ++i) r[i] -= p.target[i];
        p.op->adjoint(r, w);
        for (std::size_t i = 0; i < n; ++i) w[i] = y[i] - step * w[i];

        const double alpha = trunc_level(w, p.lambda, p.lipschitz);
        if (!std::isfinite(alpha))
            throw DivergenceError("solver produced a non-finite iterate at iteration " +
                                      std::to_string(k),
                                  k);

        std::swap(x_prev, x);
        for (std::size_t i = 0; i < n; ++i) x[i] = std::min(std::max(w[i], -alpha), alpha);

        if constexpr (Momentum) {
            const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t_k * t_k));
            const double coef = (t_k - 1.0) / t_next;
            for (std::size_t i = 0; i < n; ++i) y[i] = x[i] + coef * (x[i] - x_prev[i]);
            t_k = t_next;
        } else {
            y = x;
        }

        if (next_checkpoint < opt.checkpoints.size() && opt.checkpoints[next_checkpoint] == k) {
            result.checkpoint_x.push_back(x);
            ++next_checkpoint;
        }

        if (need_objective) {
            const double f = linf_ls_objective(p, x);
            if (opt.record_trace) {
                result.objective_trace.push_back(f);
                result.level_trace.push_back(alpha);
            }
            if (opt.rel_objective_stop > 0.0 && k > 1 &&
                std::abs(f_prev - f) <= opt.rel_objective_stop * std::max(1.0, std::abs(f)))
                break;
            f_prev = f;
        }
    }

    result.x = std::move(x);
    result.iterations_used = std::min(k, opt.iterations);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return result;
}

}  // namespace detail

/// FITRA: accelerated proximal descent whose prox step is element-wise
/// truncation at the level from trunc_level. Runs exactly K iterations from
/// x_0 = 0 unless configured otherwise.
inline SolverResult fitra(const LinfLsProblem& p, const SolverOptions& opt = {}) {
    return detail::proximal_descent<true>(p, opt);
}

/// Plain (non-accelerated) variant of fitra.
inline SolverResult ista(const LinfLsProblem& p, const SolverOptions& opt = {}) {
    return detail::proximal_descent<false>(p, opt);
}

}  // namespace pmp
