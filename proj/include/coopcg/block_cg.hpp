// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <mutex>
#include <span>
#include <vector>

#include "coopcg/dense.hpp"
#include "coopcg/dense_ops.hpp"
#include "coopcg/errors.hpp"
#include "coopcg/kernels.hpp"
#include "coopcg/scalar.hpp"
#include "coopcg/trace.hpp"
#include "coopcg/workplan.hpp"

// Shared engine for the cooperative block CG iteration.  The iteration is
// split into per-agent stages (see WorkPlan); every scalar is produced by
// exactly one agent slot with a fixed summation order, so the serial
// reference (slots executed in a loop) and the barrier-parallel runtime
// (one thread per slot) produce bitwise identical results.

namespace coopcg::detail {

using Clock = std::chrono::steady_clock;

inline std::uint64_t ns_since(Clock::time_point t0) {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::nanoseconds>(Clock::now() - t0).count());
}

template <ScalarField S>
struct BlockCgWorkspace {
    const SpdMatrix<S>* A = nullptr;
    const Vec<S>* b = nullptr;
    int n = 0;
    int p = 0; ///< current active agent count

    DenseBlock<S> X, R, D, Dnext, AD;
    std::vector<S> gram_raw, gram; // p*p row-major
    std::vector<S> rhs, alpha, beta;
    std::vector<S> res_norm_sq; // per agent
    std::vector<double> res_norm;
    std::vector<int> agent_ids; ///< original column ids of the active slots

    std::vector<std::array<std::uint64_t, kPhaseCount>> mults; // per slot, per stage
    std::vector<std::uint64_t> barrier_wait_ns;                // per slot

    void init(const SpdMatrix<S>& a, const Vec<S>& rhs_vec, const DenseBlock<S>& x0) {
        A = &a;
        b = &rhs_vec;
        n = a.dim();
        p = x0.cols();
        X = x0;
        R = DenseBlock<S>(n, p);
        D = DenseBlock<S>(n, p);
        Dnext = DenseBlock<S>(n, p);
        AD = DenseBlock<S>(n, p);
        agent_ids.resize(static_cast<std::size_t>(p));
        for (int j = 0; j < p; ++j)
            agent_ids[static_cast<std::size_t>(j)] = j;
        resize_active(p);
    }

    void resize_active(int pk) {
        p = pk;
        gram_raw.assign(static_cast<std::size_t>(p) * p, S{});
        gram.assign(static_cast<std::size_t>(p) * p, S{});
        rhs.assign(static_cast<std::size_t>(p) * p, S{});
        alpha.assign(static_cast<std::size_t>(p) * p, S{});
        beta.assign(static_cast<std::size_t>(p) * p, S{});
        res_norm_sq.assign(static_cast<std::size_t>(p), S{});
        res_norm.assign(static_cast<std::size_t>(p), 0.0);
        mults.assign(static_cast<std::size_t>(p), {});
        barrier_wait_ns.assign(static_cast<std::size_t>(p), 0);
    }

    /// Keep only the listed columns (ascending original order expected).
    void restrict_to(const std::vector<int>& keep) {
        X = X.select_columns(keep);
        R = R.select_columns(keep);
        Dnext = Dnext.select_columns(keep);
        D = D.select_columns(keep); // stale pre-swap buffer, resized for shape consistency
        AD = DenseBlock<S>(n, static_cast<int>(keep.size()));
        std::vector<int> ids;
        ids.reserve(keep.size());
        for (int j : keep)
            ids.push_back(agent_ids[static_cast<std::size_t>(j)]);
        agent_ids = std::move(ids);
        resize_active(static_cast<int>(keep.size()));
    }

    std::span<S> row_of(std::vector<S>& m, int i) {
        return {m.data() + static_cast<std::size_t>(i) * p, static_cast<std::size_t>(p)};
    }
    std::span<const S> row_of(const std::vector<S>& m, int i) const {
        return {m.data() + static_cast<std::size_t>(i) * p, static_cast<std::size_t>(p)};
    }
};

struct DriverControl {
    int k = 0;
    int max_iters = 0;
    bool stop = false;
    TerminalStatus status = TerminalStatus::MaxIterations;
    int converged_agent = -1;
    std::atomic<bool> rank_failed{false}; ///< a small solve lost its pivot
    std::atomic<bool> spd_failed{false};  ///< nonpositive Gram diagonal with nonzero direction
    std::atomic<bool> worker_failed{false};
    std::exception_ptr worker_error;
    std::exception_ptr pending_throw; ///< rethrown after the run unwinds
    std::mutex error_mutex;
    Clock::time_point iter_start{};

    bool any_failure() const {
        return rank_failed.load(std::memory_order_seq_cst) ||
               spd_failed.load(std::memory_order_seq_cst) ||
               worker_failed.load(std::memory_order_seq_cst);
    }
};

// ---------------------------------------------------------------------------
// Per-slot stages.  Slot i owns column i of X, R, D, AD and row i of the
// Gram/step grids; cross-slot reads only touch data fixed by an earlier
// barrier.

template <ScalarField S>
void stage_setup(BlockCgWorkspace<S>& ws, int i) {
    kernels::matvec_col<S>(*ws.A, ws.X.col(i), ws.R.col(i));
    auto r = ws.R.col(i);
    for (int row = 0; row < ws.n; ++row)
        r[static_cast<std::size_t>(row)] -= (*ws.b)[static_cast<std::size_t>(row)];
    auto d = ws.D.col(i);
    for (int row = 0; row < ws.n; ++row)
        d[static_cast<std::size_t>(row)] = r[static_cast<std::size_t>(row)];
    ws.res_norm_sq[static_cast<std::size_t>(i)] = kernels::norm_sq<S>(ws.R.col(i));
    ws.res_norm[static_cast<std::size_t>(i)] =
        std::sqrt(scalar_traits<S>::to_double(ws.res_norm_sq[static_cast<std::size_t>(i)]));
}

template <ScalarField S>
void stage_matvec(BlockCgWorkspace<S>& ws, int i) {
    kernels::matvec_col<S>(*ws.A, ws.D.col(i), ws.AD.col(i));
    ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::matvec)] +=
        phase_counted_mults(Phase::matvec, ws.n, ws.p);
}

template <ScalarField S>
void stage_gram_row(BlockCgWorkspace<S>& ws, int i) {
    for (int j = 0; j < ws.p; ++j)
        ws.gram_raw[static_cast<std::size_t>(i) * ws.p + j] =
            kernels::dot<S>(ws.D.col(i), ws.AD.col(j));
    ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::gram)] +=
        phase_counted_mults(Phase::gram, ws.n, ws.p);
}

/// Make the shared Gram matrix symmetric to the last bit (float mode pairs
/// can disagree in the trailing ulps).  Exact halving; not a counted
/// multiplication.  Rational rows are copied unchanged.
template <ScalarField S>
void stage_gram_finalize(BlockCgWorkspace<S>& ws, int i) {
    for (int j = 0; j < ws.p; ++j) {
        if constexpr (scalar_traits<S>::is_exact) {
            ws.gram[static_cast<std::size_t>(i) * ws.p + j] =
                ws.gram_raw[static_cast<std::size_t>(i) * ws.p + j];
        } else {
            ws.gram[static_cast<std::size_t>(i) * ws.p + j] =
                (ws.gram_raw[static_cast<std::size_t>(i) * ws.p + j] +
                 ws.gram_raw[static_cast<std::size_t>(j) * ws.p + i]) /
                2.0;
        }
    }
}

template <ScalarField S>
S shared_pivot_floor(const BlockCgWorkspace<S>& ws) {
    if constexpr (scalar_traits<S>::is_exact) {
        return S{};
    } else {
        S maxabs{};
        for (const S& v : ws.gram)
            maxabs = std::max(maxabs, scalar_traits<S>::abs(v));
        return maxabs * 1e-14;
    }
}

/// Rows 3-4: right-hand side -R_i^T D and the small solve for step row i.
template <ScalarField S>
void stage_alpha(BlockCgWorkspace<S>& ws, DriverControl& ctrl, int i) {
    const int p = ws.p;
    // Nonpositive Gram diagonal with a nonzero direction breaks the SPD
    // assumption on A.
    const S& dm = ws.gram[static_cast<std::size_t>(i) * p + i];
    if (!(dm > S{}) && kernels::norm_sq<S>(ws.D.col(i)) > S{}) {
        ctrl.spd_failed.store(true, std::memory_order_seq_cst);
        return;
    }
    for (int j = 0; j < p; ++j)
        ws.rhs[static_cast<std::size_t>(i) * p + j] =
            -kernels::dot<S>(ws.R.col(i), ws.D.col(j));
    ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::alpha_rhs)] +=
        phase_counted_mults(Phase::alpha_rhs, ws.n, p);

    std::vector<S> lu = ws.gram;
    std::vector<int> perm;
    if (!kernels::lu_factor<S>(lu, p, perm, shared_pivot_floor(ws))) {
        ctrl.rank_failed.store(true, std::memory_order_seq_cst);
        return;
    }
    kernels::lu_solve_vec<S>(lu, p, perm, ws.row_of(ws.rhs, i), ws.row_of(ws.alpha, i));
    ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::alpha_solve)] +=
        phase_counted_mults(Phase::alpha_solve, ws.n, p);
}

/// Rows 5-6.  Recurrence form: r_i += (A D) alpha_i^T, then x_i += D
/// alpha_i^T.  Recomputation form: x_i first, then r_i = A x_i - b.
template <ScalarField S>
void stage_update(BlockCgWorkspace<S>& ws, int i, bool recompute_residual) {
    const int p = ws.p;
    auto alpha_row = ws.row_of(ws.alpha, i);
    if (!recompute_residual) {
        kernels::combine_columns<S>(ws.R.col(i), ws.R.col(i), ws.AD, alpha_row);
        ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::residual_update)] +=
            phase_counted_mults(Phase::residual_update, ws.n, p, false);
        kernels::combine_columns<S>(ws.X.col(i), ws.X.col(i), ws.D, alpha_row);
        ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::estimate_update)] +=
            phase_counted_mults(Phase::estimate_update, ws.n, p);
    } else {
        kernels::combine_columns<S>(ws.X.col(i), ws.X.col(i), ws.D, alpha_row);
        ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::estimate_update)] +=
            phase_counted_mults(Phase::estimate_update, ws.n, p);
        kernels::matvec_col<S>(*ws.A, ws.X.col(i), ws.R.col(i));
        auto r = ws.R.col(i);
        for (int row = 0; row < ws.n; ++row)
            r[static_cast<std::size_t>(row)] -= (*ws.b)[static_cast<std::size_t>(row)];
        ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::residual_update)] +=
            phase_counted_mults(Phase::residual_update, ws.n, p, true);
    }
}

/// Rows 7-8: right-hand side -R_i^T (A D) and the small solve for the
/// conjugation row.
template <ScalarField S>
void stage_beta(BlockCgWorkspace<S>& ws, DriverControl& ctrl, int i) {
    const int p = ws.p;
    for (int j = 0; j < p; ++j)
        ws.rhs[static_cast<std::size_t>(i) * p + j] =
            -kernels::dot<S>(ws.R.col(i), ws.AD.col(j));
    ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::beta_rhs)] +=
        phase_counted_mults(Phase::beta_rhs, ws.n, p);

    std::vector<S> lu = ws.gram;
    std::vector<int> perm;
    if (!kernels::lu_factor<S>(lu, p, perm, shared_pivot_floor(ws))) {
        ctrl.rank_failed.store(true, std::memory_order_seq_cst);
        return;
    }
    kernels::lu_solve_vec<S>(lu, p, perm, ws.row_of(ws.rhs, i), ws.row_of(ws.beta, i));
    ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::beta_solve)] +=
        phase_counted_mults(Phase::beta_solve, ws.n, p);
}

/// Row 9 plus the per-agent stopping norms.
template <ScalarField S>
void stage_direction_and_norms(BlockCgWorkspace<S>& ws, int i) {
    kernels::combine_columns<S>(ws.Dnext.col(i), ws.R.col(i), ws.D, ws.row_of(ws.beta, i));
    ws.mults[static_cast<std::size_t>(i)][static_cast<int>(Phase::direction_update)] +=
        phase_counted_mults(Phase::direction_update, ws.n, ws.p);
    ws.res_norm_sq[static_cast<std::size_t>(i)] = kernels::norm_sq<S>(ws.R.col(i));
    ws.res_norm[static_cast<std::size_t>(i)] =
        std::sqrt(scalar_traits<S>::to_double(ws.res_norm_sq[static_cast<std::size_t>(i)]));
}

// ---------------------------------------------------------------------------
// Coordinator helpers (always executed by exactly one thread).

template <ScalarField S>
bool meets_tolerance(const BlockCgWorkspace<S>& ws, const SolveOptions<S>& opts, int slot) {
    if constexpr (scalar_traits<S>::is_exact) {
        return ws.res_norm_sq[static_cast<std::size_t>(slot)] <= opts.tol * opts.tol;
    } else {
        return ws.res_norm[static_cast<std::size_t>(slot)] <= opts.tol;
    }
}

template <ScalarField S>
S rank_tolerance(const SolveOptions<S>& opts) {
    if constexpr (scalar_traits<S>::is_exact)
        return S{};
    else
        return opts.rank_rel_tol;
}

template <ScalarField S>
double min_active_norm(const BlockCgWorkspace<S>& ws) {
    double m = ws.res_norm.empty() ? 0.0 : ws.res_norm[0];
    for (double v : ws.res_norm)
        m = std::min(m, v);
    return m;
}

template <ScalarField S>
int first_converged_slot(const BlockCgWorkspace<S>& ws, const SolveOptions<S>& opts) {
    for (int j = 0; j < ws.p; ++j)
        if (meets_tolerance(ws, opts, j))
            return j;
    return -1;
}

template <ScalarField S>
std::vector<double> anorm_errors(const BlockCgWorkspace<S>& ws, const SolveOptions<S>& opts) {
    std::vector<double> errs;
    if (opts.x_star == nullptr)
        return errs;
    errs.reserve(static_cast<std::size_t>(ws.p));
    Vec<S> diff(static_cast<std::size_t>(ws.n));
    for (int j = 0; j < ws.p; ++j) {
        auto xj = ws.X.col(j);
        for (int i = 0; i < ws.n; ++i)
            diff[static_cast<std::size_t>(i)] =
                xj[static_cast<std::size_t>(i)] - (*opts.x_star)[static_cast<std::size_t>(i)];
        errs.push_back(a_norm(*ws.A, diff));
    }
    return errs;
}

} // namespace coopcg::detail
