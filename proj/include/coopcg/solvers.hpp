// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <utility>

#include "coopcg/block_cg.hpp"
#include "coopcg/dense.hpp"
#include "coopcg/dense_ops.hpp"
#include "coopcg/errors.hpp"
#include "coopcg/trace.hpp"

namespace coopcg {

namespace detail {

template <ScalarField S>
int resolve_max_iters(const SolveOptions<S>& opts, int n) {
    if (opts.max_iters >= 0)
        return opts.max_iters;
    return scalar_traits<S>::is_exact ? n : 2 * n;
}

/// -1 in the options means "solver default": the block solvers use the
/// recurrence with a true recomputation every 50 iterations; classical CG
/// and steepest descent recompute at every step.
template <ScalarField S>
int resolve_recompute(const SolveOptions<S>& opts, int solver_default) {
    return opts.recompute_residual_every >= 0 ? opts.recompute_residual_every : solver_default;
}

inline bool recompute_now(int k, int every) {
    return every > 0 && (k + 1) % every == 0;
}

template <ScalarField S>
void record_initial_state(BlockCgWorkspace<S>& ws, SolveTrace<S>& trace) {
    trace.initial_residual_norms = ws.res_norm;
    trace.initial_minres = min_active_norm(ws);
    trace.setup_mults = static_cast<std::uint64_t>(ws.n) * static_cast<std::uint64_t>(ws.n);
}

template <ScalarField S>
void push_history(BlockCgWorkspace<S>& ws, SolveTrace<S>& trace, const SolveOptions<S>& opts,
                  const DenseBlock<S>& d_block) {
    if (!opts.keep_history)
        return;
    trace.history_x.push_back(ws.X);
    trace.history_r.push_back(ws.R);
    trace.history_d.push_back(d_block);
}

template <ScalarField S>
void setup_coordinator(BlockCgWorkspace<S>& ws, DriverControl& ctrl, SolveTrace<S>& trace,
                       const SolveOptions<S>& opts, bool allow_restriction) {
    if (ctrl.any_failure()) {
        ctrl.stop = true;
        return;
    }
    record_initial_state(ws, trace);

    const auto rank0 = numerical_rank(ws.D, rank_tolerance<S>(opts));

    // Degenerate starting block: the restricting solver keeps a full-rank
    // column subset before entering the loop; the plain one refuses.
    if (allow_restriction && rank0.rank > 0 && rank0.rank < ws.p) {
        std::vector<int> keep(rank0.columns.begin(), rank0.columns.end());
        std::sort(keep.begin(), keep.end());
        ws.restrict_to(keep);
        for (int j = 0; j < ws.p; ++j) {
            ws.res_norm_sq[static_cast<std::size_t>(j)] = kernels::norm_sq<S>(ws.R.col(j));
            ws.res_norm[static_cast<std::size_t>(j)] = std::sqrt(
                scalar_traits<S>::to_double(ws.res_norm_sq[static_cast<std::size_t>(j)]));
        }
    }

    const int slot = first_converged_slot(ws, opts);
    if (slot >= 0) {
        ctrl.status = TerminalStatus::Converged;
        ctrl.converged_agent = ws.agent_ids[static_cast<std::size_t>(slot)];
        ctrl.stop = true;
    } else if (!allow_restriction && rank0.rank < ws.p) {
        ctrl.status = TerminalStatus::RankCollapse;
        ctrl.stop = true;
    } else if (allow_restriction && rank0.rank == 0) {
        // A rank-zero start with residual above tolerance has no exact-
        // arithmetic counterpart.
        ctrl.pending_throw = std::make_exception_ptr(
            NumericalBreakdownError("every starting direction is numerically zero"));
        ctrl.stop = true;
    }

    push_history(ws, trace, opts, ws.D);
    if (!ctrl.stop && ctrl.max_iters == 0) {
        ctrl.status = TerminalStatus::MaxIterations;
        ctrl.stop = true;
    }
    ctrl.iter_start = Clock::now();
}

template <ScalarField S>
void end_of_iteration(BlockCgWorkspace<S>& ws, DriverControl& ctrl, SolveTrace<S>& trace,
                      const SolveOptions<S>& opts, bool allow_restriction) {
    const std::uint64_t wall = ns_since(ctrl.iter_start);

    if (ctrl.worker_failed.load(std::memory_order_seq_cst)) {
        ctrl.stop = true;
        return;
    }
    if (ctrl.spd_failed.load(std::memory_order_seq_cst)) {
        ctrl.pending_throw = std::make_exception_ptr(SpdViolationError(
            "nonpositive direction energy d^T A d at iteration " + std::to_string(ctrl.k)));
        ctrl.stop = true;
        return;
    }
    if (ctrl.rank_failed.load(std::memory_order_seq_cst)) {
        // The shared small system lost its pivot before any update was
        // applied, so the estimates still hold the previous iterate.
        ctrl.status = TerminalStatus::RankCollapse;
        ctrl.stop = true;
        return;
    }

    IterationRecord rec;
    rec.k = ctrl.k;
    rec.active_agents = ws.p;
    rec.agents = ws.agent_ids;
    rec.residual_norms = ws.res_norm;
    rec.minres = min_active_norm(ws);
    rec.anorm_errors = anorm_errors(ws, opts);
    rec.wall_ns = wall;
    rec.mults_per_worker.reserve(static_cast<std::size_t>(ws.p));
    for (int i = 0; i < ws.p; ++i) {
        std::uint64_t total = 0;
        for (int ph = 0; ph < kPhaseCount; ++ph)
            total += ws.mults[static_cast<std::size_t>(i)][ph];
        rec.mults_per_worker.push_back(total);
        ws.mults[static_cast<std::size_t>(i)] = {};
    }
    rec.mults = rec.mults_per_worker.empty() ? 0 : rec.mults_per_worker.front();
    rec.barrier_wait_ns = ws.barrier_wait_ns;
    std::fill(ws.barrier_wait_ns.begin(), ws.barrier_wait_ns.end(), 0);
    trace.iterations.push_back(std::move(rec));
    trace.loop_wall_ns += wall;
    push_history(ws, trace, opts, ws.Dnext);

    const int slot = first_converged_slot(ws, opts);
    if (slot >= 0) {
        ctrl.status = TerminalStatus::Converged;
        ctrl.converged_agent = ws.agent_ids[static_cast<std::size_t>(slot)];
        ctrl.stop = true;
        return;
    }

    const auto rr = numerical_rank(ws.Dnext, rank_tolerance<S>(opts));
    if (rr.rank < ws.p) {
        if (!allow_restriction) {
            ctrl.status = TerminalStatus::RankCollapse;
            ctrl.stop = true;
            return;
        }
        const auto rsel = numerical_rank(ws.R, rank_tolerance<S>(opts));
        const int pnext = std::min(rr.rank, static_cast<int>(rsel.columns.size()));
        if (pnext == 0) {
            ctrl.pending_throw = std::make_exception_ptr(NumericalBreakdownError(
                "all agents degenerate at iteration " + std::to_string(ctrl.k) +
                " with residual above tolerance"));
            ctrl.stop = true;
            return;
        }
        std::vector<int> keep(rsel.columns.begin(), rsel.columns.begin() + pnext);
        std::sort(keep.begin(), keep.end());
        ws.restrict_to(keep);
    }

    if (ctrl.k + 1 >= ctrl.max_iters) {
        ctrl.status = TerminalStatus::MaxIterations;
        ctrl.stop = true;
        return;
    }
    std::swap(ws.D, ws.Dnext);
    ++ctrl.k;
    ctrl.iter_start = Clock::now();
}

/// True residual recomputation at termination plus final-state copy-out.
template <ScalarField S>
void finalize_trace(BlockCgWorkspace<S>& ws, DriverControl& ctrl, SolveTrace<S>& trace) {
    trace.status = ctrl.status;
    trace.converged_agent = ctrl.converged_agent;
    trace.final_x = ws.X;
    trace.active_agents = ws.agent_ids;
    if (ctrl.worker_failed.load(std::memory_order_seq_cst))
        return;
    Vec<S> scratch(static_cast<std::size_t>(ws.n));
    trace.final_residual_norms.clear();
    for (int j = 0; j < ws.p; ++j) {
        kernels::matvec_col<S>(*ws.A, ws.X.col(j),
                               std::span<S>(scratch.data(), scratch.size()));
        for (int i = 0; i < ws.n; ++i)
            scratch[static_cast<std::size_t>(i)] -= (*ws.b)[static_cast<std::size_t>(i)];
        trace.final_residual_norms.push_back(
            kernels::norm2<S>(std::span<const S>(scratch.data(), scratch.size())));
    }
    trace.final_minres = trace.final_residual_norms.empty()
                             ? 0.0
                             : *std::min_element(trace.final_residual_norms.begin(),
                                                 trace.final_residual_norms.end());
}

/// Runs every stage for every slot in a plain loop; barriers are no-ops.
template <ScalarField S>
class SerialExecutor {
public:
    SerialExecutor(BlockCgWorkspace<S>& ws, DriverControl& ctrl) : ws_(&ws), ctrl_(&ctrl) {}

    template <class F>
    void phase(F&& f) {
        if (ctrl_->any_failure())
            return;
        for (int i = 0; i < ws_->p; ++i) {
            try {
                f(i);
            } catch (...) {
                std::lock_guard<std::mutex> g(ctrl_->error_mutex);
                if (!ctrl_->worker_error)
                    ctrl_->worker_error = std::current_exception();
                ctrl_->worker_failed.store(true, std::memory_order_seq_cst);
                return;
            }
        }
    }

    void barrier() {}

    template <class F>
    void coordinator(F&& f) {
        try {
            f();
        } catch (...) {
            std::lock_guard<std::mutex> g(ctrl_->error_mutex);
            if (!ctrl_->worker_error)
                ctrl_->worker_error = std::current_exception();
            ctrl_->worker_failed.store(true, std::memory_order_seq_cst);
            ctrl_->stop = true;
        }
    }

private:
    BlockCgWorkspace<S>* ws_;
    DriverControl* ctrl_;
};

/// The iteration loop shared by the serial solvers and the parallel
/// runtime.  Under the parallel executor this function body is executed by
/// every worker thread concurrently; all shared-state mutation happens in
/// coordinator sections.
template <ScalarField S, class Exec>
void drive(BlockCgWorkspace<S>& ws, DriverControl& ctrl, SolveTrace<S>& trace,
           const SolveOptions<S>& opts, int recompute_every, bool allow_restriction,
           Exec& exec) {
    exec.phase([&](int i) { stage_setup(ws, i); });
    exec.coordinator([&] { setup_coordinator(ws, ctrl, trace, opts, allow_restriction); });
    while (!ctrl.stop) {
        exec.phase([&](int i) { stage_matvec(ws, i); });
        exec.barrier();
        exec.phase([&](int i) { stage_gram_row(ws, i); });
        exec.barrier();
        exec.phase([&](int i) { stage_gram_finalize(ws, i); });
        exec.barrier();
        exec.phase([&](int i) { stage_alpha(ws, ctrl, i); });
        exec.barrier();
        const bool recompute = recompute_now(ctrl.k, recompute_every);
        exec.phase([&](int i) { stage_update(ws, i, recompute); });
        exec.barrier();
        exec.phase([&](int i) { stage_beta(ws, ctrl, i); });
        exec.barrier();
        exec.phase([&](int i) { stage_direction_and_norms(ws, i); });
        exec.coordinator([&] { end_of_iteration(ws, ctrl, trace, opts, allow_restriction); });
    }
    exec.coordinator([&] { finalize_trace(ws, ctrl, trace); });
}

[[noreturn]] inline void rethrow_worker_error(DriverControl& ctrl) {
    try {
        std::rethrow_exception(ctrl.worker_error);
    } catch (const std::exception& e) {
        throw Error("worker failed at iteration " + std::to_string(ctrl.k) + ": " + e.what());
    }
}

inline void rethrow_pending(DriverControl& ctrl) {
    if (ctrl.worker_error)
        rethrow_worker_error(ctrl);
    if (ctrl.pending_throw)
        std::rethrow_exception(ctrl.pending_throw);
}

template <ScalarField S>
void check_block_inputs(const SpdMatrix<S>& A, const Vec<S>& b, const DenseBlock<S>& X0) {
    if (static_cast<int>(b.size()) != A.dim() || X0.rows() != A.dim())
        throw DimensionError("solver: operand shapes do not match the system matrix");
    if (X0.cols() < 1 || X0.cols() >= A.dim())
        throw DimensionError("solver: need 1 <= p < n starting columns");
}

template <ScalarField S>
SolveTrace<S> run_serial_block(const SpdMatrix<S>& A, const Vec<S>& b, const DenseBlock<S>& X0,
                               const SolveOptions<S>& opts, bool allow_restriction) {
    check_block_inputs(A, b, X0);
    BlockCgWorkspace<S> ws;
    ws.init(A, b, X0);
    DriverControl ctrl;
    ctrl.max_iters = resolve_max_iters(opts, A.dim());
    SolveTrace<S> trace;
    SerialExecutor<S> exec(ws, ctrl);
    drive(ws, ctrl, trace, opts, resolve_recompute(opts, 50), allow_restriction, exec);
    rethrow_pending(ctrl);
    return trace;
}

} // namespace detail

/// Cooperative block CG: p agents sharing step matrices solved against the
/// common Gram system.  Stops on the first agent whose residual 2-norm
/// meets the tolerance, on rank collapse of the direction block, or at the
/// iteration cap.
template <ScalarField S>
SolveTrace<S> ccg_solve(const SpdMatrix<S>& A, const Vec<S>& b, const DenseBlock<S>& X0,
                        const SolveOptions<S>& opts = {}) {
    return detail::run_serial_block(A, b, X0, opts, /*allow_restriction=*/false);
}

/// Rank-degeneracy-safe variant: when the direction block loses rank it
/// keeps a column subset chosen by pivoted orthogonalization of the
/// residual block (largest pivots first) and carries on with fewer agents.
template <ScalarField S>
SolveTrace<S> mccg_solve(const SpdMatrix<S>& A, const Vec<S>& b, const DenseBlock<S>& X0,
                         const SolveOptions<S>& opts = {}) {
    return detail::run_serial_block(A, b, X0, opts, /*allow_restriction=*/true);
}

/// Step matrix for the descent stage: alpha = -(R^T D) (D^T A D)^{-1},
/// row i solved against the shared Gram matrix.
template <ScalarField S>
DenseBlock<S> compute_alpha(const DenseBlock<S>& R, const DenseBlock<S>& D,
                            const DenseBlock<S>& AD, const SmallSpd<S>& M) {
    (void)AD; // same session data that produced M; kept for call-site clarity
    const int p = D.cols();
    if (M.dim() != p || R.cols() != p || R.rows() != D.rows())
        throw DimensionError("compute_alpha: operand shapes do not match");
    DenseBlock<S> rhs(p, p); // column i = -(D^T R e_i)
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            rhs(j, i) = -kernels::dot<S>(R.col(i), D.col(j));
    const DenseBlock<S> solved = solve_small(M, rhs);
    DenseBlock<S> alpha(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            alpha(i, j) = solved(j, i);
    return alpha;
}

/// Conjugation step matrix: beta = -(R_next^T A D) (D^T A D)^{-1}, making
/// the next direction block A-orthogonal to the current one.
template <ScalarField S>
DenseBlock<S> compute_beta(const DenseBlock<S>& R_next, const DenseBlock<S>& AD,
                           const SmallSpd<S>& M) {
    const int p = AD.cols();
    if (M.dim() != p || R_next.cols() != p || R_next.rows() != AD.rows())
        throw DimensionError("compute_beta: operand shapes do not match");
    DenseBlock<S> rhs(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            rhs(j, i) = -kernels::dot<S>(R_next.col(i), AD.col(j));
    const DenseBlock<S> solved = solve_small(M, rhs);
    DenseBlock<S> beta(p, p);
    for (int i = 0; i < p; ++i)
        for (int j = 0; j < p; ++j)
            beta(i, j) = solved(j, i);
    return beta;
}

/// Classical conjugate gradient, written as the scalar loop.  Default
/// residual policy recomputes r = A x - b at every step.  The p = 1 block
/// solver configured the same way reproduces these iterates bit for bit.
template <ScalarField S>
SolveTrace<S> cg_solve(const SpdMatrix<S>& A, const Vec<S>& b, const Vec<S>& x0,
                       const SolveOptions<S>& opts = {}) {
    const int n = A.dim();
    if (static_cast<int>(b.size()) != n || static_cast<int>(x0.size()) != n)
        throw DimensionError("cg_solve: operand shapes do not match");
    const int max_iters = detail::resolve_max_iters(opts, n);
    const int recompute_every = detail::resolve_recompute(opts, 1);

    SolveTrace<S> trace;
    DenseBlock<S> x = DenseBlock<S>::from_column(x0);
    DenseBlock<S> r(n, 1), d(n, 1), ad(n, 1);

    kernels::matvec_col<S>(A, x.col(0), r.col(0));
    for (int i = 0; i < n; ++i)
        r(i, 0) -= b[static_cast<std::size_t>(i)];
    for (int i = 0; i < n; ++i)
        d(i, 0) = r(i, 0);
    S rsq = kernels::norm_sq<S>(r.col(0));
    double rnorm = std::sqrt(scalar_traits<S>::to_double(rsq));
    trace.initial_residual_norms = {rnorm};
    trace.initial_minres = rnorm;
    trace.setup_mults = static_cast<std::uint64_t>(n) * n;
    if (opts.keep_history) {
        trace.history_x.push_back(x);
        trace.history_r.push_back(r);
        trace.history_d.push_back(d);
    }

    auto tol_met = [&]() {
        if constexpr (scalar_traits<S>::is_exact)
            return rsq <= opts.tol * opts.tol;
        else
            return rnorm <= opts.tol;
    };

    trace.status = TerminalStatus::MaxIterations;
    bool stop = false;
    if (tol_met()) {
        trace.status = TerminalStatus::Converged;
        trace.converged_agent = 0;
        stop = true;
    } else if (kernels::norm_sq<S>(d.col(0)) == S{}) {
        trace.status = TerminalStatus::RankCollapse;
        stop = true;
    } else if (max_iters == 0) {
        stop = true;
    }

    const auto un = static_cast<std::uint64_t>(n);
    for (int k = 0; !stop; ++k) {
        const auto t0 = detail::Clock::now();
        std::uint64_t mults = 0;

        kernels::matvec_col<S>(A, d.col(0), ad.col(0));
        mults += un * un;
        const S energy = kernels::dot<S>(d.col(0), ad.col(0)); // d^T A d
        mults += un;
        if (!(energy > S{})) {
            if (kernels::norm_sq<S>(d.col(0)) > S{})
                throw SpdViolationError("cg_solve: nonpositive direction energy at iteration " +
                                        std::to_string(k));
            trace.status = TerminalStatus::RankCollapse;
            break;
        }
        const S g = -kernels::dot<S>(r.col(0), d.col(0));
        mults += un;
        const S alpha = g / energy;
        mults += 1;
        const S alpha_arr[1] = {alpha};
        const std::span<const S> alpha_row(alpha_arr, 1);
        if (!detail::recompute_now(k, recompute_every)) {
            kernels::combine_columns<S>(r.col(0), r.col(0), ad, alpha_row);
            mults += un;
            kernels::combine_columns<S>(x.col(0), x.col(0), d, alpha_row);
            mults += un;
        } else {
            kernels::combine_columns<S>(x.col(0), x.col(0), d, alpha_row);
            mults += un;
            kernels::matvec_col<S>(A, x.col(0), r.col(0));
            for (int i = 0; i < n; ++i)
                r(i, 0) -= b[static_cast<std::size_t>(i)];
            mults += un * un;
        }
        const S h = -kernels::dot<S>(r.col(0), ad.col(0));
        mults += un;
        const S beta = h / energy;
        mults += 1;
        const S beta_arr[1] = {beta};
        DenseBlock<S> dnext(n, 1);
        kernels::combine_columns<S>(dnext.col(0), r.col(0), d, std::span<const S>(beta_arr, 1));
        mults += un;
        rsq = kernels::norm_sq<S>(r.col(0));
        rnorm = std::sqrt(scalar_traits<S>::to_double(rsq));

        IterationRecord rec;
        rec.k = k;
        rec.active_agents = 1;
        rec.agents = {0};
        rec.residual_norms = {rnorm};
        rec.minres = rnorm;
        if (opts.x_star != nullptr) {
            Vec<S> diff(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                diff[static_cast<std::size_t>(i)] = x(i, 0) - (*opts.x_star)[static_cast<std::size_t>(i)];
            rec.anorm_errors = {a_norm(A, diff)};
        }
        rec.mults = mults;
        rec.mults_per_worker = {mults};
        rec.wall_ns = detail::ns_since(t0);
        trace.iterations.push_back(std::move(rec));
        trace.loop_wall_ns += trace.iterations.back().wall_ns;
        if (opts.keep_history) {
            trace.history_x.push_back(x);
            trace.history_r.push_back(r);
            trace.history_d.push_back(dnext);
        }

        if (tol_met()) {
            trace.status = TerminalStatus::Converged;
            trace.converged_agent = 0;
            stop = true;
        } else if (kernels::norm_sq<S>(dnext.col(0)) == S{}) {
            trace.status = TerminalStatus::RankCollapse;
            stop = true;
        } else if (k + 1 >= max_iters) {
            trace.status = TerminalStatus::MaxIterations;
            stop = true;
        }
        std::swap(d, dnext);
    }

    trace.final_x = x;
    trace.active_agents = {0};
    Vec<S> scratch(static_cast<std::size_t>(n));
    kernels::matvec_col<S>(A, x.col(0), std::span<S>(scratch.data(), scratch.size()));
    for (int i = 0; i < n; ++i)
        scratch[static_cast<std::size_t>(i)] -= b[static_cast<std::size_t>(i)];
    trace.final_residual_norms = {
        kernels::norm2<S>(std::span<const S>(scratch.data(), scratch.size()))};
    trace.final_minres = trace.final_residual_norms[0];
    return trace;
}

/// Steepest descent with the exact line-search step r^T r / r^T A r.
/// Baseline for the convergence-rate comparisons.
template <ScalarField S>
SolveTrace<S> steepest_descent_solve(const SpdMatrix<S>& A, const Vec<S>& b, const Vec<S>& x0,
                                     const SolveOptions<S>& opts = {}) {
    const int n = A.dim();
    if (static_cast<int>(b.size()) != n || static_cast<int>(x0.size()) != n)
        throw DimensionError("steepest_descent_solve: operand shapes do not match");
    const int max_iters = detail::resolve_max_iters(opts, n);
    const int recompute_every = detail::resolve_recompute(opts, 1);

    SolveTrace<S> trace;
    DenseBlock<S> x = DenseBlock<S>::from_column(x0);
    DenseBlock<S> r(n, 1), ar(n, 1);
    kernels::matvec_col<S>(A, x.col(0), r.col(0));
    for (int i = 0; i < n; ++i)
        r(i, 0) -= b[static_cast<std::size_t>(i)];
    S rsq = kernels::norm_sq<S>(r.col(0));
    double rnorm = std::sqrt(scalar_traits<S>::to_double(rsq));
    trace.initial_residual_norms = {rnorm};
    trace.initial_minres = rnorm;
    trace.setup_mults = static_cast<std::uint64_t>(n) * n;

    auto tol_met = [&]() {
        if constexpr (scalar_traits<S>::is_exact)
            return rsq <= opts.tol * opts.tol;
        else
            return rnorm <= opts.tol;
    };

    trace.status = TerminalStatus::MaxIterations;
    bool stop = tol_met();
    if (stop) {
        trace.status = TerminalStatus::Converged;
        trace.converged_agent = 0;
    } else if (max_iters == 0) {
        stop = true;
    }

    const auto un = static_cast<std::uint64_t>(n);
    for (int k = 0; !stop; ++k) {
        const auto t0 = detail::Clock::now();
        std::uint64_t mults = 0;
        kernels::matvec_col<S>(A, r.col(0), ar.col(0));
        mults += un * un;
        const S rr = kernels::dot<S>(r.col(0), r.col(0));
        mults += un;
        const S rar = kernels::dot<S>(r.col(0), ar.col(0));
        mults += un;
        if (!(rar > S{})) {
            if (rr > S{})
                throw SpdViolationError(
                    "steepest_descent_solve: nonpositive gradient energy at iteration " +
                    std::to_string(k));
            trace.status = TerminalStatus::Converged;
            trace.converged_agent = 0;
            break;
        }
        const S step = rr / rar;
        mults += 1;
        const S coeff_arr[1] = {-step};
        if (!detail::recompute_now(k, recompute_every)) {
            kernels::combine_columns<S>(x.col(0), x.col(0), r, std::span<const S>(coeff_arr, 1));
            mults += un;
            kernels::combine_columns<S>(r.col(0), r.col(0), ar, std::span<const S>(coeff_arr, 1));
            mults += un;
        } else {
            kernels::combine_columns<S>(x.col(0), x.col(0), r, std::span<const S>(coeff_arr, 1));
            mults += un;
            kernels::matvec_col<S>(A, x.col(0), r.col(0));
            for (int i = 0; i < n; ++i)
                r(i, 0) -= b[static_cast<std::size_t>(i)];
            mults += un * un;
        }
        rsq = kernels::norm_sq<S>(r.col(0));
        rnorm = std::sqrt(scalar_traits<S>::to_double(rsq));

        IterationRecord rec;
        rec.k = k;
        rec.active_agents = 1;
        rec.agents = {0};
        rec.residual_norms = {rnorm};
        rec.minres = rnorm;
        if (opts.x_star != nullptr) {
            Vec<S> diff(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i)
                diff[static_cast<std::size_t>(i)] = x(i, 0) - (*opts.x_star)[static_cast<std::size_t>(i)];
            rec.anorm_errors = {a_norm(A, diff)};
        }
        rec.mults = mults;
        rec.mults_per_worker = {mults};
        rec.wall_ns = detail::ns_since(t0);
        trace.iterations.push_back(std::move(rec));
        trace.loop_wall_ns += trace.iterations.back().wall_ns;

        if (tol_met()) {
            trace.status = TerminalStatus::Converged;
            trace.converged_agent = 0;
            stop = true;
        } else if (k + 1 >= max_iters) {
            stop = true;
        }
    }

    trace.final_x = x;
    trace.active_agents = {0};
    Vec<S> scratch(static_cast<std::size_t>(n));
    kernels::matvec_col<S>(A, x.col(0), std::span<S>(scratch.data(), scratch.size()));
    for (int i = 0; i < n; ++i)
        scratch[static_cast<std::size_t>(i)] -= b[static_cast<std::size_t>(i)];
    trace.final_residual_norms = {
        kernels::norm2<S>(std::span<const S>(scratch.data(), scratch.size()))};
    trace.final_minres = trace.final_residual_norms[0];
    return trace;
}

} // namespace coopcg
