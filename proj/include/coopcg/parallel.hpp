// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <omp.h>

#include "coopcg/solvers.hpp"
#include "coopcg/workplan.hpp"

// Barrier-synchronized execution of the cooperative CG iteration: one
// OpenMP thread per agent, each running the same staged loop as the serial
// solver on its own slot.  Shared buffers have disjoint per-worker write
// regions (worker i owns column i and step row i), every cross-worker read
// sits behind a barrier, and each scalar is computed by exactly one worker
// with a fixed summation order.  The parallel run therefore reproduces the
// serial ccg_solve bit for bit, in float mode as well as in rational mode.

namespace coopcg {

namespace detail {

template <ScalarField S>
class OmpExecutor {
public:
    OmpExecutor(BlockCgWorkspace<S>& ws, DriverControl& ctrl, int tid)
        : ws_(&ws), ctrl_(&ctrl), tid_(tid) {}

    template <class F>
    void phase(F&& f) {
        if (!ctrl_->any_failure()) {
            try {
                f(tid_);
            } catch (...) {
                std::lock_guard<std::mutex> g(ctrl_->error_mutex);
                if (!ctrl_->worker_error)
                    ctrl_->worker_error = std::current_exception();
                ctrl_->worker_failed.store(true, std::memory_order_seq_cst);
            }
        }
    }

    void barrier() {
        const auto t0 = Clock::now();
#pragma omp barrier
        ws_->barrier_wait_ns[static_cast<std::size_t>(tid_)] += ns_since(t0);
    }

    template <class F>
    void coordinator(F&& f) {
        barrier(); // workers' stage writes must be visible before the step below
#pragma omp single
        {
            try {
                f();
            } catch (...) {
                std::lock_guard<std::mutex> g(ctrl_->error_mutex);
                if (!ctrl_->worker_error)
                    ctrl_->worker_error = std::current_exception();
                ctrl_->worker_failed.store(true, std::memory_order_seq_cst);
                ctrl_->stop = true;
            }
        } // implied barrier: everyone sees the coordinator's decisions
    }

private:
    BlockCgWorkspace<S>* ws_;
    DriverControl* ctrl_;
    int tid_;
};

} // namespace detail

/// Cooperative CG executed by `workers` threads (one per agent).  Produces
/// per-iteration values identical to the serial ccg_solve; the trace
/// additionally carries per-worker multiplication counts and barrier waits.
template <ScalarField S>
SolveTrace<S> parallel_ccg(const SpdMatrix<S>& A, const Vec<S>& b, const DenseBlock<S>& X0,
                           const SolveOptions<S>& opts = {}, int workers = -1) {
    detail::check_block_inputs(A, b, X0);
    const int p = X0.cols();
    if (workers < 0)
        workers = p;
    if (workers != p)
        throw DimensionError("parallel_ccg: worker count must equal the agent count");

    detail::BlockCgWorkspace<S> ws;
    ws.init(A, b, X0);
    detail::DriverControl ctrl;
    ctrl.max_iters = detail::resolve_max_iters(opts, A.dim());
    SolveTrace<S> trace;
    const int recompute_every = detail::resolve_recompute(opts, 50);

    bool team_ok = true;
    omp_set_dynamic(0);
#pragma omp parallel num_threads(p) default(shared)
    {
        if (omp_get_num_threads() != p) {
#pragma omp single
            team_ok = false;
        } else {
            detail::OmpExecutor<S> exec(ws, ctrl, omp_get_thread_num());
            detail::drive(ws, ctrl, trace, opts, recompute_every,
                          /*allow_restriction=*/false, exec);
        }
    }
    if (!team_ok)
        throw Error("parallel_ccg: could not start " + std::to_string(p) + " workers");
    detail::rethrow_pending(ctrl);
    trace.barriers_per_iteration = WorkPlan::standard(p).barriers_per_iteration();
    return trace;
}

} // namespace coopcg
