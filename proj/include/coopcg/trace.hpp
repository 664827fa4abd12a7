// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "coopcg/dense.hpp"
#include "coopcg/scalar.hpp"

namespace coopcg {

enum class TerminalStatus {
    Converged,     ///< some agent's residual 2-norm reached the tolerance
    RankCollapse,  ///< the direction block lost column rank
    MaxIterations, ///< iteration cap reached
};

inline const char* to_string(TerminalStatus s) {
    switch (s) {
    case TerminalStatus::Converged:
        return "converged";
    case TerminalStatus::RankCollapse:
        return "rank-collapse";
    case TerminalStatus::MaxIterations:
        return "max-iterations";
    }
    return "?";
}

/// One row of a solve trace.  Norms and errors are reported as doubles in
/// both scalar modes; exactness checks recompute from the final block.
struct IterationRecord {
    int k = 0;
    int active_agents = 0;
    std::vector<int> agents;              ///< original agent ids of the active columns
    std::vector<double> residual_norms;   ///< per active agent, post-update
    double minres = 0.0;
    std::vector<double> anorm_errors;     ///< per agent ||x_j - x*||_A, when the oracle is known
    std::uint64_t mults = 0;              ///< per-worker count under the stage-counting convention
    std::vector<std::uint64_t> mults_per_worker;
    std::uint64_t wall_ns = 0;
    std::vector<std::uint64_t> barrier_wait_ns; ///< per worker; empty in serial runs
};

template <ScalarField S>
struct SolveTrace {
    std::vector<IterationRecord> iterations;
    TerminalStatus status = TerminalStatus::MaxIterations;
    int converged_agent = -1; ///< original id of the first agent that met tol

    DenseBlock<S> final_x;          ///< n x (surviving agents)
    std::vector<int> active_agents; ///< original ids of final_x columns

    std::vector<double> initial_residual_norms;
    double initial_minres = 0.0;
    std::vector<double> final_residual_norms; ///< from a true recomputation of A X - b
    double final_minres = 0.0;

    std::uint64_t setup_mults = 0;  ///< per-worker cost of forming R0 (not an iteration)
    std::uint64_t loop_wall_ns = 0; ///< sum of per-iteration wall times
    int barriers_per_iteration = 0; ///< 0 for serial runs

    /// Verification mode: X_k, R_k and D_k blocks for k = 0..K (entry 0 is
    /// the initial block, entry k+1 the state after iteration k).
    std::vector<DenseBlock<S>> history_x;
    std::vector<DenseBlock<S>> history_r;
    std::vector<DenseBlock<S>> history_d;

    int iteration_count() const { return static_cast<int>(iterations.size()); }
};

/// Knobs shared by all solvers.
template <ScalarField S>
struct SolveOptions {
    S tol{};            ///< stopping threshold on the residual 2-norm
    int max_iters = -1; ///< -1: 2n in float mode, n in rational mode

    /// m: replace the residual recurrence with a true recomputation
    /// r = A x - b on every m-th iteration.  0 disables recomputation,
    /// -1 picks the solver default (50 for the block solvers, 1 for
    /// classical CG and steepest descent).
    int recompute_residual_every = -1;

    double rank_rel_tol = 1e-10;    ///< numerical-rank pivot tolerance (0 in rational mode)
    bool keep_history = false;      ///< retain all R_k, D_k blocks for invariant checks
    const Vec<S>* x_star = nullptr; ///< oracle solution; enables A-norm error recording
};

} // namespace coopcg
