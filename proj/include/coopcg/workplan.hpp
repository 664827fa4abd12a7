// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

namespace coopcg {

/// The nine counted stages of one block-CG iteration, in execution order.
/// Worker i owns column i of D, R, X and row i of the step matrices.
enum class Phase : int {
    matvec = 0,           // A d_i                       n^2
    gram = 1,             // row i of D^T (A D)          n p
    alpha_rhs = 2,        // row i of -R^T D             n p
    alpha_solve = 3,      // M alpha_i^T = rhs_i         p(p+1)(2p+1)/6
    residual_update = 4,  // r_i += (A D) alpha_i^T      n p   (n^2 when recomputed)
    estimate_update = 5,  // x_i += D alpha_i^T          n p
    beta_rhs = 6,         // row i of -R^T (A D)         n p
    beta_solve = 7,       // M beta_i^T = rhs_i          p(p+1)(2p+1)/6
    direction_update = 8, // d_i' = r_i + D beta_i^T     n p
};

inline constexpr int kPhaseCount = 9;

/// Counting convention: an n-term dot product counts n multiplications, a
/// p x p triangular solve via LU counts p(p+1)(2p+1)/6 per right-hand
/// side, additions are not counted.
inline std::uint64_t lu_solve_counted_mults(int p) {
    const auto q = static_cast<std::uint64_t>(p);
    return q * (q + 1) * (2 * q + 1) / 6;
}

/// Multiplications one worker performs per counted stage.  The residual
/// stage costs n*p with the recurrence form and n^2 when the residual is
/// recomputed from the current estimate.
inline std::uint64_t phase_counted_mults(Phase ph, int n, int p, bool recompute_residual = false) {
    const auto un = static_cast<std::uint64_t>(n);
    const auto up = static_cast<std::uint64_t>(p);
    switch (ph) {
    case Phase::matvec:
        return un * un;
    case Phase::residual_update:
        return recompute_residual ? un * un : un * up;
    case Phase::alpha_solve:
    case Phase::beta_solve:
        return lu_solve_counted_mults(p);
    default:
        return un * up;
    }
}

/// Per-worker multiplications for one full recurrence-form iteration:
/// n^2 + 6np + p(p+1)(2p+1)/3.
inline std::uint64_t count_iteration_mults(int n, int p) {
    const auto un = static_cast<std::uint64_t>(n);
    const auto up = static_cast<std::uint64_t>(p);
    return un * un + 6 * un * up + up * (up + 1) * (2 * up + 1) / 3;
}

struct WorkPlanEntry {
    Phase phase;
    const char* slice; ///< the worker-local output slice of the stage
    bool barrier_after;
};

/// Static description of the barrier-synchronized iteration.  Mandatory
/// barriers: after the matvec stage (the Gram stage reads every worker's
/// column of A D) and after the Gram stage (the small solves read the full
/// matrix).  The remaining barriers are conservative stage separators; the
/// runtime additionally synchronizes around the per-iteration coordinator
/// step.
struct WorkPlan {
    int workers = 0;
    std::vector<WorkPlanEntry> phases;

    static WorkPlan standard(int p) {
        WorkPlan plan;
        plan.workers = p;
        plan.phases = {
            {Phase::matvec, "column i of AD", true}, // mandatory
            {Phase::gram, "row i of D^T AD", true},  // mandatory
            {Phase::alpha_rhs, "row i of -R^T D", false},
            {Phase::alpha_solve, "row i of alpha", true},
            {Phase::residual_update, "column i of R", false},
            {Phase::estimate_update, "column i of X", true},
            {Phase::beta_rhs, "row i of -R^T AD", false},
            {Phase::beta_solve, "row i of beta", true},
            {Phase::direction_update, "column i of D'", false},
        };
        return plan;
    }

    /// Barriers one iteration executes: the flagged stage separators, the
    /// Gram symmetrization sync, and the two coordinator syncs.
    int barriers_per_iteration() const {
        int b = 0;
        for (const auto& e : phases)
            if (e.barrier_after)
                ++b;
        return b + 3;
    }
};

} // namespace coopcg
