// SPDX-License-Identifier: Apache-2.0

// Exact-arithmetic verification: finite termination, mutual orthogonality,
// subspace dimensions, optimality, and the rank-degeneracy handling, all
// over rationals where "zero" means zero.

#include <doctest.h>

#include <sstream>

#include "coopcg/dense_ops.hpp"
#include "coopcg/matrix_market.hpp"
#include "coopcg/problem.hpp"
#include "coopcg/solvers.hpp"
#include "oracles.hpp"

using namespace coopcg;

namespace {

ProblemInstance<Rational> exact_problem(int n, int p, std::uint64_t seed, bool oracle = false) {
    ProblemSpec spec;
    spec.n = n;
    spec.p = p;
    spec.seed = seed;
    spec.mode = Mode::rational;
    return make_problem<Rational>(spec, oracle);
}

/// Residual block A X - b recomputed independently of the solver.
DenseBlock<Rational> true_residuals(const SpdMatrix<Rational>& A, const Vec<Rational>& b,
                                    const DenseBlock<Rational>& X) {
    auto R = matvec_block(A, X);
    for (int j = 0; j < R.cols(); ++j)
        for (int i = 0; i < R.rows(); ++i)
            R(i, j) -= b[static_cast<std::size_t>(i)];
    return R;
}

bool exactly_zero(const DenseBlock<Rational>& B) {
    for (int j = 0; j < B.cols(); ++j)
        for (int i = 0; i < B.rows(); ++i)
            if (sgn(B(i, j)) != 0)
                return false;
    return true;
}

} // namespace

TEST_CASE("rational cg terminates with an exactly zero residual in <= n steps") {
    auto inst = exact_problem(8, 1, 42);
    SolveOptions<Rational> opts; // tol = 0: exact zero required
    auto trace = cg_solve(inst.A, inst.b, inst.X0.column_copy(0), opts);
    CHECK(trace.status == TerminalStatus::Converged);
    CHECK(trace.iteration_count() <= 8);
    CHECK(exactly_zero(true_residuals(inst.A, inst.b, trace.final_x)));
}

TEST_CASE("rational ccg: every agent hits exact zero after exactly n/p iterations") {
    for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
        auto inst = exact_problem(6, 3, seed);
        SolveOptions<Rational> opts;
        auto trace = ccg_solve(inst.A, inst.b, inst.X0, opts);
        CHECK(trace.status == TerminalStatus::Converged);
        CHECK(trace.iteration_count() == 2); // 6 / 3
        CHECK(exactly_zero(true_residuals(inst.A, inst.b, trace.final_x)));
    }
}

TEST_CASE("rational ccg on the identity: one iteration for every agent") {
    const int n = 6;
    std::vector<Rational> eye(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        eye[static_cast<std::size_t>(i) * n + i] = 1;
    SpdMatrix<Rational> A(n, std::move(eye));
    auto [b, x0] = random_rhs_and_starts<Rational>(n, 3, 4);
    SolveOptions<Rational> opts;
    auto trace = ccg_solve(A, b, x0, opts);
    CHECK(trace.status == TerminalStatus::Converged);
    CHECK(trace.iteration_count() == 1);
    CHECK(exactly_zero(true_residuals(A, b, trace.final_x)));
}

TEST_CASE("rational history: mutual orthogonality and A-orthogonality are exact") {
    auto inst = exact_problem(12, 3, 7);
    SolveOptions<Rational> opts;
    opts.keep_history = true;
    auto trace = ccg_solve(inst.A, inst.b, inst.X0, opts);
    CHECK(trace.status == TerminalStatus::Converged);
    const auto& hr = trace.history_r;
    const auto& hd = trace.history_d;
    REQUIRE(hr.size() >= 4);

    for (std::size_t i = 0; i < hr.size(); ++i)
        for (std::size_t j = i + 1; j < hr.size(); ++j)
            for (int ci = 0; ci < hr[i].cols(); ++ci)
                for (int cj = 0; cj < hr[j].cols(); ++cj)
                    CHECK(sgn(kernels::dot<Rational>(hr[i].col(ci), hr[j].col(cj))) == 0);

    std::vector<DenseBlock<Rational>> had;
    for (const auto& blk : hd)
        had.push_back(matvec_block(inst.A, blk));
    for (std::size_t i = 0; i < hd.size(); ++i)
        for (std::size_t j = i + 1; j < hd.size(); ++j)
            for (int ci = 0; ci < hd[i].cols(); ++ci)
                for (int cj = 0; cj < hd[j].cols(); ++cj)
                    CHECK(sgn(kernels::dot<Rational>(hd[i].col(ci), had[j].col(cj))) == 0);
}

TEST_CASE("rational history: direction span grows by p per iteration") {
    auto inst = exact_problem(12, 3, 11);
    SolveOptions<Rational> opts;
    opts.keep_history = true;
    auto trace = ccg_solve(inst.A, inst.b, inst.X0, opts);
    CHECK(trace.status == TerminalStatus::Converged);
    const int full_iters = trace.iteration_count(); // 4 = 12/3
    // While the block keeps full rank, the concatenation [D_0 ... D_k] has
    // rank (k+1) p.  The final direction block is zero (the run ended), so
    // stop one short of the last history entry.
    for (int k = 0; k + 1 < full_iters; ++k)
        CHECK(oracle::exact_rank_of_blocks(trace.history_d, k) == (k + 1) * 3);
    // and the residual span matches the direction span dimension
    for (int k = 0; k + 1 < full_iters; ++k)
        CHECK(oracle::exact_rank_of_blocks(trace.history_r, k) == (k + 1) * 3);
}

TEST_CASE("rational history: residual, direction, and power spans coincide") {
    auto inst = exact_problem(9, 3, 12);
    SolveOptions<Rational> opts;
    opts.keep_history = true;
    auto trace = ccg_solve(inst.A, inst.b, inst.X0, opts);
    CHECK(trace.status == TerminalStatus::Converged);
    const int full_iters = trace.iteration_count(); // 3 = 9/3
    for (int k = 0; k + 1 < full_iters; ++k) {
        const int dim = (k + 1) * 3;
        // span [A^i R_0] stacked alongside the other two families
        std::vector<DenseBlock<Rational>> powers = {trace.history_r.front()};
        for (int i = 1; i <= k; ++i)
            powers.push_back(matvec_block(inst.A, powers.back()));
        CHECK(oracle::exact_rank_of_blocks(powers, k) == dim);
        // each family spans the same subspace: concatenations add no rank
        std::vector<DenseBlock<Rational>> all;
        for (int i = 0; i <= k; ++i)
            all.push_back(trace.history_d[static_cast<std::size_t>(i)]);
        for (int i = 0; i <= k; ++i)
            all.push_back(trace.history_r[static_cast<std::size_t>(i)]);
        for (int i = 0; i <= k; ++i)
            all.push_back(powers[static_cast<std::size_t>(i)]);
        CHECK(oracle::exact_rank_of_blocks(all, 3 * (k + 1) - 1) == dim);
    }
}

TEST_CASE("rational history: stored residuals equal A X - b exactly") {
    auto inst = exact_problem(8, 2, 14);
    SolveOptions<Rational> opts;
    opts.keep_history = true; // recurrence policy; exactness must hold anyway
    auto trace = ccg_solve(inst.A, inst.b, inst.X0, opts);
    REQUIRE(trace.history_r.size() == trace.history_x.size());
    for (std::size_t k = 0; k < trace.history_r.size(); ++k)
        CHECK(trace.history_r[k] == true_residuals(inst.A, inst.b, trace.history_x[k]));
}

TEST_CASE("rational history: each estimate minimizes f over the direction span") {
    auto inst = exact_problem(9, 3, 13);
    SolveOptions<Rational> opts;
    opts.keep_history = true;
    auto trace = ccg_solve(inst.A, inst.b, inst.X0, opts);
    const auto& hx = trace.history_x;
    const auto& hd = trace.history_d;
    REQUIRE(hx.size() >= 2);
    // first-order optimality: D_i^T (A X_{k+1} e_j - b) = 0 for all i <= k
    for (std::size_t k = 1; k < hx.size(); ++k) {
        const auto grad = true_residuals(inst.A, inst.b, hx[k]);
        for (std::size_t i = 0; i < k; ++i)
            for (int c = 0; c < hd[i].cols(); ++c)
                for (int j = 0; j < grad.cols(); ++j)
                    CHECK(sgn(kernels::dot<Rational>(hd[i].col(c), grad.col(j))) == 0);
    }
    // monotone objective, exactly
    for (std::size_t k = 1; k < hx.size(); ++k)
        for (int j = 0; j < 3; ++j) {
            const Rational prev = oracle::objective<Rational>(inst.A, inst.b, hx[k - 1].col(j));
            const Rational cur = oracle::objective<Rational>(inst.A, inst.b, hx[k].col(j));
            CHECK(cur <= prev);
        }
}

TEST_CASE("rational ccg at p = 1 equals rational cg exactly") {
    auto inst = exact_problem(6, 1, 17);
    SolveOptions<Rational> opts;
    opts.keep_history = true;
    opts.recompute_residual_every = 1;
    auto cg = cg_solve(inst.A, inst.b, inst.X0.column_copy(0), opts);
    auto ccg = ccg_solve(inst.A, inst.b, inst.X0, opts);
    CHECK(cg.iteration_count() == ccg.iteration_count());
    CHECK(cg.final_x == ccg.final_x);
    for (std::size_t k = 0; k < cg.history_r.size(); ++k) {
        CHECK(cg.history_x[k] == ccg.history_x[k]);
        CHECK(cg.history_r[k] == ccg.history_r[k]);
        CHECK(cg.history_d[k] == ccg.history_d[k]);
    }
}

TEST_CASE("rational mccg: duplicate agents are dropped and the run still ends exactly") {
    auto inst = exact_problem(6, 3, 19);
    DenseBlock<Rational> X0 = inst.X0;
    for (int i = 0; i < 6; ++i)
        X0(i, 1) = X0(i, 0);
    SolveOptions<Rational> opts;
    auto trace = mccg_solve(inst.A, inst.b, X0, opts);
    CHECK(trace.status == TerminalStatus::Converged);
    REQUIRE(!trace.iterations.empty());
    CHECK(trace.iterations.front().active_agents == 2);
    CHECK(trace.iteration_count() <= 6);
    // active-agent counts never increase
    for (std::size_t k = 1; k < trace.iterations.size(); ++k)
        CHECK(trace.iterations[k].active_agents <= trace.iterations[k - 1].active_agents);
    // the agent that met the tolerance has an exactly zero residual column
    const auto R = true_residuals(inst.A, inst.b, trace.final_x);
    bool some_zero = false;
    for (int j = 0; j < R.cols(); ++j) {
        bool zero = true;
        for (int i = 0; i < R.rows(); ++i)
            zero = zero && sgn(R(i, j)) == 0;
        some_zero = some_zero || zero;
    }
    CHECK(some_zero);
}

TEST_CASE("rational mccg: planted exact solution is removed at setup") {
    auto inst = exact_problem(8, 3, 23, /*oracle=*/true);
    DenseBlock<Rational> X0 = inst.X0;
    for (int i = 0; i < 8; ++i)
        X0(i, 0) = (*inst.x_star)[static_cast<std::size_t>(i)];
    SolveOptions<Rational> opts;
    auto trace = mccg_solve(inst.A, inst.b, X0, opts);
    CHECK(trace.status == TerminalStatus::Converged);
    REQUIRE(!trace.iterations.empty());
    CHECK(trace.iterations.front().active_agents == 2);
    for (int id : trace.iterations.front().agents)
        CHECK(id != 0);
    CHECK(trace.iteration_count() <= 8);
}

TEST_CASE("rational ccg declares rank collapse on a degenerate start") {
    auto inst = exact_problem(6, 3, 29);
    DenseBlock<Rational> X0 = inst.X0;
    for (int i = 0; i < 6; ++i)
        X0(i, 2) = X0(i, 0) + X0(i, 1); // dependent residuals? no: dependent X columns
    // Dependent X columns do not force dependent residuals; instead plant a
    // literal duplicate to force rank(R_0) = 2.
    for (int i = 0; i < 6; ++i)
        X0(i, 2) = X0(i, 1);
    SolveOptions<Rational> opts;
    auto trace = ccg_solve(inst.A, inst.b, X0, opts);
    CHECK(trace.status == TerminalStatus::RankCollapse);
    CHECK(trace.iteration_count() == 0);
}

TEST_CASE("rational mccg survives the mid-run rank drop when p does not divide n") {
    // n = 7, p = 3: after floor(7/3) = 2 full-rank iterations the direction
    // span has dimension 6, so the next block can only carry rank 1.  The
    // restricting solver keeps one agent and finishes the leftover
    // one-dimensional subspace in at most p - 1 further steps; the plain
    // solver stops at the collapse with a nonzero residual.
    int saw_drop = 0;
    for (std::uint64_t seed : {3ull, 5ull, 8ull, 13ull}) {
        auto inst = exact_problem(7, 3, seed);
        SolveOptions<Rational> opts;
        auto plain = ccg_solve(inst.A, inst.b, inst.X0, opts);
        auto safe = mccg_solve(inst.A, inst.b, inst.X0, opts);
        CHECK(safe.status == TerminalStatus::Converged);
        CHECK(safe.iteration_count() <= 7);
        if (plain.status == TerminalStatus::RankCollapse) {
            ++saw_drop;
            CHECK(plain.iteration_count() == 2);
            CHECK(safe.iteration_count() <= 2 + 2); // k* plus at most p - 1
            // p_k is nonincreasing and actually dropped
            const auto& its = safe.iterations;
            for (std::size_t k = 1; k < its.size(); ++k)
                CHECK(its[k].active_agents <= its[k - 1].active_agents);
            CHECK(its.back().active_agents < 3);
        }
        // the converged agent has an exactly zero residual
        const auto R = true_residuals(inst.A, inst.b, safe.final_x);
        bool some_zero = false;
        for (int j = 0; j < R.cols() && !some_zero; ++j) {
            bool zero = true;
            for (int i = 0; i < R.rows(); ++i)
                zero = zero && sgn(R(i, j)) == 0;
            some_zero = zero;
        }
        CHECK(some_zero);
    }
    CHECK(saw_drop >= 2); // generic seeds do hit the cliff
}

TEST_CASE("rational solve_small and numerical_rank are exact") {
    auto A = integer_spd(5, 31);
    auto st = rng::make_stream(32, rng::StreamId::starts);
    DenseBlock<Rational> D(5, 2);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 5; ++i)
            D(i, j) = scalar_traits<Rational>::from_ratio(st.next_int(-8, 8), 2);
    auto AD = matvec_block(A, D);
    auto M = gram(D, AD);
    CHECK(M(0, 1) == M(1, 0));
    DenseBlock<Rational> B(2, 2);
    B(0, 0) = 1;
    B(1, 1) = 1;
    auto X = solve_small(M, B); // X = M^{-1}
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            Rational acc;
            for (int k = 0; k < 2; ++k)
                acc += M(i, k) * X(k, j);
            CHECK(acc == Rational(i == j ? 1 : 0));
        }

    CHECK(numerical_rank(D, Rational(0)).rank == 2);
    DenseBlock<Rational> dep(5, 3);
    for (int i = 0; i < 5; ++i) {
        dep(i, 0) = D(i, 0);
        dep(i, 1) = D(i, 0) * 2;
        dep(i, 2) = D(i, 1);
    }
    CHECK(numerical_rank(dep, Rational(0)).rank == 2);
}

TEST_CASE("rational matvec linearity is exact") {
    auto A = integer_spd(6, 37);
    auto st = rng::make_stream(38, rng::StreamId::starts);
    DenseBlock<Rational> D(6, 2), C(2, 2);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 6; ++i)
            D(i, j) = scalar_traits<Rational>::from_ratio(st.next_int(-8, 8), 4);
    for (int j = 0; j < 2; ++j)
        for (int i = 0; i < 2; ++i)
            C(i, j) = scalar_traits<Rational>::from_ratio(st.next_int(-8, 8), 4);
    auto AD = matvec_block(A, D);
    DenseBlock<Rational> DC(6, 2), ADC(6, 2);
    for (int i = 0; i < 6; ++i)
        for (int j = 0; j < 2; ++j)
            for (int k = 0; k < 2; ++k) {
                DC(i, j) += D(i, k) * C(k, j);
                ADC(i, j) += AD(i, k) * C(k, j);
            }
    CHECK(matvec_block(A, DC) == ADC);
}

TEST_CASE("rational matrix market round trip is exact") {
    auto A = integer_spd(4, 41);
    std::stringstream sa;
    mm::write(sa, A);
    CHECK(mm::read_spd<Rational>(sa) == A);

    auto [b, x0] = random_rhs_and_starts<Rational>(4, 2, 43);
    std::stringstream sb, sx;
    mm::write(sb, b);
    mm::write(sx, x0);
    CHECK(mm::read_vector<Rational>(sb) == b);
    CHECK(mm::read_block<Rational>(sx) == x0);
}
