// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "coopcg/problem.hpp"

// Experiment orchestration: batched seeded solves over a dimension grid,
// paired CG / cooperative-CG comparisons, tolerance sweeps, and the
// least-squares fits used to summarize scaling (log-log slopes, the
// per-iteration-time parabola, and the implied seconds per scalar
// multiplication).  Raw records and aggregates round-trip through CSV;
// fits are reported in a versioned JSON summary.

namespace coopcg::bench {

struct ExperimentConfig {
    std::vector<int> dims;              ///< ascending problem dimensions
    double cond = 1e4;                  ///< target condition number
    std::vector<double> tols = {1e-3};  ///< stopping tolerances
    int trials = 10;                    ///< seeded repetitions per cell
    int p = 3;                          ///< agent count for the cooperative runs
    std::uint64_t seed_base = 1;
    std::vector<std::string> algos = {"cg", "ccg"}; ///< cg | ccg | ccg-par | sd
    std::string out_dir = "bench_out";
    Mode mode = Mode::float64;

    void validate() const;

    /// Flat "key = value" text file; '#' starts a comment.  List values
    /// are comma separated (dims, tols, algos).
    static ExperimentConfig from_file(const std::string& path);
    static ExperimentConfig parse(std::istream& in);
};

struct ExperimentRecord {
    int n = 0;
    double cond = 0.0;
    double tol = 0.0;
    std::string algo;
    std::uint64_t trial_seed = 0; ///< derived problem seed; identical across paired runs
    int iterations = 0;
    double time_s = 0.0; ///< solver main loop only (generation and I/O excluded)
    bool converged = false;
    double final_minres = 0.0;

    bool operator==(const ExperimentRecord&) const = default;
};

/// One record per (dimension, tolerance, algorithm, trial).  All algorithms
/// in a cell share the same generated problem; the single-vector solvers
/// start from column 0 of the block start.  A failed solve is captured as
/// converged = false, never as an aborted sweep.  The COOPCG_BENCH_THREADS
/// environment variable caps concurrent trial execution (default 1).
std::vector<ExperimentRecord> run_sweep(const ExperimentConfig& config);

struct AggregateRow {
    int n = 0;
    double tol = 0.0;
    int trials = 0;
    double cg_iters_mean = 0.0;
    double coop_iters_mean = 0.0;
    double cg_time_mean = 0.0;
    double coop_time_mean = 0.0;
    double iteration_ratio = 0.0; ///< cg iterations / cooperative iterations
    double speedup = 0.0;         ///< cg time / cooperative time
    bool all_converged = false;
};

/// Per-(n, tol) paired means and ratios.  The cooperative side prefers
/// "ccg-par" records when present, otherwise "ccg".  Cells missing either
/// side are omitted with a warning on stderr.
std::vector<AggregateRow> aggregate(const std::vector<ExperimentRecord>& records);

struct ToleranceSweepResult {
    std::vector<AggregateRow> rows; ///< one per tolerance, in config order
    bool cg_iterations_nondecreasing = false;
    bool coop_iterations_nondecreasing = false;
};

/// Sweep over a strictly decreasing tolerance list at one fixed dimension.
ToleranceSweepResult tolerance_sweep(const ExperimentConfig& config);

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double rss = 0.0; ///< residual sum of squares in the fitted space
    int samples = 0;
};

/// Ordinary least squares on (ln x, ln y); every value must be positive
/// and at least two distinct abscissae are required.
FitResult fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys);

struct ParabolaFit {
    double c2 = 0.0, c1 = 0.0, c0 = 0.0; ///< time/iter ~ c2 n^2 + c1 n + c0
    double per_mult_seconds_mean = 0.0;
    double per_mult_seconds_std = 0.0;
    int samples = 0; ///< distinct dimensions used
};

/// Least-squares quadratic of mean time-per-iteration versus n for the
/// given algorithm's records, plus the per-multiplication time implied by
/// the per-iteration count model at each dimension.
ParabolaFit fit_parabola_and_mult_time(const std::vector<ExperimentRecord>& records, int p,
                                       const std::string& algo);

// --- persistence ---------------------------------------------------------

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv(std::istream& in);
void write_records_csv_file(const std::string& path, const std::vector<ExperimentRecord>& records);
std::vector<ExperimentRecord> read_records_csv_file(const std::string& path);

void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& rows);

/// Versioned JSON summary (config echo, aggregates, fits) as a string.
std::string summary_json(const ExperimentConfig& config,
                         const std::vector<ExperimentRecord>& records);

} // namespace coopcg::bench
