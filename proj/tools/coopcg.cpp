// SPDX-License-Identifier: Apache-2.0

// Command-line front end: problem generation, the four solvers (plus the
// barrier-parallel runtime), the cost model, and the benchmark harness.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "coopcg/bench.hpp"
#include "coopcg/complexity.hpp"
#include "coopcg/matrix_market.hpp"
#include "coopcg/parallel.hpp"
#include "coopcg/problem.hpp"
#include "coopcg/solvers.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GenArgs {
    int n = 100;
    int p = 3;
    double cond = 1e4;
    std::uint64_t seed = 1;
    std::string mode = "float";
    std::string out = "problem";
};

template <coopcg::ScalarField S>
void write_problem(const coopcg::ProblemInstance<S>& inst, const GenArgs& args) {
    fs::create_directories(args.out);
    coopcg::mm::write_file(args.out + "/A.mtx", inst.A);
    coopcg::mm::write_file(args.out + "/b.mtx", inst.b);
    coopcg::mm::write_file(args.out + "/X0.mtx", inst.X0);
    json meta;
    meta["n"] = args.n;
    meta["p"] = args.p;
    meta["cond"] = args.cond;
    meta["seed"] = args.seed;
    meta["mode"] = args.mode;
    if (inst.realized_cond > 0)
        meta["realized_cond"] = inst.realized_cond;
    meta["files"] = {{"matrix", "A.mtx"}, {"rhs", "b.mtx"}, {"starts", "X0.mtx"}};
    std::ofstream out(args.out + "/meta.json");
    out << meta.dump(2) << "\n";
    std::cout << meta.dump(2) << "\n";
}

int cmd_gen(const GenArgs& args) {
    coopcg::ProblemSpec spec;
    spec.n = args.n;
    spec.p = args.p;
    spec.cond = args.cond;
    spec.seed = args.seed;
    spec.mode = coopcg::parse_mode(args.mode);
    if (spec.mode == coopcg::Mode::rational)
        write_problem(coopcg::make_problem<coopcg::Rational>(spec), args);
    else
        write_problem(coopcg::make_problem<double>(spec), args);
    return 0;
}

struct SolveArgs {
    std::string algo = "ccg";
    std::string tol = "1e-6";
    int max_iters = -1;
    std::string mode = "float";
    bool verify = false;
    std::string trace_out;
    int workers = -1;
    int recompute_every = -1;
    // either Matrix Market inputs ...
    std::string matrix, rhs, x0;
    // ... or generation parameters
    int n = 0;
    int p = 3;
    double cond = 1e4;
    std::uint64_t seed = 1;
};

void write_trace_header_fields(json& j, const coopcg::IterationRecord& rec) {
    j["k"] = rec.k;
    j["p"] = rec.active_agents;
    j["agents"] = rec.agents;
    j["res_norms"] = rec.residual_norms;
    j["minres"] = rec.minres;
    j["mults"] = rec.mults;
    j["wall_ns"] = rec.wall_ns;
    if (!rec.anorm_errors.empty())
        j["anorm_errors"] = rec.anorm_errors;
    if (!rec.barrier_wait_ns.empty()) {
        j["barrier_wait_ns"] = rec.barrier_wait_ns;
        j["mults_per_worker"] = rec.mults_per_worker;
    }
}

template <coopcg::ScalarField S>
bool verify_history(const coopcg::SpdMatrix<S>& A, const coopcg::SolveTrace<S>& trace);

template <coopcg::ScalarField S>
int run_solve(const SolveArgs& args) {
    coopcg::SpdMatrix<S> A(1, {coopcg::scalar_traits<S>::from_int(1)}, coopcg::SpdCheck::skip);
    coopcg::Vec<S> b;
    coopcg::DenseBlock<S> x0;
    if (!args.matrix.empty()) {
        A = coopcg::mm::read_spd_file<S>(args.matrix);
        b = coopcg::mm::read_vector_file<S>(args.rhs);
        x0 = coopcg::mm::read_block_file<S>(args.x0);
    } else {
        if (args.n <= 0)
            throw coopcg::Error("solve: pass --matrix/--rhs/--x0 or --n to generate");
        coopcg::ProblemSpec spec;
        spec.n = args.n;
        spec.p = args.p;
        spec.cond = args.cond;
        spec.seed = args.seed;
        auto inst = coopcg::make_problem<S>(spec);
        A = std::move(inst.A);
        b = std::move(inst.b);
        x0 = std::move(inst.X0);
    }

    coopcg::SolveOptions<S> opts;
    opts.tol = coopcg::scalar_traits<S>::parse(args.tol);
    opts.max_iters = args.max_iters;
    opts.keep_history = args.verify;
    opts.recompute_residual_every = args.recompute_every;

    coopcg::SolveTrace<S> trace;
    if (args.algo == "cg") {
        trace = coopcg::cg_solve(A, b, x0.column_copy(0), opts);
    } else if (args.algo == "sd") {
        trace = coopcg::steepest_descent_solve(A, b, x0.column_copy(0), opts);
    } else if (args.algo == "ccg") {
        trace = coopcg::ccg_solve(A, b, x0, opts);
    } else if (args.algo == "mccg") {
        trace = coopcg::mccg_solve(A, b, x0, opts);
    } else if (args.algo == "ccg-par") {
        trace = coopcg::parallel_ccg(A, b, x0, opts, args.workers);
    } else {
        throw coopcg::Error("solve: unknown algorithm '" + args.algo + "'");
    }

    if (!args.trace_out.empty()) {
        std::ofstream out(args.trace_out);
        if (!out)
            throw coopcg::Error("cannot open for writing: " + args.trace_out);
        for (const auto& rec : trace.iterations) {
            json j;
            write_trace_header_fields(j, rec);
            out << j.dump() << "\n";
        }
    }

    bool history_ok = true;
    if (args.verify)
        history_ok = verify_history(A, trace);

    json summary;
    summary["algo"] = args.algo;
    summary["status"] = coopcg::to_string(trace.status);
    summary["iterations"] = trace.iteration_count();
    summary["converged_agent"] = trace.converged_agent;
    summary["initial_minres"] = trace.initial_minres;
    summary["final_minres"] = trace.final_minres;
    summary["loop_wall_s"] = static_cast<double>(trace.loop_wall_ns) * 1e-9;
    if (trace.barriers_per_iteration > 0)
        summary["barriers_per_iteration"] = trace.barriers_per_iteration;
    if (args.verify)
        summary["history_orthogonality_ok"] = history_ok;
    std::cout << summary.dump(2) << "\n";
    return history_ok ? 0 : 3;
}

/// History invariants at the double level: residual blocks mutually
/// orthogonal, direction blocks mutually A-orthogonal.
template <coopcg::ScalarField S>
bool verify_history(const coopcg::SpdMatrix<S>& A, const coopcg::SolveTrace<S>& trace) {
    using traits = coopcg::scalar_traits<S>;
    const auto& hr = trace.history_r;
    const auto& hd = trace.history_d;
    if (hr.empty())
        return true;
    double max_r = 0.0, scale_r = 0.0;
    for (std::size_t i = 0; i < hr.size(); ++i) {
        for (int c = 0; c < hr[i].cols(); ++c)
            scale_r = std::max(scale_r, traits::to_double(coopcg::kernels::norm_sq<S>(hr[i].col(c))));
        for (std::size_t j = i + 1; j < hr.size(); ++j)
            for (int ci = 0; ci < hr[i].cols(); ++ci)
                for (int cj = 0; cj < hr[j].cols(); ++cj)
                    max_r = std::max(max_r, std::abs(traits::to_double(coopcg::kernels::dot<S>(
                                                hr[i].col(ci), hr[j].col(cj)))));
    }
    double max_d = 0.0, scale_d = 0.0;
    std::vector<coopcg::DenseBlock<S>> ad;
    ad.reserve(hd.size());
    for (const auto& dblk : hd)
        ad.push_back(coopcg::matvec_block(A, dblk));
    for (std::size_t i = 0; i < hd.size(); ++i) {
        for (int c = 0; c < hd[i].cols(); ++c)
            scale_d = std::max(scale_d, std::abs(traits::to_double(coopcg::kernels::dot<S>(
                                            hd[i].col(c), ad[i].col(c)))));
        for (std::size_t j = i + 1; j < hd.size(); ++j)
            for (int ci = 0; ci < hd[i].cols(); ++ci)
                for (int cj = 0; cj < hd[j].cols(); ++cj)
                    max_d = std::max(max_d, std::abs(traits::to_double(coopcg::kernels::dot<S>(
                                                hd[i].col(ci), ad[j].col(cj)))));
    }
    const double tol = 1e-8;
    const bool ok = (scale_r == 0.0 || max_r / scale_r <= tol) &&
                    (scale_d == 0.0 || max_d / scale_d <= tol);
    std::cerr << "history check: max |R_i^T R_j| / max ||R||^2 = "
              << (scale_r > 0 ? max_r / scale_r : 0.0)
              << ", max |D_i^T A D_j| / max |D^T A D| = "
              << (scale_d > 0 ? max_d / scale_d : 0.0) << "\n";
    return ok;
}

int cmd_model(long n, std::optional<long> p) {
    json j;
    j["n"] = n;
    if (p) {
        const auto est = coopcg::worst_case_mults(n, *p);
        j["p"] = *p;
        j["N"] = est.total_mults.get_d();
        j["N_exact"] = coopcg::scalar_traits<coopcg::Rational>::to_string(est.total_mults);
        j["per_iteration"] = est.per_iteration;
        j["iterations_assumed"] = est.iterations_assumed;
    }
    const auto opt = coopcg::optimal_p(n);
    const auto gain = coopcg::gain_holds(n);
    j["p_star"] = opt.p_star;
    j["N_star"] = opt.n_star.get_d();
    j["gain"] = gain.holds;
    j["gain_witness"] = gain.witness.get_d();
    j["asymptotic_p_star"] = std::cbrt(0.75) * std::pow(static_cast<double>(n), 2.0 / 3.0);
    std::cout << j.dump(2) << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"cooperative conjugate gradient solvers and benchmarks"};
    app.require_subcommand(1);

    GenArgs gen;
    auto* cgen = app.add_subcommand("gen", "generate a seeded SPD problem");
    cgen->add_option("--n", gen.n, "dimension")->required();
    cgen->add_option("--p", gen.p, "agent count");
    cgen->add_option("--cond", gen.cond, "target condition number");
    cgen->add_option("--seed", gen.seed, "seed");
    cgen->add_option("--mode", gen.mode, "float | rational");
    cgen->add_option("--out", gen.out, "output directory");

    SolveArgs solve;
    auto* csolve = app.add_subcommand("solve", "run a solver");
    csolve->add_option("--algo", solve.algo, "cg | ccg | mccg | sd | ccg-par");
    csolve->add_option("--tol", solve.tol, "residual tolerance");
    csolve->add_option("--max-iters", solve.max_iters, "iteration cap");
    csolve->add_option("--mode", solve.mode, "float | rational");
    csolve->add_flag("--verify", solve.verify, "retain history and check orthogonality");
    csolve->add_option("--trace-out", solve.trace_out, "JSON-lines trace file");
    csolve->add_option("--workers", solve.workers, "worker threads (ccg-par)");
    csolve->add_option("--recompute-every", solve.recompute_every,
                       "true-residual recomputation interval");
    csolve->add_option("--matrix", solve.matrix, "system matrix (Matrix Market)");
    csolve->add_option("--rhs", solve.rhs, "right-hand side (Matrix Market)");
    csolve->add_option("--x0", solve.x0, "starting block (Matrix Market)");
    csolve->add_option("--n", solve.n, "generate: dimension");
    csolve->add_option("--p", solve.p, "generate: agent count");
    csolve->add_option("--cond", solve.cond, "generate: condition number");
    csolve->add_option("--seed", solve.seed, "generate: seed");

    long model_n = 0;
    std::optional<long> model_p;
    long model_p_raw = -1;
    auto* cmodel = app.add_subcommand("model", "evaluate the multiplication-count model");
    cmodel->add_option("--n", model_n, "dimension")->required();
    cmodel->add_option("--p", model_p_raw, "agent count (optional)");

    std::string bench_config;
    auto* cbench = app.add_subcommand("bench", "benchmark harness");
    cbench->require_subcommand(1);
    auto* csweep = cbench->add_subcommand("sweep", "run the configured sweep");
    csweep->add_option("--config", bench_config, "config file")->required();
    auto* ctols = cbench->add_subcommand("tolerances", "tolerance sweep at one dimension");
    ctols->add_option("--config", bench_config, "config file")->required();
    std::string fit_metric = "time", fit_in, fit_algo = "ccg";
    auto* cfit = cbench->add_subcommand("fit", "log-log fit over recorded results");
    cfit->add_option("--metric", fit_metric, "time | iters");
    cfit->add_option("--in", fit_in, "records CSV")->required();
    cfit->add_option("--algo", fit_algo, "algorithm whose records to fit");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*cgen)
            return cmd_gen(gen);
        if (*csolve) {
            if (coopcg::parse_mode(solve.mode) == coopcg::Mode::rational)
                return run_solve<coopcg::Rational>(solve);
            return run_solve<double>(solve);
        }
        if (*cmodel) {
            if (cmodel->count("--p"))
                model_p = model_p_raw;
            return cmd_model(model_n, model_p);
        }
        if (*csweep) {
            const auto cfg = coopcg::bench::ExperimentConfig::from_file(bench_config);
            const auto records = coopcg::bench::run_sweep(cfg);
            fs::create_directories(cfg.out_dir);
            coopcg::bench::write_records_csv_file(cfg.out_dir + "/records.csv", records);
            {
                std::ofstream out(cfg.out_dir + "/aggregates.csv");
                coopcg::bench::write_aggregates_csv(out, coopcg::bench::aggregate(records));
            }
            const std::string summary = coopcg::bench::summary_json(cfg, records);
            std::ofstream(cfg.out_dir + "/summary.json") << summary << "\n";
            std::cout << summary << "\n";
            return 0;
        }
        if (*ctols) {
            const auto cfg = coopcg::bench::ExperimentConfig::from_file(bench_config);
            const auto res = coopcg::bench::tolerance_sweep(cfg);
            json j;
            j["cg_iterations_nondecreasing"] = res.cg_iterations_nondecreasing;
            j["coop_iterations_nondecreasing"] = res.coop_iterations_nondecreasing;
            json rows = json::array();
            for (const auto& r : res.rows)
                rows.push_back({{"tol", r.tol},
                                {"cg_iters_mean", r.cg_iters_mean},
                                {"coop_iters_mean", r.coop_iters_mean},
                                {"cg_time_mean", r.cg_time_mean},
                                {"coop_time_mean", r.coop_time_mean}});
            j["rows"] = rows;
            std::cout << j.dump(2) << "\n";
            return 0;
        }
        if (*cfit) {
            const auto records = coopcg::bench::read_records_csv_file(fit_in);
            std::map<int, std::pair<double, int>> per_dim;
            for (const auto& r : records) {
                if (r.algo != fit_algo || r.iterations <= 0)
                    continue;
                auto& acc = per_dim[r.n];
                acc.first += fit_metric == "time" ? r.time_s : static_cast<double>(r.iterations);
                acc.second += 1;
            }
            std::vector<double> xs, ys;
            for (const auto& [n, acc] : per_dim) {
                xs.push_back(n);
                ys.push_back(acc.first / acc.second);
            }
            const auto fit = coopcg::bench::fit_loglog(xs, ys);
            json j;
            j["metric"] = fit_metric;
            j["algo"] = fit_algo;
            j["slope"] = fit.slope;
            j["intercept"] = fit.intercept;
            j["rss"] = fit.rss;
            j["samples"] = fit.samples;
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
