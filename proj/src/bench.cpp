// SPDX-License-Identifier: Apache-2.0

#include "coopcg/bench.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "coopcg/parallel.hpp"
#include "coopcg/solvers.hpp"
#include "coopcg/workplan.hpp"

namespace coopcg::bench {

namespace {

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : text) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (!std::isspace(static_cast<unsigned char>(c))) {
            cur.push_back(c);
        }
    }
    if (!cur.empty())
        out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    std::size_t b = s.find_last_not_of(" \t\r\n");
    if (a == std::string::npos)
        return "";
    return s.substr(a, b - a + 1);
}

std::string fixed9(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.9f", v);
    return buf;
}

/// Times are defined at fixed (nanosecond) precision so records survive a
/// CSV round trip unchanged.
double quantize_time(double seconds) {
    return scalar_traits<double>::parse(fixed9(seconds));
}

} // namespace

void ExperimentConfig::validate() const {
    if (dims.empty())
        throw Error("bench config: no dimensions");
    if (!std::is_sorted(dims.begin(), dims.end()))
        throw Error("bench config: dimensions must be ascending");
    for (int n : dims)
        if (n < 2)
            throw Error("bench config: dimensions must be >= 2");
    if (trials < 1)
        throw Error("bench config: trials must be >= 1");
    if (p < 1)
        throw Error("bench config: p must be >= 1");
    if (cond < 1.0)
        throw Error("bench config: condition number must be >= 1");
    if (tols.empty())
        throw Error("bench config: no tolerances");
    if (algos.empty())
        throw Error("bench config: no algorithms");
    for (const auto& a : algos)
        if (a != "cg" && a != "ccg" && a != "ccg-par" && a != "sd")
            throw Error("bench config: unknown algorithm '" + a + "'");
}

ExperimentConfig ExperimentConfig::parse(std::istream& in) {
    ExperimentConfig cfg;
    std::string line;
    while (std::getline(in, line)) {
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos)
            line = line.substr(0, hash);
        line = trim(line);
        if (line.empty())
            continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError("bench config: expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key == "dims") {
            cfg.dims.clear();
            for (const auto& tok : split_list(value))
                cfg.dims.push_back(std::stoi(tok));
        } else if (key == "cond") {
            cfg.cond = scalar_traits<double>::parse(value);
        } else if (key == "tols") {
            cfg.tols.clear();
            for (const auto& tok : split_list(value))
                cfg.tols.push_back(scalar_traits<double>::parse(tok));
        } else if (key == "trials") {
            cfg.trials = std::stoi(value);
        } else if (key == "p") {
            cfg.p = std::stoi(value);
        } else if (key == "seed") {
            cfg.seed_base = std::stoull(value);
        } else if (key == "algos") {
            cfg.algos = split_list(value);
        } else if (key == "out") {
            cfg.out_dir = value;
        } else if (key == "mode") {
            cfg.mode = parse_mode(value);
        } else {
            throw ParseError("bench config: unknown key '" + key + "'");
        }
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open config: " + path);
    return parse(in);
}

namespace {

/// Stopping statistic of the run: the minres value that crossed the
/// tolerance (last iteration's), or the initial one for zero-iteration runs.
template <ScalarField S>
double stopping_minres(const SolveTrace<S>& trace) {
    if (trace.iterations.empty())
        return trace.initial_minres;
    return trace.iterations.back().minres;
}

template <ScalarField S>
ExperimentRecord run_one(const ProblemInstance<S>& inst, int n, double cond, double tol,
                         const std::string& algo, std::uint64_t trial_seed, int p) {
    ExperimentRecord rec;
    rec.n = n;
    rec.cond = cond;
    rec.tol = tol;
    rec.algo = algo;
    rec.trial_seed = trial_seed;
    try {
        SolveOptions<S> opts;
        if constexpr (scalar_traits<S>::is_exact)
            opts.tol = scalar_traits<S>::parse(scalar_traits<double>::to_string(tol));
        else
            opts.tol = tol;
        SolveTrace<S> trace;
        if (algo == "cg") {
            trace = cg_solve(inst.A, inst.b, inst.X0.column_copy(0), opts);
        } else if (algo == "sd") {
            trace = steepest_descent_solve(inst.A, inst.b, inst.X0.column_copy(0), opts);
        } else if (algo == "ccg") {
            trace = ccg_solve(inst.A, inst.b, inst.X0, opts);
        } else if (algo == "ccg-par") {
            trace = parallel_ccg(inst.A, inst.b, inst.X0, opts, p);
        } else {
            throw Error("unknown algorithm '" + algo + "'");
        }
        rec.iterations = trace.iteration_count();
        rec.time_s = quantize_time(static_cast<double>(trace.loop_wall_ns) * 1e-9);
        rec.converged = trace.status == TerminalStatus::Converged;
        rec.final_minres = stopping_minres(trace);
    } catch (const std::exception& e) {
        std::cerr << "bench: solve failed (n=" << n << ", algo=" << algo << "): " << e.what()
                  << "\n";
        rec.converged = false;
    }
    return rec;
}

template <ScalarField S>
std::vector<ExperimentRecord> sweep_impl(const ExperimentConfig& cfg) {
    struct Job {
        int n;
        int trial;
        std::uint64_t seed;
        std::size_t first_slot; // records laid out (tol, algo) row-major per job
    };
    std::vector<Job> jobs;
    const std::size_t per_job = cfg.tols.size() * cfg.algos.size();
    for (int n : cfg.dims)
        for (int trial = 0; trial < cfg.trials; ++trial) {
            const std::uint64_t seed = rng::derive_seed(
                cfg.seed_base, static_cast<std::uint64_t>(n), static_cast<std::uint64_t>(trial));
            jobs.push_back({n, trial, seed, jobs.size() * per_job});
        }

    std::vector<ExperimentRecord> records(jobs.size() * per_job);
    auto run_job = [&](const Job& job) {
        std::size_t slot = job.first_slot;
        ProblemSpec spec;
        spec.n = job.n;
        spec.p = cfg.p;
        spec.cond = cfg.cond;
        spec.seed = job.seed;
        spec.mode = scalar_traits<S>::is_exact ? Mode::rational : Mode::float64;
        try {
            const ProblemInstance<S> inst = make_problem<S>(spec);
            for (double tol : cfg.tols)
                for (const auto& algo : cfg.algos)
                    records[slot++] = run_one<S>(inst, job.n, cfg.cond, tol, algo, job.seed, cfg.p);
        } catch (const std::exception& e) {
            // a failed cell is recorded, not fatal to the sweep
            std::cerr << "bench: problem generation failed (n=" << job.n << "): " << e.what()
                      << "\n";
            for (double tol : cfg.tols)
                for (const auto& algo : cfg.algos) {
                    ExperimentRecord rec;
                    rec.n = job.n;
                    rec.cond = cfg.cond;
                    rec.tol = tol;
                    rec.algo = algo;
                    rec.trial_seed = job.seed;
                    rec.converged = false;
                    records[slot++] = rec;
                }
        }
    };

    int max_threads = 1;
    if (const char* env = std::getenv("COOPCG_BENCH_THREADS"))
        max_threads = std::max(1, std::atoi(env));
    if (max_threads == 1) {
        for (const Job& job : jobs)
            run_job(job);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        const int nthreads = std::min<std::size_t>(max_threads, jobs.size());
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back([&] {
                for (;;) {
                    const std::size_t j = next.fetch_add(1);
                    if (j >= jobs.size())
                        return;
                    run_job(jobs[j]);
                }
            });
        for (auto& th : pool)
            th.join();
    }
    return records;
}

} // namespace

std::vector<ExperimentRecord> run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.mode == Mode::rational)
        return sweep_impl<Rational>(cfg);
    return sweep_impl<double>(cfg);
}

std::vector<AggregateRow> aggregate(const std::vector<ExperimentRecord>& records) {
    const bool have_par =
        std::any_of(records.begin(), records.end(),
                    [](const ExperimentRecord& r) { return r.algo == "ccg-par"; });
    const std::string coop = have_par ? "ccg-par" : "ccg";

    std::map<std::pair<int, double>, std::vector<const ExperimentRecord*>> cells;
    for (const auto& r : records)
        cells[{r.n, r.tol}].push_back(&r);

    std::vector<AggregateRow> rows;
    for (const auto& [key, cell] : cells) {
        AggregateRow row;
        row.n = key.first;
        row.tol = key.second;
        int cg_count = 0, coop_count = 0;
        row.all_converged = true;
        for (const auto* r : cell) {
            if (r->algo == "cg") {
                row.cg_iters_mean += r->iterations;
                row.cg_time_mean += r->time_s;
                ++cg_count;
            } else if (r->algo == coop) {
                row.coop_iters_mean += r->iterations;
                row.coop_time_mean += r->time_s;
                ++coop_count;
            } else {
                continue;
            }
            row.all_converged = row.all_converged && r->converged;
        }
        if (cg_count == 0 || coop_count == 0) {
            std::cerr << "bench: cell (n=" << row.n << ", tol=" << row.tol
                      << ") lacks a paired comparison; omitted\n";
            continue;
        }
        row.trials = std::min(cg_count, coop_count);
        row.cg_iters_mean /= cg_count;
        row.cg_time_mean /= cg_count;
        row.coop_iters_mean /= coop_count;
        row.coop_time_mean /= coop_count;
        row.iteration_ratio =
            row.coop_iters_mean > 0 ? row.cg_iters_mean / row.coop_iters_mean : 0.0;
        row.speedup = row.coop_time_mean > 0 ? row.cg_time_mean / row.coop_time_mean : 0.0;
        rows.push_back(row);
    }
    return rows;
}

ToleranceSweepResult tolerance_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    if (cfg.dims.size() != 1)
        throw Error("tolerance_sweep: exactly one dimension expected");
    for (std::size_t i = 1; i < cfg.tols.size(); ++i)
        if (!(cfg.tols[i] < cfg.tols[i - 1]))
            throw Error("tolerance_sweep: tolerance list must be strictly decreasing");

    const auto records = run_sweep(cfg);
    const auto rows = aggregate(records);

    ToleranceSweepResult res;
    // aggregate() sorts by (n, tol); reorder to the config's tolerance order.
    for (double tol : cfg.tols) {
        const auto it = std::find_if(rows.begin(), rows.end(),
                                     [&](const AggregateRow& r) { return r.tol == tol; });
        if (it != rows.end())
            res.rows.push_back(*it);
    }
    res.cg_iterations_nondecreasing = true;
    res.coop_iterations_nondecreasing = true;
    for (std::size_t i = 1; i < res.rows.size(); ++i) {
        res.cg_iterations_nondecreasing = res.cg_iterations_nondecreasing &&
                                          res.rows[i].cg_iters_mean >= res.rows[i - 1].cg_iters_mean;
        res.coop_iterations_nondecreasing =
            res.coop_iterations_nondecreasing &&
            res.rows[i].coop_iters_mean >= res.rows[i - 1].coop_iters_mean;
    }
    return res;
}

FitResult fit_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw Error("fit_loglog: size mismatch");
    for (double v : xs)
        if (!(v > 0.0))
            throw Error("fit_loglog: abscissae must be positive");
    for (double v : ys)
        if (!(v > 0.0))
            throw Error("fit_loglog: values must be positive");
    const int m = static_cast<int>(xs.size());
    if (m < 2 || std::all_of(xs.begin(), xs.end(), [&](double v) { return v == xs.front(); }))
        throw Error("fit_loglog: need at least two distinct abscissae");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < m; ++i) {
        const double lx = std::log(xs[static_cast<std::size_t>(i)]);
        const double ly = std::log(ys[static_cast<std::size_t>(i)]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    FitResult fit;
    fit.samples = m;
    const double denom = m * sxx - sx * sx;
    fit.slope = (m * sxy - sx * sy) / denom;
    fit.intercept = (sy - fit.slope * sx) / m;
    for (int i = 0; i < m; ++i) {
        const double ly = std::log(ys[static_cast<std::size_t>(i)]);
        const double pred = fit.intercept + fit.slope * std::log(xs[static_cast<std::size_t>(i)]);
        fit.rss += (ly - pred) * (ly - pred);
    }
    return fit;
}

ParabolaFit fit_parabola_and_mult_time(const std::vector<ExperimentRecord>& records, int p,
                                       const std::string& algo) {
    std::map<int, std::pair<double, int>> per_dim; // n -> (sum time/iter, count)
    for (const auto& r : records) {
        if (r.algo != algo || r.iterations <= 0)
            continue;
        auto& acc = per_dim[r.n];
        acc.first += r.time_s / r.iterations;
        acc.second += 1;
    }
    if (per_dim.size() < 3)
        throw Error("fit_parabola_and_mult_time: need at least three distinct dimensions");

    std::vector<double> ns, ts;
    for (const auto& [n, acc] : per_dim) {
        ns.push_back(static_cast<double>(n));
        ts.push_back(acc.first / acc.second);
    }
    const int m = static_cast<int>(ns.size());

    // Normal equations for t ~ c2 n^2 + c1 n + c0.
    double s[5] = {0, 0, 0, 0, 0};
    double b[3] = {0, 0, 0};
    for (int i = 0; i < m; ++i) {
        const double x = ns[static_cast<std::size_t>(i)];
        const double y = ts[static_cast<std::size_t>(i)];
        double xp = 1.0;
        for (int d = 0; d <= 4; ++d) {
            s[d] += xp;
            if (d <= 2)
                b[d] += y * xp;
            xp *= x;
        }
    }
    // 3x3 solve by Cramer's rule on [s0 s1 s2; s1 s2 s3; s2 s3 s4] c = b.
    const double a00 = s[0], a01 = s[1], a02 = s[2];
    const double a11 = s[2], a12 = s[3], a22 = s[4];
    auto det3 = [](double m00, double m01, double m02, double m10, double m11, double m12,
                   double m20, double m21, double m22) {
        return m00 * (m11 * m22 - m12 * m21) - m01 * (m10 * m22 - m12 * m20) +
               m02 * (m10 * m21 - m11 * m20);
    };
    const double det = det3(a00, a01, a02, a01, a11, a12, a02, a12, a22);
    if (det == 0.0)
        throw Error("fit_parabola_and_mult_time: singular normal equations");
    ParabolaFit fit;
    fit.c0 = det3(b[0], a01, a02, b[1], a11, a12, b[2], a12, a22) / det;
    fit.c1 = det3(a00, b[0], a02, a01, b[1], a12, a02, b[2], a22) / det;
    fit.c2 = det3(a00, a01, b[0], a01, a11, b[1], a02, a12, b[2]) / det;
    fit.samples = m;

    std::vector<double> per_mult;
    for (int i = 0; i < m; ++i) {
        const auto mults = count_iteration_mults(static_cast<int>(ns[static_cast<std::size_t>(i)]), p);
        per_mult.push_back(ts[static_cast<std::size_t>(i)] / static_cast<double>(mults));
    }
    double mean = 0.0;
    for (double v : per_mult)
        mean += v;
    mean /= m;
    double var = 0.0;
    for (double v : per_mult)
        var += (v - mean) * (v - mean);
    var /= (m - 1);
    fit.per_mult_seconds_mean = mean;
    fit.per_mult_seconds_std = std::sqrt(var);
    return fit;
}

// --- persistence -----------------------------------------------------------

void write_records_csv(std::ostream& out, const std::vector<ExperimentRecord>& records) {
    out << "n,cond,tol,algo,trial_seed,iterations,time_s,converged,minres\n";
    for (const auto& r : records) {
        out << r.n << ',' << scalar_traits<double>::to_string(r.cond) << ','
            << scalar_traits<double>::to_string(r.tol) << ',' << r.algo << ',' << r.trial_seed
            << ',' << r.iterations << ',' << fixed9(r.time_s) << ',' << (r.converged ? 1 : 0)
            << ',' << scalar_traits<double>::to_string(r.final_minres) << '\n';
    }
}

std::vector<ExperimentRecord> read_records_csv(std::istream& in) {
    std::vector<ExperimentRecord> records;
    std::string line;
    if (!std::getline(in, line))
        throw ParseError("records csv: empty file");
    if (line != "n,cond,tol,algo,trial_seed,iterations,time_s,converged,minres")
        throw ParseError("records csv: unexpected header: '" + line + "'");
    while (std::getline(in, line)) {
        if (trim(line).empty())
            continue;
        std::vector<std::string> f = split_list(line);
        if (f.size() != 9)
            throw ParseError("records csv: expected 9 fields: '" + line + "'");
        ExperimentRecord r;
        r.n = std::stoi(f[0]);
        r.cond = scalar_traits<double>::parse(f[1]);
        r.tol = scalar_traits<double>::parse(f[2]);
        r.algo = f[3];
        r.trial_seed = std::stoull(f[4]);
        r.iterations = std::stoi(f[5]);
        r.time_s = scalar_traits<double>::parse(f[6]);
        r.converged = f[7] == "1";
        r.final_minres = scalar_traits<double>::parse(f[8]);
        records.push_back(std::move(r));
    }
    return records;
}

void write_records_csv_file(const std::string& path, const std::vector<ExperimentRecord>& records) {
    std::ofstream out(path);
    if (!out)
        throw Error("cannot open for writing: " + path);
    write_records_csv(out, records);
}

std::vector<ExperimentRecord> read_records_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw Error("cannot open: " + path);
    return read_records_csv(in);
}

void write_aggregates_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
    out << "n,tol,trials,cg_iters_mean,coop_iters_mean,cg_time_mean,coop_time_mean,"
           "iteration_ratio,speedup,all_converged\n";
    for (const auto& r : rows) {
        out << r.n << ',' << scalar_traits<double>::to_string(r.tol) << ',' << r.trials << ','
            << scalar_traits<double>::to_string(r.cg_iters_mean) << ','
            << scalar_traits<double>::to_string(r.coop_iters_mean) << ',' << fixed9(r.cg_time_mean)
            << ',' << fixed9(r.coop_time_mean) << ','
            << scalar_traits<double>::to_string(r.iteration_ratio) << ','
            << scalar_traits<double>::to_string(r.speedup) << ',' << (r.all_converged ? 1 : 0)
            << '\n';
    }
}

std::string summary_json(const ExperimentConfig& cfg, const std::vector<ExperimentRecord>& records) {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["config"] = {{"dims", cfg.dims},   {"cond", cfg.cond},           {"tols", cfg.tols},
                   {"trials", cfg.trials}, {"p", cfg.p},               {"seed", cfg.seed_base},
                   {"algos", cfg.algos},   {"mode", cfg.mode == Mode::rational ? "rational" : "float"}};

    const auto rows = aggregate(records);
    nlohmann::json jrows = nlohmann::json::array();
    for (const auto& r : rows)
        jrows.push_back({{"n", r.n},
                         {"tol", r.tol},
                         {"trials", r.trials},
                         {"cg_iters_mean", r.cg_iters_mean},
                         {"coop_iters_mean", r.coop_iters_mean},
                         {"cg_time_mean", r.cg_time_mean},
                         {"coop_time_mean", r.coop_time_mean},
                         {"iteration_ratio", r.iteration_ratio},
                         {"speedup", r.speedup},
                         {"all_converged", r.all_converged}});
    j["aggregates"] = jrows;

    const bool have_par =
        std::any_of(records.begin(), records.end(),
                    [](const ExperimentRecord& r) { return r.algo == "ccg-par"; });
    const std::string coop = have_par ? "ccg-par" : "ccg";

    // Fits need one metric value per dimension; use the first tolerance.
    if (!rows.empty()) {
        const double tol0 = cfg.tols.front();
        std::vector<double> ns, times, iters;
        for (const auto& r : rows)
            if (r.tol == tol0 && r.coop_time_mean > 0 && r.coop_iters_mean > 0) {
                ns.push_back(r.n);
                times.push_back(r.coop_time_mean);
                iters.push_back(r.coop_iters_mean);
            }
        if (ns.size() >= 2) {
            const auto tfit = fit_loglog(ns, times);
            const auto ifit = fit_loglog(ns, iters);
            j["fits"]["time_loglog"] = {{"slope", tfit.slope},
                                        {"intercept", tfit.intercept},
                                        {"rss", tfit.rss},
                                        {"samples", tfit.samples}};
            j["fits"]["iters_loglog"] = {{"slope", ifit.slope},
                                         {"intercept", ifit.intercept},
                                         {"rss", ifit.rss},
                                         {"samples", ifit.samples}};
        }
        try {
            const auto pfit = fit_parabola_and_mult_time(records, cfg.p, coop);
            j["fits"]["time_per_iteration_parabola"] = {{"c2", pfit.c2},
                                                        {"c1", pfit.c1},
                                                        {"c0", pfit.c0},
                                                        {"samples", pfit.samples}};
            j["fits"]["per_mult_seconds"] = {{"mean", pfit.per_mult_seconds_mean},
                                             {"std", pfit.per_mult_seconds_std}};
        } catch (const Error&) {
            // fewer than three dimensions: no parabola in the summary
        }
    }
    return j.dump(2);
}

} // namespace coopcg::bench
