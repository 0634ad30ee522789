#pragma once

// Seeded repetitions, summaries and the results-file formats.
//
// Repetition r of a suite runs with seed (config.seed + r). Runs share no
// mutable state and are merged by repetition index, so the summary does not
// depend on how many threads execute them.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "dynbatch/error.hpp"
#include "dynbatch/metrics.hpp"
#include "dynbatch/study.hpp"

namespace dynbatch {

struct MeanSe {
    double mean = 0.0;
    double se = 0.0;  // sample standard deviation / sqrt(n); 0 for n == 1
};

inline MeanSe mean_se(const std::vector<double>& xs) {
    MeanSe out;
    if (xs.empty()) return out;
    const double n = static_cast<double>(xs.size());
    for (double x : xs) out.mean += x;
    out.mean /= n;
    if (xs.size() > 1) {
        double ss = 0.0;
        for (double x : xs) ss += (x - out.mean) * (x - out.mean);
        out.se = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
    }
    return out;
}

struct SuiteSummary {
    std::size_t repetitions = 0;
    std::size_t failed = 0;
    MeanSe regret;
    MeanSe speedup;
    MeanSe rounds;
    MeanSe best;
};

struct SuiteResult {
    RunConfig config;
    std::vector<RunRecord> runs;
    SuiteSummary summary;
};

inline SuiteSummary summarize(const std::vector<RunRecord>& runs) {
    SuiteSummary s;
    s.repetitions = runs.size();
    std::vector<double> regret, speedup, rounds, best;
    for (const auto& r : runs) {
        if (r.failed) {
            ++s.failed;
            continue;
        }
        if (r.regret) regret.push_back(*r.regret);
        speedup.push_back(r.speedup);
        rounds.push_back(static_cast<double>(r.T));
        best.push_back(r.best_output);
    }
    s.regret = mean_se(regret);
    s.speedup = mean_se(speedup);
    s.rounds = mean_se(rounds);
    s.best = mean_se(best);
    return s;
}

/// Runs `config.repetitions` seeded repetitions. `threads == 0` uses the hardware concurrency.
inline SuiteResult run_suite(const Objective& objective, RunConfig config, unsigned threads = 0) {
    if (config.objective.empty()) config.objective = objective.name();
    config.validate();
    SuiteResult result;
    result.config = config;
    result.runs.resize(config.repetitions);

    if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, config.repetitions));
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::atomic<bool> has_error{false};
    auto worker = [&] {
        for (std::size_t rep; (rep = next.fetch_add(1)) < config.repetitions;) {
            RunConfig c = config;
            c.seed = config.seed + rep;
            c.repetitions = 1;
            try {
                result.runs[rep] = run_optimization(objective, c);
            } catch (...) {
                if (!has_error.exchange(true)) error = std::current_exception();
                return;
            }
        }
    };
    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (error) std::rethrow_exception(error);
    result.summary = summarize(result.runs);
    return result;
}

struct CurveRow {
    std::size_t n_l = 0;
    SuiteSummary summary;
};

/// One suite per budget; budgets must be ascending.
inline std::vector<CurveRow> speedup_curve(const Objective& objective, const RunConfig& config,
                                           const std::vector<std::size_t>& budgets, unsigned threads = 0) {
    if (budgets.empty()) throw UsageError("speedup_curve: no budgets given");
    if (!std::is_sorted(budgets.begin(), budgets.end())) throw UsageError("speedup_curve: budgets must be ascending");
    std::vector<CurveRow> rows;
    for (std::size_t n_l : budgets) {
        RunConfig c = config;
        c.n_l = n_l;
        rows.push_back({n_l, run_suite(objective, c, threads).summary});
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Results files. Comma-separated, header first, '.' decimal point, numbers
// printed with 17 significant digits.

inline constexpr const char* kResultsHeader =
    "row,objective,policy,surrogate,seed,n_l,n_b,epsilon,T,best,regret,speedup,regret_se,speedup_se";

inline constexpr const char* kCurveHeader = "n_l,repetitions,mean_T,mean_speedup,speedup_se,mean_regret,regret_se";

inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string policy_label(const PolicySpec& p) {
    if (p.kind == PolicyKind::MPI && p.mpi_alpha) return "MPI:" + format_number(*p.mpi_alpha);
    return to_string(p.kind);
}

inline void write_results(std::ostream& out, const SuiteResult& suite) {
    const auto& c = suite.config;
    const std::string head = c.objective + "," + policy_label(c.policy) + "," + to_string(c.surrogate) + ",";
    out << kResultsHeader << '\n';
    for (const auto& r : suite.runs) {
        out << "run," << head << r.config.seed << ',' << c.n_l << ',' << c.n_b << ',' << format_number(c.epsilon)
            << ',' << r.T << ',' << format_number(r.best_output) << ','
            << (r.regret ? format_number(*r.regret) : std::string()) << ',' << format_number(r.speedup) << ",,\n";
    }
    const auto& s = suite.summary;
    out << "summary," << head << c.seed << ',' << c.n_l << ',' << c.n_b << ',' << format_number(c.epsilon) << ','
        << format_number(s.rounds.mean) << ',' << format_number(s.best.mean) << ',' << format_number(s.regret.mean)
        << ',' << format_number(s.speedup.mean) << ',' << format_number(s.regret.se) << ','
        << format_number(s.speedup.se) << '\n';
}

inline void write_curve(std::ostream& out, const std::vector<CurveRow>& rows) {
    out << kCurveHeader << '\n';
    for (const auto& r : rows) {
        const auto& s = r.summary;
        out << r.n_l << ',' << s.repetitions << ',' << format_number(s.rounds.mean) << ','
            << format_number(s.speedup.mean) << ',' << format_number(s.speedup.se) << ','
            << format_number(s.regret.mean) << ',' << format_number(s.regret.se) << '\n';
    }
}

}  // namespace dynbatch
