// dynbatch command-line driver.
//
//   simulate   seeded repetitions of the closed loop, one results row per run
//   curve      speedup/regret summary per budget
//   new-study / ask / tell / status   ask/tell against a persisted study file
//
// Exit codes: 0 ok, 2 usage, 3 numerical, 4 protocol.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dynbatch/dynbatch.hpp"

namespace {

using namespace dynbatch;

struct RunFlags {
    std::string objective;
    std::string policy = "EI";
    std::optional<double> mpi_alpha;
    std::string surrogate;
    std::optional<std::size_t> n_l, n_b, n_init, pool;
    std::string epsilon;
    std::string pool_kind;
    std::uint64_t seed = 0;
    std::optional<std::size_t> reps;
    std::optional<double> length_scale;
};

void add_run_flags(CLI::App* cmd, RunFlags& f, bool with_reps) {
    cmd->add_option("--objective", f.objective,
                    "cosines2 | rosenbrock2 | hartman3 | hartman6 | shekel4 | michalewicz5 | dataset:<path> | "
                    "box:<lo>:<hi>,...")
        ->required();
    cmd->add_option("--policy", f.policy, "EI | MM | MUI | MPI")->capture_default_str();
    cmd->add_option("--mpi-alpha", f.mpi_alpha, "alpha for MPI");
    cmd->add_option("--surrogate", f.surrogate, "fixedM[:<M>] | alpha:<a>  (default alpha:0.1)");
    cmd->add_option("--n-l", f.n_l, "experiment budget");
    cmd->add_option("--n-b", f.n_b, "maximum batch size");
    cmd->add_option("--epsilon", f.epsilon, "mean-change threshold (accepts inf)");
    cmd->add_option("--n-init", f.n_init, "initial random design size");
    cmd->add_option("--pool", f.pool, "candidate pool size");
    cmd->add_option("--pool-kind", f.pool_kind, "uniform | halton | grid");
    cmd->add_option("--seed", f.seed, "base seed")->capture_default_str();
    cmd->add_option("--length-scale", f.length_scale, "kernel width (default 0.01 * sum of side lengths)");
    if (with_reps) cmd->add_option("--reps", f.reps, "repetitions");
}

double parse_real(const std::string& s, const char* what) {
    if (s == "inf" || s == "+inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (auto v = detail::parse_number(s)) return *v;
    throw UsageError(std::string(what) + ": not a number: '" + s + "'");
}

SurrogateRule parse_surrogate(const std::string& s, const Objective& objective) {
    if (s.empty()) return SurrogateRule::alpha(0.1);
    if (s == "fixedM") {
        if (!objective.known_max()) throw UsageError("--surrogate fixedM needs a value; objective has no known maximum");
        return SurrogateRule::fixed(*objective.known_max());
    }
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw UsageError("--surrogate must be fixedM[:<M>] or alpha:<a>");
    const std::string kind = s.substr(0, colon);
    const double value = parse_real(s.substr(colon + 1), "--surrogate");
    if (kind == "fixedM") return SurrogateRule::fixed(value);
    if (kind == "alpha") return SurrogateRule::alpha(value);
    throw UsageError("--surrogate kind must be fixedM or alpha, got '" + kind + "'");
}

RunConfig build_config(const RunFlags& f, const Objective& objective) {
    RunConfig c = RunConfig::defaults_for(objective);
    c.policy.kind = parse_policy_kind(f.policy);
    c.policy.mpi_alpha = f.mpi_alpha;
    c.surrogate = parse_surrogate(f.surrogate, objective);
    if (f.n_l) c.n_l = *f.n_l;
    if (f.n_b) c.n_b = *f.n_b;
    if (f.n_init) c.n_init = *f.n_init;
    if (f.pool) c.pool_size = *f.pool;
    if (!f.epsilon.empty()) c.epsilon = parse_real(f.epsilon, "--epsilon");
    if (!f.pool_kind.empty()) c.pool_kind = parse_pool_kind(f.pool_kind);
    if (f.reps) c.repetitions = *f.reps;
    c.length_scale = f.length_scale;
    c.seed = f.seed;
    c.validate();
    return c;
}

void write_text(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw UsageError("cannot write '" + path + "'");
        out << text;
        if (!out) throw UsageError("write to '" + path + "' failed");
    }
    std::filesystem::rename(tmp, path);
}

Study load_study(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open study '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw UsageError("study '" + path + "' is not valid JSON: " + e.what());
    }
    return Study::from_json(j);
}

void save_study(const std::string& path, const Study& s) { write_text(path, s.to_json().dump(2) + "\n"); }

std::vector<double> parse_values(const std::string& s) {
    std::vector<double> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) v.push_back(parse_real(item, "--values"));
    return v;
}

std::vector<std::size_t> parse_budgets(const std::string& s) {
    std::vector<std::size_t> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const double x = parse_real(item, "--budgets");
        if (!(x >= 1.0) || x != std::floor(x)) throw UsageError("--budgets entries must be positive integers");
        v.push_back(static_cast<std::size_t>(x));
    }
    return v;
}

void print_points(const std::vector<Point>& pts) {
    for (const auto& p : pts) {
        for (Eigen::Index i = 0; i < p.size(); ++i) std::cout << (i ? "," : "") << format_number(p[i]);
        std::cout << '\n';
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Dynamic-batch Bayesian optimization"};
    app.require_subcommand(1);

    RunFlags sim_flags, curve_flags, study_flags;
    std::string sim_out, curve_out, budgets = "20,40,60", study_path, told;
    unsigned threads = 0;

    auto* simulate = app.add_subcommand("simulate", "run seeded repetitions and write one row per run");
    add_run_flags(simulate, sim_flags, true);
    simulate->add_option("--out", sim_out, "results file (default: stdout)");
    simulate->add_option("--threads", threads, "worker threads (0 = all cores)");

    auto* curve = app.add_subcommand("curve", "speedup and regret per budget");
    add_run_flags(curve, curve_flags, true);
    curve->add_option("--budgets", budgets, "ascending comma-separated n_l values")->capture_default_str();
    curve->add_option("--out", curve_out, "table file (default: stdout)");
    curve->add_option("--threads", threads, "worker threads (0 = all cores)");

    auto* new_study = app.add_subcommand("new-study", "create a persisted ask/tell study");
    add_run_flags(new_study, study_flags, false);
    new_study->add_option("--study", study_path, "study file")->required();

    std::string ask_path, tell_path, status_path;
    auto* ask = app.add_subcommand("ask", "propose the next points (one CSV line each)");
    ask->add_option("--study", ask_path, "study file")->required();
    auto* tell = app.add_subcommand("tell", "report outputs for the pending points");
    tell->add_option("--study", tell_path, "study file")->required();
    tell->add_option("--values", told, "comma-separated outputs, in ask order")->required();
    auto* status = app.add_subcommand("status", "print the study's run record as JSON");
    status->add_option("--study", status_path, "study file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (*simulate) {
            const Objective objective = make_objective(sim_flags.objective);
            const RunConfig cfg = build_config(sim_flags, objective);
            const SuiteResult suite = run_suite(objective, cfg, threads);
            std::ostringstream text;
            write_results(text, suite);
            if (sim_out.empty())
                std::cout << text.str();
            else
                write_text(sim_out, text.str());
            for (const auto& r : suite.runs)
                if (r.failed) std::cerr << "seed " << r.config.seed << ": " << r.error << '\n';
            std::cerr << "mean regret " << format_number(suite.summary.regret.mean) << " (se "
                      << format_number(suite.summary.regret.se) << "), mean speedup "
                      << format_number(suite.summary.speedup.mean) << '\n';
        } else if (*curve) {
            const Objective objective = make_objective(curve_flags.objective);
            const RunConfig cfg = build_config(curve_flags, objective);
            const auto rows = speedup_curve(objective, cfg, parse_budgets(budgets), threads);
            std::ostringstream text;
            write_curve(text, rows);
            if (curve_out.empty())
                std::cout << text.str();
            else
                write_text(curve_out, text.str());
        } else if (*new_study) {
            const Objective objective = make_objective(study_flags.objective);
            const Study s(objective, build_config(study_flags, objective));
            save_study(study_path, s);
        } else if (*ask) {
            Study s = load_study(ask_path);
            const auto pts = s.ask();
            save_study(ask_path, s);
            print_points(pts);
        } else if (*tell) {
            Study s = load_study(tell_path);
            s.tell(parse_values(told));
            save_study(tell_path, s);
            std::cerr << "observations " << s.observations().size() << ", budget remaining "
                      << s.budget().n_l_remaining << (s.done() ? " (done)" : "") << '\n';
        } else if (*status) {
            const Study s = load_study(status_path);
            std::cout << to_json(s.record()).dump(2) << '\n';
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
