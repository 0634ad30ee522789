#pragma once

// Run configuration, the ask/tell study engine and the closed-loop driver.
//
// A study alternates ask() and tell(). The first ask returns the random
// initial design; every later ask returns one dynamic batch. Initial points are
// outside the experiment budget n_l and outside the round count T.
//
// Randomness is derived, never carried: the initial design uses stream
// ("init", 0) of the seed and round r's candidate pool uses stream ("pool", r).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dynbatch/acquisition.hpp"
#include "dynbatch/batch.hpp"
#include "dynbatch/error.hpp"
#include "dynbatch/gp.hpp"
#include "dynbatch/metrics.hpp"
#include "dynbatch/objectives.hpp"
#include "dynbatch/rng.hpp"

namespace dynbatch {

using json = nlohmann::json;

struct RunConfig {
    std::string objective;
    PolicySpec policy = PolicySpec::ei();
    SurrogateRule surrogate = SurrogateRule::alpha(0.1);
    std::size_t n_l = 20;
    std::size_t n_b = 5;
    double epsilon = 0.02;
    std::size_t n_init = 5;
    std::size_t pool_size = 4000;
    PoolKind pool_kind = PoolKind::uniform;
    std::uint64_t seed = 0;
    std::size_t repetitions = 1;
    std::optional<double> length_scale;  // default: 0.01 * sum of side lengths
    double jitter = 1e-8;

    /// Protocol defaults by dimension: d <= 3 gets (n_init 5, n_l 20, eps 0.02), otherwise (20, 60, 0.2).
    static RunConfig defaults_for(const Objective& objective) {
        RunConfig c;
        c.objective = objective.name();
        const bool low = objective.dim() <= 3;
        c.n_init = low ? 5 : 20;
        c.n_l = low ? 20 : 60;
        c.epsilon = low ? 0.02 : 0.2;
        c.n_b = 5;
        c.pool_size = 2000 * objective.dim();
        if (objective.candidates()) {
            c.pool_kind = PoolKind::fixed;
            c.pool_size = objective.candidates()->size();
        }
        return c;
    }

    void validate() const {
        if (n_init < 1) throw UsageError("n_init must be >= 1");
        if (n_l < 1) throw UsageError("n_l must be >= 1");
        if (n_b < 1) throw UsageError("n_b must be >= 1");
        if (repetitions < 1) throw UsageError("repetitions must be >= 1");
        if (pool_size < 1) throw UsageError("pool size must be >= 1");
        if (std::isnan(epsilon)) throw UsageError("epsilon must be a number");
        if (length_scale && !(*length_scale > 0.0)) throw UsageError("length_scale must be > 0");
        if (!(jitter >= 0.0)) throw UsageError("jitter must be >= 0");
        policy.validate();
        surrogate.validate();
    }
};

struct RoundRecord {
    std::vector<PendingEntry> entries;
    std::optional<double> stop_bound;
    std::vector<double> outputs;  // measured, same order as entries
};

struct RunRecord {
    RunConfig config;
    Bounds bounds;
    std::vector<Point> initial_points;
    std::vector<double> initial_outputs;
    std::vector<RoundRecord> rounds;
    std::size_t T = 0;
    double best_output = -std::numeric_limits<double>::infinity();
    Point best_point;
    std::optional<double> known_max;
    std::optional<double> regret;
    bool regret_clamped = false;
    std::vector<double> regret_trace;  // after each policy-selected experiment
    double speedup = 0.0;
    ObservationSet observations;
    bool failed = false;
    std::string error;
    std::vector<std::string> warnings;
    std::uint64_t clamped_variances = 0;
    std::uint64_t jitter_escalations = 0;

    std::size_t experiments() const noexcept {
        std::size_t n = 0;
        for (const auto& r : rounds) n += r.entries.size();
        return n;
    }
};

class Study {
public:
    Study(Objective objective, RunConfig config)
        : objective_(std::move(objective)), config_(std::move(config)) {
        if (config_.objective.empty()) config_.objective = objective_.name();
        config_.validate();
        if (objective_.candidates()) {
            config_.pool_kind = PoolKind::fixed;
            if (config_.n_init + config_.n_l > objective_.candidates()->size())
                throw UsageError("dataset has " + std::to_string(objective_.candidates()->size()) +
                                 " rows, fewer than n_init + n_l = " + std::to_string(config_.n_init + config_.n_l));
        } else if (config_.pool_kind == PoolKind::fixed) {
            throw UsageError("pool kind 'fixed' needs a dataset objective");
        }
        observations_ = ObservationSet(objective_.bounds());
        budget_ = {config_.n_l, config_.n_b, 0};
    }

    /// Next points to evaluate. Throws ProtocolError if a batch is still awaiting tell() or the budget is spent.
    std::vector<Point> ask() {
        if (pending_) throw ProtocolError("ask: the previous batch has not been told yet");
        if (!initialized_) {
            PendingBatch design;
            for (auto& p : initial_design()) design.entries.push_back({std::move(p), 0.0, 0.0, std::nullopt});
            pending_ = std::move(design);
            pending_initial_ = true;
            return pending_->points();
        }
        if (budget_.n_l_remaining == 0) throw ProtocolError("ask: the experiment budget is exhausted");
        const GpModel model = GpModel::fit(observations_, kernel_config(), diagnostics_);
        const CandidatePool pool = pool_for_round(budget_.rounds_used);
        pending_ = propose_batch(model, pool, budget_, config_.surrogate, config_.epsilon, config_.policy);
        pending_initial_ = false;
        return pending_->points();
    }

    /// Records measured outputs for exactly the pending points, in order.
    void tell(std::span<const double> values) {
        if (!pending_) throw ProtocolError("tell: no batch is pending; call ask first");
        if (values.size() != pending_->size())
            throw UsageError("tell: expected " + std::to_string(pending_->size()) + " values, got " +
                             std::to_string(values.size()));
        for (double v : values)
            if (!std::isfinite(v)) throw UsageError("tell: values must be finite");
        ObservationSet next = observations_;
        for (std::size_t i = 0; i < values.size(); ++i)
            next.add(pending_->entries[i].point, values[i], Provenance::measured);
        observations_ = std::move(next);
        if (pending_initial_) {
            for (std::size_t i = 0; i < values.size(); ++i) {
                initial_points_.push_back(pending_->entries[i].point);
                initial_outputs_.push_back(values[i]);
            }
            initialized_ = true;
        } else {
            RoundRecord round{pending_->entries, pending_->stop_bound, {values.begin(), values.end()}};
            rounds_.push_back(std::move(round));
            for (auto& w : pending_->warnings) warnings_.push_back(std::move(w));
        }
        pending_.reset();
        pending_initial_ = false;
    }

    void tell(const std::vector<double>& values) { tell(std::span<const double>(values)); }

    bool done() const noexcept { return initialized_ && !pending_ && budget_.n_l_remaining == 0; }
    bool has_pending() const noexcept { return pending_.has_value(); }
    bool initialized() const noexcept { return initialized_; }
    const ObservationSet& observations() const noexcept { return observations_; }
    const BudgetState& budget() const noexcept { return budget_; }
    const RunConfig& config() const noexcept { return config_; }
    const Objective& objective() const noexcept { return objective_; }
    const std::optional<PendingBatch>& pending() const noexcept { return pending_; }

    KernelConfig kernel_config() const {
        return {config_.length_scale.value_or(default_length_scale(objective_.bounds())), config_.jitter};
    }

    CandidatePool pool_for_round(std::size_t round) const {
        switch (config_.pool_kind) {
            case PoolKind::fixed: return CandidatePool::from_points(*objective_.candidates());
            case PoolKind::halton:
                return CandidatePool::halton(objective_.bounds(), config_.pool_size,
                                             static_cast<std::uint64_t>(round) * config_.pool_size);
            case PoolKind::grid: return CandidatePool::grid(objective_.bounds(), config_.pool_size);
            case PoolKind::uniform: break;
        }
        return CandidatePool::uniform(objective_.bounds(), config_.pool_size,
                                      derive_stream(config_.seed, "pool", round));
    }

    std::vector<Point> initial_design() const {
        SplitMix64 rng = derive_stream(config_.seed, "init");
        std::vector<Point> pts;
        if (objective_.candidates()) {
            const auto& rows = *objective_.candidates();
            std::vector<std::size_t> idx(rows.size());
            std::iota(idx.begin(), idx.end(), std::size_t{0});
            for (std::size_t i = 0; i < config_.n_init; ++i) {
                const auto j = i + static_cast<std::size_t>(rng.below(idx.size() - i));
                std::swap(idx[i], idx[j]);
                pts.push_back(rows[idx[i]]);
            }
            return pts;
        }
        const auto& b = objective_.bounds();
        for (std::size_t i = 0; i < config_.n_init; ++i) {
            Point p(static_cast<Eigen::Index>(b.size()));
            for (std::size_t k = 0; k < b.size(); ++k) p[static_cast<Eigen::Index>(k)] = rng.uniform(b[k].low, b[k].high);
            pts.push_back(std::move(p));
        }
        return pts;
    }

    RunRecord record() const {
        RunRecord r;
        r.config = config_;
        r.bounds = objective_.bounds();
        r.initial_points = initial_points_;
        r.initial_outputs = initial_outputs_;
        r.rounds = rounds_;
        r.T = rounds_.size();
        r.observations = observations_;
        r.known_max = objective_.known_max();
        r.warnings = warnings_;
        r.clamped_variances = diagnostics_->clamped_variances.load();
        r.jitter_escalations = diagnostics_->jitter_escalations.load();
        for (std::size_t i = 0; i < observations_.size(); ++i) {
            if (observations_.output(i) > r.best_output) {
                r.best_output = observations_.output(i);
                r.best_point = observations_.point(i);
            }
        }
        if (r.known_max) {
            double best = -std::numeric_limits<double>::infinity();
            for (double y : initial_outputs_) best = std::max(best, y);
            for (const auto& round : rounds_)
                for (double y : round.outputs) {
                    best = std::max(best, y);
                    const Regret g = compute_regret(*r.known_max, best);
                    r.regret_trace.push_back(g.value);
                }
            if (!observations_.empty()) {
                const Regret g = compute_regret(*r.known_max, r.best_output);
                r.regret = g.value;
                r.regret_clamped = g.clamped;
            }
        }
        if (r.T <= config_.n_l) r.speedup = compute_speedup(config_.n_l, r.T);
        return r;
    }

    json to_json() const;
    static Study from_json(const json& j);
    static Study from_json(const json& j, Objective objective);

private:
    Objective objective_;
    RunConfig config_;
    ObservationSet observations_;
    BudgetState budget_;
    bool initialized_ = false;
    std::optional<PendingBatch> pending_;
    bool pending_initial_ = false;
    std::vector<Point> initial_points_;
    std::vector<double> initial_outputs_;
    std::vector<RoundRecord> rounds_;
    std::vector<std::string> warnings_;
    std::shared_ptr<Diagnostics> diagnostics_ = std::make_shared<Diagnostics>();
};

/// Runs the study to completion against `objective`. An evaluation failure
/// stops the run and returns the partial record with `failed` set.
inline RunRecord run_optimization(const Objective& objective, RunConfig config) {
    if (config.objective.empty()) config.objective = objective.name();
    Study study(objective, std::move(config));
    while (!study.done()) {
        const auto points = study.ask();
        std::vector<double> values;
        values.reserve(points.size());
        try {
            for (const auto& p : points) {
                const double y = objective.evaluate(p);
                if (!std::isfinite(y)) throw ObjectiveFailure("objective returned a non-finite value");
                values.push_back(y);
            }
        } catch (const std::exception& e) {
            RunRecord r = study.record();
            r.failed = true;
            r.error = std::string("objective evaluation failed: ") + e.what();
            return r;
        }
        study.tell(values);
    }
    return study.record();
}

// ---------------------------------------------------------------------------
// JSON. Non-finite doubles are written as the strings "inf", "-inf", "nan".

inline constexpr int kStudySchemaVersion = 1;

namespace detail {

inline json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

inline double number(const json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
        throw UsageError("expected a number, got '" + s + "'");
    }
    if (!j.is_number()) throw UsageError("expected a number in study document");
    return j.get<double>();
}

inline json point(const Point& p) {
    json a = json::array();
    for (Eigen::Index i = 0; i < p.size(); ++i) a.push_back(p[i]);
    return a;
}

inline Point point(const json& j) {
    Point p(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) p[static_cast<Eigen::Index>(i)] = number(j[i]);
    return p;
}

inline json optional_number(const std::optional<double>& v) { return v ? number(*v) : json(nullptr); }

inline std::optional<double> optional_number(const json& j) {
    if (j.is_null()) return std::nullopt;
    return number(j);
}

inline json entries_json(const std::vector<PendingEntry>& entries) {
    json a = json::array();
    for (const auto& e : entries)
        a.push_back({{"point", point(e.point)},
                     {"fabricated_output", number(e.fabricated_output)},
                     {"score", number(e.score)},
                     {"bound", optional_number(e.bound)}});
    return a;
}

inline std::vector<PendingEntry> entries_from(const json& a) {
    std::vector<PendingEntry> out;
    for (const auto& e : a)
        out.push_back({point(e.at("point")), number(e.at("fabricated_output")), number(e.at("score")),
                       optional_number(e.at("bound"))});
    return out;
}

}  // namespace detail

inline json to_json(const RunConfig& c) {
    return {{"objective", c.objective},
            {"policy", to_string(c.policy.kind)},
            {"mpi_alpha", detail::optional_number(c.policy.mpi_alpha)},
            {"surrogate",
             {{"kind", c.surrogate.kind == SurrogateKind::fixed_M ? "fixedM" : "alpha"},
              {"value", detail::number(c.surrogate.value)}}},
            {"n_l", c.n_l},
            {"n_b", c.n_b},
            {"epsilon", detail::number(c.epsilon)},
            {"n_init", c.n_init},
            {"pool_size", c.pool_size},
            {"pool_kind", to_string(c.pool_kind)},
            {"seed", c.seed},
            {"repetitions", c.repetitions},
            {"length_scale", detail::optional_number(c.length_scale)},
            {"jitter", detail::number(c.jitter)}};
}

inline RunConfig run_config_from_json(const json& j) {
    RunConfig c;
    c.objective = j.at("objective").get<std::string>();
    c.policy.kind = parse_policy_kind(j.at("policy").get<std::string>());
    c.policy.mpi_alpha = detail::optional_number(j.at("mpi_alpha"));
    const auto& s = j.at("surrogate");
    const auto kind = s.at("kind").get<std::string>();
    if (kind != "fixedM" && kind != "alpha") throw UsageError("unknown surrogate kind '" + kind + "'");
    c.surrogate = {kind == "fixedM" ? SurrogateKind::fixed_M : SurrogateKind::alpha_improvement,
                   detail::number(s.at("value"))};
    c.n_l = j.at("n_l").get<std::size_t>();
    c.n_b = j.at("n_b").get<std::size_t>();
    c.epsilon = detail::number(j.at("epsilon"));
    c.n_init = j.at("n_init").get<std::size_t>();
    c.pool_size = j.at("pool_size").get<std::size_t>();
    c.pool_kind = parse_pool_kind(j.at("pool_kind").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.repetitions = j.at("repetitions").get<std::size_t>();
    c.length_scale = detail::optional_number(j.at("length_scale"));
    c.jitter = detail::number(j.at("jitter"));
    return c;
}

inline json to_json(const ObservationSet& o) {
    json pts = json::array(), ys = json::array(), prov = json::array();
    for (std::size_t i = 0; i < o.size(); ++i) {
        pts.push_back(detail::point(o.point(i)));
        ys.push_back(o.output(i));
        prov.push_back(o.provenance()[i] == Provenance::measured ? "measured" : "fabricated");
    }
    return {{"points", pts}, {"outputs", ys}, {"provenance", prov}};
}

inline json to_json(const RoundRecord& r) {
    json outs = json::array();
    for (double y : r.outputs) outs.push_back(y);
    return {{"entries", detail::entries_json(r.entries)},
            {"stop_bound", detail::optional_number(r.stop_bound)},
            {"outputs", outs}};
}

inline RoundRecord round_record_from_json(const json& j) {
    RoundRecord r;
    r.entries = detail::entries_from(j.at("entries"));
    r.stop_bound = detail::optional_number(j.at("stop_bound"));
    for (const auto& y : j.at("outputs")) r.outputs.push_back(detail::number(y));
    return r;
}

inline json to_json(const RunRecord& r) {
    json rounds = json::array();
    for (const auto& round : r.rounds) rounds.push_back(to_json(round));
    json init_pts = json::array();
    for (const auto& p : r.initial_points) init_pts.push_back(detail::point(p));
    json trace = json::array();
    for (double g : r.regret_trace) trace.push_back(g);
    return {{"config", to_json(r.config)},
            {"initial_points", init_pts},
            {"initial_outputs", r.initial_outputs},
            {"rounds", rounds},
            {"T", r.T},
            {"best_output", detail::number(r.best_output)},
            {"best_point", detail::point(r.best_point)},
            {"known_max", detail::optional_number(r.known_max)},
            {"regret", detail::optional_number(r.regret)},
            {"regret_clamped", r.regret_clamped},
            {"regret_trace", trace},
            {"speedup", r.speedup},
            {"observations", to_json(r.observations)},
            {"failed", r.failed},
            {"error", r.error},
            {"warnings", r.warnings},
            {"diagnostics", {{"clamped_variances", r.clamped_variances}, {"jitter_escalations", r.jitter_escalations}}}};
}

inline json Study::to_json() const {
    json bounds = json::array();
    for (const auto& b : objective_.bounds()) bounds.push_back({b.low, b.high});
    json pending = nullptr;
    if (pending_)
        pending = {{"initial", pending_initial_},
                   {"entries", detail::entries_json(pending_->entries)},
                   {"stop_bound", detail::optional_number(pending_->stop_bound)},
                   {"warnings", pending_->warnings}};
    json init_pts = json::array();
    for (const auto& p : initial_points_) init_pts.push_back(detail::point(p));
    json rounds = json::array();
    for (const auto& r : rounds_) rounds.push_back(dynbatch::to_json(r));
    return {{"schema", "dynbatch.study"},
            {"schema_version", kStudySchemaVersion},
            {"config", dynbatch::to_json(config_)},
            {"bounds", bounds},
            {"rng", {{"algorithm", "splitmix64"}, {"seed", config_.seed}, {"next_round", budget_.rounds_used}}},
            {"initialized", initialized_},
            {"observations", dynbatch::to_json(observations_)},
            {"pending", pending},
            {"budget",
             {{"n_l_remaining", budget_.n_l_remaining}, {"n_b", budget_.n_b}, {"rounds_used", budget_.rounds_used}}},
            {"initial_design", {{"points", init_pts}, {"outputs", initial_outputs_}}},
            {"rounds", rounds},
            {"warnings", warnings_},
            {"diagnostics",
             {{"clamped_variances", diagnostics_->clamped_variances.load()},
              {"jitter_escalations", diagnostics_->jitter_escalations.load()}}}};
}

inline Study Study::from_json(const json& j) {
    if (!j.contains("config")) throw UsageError("study document has no config");
    return from_json(j, make_objective(j.at("config").at("objective").get<std::string>()));
}

inline Study Study::from_json(const json& j, Objective objective) {
    try {
        if (j.value("schema", std::string()) != "dynbatch.study") throw UsageError("not a study document");
        const int version = j.at("schema_version").get<int>();
        if (version != kStudySchemaVersion)
            throw UsageError("unsupported study schema_version " + std::to_string(version));
        Study s(std::move(objective), run_config_from_json(j.at("config")));
        const auto& b = j.at("bounds");
        const auto& ob = s.objective_.bounds();
        if (b.size() != ob.size()) throw UsageError("study bounds do not match the objective");
        for (std::size_t i = 0; i < ob.size(); ++i)
            if (b[i][0].get<double>() != ob[i].low || b[i][1].get<double>() != ob[i].high)
                throw UsageError("study bounds do not match the objective");

        const auto& obs = j.at("observations");
        for (std::size_t i = 0; i < obs.at("points").size(); ++i) {
            const auto prov = obs.at("provenance")[i].get<std::string>();
            if (prov != "measured") throw UsageError("study observations must all be measured");
            s.observations_.add(detail::point(obs.at("points")[i]), detail::number(obs.at("outputs")[i]));
        }
        s.initialized_ = j.at("initialized").get<bool>();
        const auto& bud = j.at("budget");
        s.budget_ = {bud.at("n_l_remaining").get<std::size_t>(), bud.at("n_b").get<std::size_t>(),
                     bud.at("rounds_used").get<std::size_t>()};
        const auto& p = j.at("pending");
        if (!p.is_null()) {
            PendingBatch batch;
            batch.entries = detail::entries_from(p.at("entries"));
            batch.stop_bound = detail::optional_number(p.at("stop_bound"));
            batch.warnings = p.at("warnings").get<std::vector<std::string>>();
            s.pending_ = std::move(batch);
            s.pending_initial_ = p.at("initial").get<bool>();
        }
        const auto& init = j.at("initial_design");
        for (const auto& pt : init.at("points")) s.initial_points_.push_back(detail::point(pt));
        for (const auto& y : init.at("outputs")) s.initial_outputs_.push_back(detail::number(y));
        for (const auto& r : j.at("rounds")) s.rounds_.push_back(round_record_from_json(r));
        s.warnings_ = j.at("warnings").get<std::vector<std::string>>();
        const auto& d = j.at("diagnostics");
        s.diagnostics_->clamped_variances = d.at("clamped_variances").get<std::uint64_t>();
        s.diagnostics_->jitter_escalations = d.at("jitter_escalations").get<std::uint64_t>();
        return s;
    } catch (const json::exception& e) {
        throw UsageError(std::string("malformed study document: ") + e.what());
    }
}

}  // namespace dynbatch
