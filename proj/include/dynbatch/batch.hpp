#pragma once

// Dynamic batch selection.
//
// A round starts by taking the policy's argmax x1 against O. Each chosen point
// is then treated as observed with an optimistic fabricated output, and the
// next argmax z is taken against O u A. z joins the batch only while the
// mean-change bound for z against all of A stays within epsilon, the batch is
// below n_b, and budget remains.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dynbatch/acquisition.hpp"
#include "dynbatch/error.hpp"
#include "dynbatch/gp.hpp"
#include "dynbatch/lookahead.hpp"
#include "dynbatch/rng.hpp"

namespace dynbatch {

enum class PoolKind { uniform, halton, grid, fixed };

inline std::string to_string(PoolKind k) {
    switch (k) {
        case PoolKind::uniform: return "uniform";
        case PoolKind::halton: return "halton";
        case PoolKind::grid: return "grid";
        case PoolKind::fixed: return "fixed";
    }
    return "uniform";
}

inline PoolKind parse_pool_kind(std::string_view s) {
    if (s == "uniform") return PoolKind::uniform;
    if (s == "halton") return PoolKind::halton;
    if (s == "grid") return PoolKind::grid;
    if (s == "fixed") return PoolKind::fixed;
    throw UsageError("unknown pool kind '" + std::string(s) + "'");
}

namespace detail {

inline double radical_inverse(std::uint64_t index, unsigned base) noexcept {
    double result = 0.0;
    double f = 1.0 / base;
    while (index > 0) {
        result += f * static_cast<double>(index % base);
        index /= base;
        f /= base;
    }
    return result;
}

inline constexpr unsigned kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71};

}  // namespace detail

/// Finite stand-in for the continuous domain when maximizing an acquisition.
class CandidatePool {
public:
    static CandidatePool uniform(const Bounds& bounds, std::size_t size, SplitMix64 rng) {
        validate_bounds(bounds);
        if (size == 0) throw UsageError("candidate pool size must be >= 1");
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(bounds.size()), static_cast<Eigen::Index>(size));
        for (Eigen::Index c = 0; c < pts.cols(); ++c)
            for (Eigen::Index r = 0; r < pts.rows(); ++r) {
                const auto& b = bounds[static_cast<std::size_t>(r)];
                pts(r, c) = rng.uniform(b.low, b.high);
            }
        return CandidatePool(std::move(pts), PoolKind::uniform);
    }

    /// Halton points with indices skip+1 .. skip+size.
    static CandidatePool halton(const Bounds& bounds, std::size_t size, std::uint64_t skip = 0) {
        validate_bounds(bounds);
        if (size == 0) throw UsageError("candidate pool size must be >= 1");
        if (bounds.size() > std::size(detail::kPrimes)) throw UsageError("halton pool supports at most 20 dimensions");
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(bounds.size()), static_cast<Eigen::Index>(size));
        for (Eigen::Index c = 0; c < pts.cols(); ++c)
            for (Eigen::Index r = 0; r < pts.rows(); ++r) {
                const auto& b = bounds[static_cast<std::size_t>(r)];
                const double u = detail::radical_inverse(skip + static_cast<std::uint64_t>(c) + 1,
                                                         detail::kPrimes[static_cast<std::size_t>(r)]);
                pts(r, c) = b.low + u * b.width();
            }
        return CandidatePool(std::move(pts), PoolKind::halton);
    }

    /// Full tensor grid with the largest per-axis count whose product stays within `size` (at least 2 per axis).
    static CandidatePool grid(const Bounds& bounds, std::size_t size) {
        validate_bounds(bounds);
        const auto d = static_cast<double>(bounds.size());
        auto per_axis = static_cast<std::size_t>(std::floor(std::pow(static_cast<double>(size), 1.0 / d) + 1e-9));
        per_axis = std::max<std::size_t>(per_axis, 2);
        std::size_t total = 1;
        for (std::size_t i = 0; i < bounds.size(); ++i) total *= per_axis;
        Eigen::MatrixXd pts(static_cast<Eigen::Index>(bounds.size()), static_cast<Eigen::Index>(total));
        for (std::size_t c = 0; c < total; ++c) {
            std::size_t rest = c;
            for (std::size_t r = 0; r < bounds.size(); ++r) {
                const std::size_t k = rest % per_axis;
                rest /= per_axis;
                pts(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    bounds[r].low + bounds[r].width() * static_cast<double>(k) / static_cast<double>(per_axis - 1);
            }
        }
        return CandidatePool(std::move(pts), PoolKind::grid);
    }

    static CandidatePool from_points(const std::vector<Point>& points) {
        if (points.empty()) throw UsageError("candidate pool must hold at least one point");
        Eigen::MatrixXd pts(points.front().size(), static_cast<Eigen::Index>(points.size()));
        for (std::size_t c = 0; c < points.size(); ++c) {
            if (points[c].size() != pts.rows()) throw UsageError("candidate pool points differ in dimension");
            pts.col(static_cast<Eigen::Index>(c)) = points[c];
        }
        return CandidatePool(std::move(pts), PoolKind::fixed);
    }

    std::size_t size() const noexcept { return static_cast<std::size_t>(points_.cols()); }
    std::size_t dim() const noexcept { return static_cast<std::size_t>(points_.rows()); }
    Point point(std::size_t i) const { return points_.col(static_cast<Eigen::Index>(i)); }
    const Eigen::MatrixXd& matrix() const noexcept { return points_; }
    PoolKind kind() const noexcept { return kind_; }

private:
    CandidatePool(Eigen::MatrixXd pts, PoolKind kind) : points_(std::move(pts)), kind_(kind) {}

    Eigen::MatrixXd points_;
    PoolKind kind_;
};

struct Selection {
    std::size_t index = 0;
    Point point;
    double score = 0.0;
};

/// Per-candidate policy scores; candidates coinciding with an observation score NaN.
inline Eigen::VectorXd score_pool(const GpModel& model, const CandidatePool& pool, const PolicySpec& policy,
                                  const IncumbentStats& inc) {
    if (pool.dim() != model.dim()) throw UsageError("candidate pool dimension does not match the model");
    Eigen::VectorXd mean, var;
    model.posterior(pool.matrix(), mean, var);
    Eigen::VectorXd scores(static_cast<Eigen::Index>(pool.size()));
    const auto& obs = model.observations();
    for (Eigen::Index c = 0; c < scores.size(); ++c) {
        bool taken = false;
        for (const auto& p : obs.points())
            if (is_duplicate(pool.matrix().col(c), p, obs.bounds())) {
                taken = true;
                break;
            }
        scores[c] = taken ? std::numeric_limits<double>::quiet_NaN() : score(policy, {mean[c], var[c]}, inc);
    }
    return scores;
}

/// Highest-scoring pool point not already in the model's observations; ties go to the lowest index.
inline std::optional<Selection> try_select_argmax(const GpModel& model, const CandidatePool& pool,
                                                  const PolicySpec& policy, const IncumbentStats& inc) {
    const Eigen::VectorXd scores = score_pool(model, pool, policy, inc);
    std::optional<std::size_t> best;
    for (Eigen::Index c = 0; c < scores.size(); ++c) {
        if (std::isnan(scores[c])) continue;
        if (!best || scores[c] > scores[static_cast<Eigen::Index>(*best)]) best = static_cast<std::size_t>(c);
    }
    if (!best) return std::nullopt;
    return Selection{*best, pool.point(*best), scores[static_cast<Eigen::Index>(*best)]};
}

inline Selection select_argmax(const GpModel& model, const CandidatePool& pool, const PolicySpec& policy,
                               const IncumbentStats& inc) {
    auto s = try_select_argmax(model, pool, policy, inc);
    if (!s) throw UsageError("candidate pool is empty after removing observed and pending points");
    return *std::move(s);
}

enum class SurrogateKind { fixed_M, alpha_improvement };

/// The optimistic output given to pending points: M, or (1 + alpha) * y_max.
struct SurrogateRule {
    SurrogateKind kind = SurrogateKind::alpha_improvement;
    double value = 0.1;  // M for fixed_M, alpha otherwise

    static SurrogateRule fixed(double M) { return {SurrogateKind::fixed_M, M}; }
    static SurrogateRule alpha(double a) { return {SurrogateKind::alpha_improvement, a}; }

    void validate() const {
        if (!std::isfinite(value)) throw UsageError("surrogate value must be finite");
        if (kind == SurrogateKind::alpha_improvement && value < 0.0) throw UsageError("surrogate alpha must be >= 0");
    }

    double fabricated_output(double y_max) const noexcept {
        return kind == SurrogateKind::fixed_M ? value : (1.0 + value) * y_max;
    }
};

inline std::string to_string(const SurrogateRule& s) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s:%.17g", s.kind == SurrogateKind::fixed_M ? "fixedM" : "alpha", s.value);
    return buf;
}

struct BudgetState {
    std::size_t n_l_remaining = 0;
    std::size_t n_b = 1;
    std::size_t rounds_used = 0;
};

struct PendingEntry {
    Point point;
    double fabricated_output = 0.0;
    double score = 0.0;                 // acquisition value when selected
    std::optional<double> bound;        // mean-change bound at test time; absent for the first entry
};

struct PendingBatch {
    std::vector<PendingEntry> entries;
    std::optional<double> stop_bound;   // bound of the candidate that ended the round, if the epsilon test did
    std::vector<std::string> warnings;

    std::size_t size() const noexcept { return entries.size(); }
    std::vector<Point> points() const {
        std::vector<Point> pts;
        pts.reserve(entries.size());
        for (const auto& e : entries) pts.push_back(e.point);
        return pts;
    }
};

/// One round of the dynamic batch rule. `model` must be conditioned on measured outputs only.
inline PendingBatch propose_batch(const GpModel& model, const CandidatePool& pool, BudgetState& budget,
                                  const SurrogateRule& surrogate, double epsilon,
                                  const PolicySpec& policy = PolicySpec::ei()) {
    if (budget.n_l_remaining < 1) throw UsageError("propose_batch: no budget remaining");
    if (budget.n_b < 1) throw UsageError("propose_batch: n_b must be >= 1");
    if (std::isnan(epsilon)) throw UsageError("propose_batch: epsilon is NaN");
    if (model.observations().empty()) throw UsageError("propose_batch: model has no observations");
    policy.validate();
    surrogate.validate();

    const double y_max = model.observations().max_output();
    const double fabricated = surrogate.fabricated_output(y_max);

    PendingBatch batch;
    if (fabricated < y_max)
        batch.warnings.push_back("fabricated output " + std::to_string(fabricated) + " is below the incumbent " +
                                 std::to_string(y_max));

    const Selection first = select_argmax(model, pool, policy, {y_max});
    batch.entries.push_back({first.point, fabricated, first.score, std::nullopt});
    --budget.n_l_remaining;

    const IncumbentStats inflated{std::max(y_max, fabricated)};
    GpModel augmented = model;
    while (budget.n_l_remaining > 0 && batch.size() < budget.n_b) {
        const std::pair<Point, double> last{batch.entries.back().point, fabricated};
        augmented = augmented.extend(std::span(&last, 1), Provenance::fabricated);
        const auto z = try_select_argmax(augmented, pool, policy, inflated);
        if (!z) break;
        const auto pending = batch.points();
        const double bound = make_context(model, pending).mean_change_bound(z->point);
        if (!(bound <= epsilon)) {
            batch.stop_bound = bound;
            break;
        }
        batch.entries.push_back({z->point, fabricated, z->score, bound});
        --budget.n_l_remaining;
    }
    ++budget.rounds_used;
    return batch;
}

}  // namespace dynbatch
