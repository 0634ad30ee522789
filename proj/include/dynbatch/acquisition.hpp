#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "dynbatch/error.hpp"
#include "dynbatch/gp.hpp"

namespace dynbatch {

inline double normal_pdf(double x) noexcept {
    return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double normal_cdf(double x) noexcept { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

namespace detail {

// phi(u) - u * Phi(-u), the standardized expected improvement.
//
// For large u both terms are nearly equal. There we use the Mills-ratio
// continued fraction Phi(-u)/phi(u) = 1/(u + 1/(u + 2/(u + 3/(u + ...)))),
// which gives phi(u) - u Phi(-u) = phi(u) * c / (u + c) with
// c = 1/(u + 2/(u + 3/(u + ...))), free of cancellation.
inline double standardized_ei(double u) noexcept {
    if (u < 6.0) return normal_pdf(u) - u * normal_cdf(-u);
    double tail = u;
    for (int k = 80; k >= 2; --k) tail = u + k / tail;
    const double c = 1.0 / tail;
    return normal_pdf(u) * c / (u + c);
}

}  // namespace detail

struct IncumbentStats {
    double y_max = 0.0;
};

/// EI = sigma * (phi(u) - u Phi(-u)), u = (y_max - mu) / sigma. Zero-variance limit is max(mu - y_max, 0).
inline double expected_improvement(const PosteriorPrediction& pred, const IncumbentStats& inc) noexcept {
    const double sigma = pred.stddev();
    if (!(sigma > 0.0)) return std::max(pred.mean - inc.y_max, 0.0);
    const double u = (inc.y_max - pred.mean) / sigma;
    return std::max(sigma * detail::standardized_ei(u), 0.0);
}

/// dEI/dmu at fixed sigma: Phi(-u).
inline double expected_improvement_dmu(const PosteriorPrediction& pred, const IncumbentStats& inc) noexcept {
    const double sigma = pred.stddev();
    if (!(sigma > 0.0)) return pred.mean > inc.y_max ? 1.0 : 0.0;
    return normal_cdf(-(inc.y_max - pred.mean) / sigma);
}

enum class PolicyKind { EI, MM, MUI, MPI };

/// MUI's upper-interval coefficient.
inline constexpr double kUpperIntervalZ = 1.96;

struct PolicySpec {
    PolicyKind kind = PolicyKind::EI;
    std::optional<double> mpi_alpha;

    static PolicySpec ei() { return {PolicyKind::EI, std::nullopt}; }
    static PolicySpec mm() { return {PolicyKind::MM, std::nullopt}; }
    static PolicySpec mui() { return {PolicyKind::MUI, std::nullopt}; }
    static PolicySpec mpi(double alpha) { return {PolicyKind::MPI, alpha}; }

    void validate() const {
        if (kind == PolicyKind::MPI) {
            if (!mpi_alpha) throw UsageError("MPI policy requires mpi_alpha");
            if (!(*mpi_alpha >= 0.0)) throw UsageError("mpi_alpha must be >= 0");
        }
    }
};

inline std::string to_string(PolicyKind kind) {
    switch (kind) {
        case PolicyKind::EI: return "EI";
        case PolicyKind::MM: return "MM";
        case PolicyKind::MUI: return "MUI";
        case PolicyKind::MPI: return "MPI";
    }
    return "EI";
}

inline PolicyKind parse_policy_kind(std::string_view s) {
    if (s == "EI") return PolicyKind::EI;
    if (s == "MM") return PolicyKind::MM;
    if (s == "MUI") return PolicyKind::MUI;
    if (s == "MPI") return PolicyKind::MPI;
    throw UsageError("unknown policy '" + std::string(s) + "' (expected EI, MM, MUI or MPI)");
}

/// The policy's objective; its argmax over candidates is the policy's choice.
inline double score(const PolicySpec& policy, const PosteriorPrediction& pred, const IncumbentStats& inc) {
    switch (policy.kind) {
        case PolicyKind::EI: return expected_improvement(pred, inc);
        case PolicyKind::MM: return pred.mean;
        case PolicyKind::MUI: return pred.mean + kUpperIntervalZ * pred.stddev();
        case PolicyKind::MPI: {
            if (!policy.mpi_alpha) throw UsageError("MPI policy requires mpi_alpha");
            const double target = (1.0 + *policy.mpi_alpha) * inc.y_max;
            const double sigma = pred.stddev();
            if (!(sigma > 0.0)) return pred.mean > target ? 1.0 : 0.0;
            return normal_cdf((pred.mean - target) / sigma);
        }
    }
    return 0.0;
}

}  // namespace dynbatch
