#pragma once

#include <cstddef>
#include <stdexcept>

#include "dynbatch/error.hpp"

namespace dynbatch {

/// Fraction of the budget saved in rounds: (n_l - T) / n_l.
inline double compute_speedup(std::size_t n_l, std::size_t rounds) {
    if (n_l == 0) throw UsageError("compute_speedup: n_l must be >= 1");
    if (rounds > n_l) throw UsageError("compute_speedup: more rounds than experiments");
    return static_cast<double>(n_l - rounds) / static_cast<double>(n_l);
}

struct Regret {
    double value = 0.0;
    /// The best output exceeded known_max; known_max needs re-deriving.
    bool clamped = false;
};

inline Regret compute_regret(double known_max, double best) noexcept {
    const double r = known_max - best;
    if (r < 0.0) return {0.0, true};
    return {r, false};
}

}  // namespace dynbatch
