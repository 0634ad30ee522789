#pragma once

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "dynbatch/dynbatch.hpp"

namespace dynbatch::test {

inline Bounds unit_cube(std::size_t d) { return Bounds(d, Interval{0.0, 1.0}); }

inline Point random_point(SplitMix64& rng, const Bounds& b) {
    Point p(static_cast<Eigen::Index>(b.size()));
    for (std::size_t i = 0; i < b.size(); ++i) p[static_cast<Eigen::Index>(i)] = rng.uniform(b[i].low, b[i].high);
    return p;
}

inline std::vector<Point> random_points(SplitMix64& rng, const Bounds& b, std::size_t n) {
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(random_point(rng, b));
    return pts;
}

inline ObservationSet random_observations(SplitMix64& rng, const Bounds& b, std::size_t n) {
    ObservationSet obs(b);
    while (obs.size() < n) obs.add(random_point(rng, b), rng.uniform(-2.0, 2.0));
    return obs;
}

inline ObservationSet with_points(ObservationSet obs, const std::vector<Point>& pts, const std::vector<double>& ys) {
    for (std::size_t i = 0; i < pts.size(); ++i) obs.add(pts[i], ys[i]);
    return obs;
}

inline double se_kernel(const Point& x, const Point& y, double l) { return std::exp(-(x - y).squaredNorm() / l); }

/// Posterior computed with an explicit long-double inverse of (K + jitter I).
struct NaiveGp {
    using MatrixL = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
    using VectorL = Eigen::Matrix<long double, Eigen::Dynamic, 1>;

    MatrixL K_inv;
    VectorL weights;
    std::vector<Point> X;
    long double l = 1.0L;

    NaiveGp(const ObservationSet& obs, double length_scale, double jitter) : X(obs.points()), l(length_scale) {
        const auto n = static_cast<Eigen::Index>(X.size());
        MatrixL K(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) K(i, j) = kernel(X[i], X[j]);
        K.diagonal().array() += static_cast<long double>(jitter);
        K_inv = K.fullPivLu().inverse();
        VectorL y(n);
        for (Eigen::Index i = 0; i < n; ++i) y[i] = obs.outputs()[static_cast<std::size_t>(i)];
        weights = K_inv * y;
    }

    long double kernel(const Point& x, const Point& y) const {
        long double r2 = 0.0L;
        for (Eigen::Index i = 0; i < x.size(); ++i) {
            const long double diff = static_cast<long double>(x[i]) - static_cast<long double>(y[i]);
            r2 += diff * diff;
        }
        return std::exp(-r2 / l);
    }

    VectorL k(const Point& x) const {
        VectorL v(static_cast<Eigen::Index>(X.size()));
        for (std::size_t i = 0; i < X.size(); ++i) v[static_cast<Eigen::Index>(i)] = kernel(x, X[i]);
        return v;
    }

    double mean(const Point& x) const { return static_cast<double>(k(x).dot(weights)); }
    double variance(const Point& x) const {
        const VectorL kx = k(x);
        return static_cast<double>(1.0L - kx.dot(K_inv * kx));
    }
};

/// A random (O, x*, z) configuration for the lookahead oracles.
struct LookaheadCase {
    Bounds bounds;
    KernelConfig cfg;
    ObservationSet obs;
    std::vector<Point> pending;
    Point z;
};

inline LookaheadCase random_lookahead_case(SplitMix64& rng, std::size_t d, std::size_t n_obs, std::size_t n_pending) {
    LookaheadCase c{unit_cube(d), {}, ObservationSet(unit_cube(d)), {}, {}};
    c.cfg = {default_length_scale(c.bounds) * rng.uniform(5.0, 25.0), 1e-8};
    c.obs = random_observations(rng, c.bounds, n_obs);
    ObservationSet taken = c.obs;
    while (c.pending.size() < n_pending) {
        Point p = random_point(rng, c.bounds);
        if (taken.find(p)) continue;
        taken.add(p, 0.0);
        c.pending.push_back(std::move(p));
    }
    do {
        c.z = random_point(rng, c.bounds);
    } while (taken.find(c.z));
    return c;
}

/// Posterior mean at z after conditioning on O plus (pending, y*), as weights on [y_O; y*].
inline Eigen::VectorXd refit_mean_weights(const LookaheadCase& c) {
    ObservationSet all = c.obs;
    for (const auto& p : c.pending) all.add(p, 0.0);
    const auto model = fit(all, c.cfg);
    return model.solve(model.cross_kernel(Eigen::MatrixXd(c.z))).col(0);
}

/// Points chosen by a plain one-at-a-time EI loop over the same seeded design and pools.
inline std::vector<Point> sequential_ei_points(const Objective& f, const RunConfig& c) {
    const Bounds& b = f.bounds();
    SplitMix64 init = derive_stream(c.seed, "init");
    ObservationSet obs(b);
    for (std::size_t i = 0; i < c.n_init; ++i) {
        const Point p = random_point(init, b);
        obs.add(p, f(p));
    }
    const KernelConfig cfg{c.length_scale.value_or(default_length_scale(b)), c.jitter};
    std::vector<Point> chosen;
    for (std::size_t round = 0; round < c.n_l; ++round) {
        const auto model = fit(obs, cfg);
        const auto pool = CandidatePool::uniform(b, c.pool_size, derive_stream(c.seed, "pool", round));
        const auto s = select_argmax(model, pool, PolicySpec::ei(), {obs.max_output()});
        obs.add(s.point, f(s.point));
        chosen.push_back(s.point);
    }
    return chosen;
}

inline std::vector<Point> selected_points(const RunRecord& r) {
    std::vector<Point> pts;
    for (const auto& round : r.rounds)
        for (const auto& e : round.entries) pts.push_back(e.point);
    return pts;
}

inline Eigen::MatrixXd sample_normals(SplitMix64& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> n01;
    Eigen::MatrixXd out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = n01(rng);
    return out;
}

inline double rel_err(double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); }

}  // namespace dynbatch::test
