#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "support.hpp"

namespace {

using namespace dynbatch;
using test::sample_normals;
using test::random_lookahead_case;
using test::random_point;
using test::unit_cube;

const double kSqrt2OverPi = std::sqrt(2.0 / std::numbers::pi);

Point pt(std::initializer_list<double> v) {
    Point p(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) p[i++] = x;
    return p;
}

TEST(Context, FarPendingPointHasUnitM) {
    ObservationSet obs(Bounds(2, Interval{0.0, 10.0}));
    obs.add(pt({0.0, 0.0}), 1.0);
    obs.add(pt({0.5, 0.0}), 2.0);
    const auto model = fit(obs, {0.2, 1e-8});
    const auto ctx = make_context(model, std::vector<Point>{pt({9.0, 9.0})});
    EXPECT_NEAR(ctx.m()(0, 0), 1.0, 1e-7);
    EXPECT_NEAR(ctx.sigma_star()[0], 1.0, 1e-12);
}

TEST(Context, PendingOnObservationIsRejected) {
    ObservationSet obs(unit_cube(2));
    obs.add(pt({0.3, 0.3}), 1.0);
    const auto model = fit(obs, {0.1, 1e-8});
    EXPECT_THROW(make_context(model, std::vector<Point>{pt({0.3, 0.3})}), UsageError);
}

TEST(Context, DuplicatePendingPointsAreRejected) {
    ObservationSet obs(unit_cube(2));
    obs.add(pt({0.3, 0.3}), 1.0);
    const auto model = fit(obs, {0.1, 1e-8});
    EXPECT_THROW(make_context(model, std::vector<Point>{pt({0.5, 0.5}), pt({0.5, 0.5})}), UsageError);
    EXPECT_THROW(make_context(model, std::vector<Point>{}), UsageError);
    EXPECT_THROW(make_context(model, std::vector<Point>{pt({0.5})}), UsageError);
}

TEST(Context, TwoPendingMatchesDirectInverse) {
    SplitMix64 rng(31);
    const auto c = random_lookahead_case(rng, 3, 8, 2);
    const auto model = fit(c.obs, c.cfg);
    const auto ctx = make_context(model, c.pending);

    const test::NaiveGp naive(c.obs, c.cfg.length_scale, c.cfg.jitter);
    Eigen::Matrix2d S;
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) {
            const auto ki = naive.k(c.pending[static_cast<std::size_t>(i)]);
            const auto kj = naive.k(c.pending[static_cast<std::size_t>(j)]);
            S(i, j) = static_cast<double>(naive.kernel(c.pending[static_cast<std::size_t>(i)],
                                                       c.pending[static_cast<std::size_t>(j)]) -
                                          ki.dot(naive.K_inv * kj));
        }
    S.diagonal().array() += c.cfg.jitter;
    const double det = S(0, 0) * S(1, 1) - S(0, 1) * S(1, 0);
    Eigen::Matrix2d inv;
    inv << S(1, 1), -S(0, 1), -S(1, 0), S(0, 0);
    inv /= det;
    const Eigen::MatrixXd m = ctx.m();
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_NEAR(m(i, j), inv(i, j), 1e-8 * std::max(1.0, std::abs(inv(i, j))));
}

TEST(Context, SigmaStarIsPendingPosteriorStddev) {
    SplitMix64 rng(2);
    const auto c = random_lookahead_case(rng, 2, 10, 3);
    const auto model = fit(c.obs, c.cfg);
    const auto ctx = make_context(model, c.pending);
    for (std::size_t i = 0; i < c.pending.size(); ++i) {
        EXPECT_NEAR(ctx.sigma_star()[static_cast<Eigen::Index>(i)], model.posterior(c.pending[i]).stddev(), 1e-10);
        EXPECT_GT(ctx.sigma_star()[static_cast<Eigen::Index>(i)], 0.0);
    }
}

TEST(VarianceReduction, NearSelfSamplingRemovesAllVariance) {
    ObservationSet obs(unit_cube(2));
    obs.add(pt({0.1, 0.2}), 1.0);
    obs.add(pt({0.8, 0.7}), -1.0);
    const auto model = fit(obs, {0.2, 1e-8});
    const Point x = pt({0.4, 0.5});
    const auto ctx = make_context(model, std::vector<Point>{x});
    const Point z = pt({0.4 + 1e-9, 0.5});
    EXPECT_NEAR(ctx.variance_reduction(z), model.posterior(z).variance, 1e-6);
}

TEST(VarianceReduction, QueryOnPendingOrObservedIsRejected) {
    ObservationSet obs(unit_cube(2));
    obs.add(pt({0.1, 0.2}), 1.0);
    const auto model = fit(obs, {0.2, 1e-8});
    const auto ctx = make_context(model, std::vector<Point>{pt({0.4, 0.5})});
    EXPECT_THROW(ctx.variance_reduction(pt({0.4, 0.5})), UsageError);
    EXPECT_THROW(ctx.mean_change_bound(pt({0.1, 0.2})), UsageError);
    EXPECT_THROW(ctx.mean_change_bound(pt({0.1})), UsageError);
}

TEST(VarianceReduction, IndependentQueryHasNoReduction) {
    ObservationSet obs(Bounds(2, Interval{0.0, 100.0}));
    obs.add(pt({1.0, 1.0}), 1.0);
    const auto model = fit(obs, {0.1, 1e-8});
    const auto ctx = make_context(model, std::vector<Point>{pt({50.0, 50.0})});
    const Point z = pt({90.0, 10.0});
    EXPECT_LE(ctx.variance_reduction(z), 1e-9);
    EXPECT_LE(ctx.mean_change_bound(z), 1e-9);
}

TEST(VarianceReduction, MatchesRefitOnRandomConfigurations) {
    SplitMix64 rng(2025);
    for (int trial = 0; trial < 30; ++trial) {
        const auto c = random_lookahead_case(rng, 2 + rng.below(5), 3 + rng.below(28), 1 + rng.below(5));
        const auto model = fit(c.obs, c.cfg);
        ObservationSet grown = c.obs;
        for (const auto& p : c.pending) grown.add(p, rng.uniform(-5.0, 5.0));
        const double expected = model.posterior(c.z).variance - fit(grown, c.cfg).posterior(c.z).variance;
        EXPECT_NEAR(make_context(model, c.pending).variance_reduction(c.z), expected, 1e-6) << "trial " << trial;
    }
}

TEST(MeanChangeBound, ZeroSigmaGivesZero) {
    Eigen::VectorXd v(3);
    v << 0.5, -2.0, 1.0;
    EXPECT_EQ(detail::mean_change_bound(v, Eigen::VectorXd::Zero(3)), 0.0);
}

TEST(MeanChangeBound, SinglePendingPointFormula) {
    SplitMix64 rng(77);
    const auto c = random_lookahead_case(rng, 2, 6, 1);
    const auto model = fit(c.obs, c.cfg);
    const auto ctx = make_context(model, c.pending);
    const test::NaiveGp naive(c.obs, c.cfg.length_scale, c.cfg.jitter);
    const Point& x = c.pending[0];
    const double w = static_cast<double>(naive.k(x).dot(naive.K_inv * naive.k(c.z)) - naive.kernel(c.z, x));
    const double s = static_cast<double>(1.0L - naive.k(x).dot(naive.K_inv * naive.k(x)));
    const double expected = std::abs(w / (s + c.cfg.jitter)) * kSqrt2OverPi * std::sqrt(s);
    EXPECT_NEAR(ctx.mean_change_bound(c.z), expected, 1e-8 * std::max(1.0, expected));
}

TEST(MeanChangeBound, HoldsAgainstMonteCarloRefits) {
    SplitMix64 rng(404);
    for (int trial = 0; trial < 15; ++trial) {
        const auto c = random_lookahead_case(rng, 2 + rng.below(4), 3 + rng.below(20), 1 + rng.below(4));
        const auto model = fit(c.obs, c.cfg);
        const auto ctx = make_context(model, c.pending);
        const double bound = ctx.mean_change_bound(c.z);

        const Eigen::VectorXd weights = test::refit_mean_weights(c);
        const auto n = static_cast<Eigen::Index>(c.obs.size());
        const auto k = static_cast<Eigen::Index>(c.pending.size());
        const Eigen::VectorXd y_obs = Eigen::Map<const Eigen::VectorXd>(c.obs.outputs().data(), n);
        Eigen::VectorXd mu_star(k);
        for (Eigen::Index i = 0; i < k; ++i) mu_star[i] = model.posterior(c.pending[static_cast<std::size_t>(i)]).mean;
        const Eigen::MatrixXd L = ctx.schur().llt().matrixL();
        const double mu_z = model.posterior(c.z).mean;

        const int draws = 10000;
        const Eigen::MatrixXd y_star = (L * sample_normals(rng, k, draws)).colwise() + mu_star;
        const double base = weights.head(n).dot(y_obs);
        Eigen::ArrayXd change = ((weights.tail(k).transpose() * y_star).array() + base - mu_z).abs().transpose();
        const double mean = change.mean();
        const double se = std::sqrt((change - mean).square().sum() / (draws - 1.0) / draws);
        EXPECT_LE(mean, bound + 3.0 * se) << "trial " << trial;
    }
}

TEST(MeanChangeBound, ComponentDeviationMatchesHalfNormalMean) {
    SplitMix64 rng(9);
    const auto c = random_lookahead_case(rng, 2, 6, 2);
    const auto model = fit(c.obs, c.cfg);
    const auto ctx = make_context(model, c.pending);
    const Eigen::MatrixXd L = ctx.schur().llt().matrixL();
    const Eigen::MatrixXd u = L * sample_normals(rng, 2, 100000);
    for (Eigen::Index i = 0; i < 2; ++i) {
        const double empirical = u.row(i).cwiseAbs().mean();
        const double expected = kSqrt2OverPi * ctx.sigma_star()[i];
        EXPECT_NEAR(empirical / expected, 1.0, 0.02);
    }
}

TEST(Lookahead, IndependentOfOutputs) {
    SplitMix64 rng(123);
    for (int trial = 0; trial < 10; ++trial) {
        const auto c = random_lookahead_case(rng, 3, 10, 3);
        ObservationSet relabelled(c.bounds);
        for (std::size_t i = 0; i < c.obs.size(); ++i) relabelled.add(c.obs.point(i), rng.uniform(-100.0, 100.0));
        const auto a = make_context(fit(c.obs, c.cfg), c.pending);
        const auto b = make_context(fit(relabelled, c.cfg), c.pending);
        EXPECT_EQ(a.variance_reduction(c.z), b.variance_reduction(c.z));
        EXPECT_EQ(a.mean_change_bound(c.z), b.mean_change_bound(c.z));
    }
}

TEST(Lookahead, NonNegativeOnRandomInstances) {
    SplitMix64 rng(55);
    for (int trial = 0; trial < 200; ++trial) {
        const auto c = random_lookahead_case(rng, 2 + rng.below(5), rng.below(30), 1 + rng.below(5));
        const auto ctx = make_context(fit(c.obs, c.cfg), c.pending);
        EXPECT_GE(ctx.variance_reduction(c.z), -1e-9);
        EXPECT_GE(ctx.mean_change_bound(c.z), 0.0);
    }
}

TEST(Lookahead, BoundMatchesEnlargedModelFormula) {
    SplitMix64 rng(8);
    auto c = random_lookahead_case(rng, 2, 5, 2);
    const auto before = make_context(fit(c.obs, c.cfg), c.pending).mean_change_bound(c.z);
    ObservationSet grown = c.obs;
    for (int i = 0; i < 10;) {
        const Point p = random_point(rng, c.bounds);
        try {
            grown.add(p, 0.0);
            ++i;
        } catch (const UsageError&) {
        }
    }
    const auto model = fit(grown, c.cfg);
    const auto ctx = make_context(model, c.pending);
    const Eigen::VectorXd w = ctx.weights(c.z);
    const double direct = (ctx.m() * w).cwiseAbs().maxCoeff() * kSqrt2OverPi * ctx.sigma_star().sum();
    EXPECT_NEAR(ctx.mean_change_bound(c.z), direct, 1e-10 * std::max(1.0, direct));
    EXPECT_NE(before, ctx.mean_change_bound(c.z));
}

TEST(Lookahead, MedianBoundShrinksWithData) {
    SplitMix64 rng(2718);
    const auto b = unit_cube(2);
    const KernelConfig cfg{default_length_scale(b), 1e-8};
    const std::vector<Point> pending{pt({0.35, 0.6}), pt({0.7, 0.25})};
    std::vector<Point> queries;
    const auto all = test::random_observations(rng, b, 50);
    for (int i = 0; i < 20; ++i) queries.push_back(random_point(rng, b));

    auto median_bound = [&](std::size_t n) {
        ObservationSet obs(b);
        for (std::size_t i = 0; i < n; ++i) obs.add(all.point(i), all.output(i));
        const auto ctx = make_context(fit(obs, cfg), pending);
        std::vector<double> v;
        for (const auto& z : queries) v.push_back(ctx.mean_change_bound(z));
        std::nth_element(v.begin(), v.begin() + 10, v.end());
        return v[10];
    };
    const double m5 = median_bound(5), m20 = median_bound(20), m50 = median_bound(50);
    EXPECT_GT(m5, m20);
    EXPECT_GT(m20, m50);
}

}  // namespace
