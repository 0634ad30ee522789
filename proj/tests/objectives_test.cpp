#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "support.hpp"

namespace {

using namespace dynbatch;
using namespace dynbatch::test;

Point pt(std::initializer_list<double> v) {
    Point p(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) p[i++] = x;
    return p;
}


TEST(Cosines, NamedValues) {
    EXPECT_NEAR(cosines2(pt({0.3125, 0.3125})), 1.6, 1e-15);
    EXPECT_NEAR(cosines2(pt({0.0, 0.0})), 0.5, 1e-15);
}

TEST(Rosenbrock, NamedValues) {
    EXPECT_EQ(rosenbrock2(pt({1.0, 1.0})), 10.0);
    EXPECT_EQ(rosenbrock2(pt({0.0, 0.0})), 9.0);
}

TEST(Hartman, OriginMatchesDirectSum) {
    for (std::size_t d : {3u, 6u}) {
        const Point zero = Point::Zero(static_cast<Eigen::Index>(d));
        EXPECT_NEAR(hartman(zero, d) / oracle(d == 3 ? "hartman3" : "hartman6", zero), 1.0, 1e-14);
    }
}

TEST(Hartman, PositiveEverywhere) {
    SplitMix64 rng(6);
    for (int i = 0; i < 1000; ++i) {
        EXPECT_GT(hartman(random_point(rng, hartman_bounds(3)), 3), 0.0);
        EXPECT_GT(hartman(random_point(rng, hartman_bounds(6)), 6), 0.0);
    }
    EXPECT_THROW(hartman(Point::Zero(4), 4), UsageError);
}

TEST(Shekel, CentreSpikesToInverseBeta) {
    const Point centre = pt({4.0, 4.0, 4.0, 4.0});
    double others = 0.0;
    for (int i = 1; i < 10; ++i) {
        const Eigen::Vector4d c(kShekelC[i][0], kShekelC[i][1], kShekelC[i][2], kShekelC[i][3]);
        others += 1.0 / ((centre - c).squaredNorm() + kShekelBeta[i] / 10.0);
    }
    EXPECT_NEAR(shekel4(centre), 10.0 + others, 1e-12);
    EXPECT_GT(shekel4(centre), 10.0);
}

TEST(Shekel, CornerIsSmallPositive) {
    const double v = shekel4(pt({6.0, 3.0, 6.0, 3.0}));
    EXPECT_GT(v, 0.0);
    EXPECT_LT(v, 0.2 * shekel4(pt({4.0, 4.0, 4.0, 4.0})));
    EXPECT_NEAR(v, shekel_oracle(pt({6.0, 3.0, 6.0, 3.0})), 1e-14);
}

TEST(Michalewicz, NamedValues) {
    EXPECT_EQ(michalewicz5(Point::Zero(5)), 0.0);
    EXPECT_NEAR(michalewicz5(pt({std::numbers::pi / 2, 0, 0, 0, 0})), -std::pow(std::sin(std::numbers::pi / 4), 20),
                1e-17);
    EXPECT_NEAR(michalewicz5(pt({std::numbers::pi / 2, 0, 0, 0, 0})), -1.0 / 1024.0, 1e-17);
}

TEST(Objectives, OutOfDomainIsRejected) {
    EXPECT_THROW(cosines2(pt({1.1, 0.5})), UsageError);
    EXPECT_THROW(rosenbrock2(pt({0.5})), UsageError);
    EXPECT_THROW(shekel4(pt({0, 4, 4, 4})), UsageError);
    EXPECT_THROW(michalewicz5(pt({4, 0, 0, 0, 0})), UsageError);
    EXPECT_THROW(make_objective("hartman3").evaluate(pt({0.5, 0.5, -0.1})), UsageError);
}

TEST(Registry, ResolvesAllNames) {
    for (const auto& name : registered_objectives()) {
        const auto f = make_objective(name);
        EXPECT_EQ(f.name(), name);
        EXPECT_TRUE(f.known_max().has_value());
        EXPECT_TRUE(f.has_evaluator());
    }
    EXPECT_THROW(make_objective("branin"), UsageError);
}

TEST(Registry, Dimensions) {
    EXPECT_EQ(make_objective("cosines2").dim(), 2u);
    EXPECT_EQ(make_objective("hartman6").dim(), 6u);
    EXPECT_EQ(make_objective("shekel4").bounds()[2].low, 3.0);
    EXPECT_EQ(make_objective("michalewicz5").bounds()[4].high, std::numbers::pi);
}

TEST(Registry, BoxObjective) {
    const auto f = make_objective("box:0:1,-2:2");
    EXPECT_EQ(f.dim(), 2u);
    EXPECT_EQ(f.bounds()[1].low, -2.0);
    EXPECT_FALSE(f.has_evaluator());
    EXPECT_THROW(f.evaluate(pt({0.5, 0.0})), ObjectiveFailure);
    EXPECT_THROW(make_objective("box:1:0"), UsageError);
    EXPECT_THROW(make_objective("box:abc"), UsageError);
}

TEST(Registry, FormulaFidelity) {
    SplitMix64 rng(1001);
    for (const auto& name : registered_objectives()) {
        const auto f = make_objective(name);
        for (int i = 0; i < 1000; ++i) {
            const Point p = random_point(rng, f.bounds());
            const double want = oracle(name, p);
            EXPECT_LE(std::abs(f(p) - want), 1e-12 * std::max(std::abs(want), 1e-300)) << name;
        }
    }
}

TEST(Registry, KnownMaxDominatesSamples) {
    SplitMix64 rng(77);
    for (const auto& name : registered_objectives()) {
        const auto f = make_objective(name);
        double best = -std::numeric_limits<double>::infinity();
        for (int i = 0; i < 1000000; ++i) best = std::max(best, f(random_point(rng, f.bounds())));
        EXPECT_LE(best, *f.known_max()) << name;
    }
}

TEST(Registry, KnownMaxIsAttained) {
    EXPECT_NEAR(cosines2(pt({0.3125, 0.3125})), known_max::cosines2, 1e-15);
    EXPECT_EQ(rosenbrock2(pt({1, 1})), known_max::rosenbrock2);
    EXPECT_NEAR(hartman(pt({0.114614, 0.555649, 0.852547}), 3), known_max::hartman3, 1e-6);
    EXPECT_EQ(michalewicz5(Point::Zero(5)), known_max::michalewicz5);
}

const char* kThreeRows = "x1,x2,y\n0.1,0.2,1.5\n0.4,0.9,-2\n0.7,0.3,0.25\n";

TEST(Dataset, ParsesRows) {
    std::istringstream in(kThreeRows);
    const auto ds = parse_dataset(in);
    EXPECT_EQ(ds.dim(), 2u);
    EXPECT_EQ(ds.points.size(), 3u);
    EXPECT_EQ(ds.outputs[1], -2.0);
    EXPECT_EQ(ds.bounds()[1].low, 0.2);
    EXPECT_EQ(ds.bounds()[1].high, 0.9);
}

TEST(Dataset, ObjectiveLooksUpRows) {
    std::istringstream in(kThreeRows);
    const auto f = parse_dataset(in).to_objective("ds");
    ASSERT_TRUE(f.candidates().has_value());
    EXPECT_EQ(f.candidates()->size(), 3u);
    EXPECT_EQ(f(pt({0.4, 0.9})), -2.0);
    EXPECT_EQ(*f.known_max(), 1.5);
    EXPECT_THROW(f(pt({0.5, 0.5})), ObjectiveFailure);
}

TEST(Dataset, OtherDelimiters) {
    std::istringstream tabs("a\tb\ty\n1\t2\t3\n4\t5\t6\n");
    EXPECT_EQ(parse_dataset(tabs).points.size(), 2u);
    std::istringstream semis("\xEF\xBB\xBF" "a;y\n1;2\n3;4\n");
    EXPECT_EQ(parse_dataset(semis).columns[0], "a");
}

void expect_rejected(const std::string& text, const std::string& fragment) {
    std::istringstream in(text);
    try {
        parse_dataset(in, "data.csv");
        FAIL() << "accepted: " << text;
    } catch (const UsageError& e) {
        EXPECT_NE(std::string(e.what()).find(fragment), std::string::npos) << e.what();
    }
}

TEST(Dataset, RejectsMalformedInput) {
    expect_rejected("x,y\n1,2\n3,abc\n", "data.csv:3");
    expect_rejected("x,y\n1,2\n3\n", "data.csv:3");
    expect_rejected("1,2\n3,4\n", "header");
    expect_rejected("x,y\n1,2\n1,5\n", "duplicate");
    expect_rejected("", "empty");
    expect_rejected("x,y\n", "no data rows");
}

TEST(Dataset, RoundTripIsExact) {
    SplitMix64 rng(3);
    DatasetObjective ds;
    ds.columns = {"a", "b", "c", "y"};
    for (int i = 0; i < 50; ++i) {
        ds.points.push_back(random_point(rng, Bounds(3, Interval{-1e3, 1e3})));
        ds.outputs.push_back(rng.uniform(-1.0, 1.0) * 1e-7);
    }
    const auto path = std::filesystem::temp_directory_path() / "dynbatch_roundtrip.csv";
    write_dataset(path.string(), ds);
    const auto back = load_dataset(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(back.columns, ds.columns);
    ASSERT_EQ(back.points.size(), ds.points.size());
    for (std::size_t i = 0; i < ds.points.size(); ++i) {
        EXPECT_EQ(back.points[i], ds.points[i]);
        EXPECT_EQ(back.outputs[i], ds.outputs[i]);
    }
}

TEST(Dataset, MissingFileIsUsageError) {
    EXPECT_THROW(load_dataset("/nonexistent/file.csv"), UsageError);
    EXPECT_THROW(make_objective("dataset:/nonexistent/file.csv"), UsageError);
}

}  // namespace
