// Derives the known maxima stored in objectives.hpp.
//
// 2-d objectives: dense grid (step 1e-3) followed by Nelder-Mead polish of the
// best grid cells. Higher dimensions: multi-start Nelder-Mead from uniform
// random seeds. Prints one line per objective: name, max value, argmax.
//
//   derive_known_max [starts]     (default 10000)

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <string>
#include <vector>

#include "dynbatch/dynbatch.hpp"

namespace {

using namespace dynbatch;

Point clamp(Point p, const Bounds& b) {
    for (Eigen::Index i = 0; i < p.size(); ++i)
        p[i] = std::clamp(p[i], b[static_cast<std::size_t>(i)].low, b[static_cast<std::size_t>(i)].high);
    return p;
}

// Maximizes f from x0 with a box-clamped Nelder-Mead simplex.
std::pair<Point, double> nelder_mead(const Objective& f, const Point& x0, double step) {
    const auto& b = f.bounds();
    const auto d = x0.size();
    std::vector<Point> simplex{x0};
    for (Eigen::Index i = 0; i < d; ++i) {
        Point p = x0;
        const double w = b[static_cast<std::size_t>(i)].width() * step;
        p[i] += (p[i] + w <= b[static_cast<std::size_t>(i)].high) ? w : -w;
        simplex.push_back(clamp(p, b));
    }
    std::vector<double> val;
    for (auto& p : simplex) val.push_back(f(p));
    for (int it = 0; it < 20000; ++it) {
        std::vector<std::size_t> order(simplex.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](auto a, auto c) { return val[a] > val[c]; });
        std::vector<Point> s2;
        std::vector<double> v2;
        for (auto i : order) {
            s2.push_back(simplex[i]);
            v2.push_back(val[i]);
        }
        simplex = std::move(s2);
        val = std::move(v2);
        if (std::abs(val.front() - val.back()) < 1e-15 * (1.0 + std::abs(val.front()))) {
            double spread = 0.0;
            for (auto& p : simplex) spread = std::max(spread, (p - simplex.front()).cwiseAbs().maxCoeff());
            if (spread < 1e-12) break;
        }
        Point centroid = Point::Zero(d);
        for (Eigen::Index i = 0; i < d; ++i) centroid += simplex[static_cast<std::size_t>(i)];
        centroid /= static_cast<double>(d);
        const Point& worst = simplex.back();
        const Point xr = clamp(centroid + (centroid - worst), b);
        const double fr = f(xr);
        if (fr > val.front()) {
            const Point xe = clamp(centroid + 2.0 * (centroid - worst), b);
            const double fe = f(xe);
            if (fe > fr) {
                simplex.back() = xe;
                val.back() = fe;
            } else {
                simplex.back() = xr;
                val.back() = fr;
            }
        } else if (fr > val[val.size() - 2]) {
            simplex.back() = xr;
            val.back() = fr;
        } else {
            const Point xc = clamp(centroid + 0.5 * (worst - centroid), b);
            const double fc = f(xc);
            if (fc > val.back()) {
                simplex.back() = xc;
                val.back() = fc;
            } else {
                for (std::size_t i = 1; i < simplex.size(); ++i) {
                    simplex[i] = simplex.front() + 0.5 * (simplex[i] - simplex.front());
                    val[i] = f(simplex[i]);
                }
            }
        }
    }
    return {simplex.front(), val.front()};
}

}  // namespace

int main(int argc, char** argv) {
    const int starts = argc > 1 ? std::atoi(argv[1]) : 10000;
    for (const auto& name : registered_objectives()) {
        const Objective f = make_objective(name);
        std::vector<Point> seeds;
        if (f.dim() == 2) {
            std::vector<std::pair<double, Point>> cells;
            for (int i = 0; i <= 1000; ++i)
                for (int j = 0; j <= 1000; ++j) {
                    Point p(2);
                    p << f.bounds()[0].low + f.bounds()[0].width() * i / 1000.0,
                        f.bounds()[1].low + f.bounds()[1].width() * j / 1000.0;
                    cells.emplace_back(f(p), p);
                }
            std::partial_sort(cells.begin(), cells.begin() + 50, cells.end(),
                              [](const auto& a, const auto& b) { return a.first > b.first; });
            for (int k = 0; k < 50; ++k) seeds.push_back(cells[static_cast<std::size_t>(k)].second);
        } else {
            SplitMix64 rng = derive_stream(2024, name);
            for (int k = 0; k < starts; ++k) {
                Point p(static_cast<Eigen::Index>(f.dim()));
                for (std::size_t i = 0; i < f.dim(); ++i)
                    p[static_cast<Eigen::Index>(i)] = rng.uniform(f.bounds()[i].low, f.bounds()[i].high);
                seeds.push_back(p);
            }
        }
        Point best_x;
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& s : seeds) {
            auto [x, v] = nelder_mead(f, s, 0.05);
            std::tie(x, v) = nelder_mead(f, x, 1e-3);
            if (v > best) {
                best = v;
                best_x = x;
            }
        }
        std::printf("%-13s %.17g  at", name.c_str(), best);
        for (Eigen::Index i = 0; i < best_x.size(); ++i) std::printf(" %.10f", best_x[i]);
        std::printf("\n");
    }
}
