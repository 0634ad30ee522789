#pragma once

// Benchmark registry: six synthetic maximization problems and a
// file-backed objective over a finite set of rows.

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dynbatch/error.hpp"
#include "dynbatch/gp.hpp"

namespace dynbatch {

namespace detail {

inline void require_domain(std::string_view name, const Point& p, const Bounds& bounds) {
    if (static_cast<std::size_t>(p.size()) != bounds.size())
        throw UsageError(std::string(name) + ": expected a " + std::to_string(bounds.size()) + "-d point, got " +
                         std::to_string(p.size()));
    if (!in_bounds(p, bounds)) throw UsageError(std::string(name) + ": point outside the domain");
}

inline Bounds cube(std::size_t d, double low, double high) { return Bounds(d, Interval{low, high}); }

inline constexpr std::array<double, 4> kHartmanAlpha{1.0, 1.2, 3.0, 3.2};

inline constexpr std::array<std::array<double, 3>, 4> kHartman3A{{
    {3.0, 10.0, 30.0},
    {0.1, 10.0, 35.0},
    {3.0, 10.0, 30.0},
    {0.1, 10.0, 35.0},
}};
inline constexpr std::array<std::array<double, 3>, 4> kHartman3P{{
    {0.3689, 0.1170, 0.2673},
    {0.4699, 0.4387, 0.7470},
    {0.1091, 0.8732, 0.5547},
    {0.0381, 0.5743, 0.8828},
}};

inline constexpr std::array<std::array<double, 6>, 4> kHartman6A{{
    {10.0, 3.0, 17.0, 3.5, 1.7, 8.0},
    {0.05, 10.0, 17.0, 0.1, 8.0, 14.0},
    {3.0, 3.5, 1.7, 10.0, 17.0, 8.0},
    {17.0, 8.0, 0.05, 10.0, 0.1, 14.0},
}};
inline constexpr std::array<std::array<double, 6>, 4> kHartman6P{{
    {0.1312, 0.1696, 0.5569, 0.0124, 0.8283, 0.5886},
    {0.2329, 0.4135, 0.8307, 0.3736, 0.1004, 0.9991},
    {0.2348, 0.1451, 0.3522, 0.2883, 0.3047, 0.6650},
    {0.4047, 0.8828, 0.8732, 0.5743, 0.1091, 0.0381},
}};

// Shekel-10: column i of A is the i-th centre.
inline constexpr std::array<double, 10> kShekelAlpha{0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5};
inline constexpr std::array<std::array<double, 10>, 4> kShekelA{{
    {4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 5.0, 8.0, 6.0, 7.0},
    {4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 5.0, 1.0, 2.0, 3.6},
    {4.0, 1.0, 8.0, 6.0, 3.0, 2.0, 3.0, 8.0, 6.0, 7.0},
    {4.0, 1.0, 8.0, 6.0, 7.0, 9.0, 3.0, 1.0, 2.0, 3.6},
}};

template <std::size_t D>
double hartman_sum(const Point& p, const std::array<std::array<double, D>, 4>& A,
                   const std::array<std::array<double, D>, 4>& P) {
    double total = 0.0;
    for (std::size_t i = 0; i < 4; ++i) {
        double inner = 0.0;
        for (std::size_t j = 0; j < D; ++j) {
            const double diff = p[static_cast<Eigen::Index>(j)] - P[i][j];
            inner += A[i][j] * diff * diff;
        }
        total += kHartmanAlpha[i] * std::exp(-inner);
    }
    return total;
}

}  // namespace detail

inline Bounds cosines2_bounds() { return detail::cube(2, 0.0, 1.0); }
inline Bounds rosenbrock2_bounds() { return detail::cube(2, 0.0, 1.0); }
inline Bounds hartman_bounds(std::size_t d) { return detail::cube(d, 0.0, 1.0); }
inline Bounds shekel4_bounds() { return detail::cube(4, 3.0, 6.0); }
inline Bounds michalewicz5_bounds() { return detail::cube(5, 0.0, std::numbers::pi); }

/// 1 - (u^2 + v^2 - 0.3 cos(3 pi u) - 0.3 cos(3 pi v)), u = 1.6x - 0.5, v = 1.6y - 0.5
inline double cosines2(const Point& p) {
    detail::require_domain("cosines2", p, cosines2_bounds());
    const double u = 1.6 * p[0] - 0.5;
    const double v = 1.6 * p[1] - 0.5;
    constexpr double pi = std::numbers::pi;
    return 1.0 - (u * u + v * v - 0.3 * std::cos(3.0 * pi * u) - 0.3 * std::cos(3.0 * pi * v));
}

/// 10 - 100 (y - x^2)^2 - (1 - x)^2
inline double rosenbrock2(const Point& p) {
    detail::require_domain("rosenbrock2", p, rosenbrock2_bounds());
    const double x = p[0];
    const double y = p[1];
    return 10.0 - 100.0 * (y - x * x) * (y - x * x) - (1.0 - x) * (1.0 - x);
}

inline double hartman(const Point& p, std::size_t d) {
    if (d == 3) {
        detail::require_domain("hartman3", p, hartman_bounds(3));
        return detail::hartman_sum<3>(p, detail::kHartman3A, detail::kHartman3P);
    }
    if (d == 6) {
        detail::require_domain("hartman6", p, hartman_bounds(6));
        return detail::hartman_sum<6>(p, detail::kHartman6A, detail::kHartman6P);
    }
    throw UsageError("hartman: dimension must be 3 or 6");
}

inline double shekel4(const Point& p) {
    detail::require_domain("shekel4", p, shekel4_bounds());
    double total = 0.0;
    for (std::size_t i = 0; i < detail::kShekelAlpha.size(); ++i) {
        double dist = 0.0;
        for (std::size_t j = 0; j < 4; ++j) {
            const double diff = p[static_cast<Eigen::Index>(j)] - detail::kShekelA[j][i];
            dist += diff * diff;
        }
        total += 1.0 / (detail::kShekelAlpha[i] + dist);
    }
    return total;
}

/// -sum_i sin(x_i) sin(i x_i^2 / pi)^20, literal sign.
inline double michalewicz5(const Point& p) {
    detail::require_domain("michalewicz5", p, michalewicz5_bounds());
    double total = 0.0;
    for (Eigen::Index i = 0; i < 5; ++i) {
        const double x = p[i];
        total += std::sin(x) * std::pow(std::sin(static_cast<double>(i + 1) * x * x / std::numbers::pi), 20);
    }
    return -total;
}

struct ObjectiveFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

class Objective {
public:
    using Function = std::function<double(const Point&)>;

    Objective(std::string name, Bounds bounds, Function fn, std::optional<double> known_max = std::nullopt)
        : name_(std::move(name)), bounds_(std::move(bounds)), fn_(std::move(fn)), known_max_(known_max) {
        validate_bounds(bounds_);
    }

    /// Evaluates at p after checking it lies in the domain.
    double evaluate(const Point& p) const {
        detail::require_domain(name_, p, bounds_);
        if (!fn_) throw ObjectiveFailure(name_ + ": objective has no evaluator (ask/tell only)");
        return fn_(p);
    }
    double operator()(const Point& p) const { return evaluate(p); }

    const std::string& name() const noexcept { return name_; }
    const Bounds& bounds() const noexcept { return bounds_; }
    std::size_t dim() const noexcept { return bounds_.size(); }
    const std::optional<double>& known_max() const noexcept { return known_max_; }
    bool has_evaluator() const noexcept { return static_cast<bool>(fn_); }

    /// Finite candidate set, when the objective is only defined on listed points.
    const std::optional<std::vector<Point>>& candidates() const noexcept { return candidates_; }
    Objective& with_candidates(std::vector<Point> pts) {
        candidates_ = std::move(pts);
        return *this;
    }

private:
    std::string name_;
    Bounds bounds_;
    Function fn_;
    std::optional<double> known_max_;
    std::optional<std::vector<Point>> candidates_;
};

// Maximum values derived by tools/derive_known_max (dense grid / multi-start
// Nelder-Mead); rerun it if a formula or constant table changes.
namespace known_max {
inline constexpr double cosines2 = 1.6;
inline constexpr double rosenbrock2 = 10.0;
inline constexpr double hartman3 = 3.8627797873326628;
inline constexpr double hartman6 = 3.3223680114155156;
inline constexpr double shekel4 = 10.536409816692048;
inline constexpr double michalewicz5 = 0.0;
}  // namespace known_max

// ---------------------------------------------------------------------------
// Dataset-backed objective.

struct DatasetObjective {
    std::vector<std::string> columns;  // x_1..x_d, y
    std::vector<Point> points;
    std::vector<double> outputs;

    std::size_t dim() const noexcept { return columns.empty() ? 0 : columns.size() - 1; }

    /// Per-dimension [min, max]; a constant column gets a unit-width interval around its value.
    Bounds bounds() const {
        Bounds b(dim(), Interval{0.0, 0.0});
        for (std::size_t j = 0; j < dim(); ++j) {
            double lo = std::numeric_limits<double>::infinity();
            double hi = -lo;
            for (const auto& p : points) {
                lo = std::min(lo, p[static_cast<Eigen::Index>(j)]);
                hi = std::max(hi, p[static_cast<Eigen::Index>(j)]);
            }
            if (!(hi > lo)) {
                lo -= 0.5;
                hi += 0.5;
            }
            b[j] = {lo, hi};
        }
        return b;
    }

    Objective to_objective(std::string name) const {
        const Bounds b = bounds();
        auto rows = std::make_shared<const std::pair<std::vector<Point>, std::vector<double>>>(points, outputs);
        Objective::Function fn = [rows, b](const Point& x) -> double {
            for (std::size_t i = 0; i < rows->first.size(); ++i)
                if (is_duplicate(rows->first[i], x, b)) return rows->second[i];
            throw ObjectiveFailure("dataset: point is not one of the dataset rows");
        };
        double best = -std::numeric_limits<double>::infinity();
        for (double y : outputs) best = std::max(best, y);
        Objective obj(std::move(name), b, std::move(fn), best);
        obj.with_candidates(points);
        return obj;
    }
};

namespace detail {

inline std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (;;) {
        const auto pos = line.find(delim, start);
        auto cell = line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start);
        while (!cell.empty() && (cell.front() == ' ' || (cell.front() == '\t' && delim != '\t'))) cell.remove_prefix(1);
        while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\r' || (cell.back() == '\t' && delim != '\t')))
            cell.remove_suffix(1);
        cells.push_back(cell);
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return cells;
}

inline std::optional<double> parse_number(std::string_view s) {
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
    return v;
}

inline char detect_delimiter(std::string_view header) {
    if (header.find('\t') != std::string_view::npos) return '\t';
    if (header.find(';') != std::string_view::npos) return ';';
    return ',';
}

}  // namespace detail

/// Delimiter-separated text: header naming x_1..x_d,y, then one row per point.
/// The delimiter (comma, semicolon or tab) is taken from the header line.
inline DatasetObjective parse_dataset(std::istream& in, std::string_view source = "dataset") {
    const std::string src(source);
    std::string line;
    std::size_t line_no = 0;
    DatasetObjective ds;
    char delim = ',';
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        std::string_view view(line);
        if (view.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        if (ds.columns.empty()) {
            delim = detail::detect_delimiter(view);
            for (auto cell : detail::split(view, delim)) {
                if (cell.empty()) throw UsageError(src + ":" + std::to_string(line_no) + ": empty column name");
                if (detail::parse_number(cell))
                    throw UsageError(src + ":" + std::to_string(line_no) + ": header row required naming columns");
                ds.columns.emplace_back(cell);
            }
            if (ds.columns.size() < 2)
                throw UsageError(src + ":" + std::to_string(line_no) + ": need at least one input column and y");
            continue;
        }
        const auto cells = detail::split(view, delim);
        if (cells.size() != ds.columns.size())
            throw UsageError(src + ":" + std::to_string(line_no) + ": expected " + std::to_string(ds.columns.size()) +
                             " cells, found " + std::to_string(cells.size()));
        Point p(static_cast<Eigen::Index>(ds.dim()));
        double y = 0.0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const auto v = detail::parse_number(cells[c]);
            if (!v)
                throw UsageError(src + ":" + std::to_string(line_no) + ": column " + std::to_string(c + 1) +
                                 " is not a number: '" + std::string(cells[c]) + "'");
            if (c + 1 == cells.size())
                y = *v;
            else
                p[static_cast<Eigen::Index>(c)] = *v;
        }
        for (std::size_t r = 0; r < ds.points.size(); ++r)
            if ((ds.points[r] - p).cwiseAbs().maxCoeff() == 0.0)
                throw UsageError(src + ":" + std::to_string(line_no) + ": duplicate point (same as data row " +
                                 std::to_string(r + 1) + ")");
        ds.points.push_back(std::move(p));
        ds.outputs.push_back(y);
    }
    if (ds.columns.empty()) throw UsageError(src + ": empty file");
    if (ds.points.empty()) throw UsageError(src + ": no data rows");
    // Duplicates under the width-normalized tolerance, once bounds are known.
    const Bounds b = ds.bounds();
    for (std::size_t i = 0; i < ds.points.size(); ++i)
        for (std::size_t j = 0; j < i; ++j)
            if (is_duplicate(ds.points[i], ds.points[j], b))
                throw UsageError(src + ": data rows " + std::to_string(j + 1) + " and " + std::to_string(i + 1) +
                                 " are duplicate points");
    return ds;
}

inline DatasetObjective load_dataset(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open dataset '" + path + "'");
    return parse_dataset(in, path);
}

inline void write_dataset(std::ostream& out, const DatasetObjective& ds) {
    for (std::size_t c = 0; c < ds.columns.size(); ++c) out << (c ? "," : "") << ds.columns[c];
    out << '\n';
    char buf[64];
    for (std::size_t r = 0; r < ds.points.size(); ++r) {
        for (Eigen::Index c = 0; c < ds.points[r].size(); ++c) {
            auto res = std::to_chars(buf, buf + sizeof buf, ds.points[r][c]);
            out << (c ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
        }
        auto res = std::to_chars(buf, buf + sizeof buf, ds.outputs[r]);
        out << ',' << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf)) << '\n';
    }
}

inline void write_dataset(const std::string& path, const DatasetObjective& ds) {
    std::ofstream out(path);
    if (!out) throw UsageError("cannot write dataset '" + path + "'");
    write_dataset(out, ds);
}

// ---------------------------------------------------------------------------
// Registry.

inline const std::vector<std::string>& registered_objectives() {
    static const std::vector<std::string> names{"cosines2", "rosenbrock2", "hartman3",
                                                "hartman6", "shekel4",     "michalewicz5"};
    return names;
}

namespace detail {

/// "box:lo:hi,lo:hi,..." -- a domain with no evaluator, for ask/tell studies.
inline Objective parse_box(std::string_view spec) {
    Bounds b;
    std::size_t start = 0;
    while (start <= spec.size()) {
        const auto comma = spec.find(',', start);
        const auto item = spec.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
        const auto colon = item.find(':');
        if (colon == std::string_view::npos) throw UsageError("box objective: expected lo:hi, got '" + std::string(item) + "'");
        const auto lo = parse_number(item.substr(0, colon));
        const auto hi = parse_number(item.substr(colon + 1));
        if (!lo || !hi) throw UsageError("box objective: bad interval '" + std::string(item) + "'");
        b.push_back({*lo, *hi});
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return Objective("box:" + std::string(spec), std::move(b), nullptr);
}

}  // namespace detail

/// Resolves cosines2, rosenbrock2, hartman3, hartman6, shekel4, michalewicz5,
/// dataset:<path> and box:<lo>:<hi>,...
inline Objective make_objective(std::string_view name) {
    if (name == "cosines2") return {"cosines2", cosines2_bounds(), cosines2, known_max::cosines2};
    if (name == "rosenbrock2") return {"rosenbrock2", rosenbrock2_bounds(), rosenbrock2, known_max::rosenbrock2};
    if (name == "hartman3")
        return {"hartman3", hartman_bounds(3), [](const Point& p) { return hartman(p, 3); }, known_max::hartman3};
    if (name == "hartman6")
        return {"hartman6", hartman_bounds(6), [](const Point& p) { return hartman(p, 6); }, known_max::hartman6};
    if (name == "shekel4") return {"shekel4", shekel4_bounds(), shekel4, known_max::shekel4};
    if (name == "michalewicz5") return {"michalewicz5", michalewicz5_bounds(), michalewicz5, known_max::michalewicz5};
    if (name.starts_with("dataset:")) {
        const std::string path(name.substr(8));
        return load_dataset(path).to_objective(std::string(name));
    }
    if (name.starts_with("box:")) return detail::parse_box(name.substr(4));
    throw UsageError("unknown objective '" + std::string(name) + "'");
}

}  // namespace dynbatch
