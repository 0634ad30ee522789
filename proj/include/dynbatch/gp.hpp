#pragma once

// Noiseless zero-mean Gaussian process regression.
//
// The kernel matrix A = k(X, X) + jitter * I is Cholesky-factorized once per
// model; queries reuse the factor. Models are immutable values: fit() and
// extend() return new models.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <cmath>
#include <cstddef>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "dynbatch/error.hpp"

namespace dynbatch {

using Point = Eigen::VectorXd;

struct Interval {
    double low = 0.0;
    double high = 1.0;
    double width() const noexcept { return high - low; }
};

using Bounds = std::vector<Interval>;

inline void validate_bounds(const Bounds& bounds) {
    if (bounds.empty()) throw UsageError("domain bounds are empty");
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        if (!(bounds[i].high > bounds[i].low) || !std::isfinite(bounds[i].low) || !std::isfinite(bounds[i].high))
            throw UsageError("domain bound " + std::to_string(i) + " must satisfy low < high");
    }
}

inline bool in_bounds(const Point& p, const Bounds& bounds) noexcept {
    if (static_cast<std::size_t>(p.size()) != bounds.size()) return false;
    for (std::size_t i = 0; i < bounds.size(); ++i) {
        const double v = p[static_cast<Eigen::Index>(i)];
        if (!(v >= bounds[i].low && v <= bounds[i].high)) return false;
    }
    return true;
}

/// Points closer than this in width-normalized sup-norm are the same location.
inline constexpr double kDuplicateTolerance = 1e-10;

inline bool is_duplicate(const Eigen::Ref<const Eigen::VectorXd>& a, const Eigen::Ref<const Eigen::VectorXd>& b,
                         const Bounds& bounds) noexcept {
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        const double w = bounds.empty() ? 1.0 : bounds[static_cast<std::size_t>(i)].width();
        if (std::abs(a[i] - b[i]) / w >= kDuplicateTolerance) return false;
    }
    return true;
}

/// 0.01 times the summed side lengths of the domain.
inline double default_length_scale(const Bounds& bounds) {
    validate_bounds(bounds);
    double total = 0.0;
    for (const auto& b : bounds) total += b.width();
    return 0.01 * total;
}

/// Where an output came from. Fabricated outputs only ever live in pending batches.
enum class Provenance { measured, fabricated };

class ObservationSet {
public:
    ObservationSet() = default;
    explicit ObservationSet(Bounds bounds) : bounds_(std::move(bounds)) { validate_bounds(bounds_); }

    /// Appends (x, y). Rejects dimension mismatches, out-of-domain points and duplicates.
    void add(const Point& x, double y, Provenance provenance = Provenance::measured) {
        if (static_cast<std::size_t>(x.size()) != dim())
            throw UsageError("point dimension " + std::to_string(x.size()) + " does not match domain dimension " +
                             std::to_string(dim()));
        if (!in_bounds(x, bounds_)) throw UsageError("point outside the domain bounds");
        if (!std::isfinite(y)) throw UsageError("observation output is not finite");
        if (auto j = find(x))
            throw UsageError("point duplicates observation " + std::to_string(*j));
        points_.push_back(x);
        outputs_.push_back(y);
        provenance_.push_back(provenance);
    }

    /// Index of an existing observation at the same location, if any.
    std::optional<std::size_t> find(const Point& x) const noexcept {
        for (std::size_t j = 0; j < points_.size(); ++j)
            if (is_duplicate(points_[j], x, bounds_)) return j;
        return std::nullopt;
    }

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }
    std::size_t dim() const noexcept { return bounds_.size(); }
    const Bounds& bounds() const noexcept { return bounds_; }
    const std::vector<Point>& points() const noexcept { return points_; }
    const std::vector<double>& outputs() const noexcept { return outputs_; }
    const std::vector<Provenance>& provenance() const noexcept { return provenance_; }
    const Point& point(std::size_t i) const { return points_.at(i); }
    double output(std::size_t i) const { return outputs_.at(i); }

    /// Max over all outputs, fabricated included; -inf when empty.
    double max_output() const noexcept {
        double best = -std::numeric_limits<double>::infinity();
        for (double y : outputs_) best = std::max(best, y);
        return best;
    }

    bool all_measured() const noexcept {
        return std::all_of(provenance_.begin(), provenance_.end(),
                           [](Provenance p) { return p == Provenance::measured; });
    }

private:
    Bounds bounds_;
    std::vector<Point> points_;
    std::vector<double> outputs_;
    std::vector<Provenance> provenance_;
};

struct KernelConfig {
    double length_scale = 1.0;
    double jitter = 1e-8;

    void validate() const {
        if (!(length_scale > 0.0) || !std::isfinite(length_scale)) throw UsageError("length_scale must be > 0");
        if (!(jitter >= 0.0) || !std::isfinite(jitter)) throw UsageError("jitter must be >= 0");
    }
};

/// Jitter escalates by 10x on factorization failure, up to this ceiling.
inline constexpr double kMaxJitter = 1e-4;

/// k(x, y) = exp(-|x - y|^2 / l). Swap in another type with the same shape to change kernels.
struct SquaredExponential {
    double length_scale = 1.0;

    SquaredExponential() = default;
    explicit SquaredExponential(const KernelConfig& cfg) : length_scale(cfg.length_scale) {}

    double operator()(const Eigen::Ref<const Eigen::VectorXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& y) const noexcept {
        return std::exp(-(x - y).squaredNorm() / length_scale);
    }
    double diagonal(const Eigen::Ref<const Eigen::VectorXd>&) const noexcept { return 1.0; }
};

inline double kernel_eval(const Point& x, const Point& y, const KernelConfig& cfg) {
    if (x.size() != y.size()) throw UsageError("kernel_eval: dimension mismatch");
    cfg.validate();
    return SquaredExponential(cfg)(x, y);
}

struct PosteriorPrediction {
    double mean = 0.0;
    double variance = 0.0;
    double stddev() const noexcept { return std::sqrt(variance); }
};

/// Shared across all models derived from one fit for the lifetime of a run.
struct Diagnostics {
    std::atomic<std::uint64_t> clamped_variances{0};
    std::atomic<std::uint64_t> jitter_escalations{0};
};

namespace detail {

/// Cholesky of `gram + jitter*I` with the escalation policy. Returns the lower factor and the jitter used.
inline std::pair<Eigen::MatrixXd, double> factorize_with_jitter(const Eigen::MatrixXd& gram, double jitter,
                                                                Diagnostics* diag) {
    const Eigen::Index n = gram.rows();
    const double ceiling = std::max(kMaxJitter, jitter);
    double j = jitter;
    for (;;) {
        Eigen::MatrixXd shifted = gram;
        shifted.diagonal().array() += j;
        Eigen::LLT<Eigen::MatrixXd> llt(shifted);
        bool ok = llt.info() == Eigen::Success;
        if (ok) {
            Eigen::MatrixXd L = llt.matrixL();
            ok = (L.diagonal().array() > 0.0).all() && L.allFinite();
            if (ok) return {std::move(L), j};
        }
        const double next = j == 0.0 ? 1e-10 : j * 10.0;
        if (next > ceiling * (1.0 + 1e-12) || n == 0)
            throw NumericalError("Cholesky factorization of a " + std::to_string(n) + "x" + std::to_string(n) +
                                     " kernel matrix failed",
                                 j);
        if (diag) ++diag->jitter_escalations;
        j = next;
    }
}

}  // namespace detail

template <typename Kernel = SquaredExponential>
class BasicGpModel {
public:
    /// Conditions the prior on `observations`.
    static BasicGpModel fit(ObservationSet observations, const KernelConfig& cfg,
                            std::shared_ptr<Diagnostics> diagnostics = nullptr) {
        cfg.validate();
        BasicGpModel m;
        m.obs_ = std::move(observations);
        m.cfg_ = cfg;
        m.kernel_ = Kernel(cfg);
        m.diag_ = diagnostics ? std::move(diagnostics) : std::make_shared<Diagnostics>();
        m.factorize();
        return m;
    }

    /// Observationally equivalent to fit() on the concatenated set. Uses a block
    /// Cholesky update at the current jitter and falls back to a full refit.
    BasicGpModel extend(std::span<const std::pair<Point, double>> new_points,
                        Provenance provenance = Provenance::measured) const {
        if (new_points.empty()) return *this;
        ObservationSet grown = obs_;
        for (std::size_t i = 0; i < new_points.size(); ++i) {
            try {
                grown.add(new_points[i].first, new_points[i].second, provenance);
            } catch (const UsageError& e) {
                throw UsageError("extend: new point " + std::to_string(i) + " rejected: " + e.what());
            }
        }
        const std::size_t n = obs_.size();
        const std::size_t k = new_points.size();
        if (n == 0 || jitter_ != cfg_.jitter) return fit(std::move(grown), cfg_, diag_);

        BasicGpModel m;
        m.obs_ = std::move(grown);
        m.cfg_ = cfg_;
        m.kernel_ = kernel_;
        m.diag_ = diag_;
        m.jitter_ = jitter_;
        m.X_.resize(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(n + k));
        m.X_.leftCols(static_cast<Eigen::Index>(n)) = X_;
        for (std::size_t i = 0; i < k; ++i) m.X_.col(static_cast<Eigen::Index>(n + i)) = new_points[i].first;

        const Eigen::MatrixXd newX = m.X_.rightCols(static_cast<Eigen::Index>(k));
        const Eigen::MatrixXd K12 = cross_kernel(newX);
        Eigen::MatrixXd K22 = m.gram(newX);
        K22.diagonal().array() += jitter_;
        const Eigen::MatrixXd S = L_.triangularView<Eigen::Lower>().solve(K12);
        const Eigen::MatrixXd C = K22 - S.transpose() * S;
        Eigen::LLT<Eigen::MatrixXd> llt(C);
        if (llt.info() != Eigen::Success) return fit(m.obs_, cfg_, diag_);
        const Eigen::MatrixXd L22 = llt.matrixL();
        if (!((L22.diagonal().array() > 0.0).all() && L22.allFinite())) return fit(m.obs_, cfg_, diag_);

        const auto N = static_cast<Eigen::Index>(n + k);
        m.L_ = Eigen::MatrixXd::Zero(N, N);
        m.L_.topLeftCorner(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)) = L_;
        m.L_.bottomLeftCorner(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n)) = S.transpose();
        m.L_.bottomRightCorner(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) = L22;
        m.compute_weights();
        return m;
    }

    BasicGpModel extend(const std::vector<std::pair<Point, double>>& new_points,
                        Provenance provenance = Provenance::measured) const {
        return extend(std::span<const std::pair<Point, double>>(new_points), provenance);
    }

    PosteriorPrediction posterior(const Point& x) const {
        check_dim(x);
        Eigen::VectorXd mean, var;
        posterior(Eigen::MatrixXd(x), mean, var);
        return {mean[0], var[0]};
    }

    /// Column-wise posterior over the query matrix (d x q).
    void posterior(const Eigen::MatrixXd& queries, Eigen::VectorXd& mean, Eigen::VectorXd& variance) const {
        if (queries.rows() != static_cast<Eigen::Index>(dim())) throw UsageError("posterior: dimension mismatch");
        const Eigen::Index q = queries.cols();
        variance.resize(q);
        for (Eigen::Index c = 0; c < q; ++c) variance[c] = kernel_.diagonal(queries.col(c));
        if (obs_.empty()) {
            mean = Eigen::VectorXd::Zero(q);
            return;
        }
        const Eigen::MatrixXd Kq = cross_kernel(queries);
        mean = Kq.transpose() * alpha_;
        const Eigen::MatrixXd V = L_.triangularView<Eigen::Lower>().solve(Kq);
        variance -= V.colwise().squaredNorm().transpose();
        std::uint64_t clamped = 0;
        for (Eigen::Index c = 0; c < q; ++c) {
            if (variance[c] < 0.0) {
                variance[c] = 0.0;
                ++clamped;
            }
        }
        if (clamped) diag_->clamped_variances += clamped;
    }

    /// k(X_O, queries), an n x q matrix.
    Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& queries) const {
        const Eigen::Index n = X_.cols();
        Eigen::MatrixXd K(n, queries.cols());
        for (Eigen::Index c = 0; c < queries.cols(); ++c)
            for (Eigen::Index r = 0; r < n; ++r) K(r, c) = kernel_(X_.col(r), queries.col(c));
        return K;
    }

    /// k(P, P) for the columns of P.
    Eigen::MatrixXd gram(const Eigen::MatrixXd& P) const {
        const Eigen::Index n = P.cols();
        Eigen::MatrixXd K(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            K(i, i) = kernel_.diagonal(P.col(i));
            for (Eigen::Index j = 0; j < i; ++j) K(i, j) = K(j, i) = kernel_(P.col(i), P.col(j));
        }
        return K;
    }

    /// (A + jitter*I)^-1 * rhs via the cached factor.
    Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const {
        if (obs_.empty()) return Eigen::MatrixXd(0, rhs.cols());
        const Eigen::MatrixXd tmp = L_.triangularView<Eigen::Lower>().solve(rhs);
        return L_.transpose().triangularView<Eigen::Upper>().solve(tmp);
    }

    double kernel(const Point& x, const Point& y) const { return kernel_(x, y); }

    const ObservationSet& observations() const noexcept { return obs_; }
    const KernelConfig& config() const noexcept { return cfg_; }
    const Kernel& kernel_function() const noexcept { return kernel_; }
    /// Observed points as columns (d x n).
    const Eigen::MatrixXd& points_matrix() const noexcept { return X_; }
    const Eigen::MatrixXd& cholesky_factor() const noexcept { return L_; }
    double jitter() const noexcept { return jitter_; }
    std::size_t dim() const noexcept { return obs_.dim(); }
    const std::shared_ptr<Diagnostics>& diagnostics() const noexcept { return diag_; }

private:
    BasicGpModel() = default;

    void check_dim(const Point& x) const {
        if (static_cast<std::size_t>(x.size()) != dim()) throw UsageError("query point dimension mismatch");
    }

    void factorize() {
        const auto n = static_cast<Eigen::Index>(obs_.size());
        X_.resize(static_cast<Eigen::Index>(dim()), n);
        for (Eigen::Index i = 0; i < n; ++i) X_.col(i) = obs_.points()[static_cast<std::size_t>(i)];
        jitter_ = cfg_.jitter;
        if (n == 0) {
            L_.resize(0, 0);
            alpha_.resize(0);
            return;
        }
        auto [L, j] = detail::factorize_with_jitter(gram(X_), cfg_.jitter, diag_.get());
        L_ = std::move(L);
        jitter_ = j;
        compute_weights();
    }

    void compute_weights() {
        const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(obs_.outputs().data(),
                                                                    static_cast<Eigen::Index>(obs_.size()));
        alpha_ = solve(y);
    }

    ObservationSet obs_;
    KernelConfig cfg_;
    Kernel kernel_;
    std::shared_ptr<Diagnostics> diag_;
    Eigen::MatrixXd X_;
    Eigen::MatrixXd L_;
    Eigen::VectorXd alpha_;
    double jitter_ = 0.0;
};

using GpModel = BasicGpModel<SquaredExponential>;

inline GpModel fit(ObservationSet observations, const KernelConfig& cfg) {
    return GpModel::fit(std::move(observations), cfg);
}

}  // namespace dynbatch
