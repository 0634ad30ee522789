#pragma once

// Outcome-independent lookahead quantities for a hypothetical sample set x*.
//
// With A = k(X_O, X_O), B = k(x*, X_O), D = k(x*, x*), P = k(z, X_O),
// k*_z = k(z, x*) and m = (D - B A^-1 B^T)^-1:
//
//   variance reduction  sigma_z^2 - sigma*_z^2 = w^T m w,         w = B A^-1 P^T - k*_z
//   mean-change bound   E|mu_z - mu*_z| <= |m w|_inf sqrt(2/pi) sum_i sigma*_i
//
// where sigma*_i is the posterior standard deviation of the i-th pending
// point given O alone. Neither depends on any output value.

#include <cmath>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dynbatch/error.hpp"
#include "dynbatch/gp.hpp"

namespace dynbatch {

namespace detail {

/// |v|_inf * sqrt(2/pi) * |sigma|_1
inline double mean_change_bound(const Eigen::Ref<const Eigen::VectorXd>& v,
                                const Eigen::Ref<const Eigen::VectorXd>& sigma) noexcept {
    if (v.size() == 0) return 0.0;
    return v.cwiseAbs().maxCoeff() * std::sqrt(2.0 / std::numbers::pi) * sigma.cwiseAbs().sum();
}

}  // namespace detail

template <typename Kernel = SquaredExponential>
class BasicLookaheadContext {
public:
    using Model = BasicGpModel<Kernel>;

    static BasicLookaheadContext make(const Model& model, std::span<const Point> pending) {
        if (pending.empty()) throw UsageError("lookahead: pending set is empty");
        const auto& obs = model.observations();
        for (std::size_t i = 0; i < pending.size(); ++i) {
            if (static_cast<std::size_t>(pending[i].size()) != model.dim())
                throw UsageError("lookahead: pending point " + std::to_string(i) + " has wrong dimension");
            if (auto j = obs.find(pending[i]))
                throw UsageError("lookahead: pending point " + std::to_string(i) + " coincides with observation " +
                                 std::to_string(*j));
            for (std::size_t k = 0; k < i; ++k)
                if (is_duplicate(pending[i], pending[k], obs.bounds()))
                    throw UsageError("lookahead: pending points " + std::to_string(k) + " and " +
                                     std::to_string(i) + " coincide");
        }

        BasicLookaheadContext ctx(model);
        const auto m = static_cast<Eigen::Index>(pending.size());
        ctx.pending_.resize(static_cast<Eigen::Index>(model.dim()), m);
        for (Eigen::Index i = 0; i < m; ++i) ctx.pending_.col(i) = pending[static_cast<std::size_t>(i)];

        const Eigen::MatrixXd Bt = model.cross_kernel(ctx.pending_);  // n x m
        ctx.a_inv_bt_ = model.solve(Bt);                              // n x m
        Eigen::MatrixXd schur = model.gram(ctx.pending_);
        if (Bt.rows() > 0) schur -= Bt.transpose() * ctx.a_inv_bt_;
        schur = 0.5 * (schur + schur.transpose());

        ctx.sigma_star_.resize(m);
        for (Eigen::Index i = 0; i < m; ++i) ctx.sigma_star_[i] = std::sqrt(std::max(schur(i, i), 0.0));

        // The pending block carries the same diagonal jitter as A so that the
        // result matches a refit on O u x*.
        auto [L, j] = detail::factorize_with_jitter(schur, model.jitter(), model.diagnostics().get());
        ctx.schur_factor_ = std::move(L);
        ctx.schur_jitter_ = j;
        return ctx;
    }

    static BasicLookaheadContext make(const Model& model, const std::vector<Point>& pending) {
        return make(model, std::span<const Point>(pending));
    }

    /// sigma_z^2 - sigma*_z^2: the drop in posterior variance at z once x* is observed.
    double variance_reduction(const Point& z) const {
        const Eigen::VectorXd w = weights(z);
        const Eigen::VectorXd half = schur_factor_.triangularView<Eigen::Lower>().solve(w);
        return half.squaredNorm();
    }

    /// Upper bound on E|mu_z - mu*_z| over the joint posterior of the pending outputs.
    double mean_change_bound(const Point& z) const {
        return detail::mean_change_bound(m_times(weights(z)), sigma_star_);
    }

    /// (P A^-1 B^T - k*_z) as a column vector.
    Eigen::VectorXd weights(const Point& z) const {
        check_query(z);
        const Eigen::MatrixXd zm = z;
        Eigen::VectorXd kz(pending_.cols());
        for (Eigen::Index i = 0; i < pending_.cols(); ++i) kz[i] = model_.kernel(z, pending_.col(i));
        if (model_.observations().empty()) return -kz;
        const Eigen::VectorXd P = model_.cross_kernel(zm).col(0);
        return a_inv_bt_.transpose() * P - kz;
    }

    /// m * v using the factor of m^-1.
    Eigen::VectorXd m_times(const Eigen::VectorXd& v) const {
        const Eigen::VectorXd t = schur_factor_.triangularView<Eigen::Lower>().solve(v);
        return schur_factor_.transpose().triangularView<Eigen::Upper>().solve(t);
    }

    /// m = (D - B A^-1 B^T + jitter I)^-1 as an explicit matrix.
    Eigen::MatrixXd m() const {
        const auto k = pending_.cols();
        return m_times_matrix(Eigen::MatrixXd::Identity(k, k));
    }

    /// m^-1, the posterior covariance of the pending outputs given O (plus jitter).
    Eigen::MatrixXd schur() const { return schur_factor_ * schur_factor_.transpose(); }

    const Eigen::VectorXd& sigma_star() const noexcept { return sigma_star_; }
    const Eigen::MatrixXd& pending() const noexcept { return pending_; }
    const Model& model() const noexcept { return model_; }
    double schur_jitter() const noexcept { return schur_jitter_; }

private:
    explicit BasicLookaheadContext(const Model& model) : model_(model) {}

    Eigen::MatrixXd m_times_matrix(const Eigen::MatrixXd& V) const {
        const Eigen::MatrixXd t = schur_factor_.triangularView<Eigen::Lower>().solve(V);
        return schur_factor_.transpose().triangularView<Eigen::Upper>().solve(t);
    }

    void check_query(const Point& z) const {
        if (static_cast<std::size_t>(z.size()) != model_.dim()) throw UsageError("lookahead: query dimension mismatch");
        const auto& obs = model_.observations();
        if (auto j = obs.find(z)) throw UsageError("lookahead: query coincides with observation " + std::to_string(*j));
        for (Eigen::Index i = 0; i < pending_.cols(); ++i)
            if (is_duplicate(z, pending_.col(i), obs.bounds()))
                throw UsageError("lookahead: query coincides with pending point " + std::to_string(i));
    }

    Model model_;
    Eigen::MatrixXd pending_;     // d x m
    Eigen::MatrixXd a_inv_bt_;    // n x m
    Eigen::MatrixXd schur_factor_;
    Eigen::VectorXd sigma_star_;
    double schur_jitter_ = 0.0;
};

using LookaheadContext = BasicLookaheadContext<SquaredExponential>;

inline LookaheadContext make_context(const GpModel& model, std::span<const Point> pending) {
    return LookaheadContext::make(model, pending);
}

inline double variance_reduction(const LookaheadContext& ctx, const Point& z) { return ctx.variance_reduction(z); }

inline double mean_change_bound(const LookaheadContext& ctx, const Point& z) { return ctx.mean_change_bound(z); }

}  // namespace dynbatch
