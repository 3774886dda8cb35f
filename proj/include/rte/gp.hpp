#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include "rte/repertoire.hpp"
#include "rte/sim.hpp"

namespace rte {

/// Squared-exponential kernel parameters shared by all outcome dimensions.
struct KernelConfig {
    double sigma_se_sq{0.5};
    double length_scale{1.0};
};

inline double se_kernel(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const KernelConfig& cfg) {
    return cfg.sigma_se_sq * std::exp(-(a - b).squaredNorm() / (cfg.length_scale * cfg.length_scale));
}

inline Eigen::Vector2d to_vec(const Descriptor& d) { return {d.d1, d.d2}; }
inline Eigen::Vector2d to_vec(const WheelCommand& c) { return {c.v_left, c.v_right}; }

/// Scalar Gaussian-process regressor with a configurable prior mean. The
/// dataset stores residuals (observation minus prior), so with no data the
/// posterior mean is exactly the prior everywhere. The Cholesky factor of
/// (K + noise I) is extended one row per added point and kept in sync with
/// the data.
class GaussianProcess {
public:
    using PriorFn = std::function<double(const Eigen::Vector2d&)>;

    GaussianProcess(KernelConfig kernel, double noise_sq, PriorFn prior_mean = {})
        : kernel_(kernel), noise_sq_(noise_sq),
          prior_(prior_mean ? std::move(prior_mean) : [](const Eigen::Vector2d&) { return 0.0; }) {
        if (kernel_.sigma_se_sq <= 0.0 || kernel_.length_scale <= 0.0)
            throw std::invalid_argument("GaussianProcess: kernel parameters must be positive");
    }

    [[nodiscard]] std::size_t size() const { return inputs_.size(); }
    [[nodiscard]] const KernelConfig& kernel() const { return kernel_; }
    [[nodiscard]] double noise_sq() const { return noise_sq_; }
    [[nodiscard]] double prior_at(const Eigen::Vector2d& a) const { return prior_(a); }
    [[nodiscard]] const std::vector<Eigen::Vector2d>& inputs() const { return inputs_; }

    /// Lower-triangular factor L with L L^T = K + noise I over the current
    /// inputs (top-left n x n block of the preallocated storage).
    [[nodiscard]] Eigen::Block<const Eigen::MatrixXd> chol_lower() const {
        const auto n = static_cast<Eigen::Index>(size());
        return chol_.topLeftCorner(n, n);
    }

    /// Appends one observation and extends the factorization. Throws if the
    /// extended matrix stops being positive definite; no state changes in
    /// that case.
    void add(const Eigen::Vector2d& input, double observation) {
        const auto n = static_cast<Eigen::Index>(size());
        const double k_self = se_kernel(input, input, kernel_) + noise_sq_;
        if (chol_.rows() <= n) {
            const Eigen::Index cap = std::max<Eigen::Index>(16, 2 * chol_.rows());
            Eigen::MatrixXd grown = Eigen::MatrixXd::Zero(cap, cap);
            grown.topLeftCorner(n, n) = chol_.topLeftCorner(n, n);
            chol_.swap(grown);
        }
        Eigen::VectorXd cross(n);
        for (Eigen::Index i = 0; i < n; ++i)
            cross(i) = se_kernel(inputs_[static_cast<std::size_t>(i)], input, kernel_);
        Eigen::VectorXd row = cross;
        chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(row);
        const double diag_sq = k_self - row.squaredNorm();
        if (diag_sq <= 0.0)
            throw std::runtime_error("GaussianProcess: factorization update lost positive definiteness");

        chol_.block(n, 0, 1, n) = row.transpose();
        chol_(n, n) = std::sqrt(diag_sq);
        inputs_.push_back(input);
        residuals_.conservativeResize(n + 1);
        residuals_(n) = observation - prior_(input);
        refresh_alpha();
    }

    struct Prediction {
        double mean{0.0};
        double variance{0.0};
    };

    /// Posterior mean and variance at a query point; with no data this is
    /// the prior mean and the kernel variance.
    [[nodiscard]] Prediction predict(const Eigen::Vector2d& query) const {
        const auto n = static_cast<Eigen::Index>(size());
        if (n == 0)
            return {prior_(query), kernel_.sigma_se_sq};
        Eigen::VectorXd k_star(n);
        for (Eigen::Index i = 0; i < n; ++i)
            k_star(i) = se_kernel(inputs_[static_cast<std::size_t>(i)], query, kernel_);
        const double mean = prior_(query) + k_star.dot(alpha_);
        Eigen::VectorXd v = k_star;
        chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(v);
        const double variance = kernel_.sigma_se_sq - v.squaredNorm();
        return {mean, std::max(variance, 0.0)};
    }

    /// Weights (K + noise I)^-1 residuals; the posterior mean at q is
    /// prior(q) + k(q)^T alpha.
    [[nodiscard]] const Eigen::VectorXd& alpha() const { return alpha_; }

    /// Data-driven part of the posterior mean, k(q)^T alpha; exactly zero
    /// with no data.
    [[nodiscard]] double correction_at(const Eigen::Vector2d& query) const {
        const auto n = static_cast<Eigen::Index>(size());
        if (n == 0)
            return 0.0;
        double dot = 0.0;
        for (Eigen::Index i = 0; i < n; ++i)
            dot += se_kernel(inputs_[static_cast<std::size_t>(i)], query, kernel_) * alpha_(i);
        return dot;
    }

private:
    void refresh_alpha() {
        const auto n = static_cast<Eigen::Index>(size());
        alpha_ = residuals_;
        chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().solveInPlace(alpha_);
        chol_.topLeftCorner(n, n).triangularView<Eigen::Lower>().transpose().solveInPlace(alpha_);
    }

    KernelConfig kernel_;
    double noise_sq_;
    PriorFn prior_;
    std::vector<Eigen::Vector2d> inputs_;
    Eigen::VectorXd residuals_;
    Eigen::VectorXd alpha_;
    Eigen::MatrixXd chol_;
};

/// Predicted episode outcome with per-dimension variance, in world units.
struct PredictedOutcome {
    Outcome mean;
    std::array<double, 4> variance{0.0, 0.0, 0.0, 0.0};
};

/// Four GPs (dx, dy, cos dtheta, sin dtheta) over a shared 2-D input space,
/// updated atomically with the same inputs. Position dimensions are fitted
/// in normalized units (divided by the reachable half-width) so one kernel
/// variance is commensurate across all four dimensions. World-unit means
/// are assembled as prior + scale * correction, which recovers the prior
/// exactly when there is no data.
class OutcomeModel {
public:
    using PriorFn = GaussianProcess::PriorFn;

    /// Priors are given in world units; zero where omitted.
    OutcomeModel(KernelConfig kernel, double noise_sq, std::array<PriorFn, 4> world_priors,
                 double xy_scale = kReachableHalfWidth)
        : scales_{xy_scale, xy_scale, 1.0, 1.0},
          gps_{GaussianProcess(kernel, noise_sq, normalized_prior(world_priors[0], xy_scale)),
               GaussianProcess(kernel, noise_sq, normalized_prior(world_priors[1], xy_scale)),
               GaussianProcess(kernel, noise_sq, normalized_prior(world_priors[2], 1.0)),
               GaussianProcess(kernel, noise_sq, normalized_prior(world_priors[3], 1.0))},
          world_priors_{std::move(world_priors[0]), std::move(world_priors[1]),
                        std::move(world_priors[2]), std::move(world_priors[3])} {
        for (auto& p : world_priors_)
            if (!p)
                p = [](const Eigen::Vector2d&) { return 0.0; };
    }

    /// Model with zero prior mean in every dimension (learning from scratch).
    static OutcomeModel zero_prior(KernelConfig kernel, double noise_sq,
                                   double xy_scale = kReachableHalfWidth) {
        return OutcomeModel(kernel, noise_sq, {}, xy_scale);
    }

    /// Model whose prior mean is the repertoire's simulated outcome for the
    /// cell containing the query descriptor (zero in empty cells).
    static OutcomeModel with_repertoire_prior(const Repertoire& repertoire, KernelConfig kernel,
                                              double noise_sq, double xy_scale = kReachableHalfWidth) {
        std::array<PriorFn, 4> priors;
        for (int d = 0; d < 4; ++d) {
            priors[static_cast<std::size_t>(d)] = [&repertoire, d](const Eigen::Vector2d& a) {
                const auto& slot = repertoire.cell(repertoire.cell_index({a.x(), a.y()}));
                if (!slot)
                    return 0.0;
                const Outcome& o = slot->prior_outcome;
                return d == 0 ? o.dx : d == 1 ? o.dy : d == 2 ? o.cos_dt : o.sin_dt;
            };
        }
        return OutcomeModel(kernel, noise_sq, std::move(priors), xy_scale);
    }

    [[nodiscard]] std::size_t size() const { return gps_[0].size(); }
    [[nodiscard]] const GaussianProcess& gp(int dim) const { return gps_[static_cast<std::size_t>(dim)]; }
    [[nodiscard]] double scale(int dim) const { return scales_[static_cast<std::size_t>(dim)]; }

    /// Adds one observed outcome for an input to all four GPs. Either all
    /// four datasets grow or none does.
    void update(const Eigen::Vector2d& input, const Outcome& observed) {
        const std::array<double, 4> obs = {observed.dx / scales_[0], observed.dy / scales_[1],
                                           observed.cos_dt, observed.sin_dt};
        gps_[0].add(input, obs[0]);
        // The remaining GPs share inputs, kernel and noise with the first,
        // so their factor extensions cannot fail once the first succeeded.
        for (std::size_t d = 1; d < 4; ++d)
            gps_[d].add(input, obs[d]);
    }

    [[nodiscard]] PredictedOutcome predict(const Eigen::Vector2d& input) const {
        PredictedOutcome out;
        std::array<double, 4> mean;
        for (std::size_t d = 0; d < 4; ++d) {
            const double s = scales_[d];
            mean[d] = world_priors_[d](input) + s * gps_[d].correction_at(input);
            out.variance[d] = gps_[d].predict(input).variance * s * s;
        }
        out.mean = {mean[0], mean[1], mean[2], mean[3]};
        return out;
    }

    /// Batched prediction for many queries. All four GPs share one kernel
    /// matrix, so the factor solve is done once and reused across
    /// dimensions; results match predict() exactly.
    [[nodiscard]] std::vector<PredictedOutcome> predict_many(std::span<const Eigen::Vector2d> queries) const {
        std::vector<PredictedOutcome> out(queries.size());
        const auto n = static_cast<Eigen::Index>(size());
        const auto m = static_cast<Eigen::Index>(queries.size());
        const KernelConfig& cfg = gps_[0].kernel();
        if (n == 0) {
            for (std::size_t q = 0; q < queries.size(); ++q) {
                std::array<double, 4> mean;
                for (std::size_t d = 0; d < 4; ++d) {
                    mean[d] = world_priors_[d](queries[q]);
                    out[q].variance[d] = cfg.sigma_se_sq * scales_[d] * scales_[d];
                }
                out[q].mean = {mean[0], mean[1], mean[2], mean[3]};
            }
            return out;
        }

        const Eigen::MatrixXd k_star = cross_kernel(queries);
        Eigen::MatrixXd solved = k_star;
        gps_[0].chol_lower().triangularView<Eigen::Lower>().solveInPlace(solved);
        const Eigen::ArrayXd var_norm =
            (cfg.sigma_se_sq - solved.colwise().squaredNorm().transpose().array()).max(0.0);

        std::array<Eigen::VectorXd, 4> corrections;
        for (std::size_t d = 0; d < 4; ++d)
            corrections[d] = k_star.transpose() * gps_[d].alpha();

        for (Eigen::Index q = 0; q < m; ++q) {
            std::array<double, 4> mean;
            for (std::size_t d = 0; d < 4; ++d) {
                mean[d] = world_priors_[d](queries[static_cast<std::size_t>(q)]) +
                          scales_[d] * corrections[d](q);
                out[static_cast<std::size_t>(q)].variance[d] = var_norm(q) * scales_[d] * scales_[d];
            }
            out[static_cast<std::size_t>(q)].mean = {mean[0], mean[1], mean[2], mean[3]};
        }
        return out;
    }

    /// Mean-only batched prediction (no variance solve), for planners that
    /// ignore uncertainty.
    [[nodiscard]] std::vector<Outcome> predict_means(std::span<const Eigen::Vector2d> queries) const {
        std::vector<Outcome> out(queries.size());
        const auto n = static_cast<Eigen::Index>(size());
        const auto m = static_cast<Eigen::Index>(queries.size());
        std::array<Eigen::VectorXd, 4> corrections;
        if (n > 0) {
            const Eigen::MatrixXd k_star = cross_kernel(queries);
            for (std::size_t d = 0; d < 4; ++d)
                corrections[d] = k_star.transpose() * gps_[d].alpha();
        } else {
            for (std::size_t d = 0; d < 4; ++d)
                corrections[d] = Eigen::VectorXd::Zero(m);
        }
        for (Eigen::Index q = 0; q < m; ++q) {
            std::array<double, 4> mean;
            for (std::size_t d = 0; d < 4; ++d)
                mean[d] = world_priors_[d](queries[static_cast<std::size_t>(q)]) +
                          scales_[d] * corrections[d](q);
            out[static_cast<std::size_t>(q)] = {mean[0], mean[1], mean[2], mean[3]};
        }
        return out;
    }

private:
    static PriorFn normalized_prior(const PriorFn& world, double scale) {
        if (!world)
            return {};
        return [world, scale](const Eigen::Vector2d& a) { return world(a) / scale; };
    }

    [[nodiscard]] Eigen::MatrixXd cross_kernel(std::span<const Eigen::Vector2d> queries) const {
        const auto n = static_cast<Eigen::Index>(size());
        const auto m = static_cast<Eigen::Index>(queries.size());
        const KernelConfig& cfg = gps_[0].kernel();
        const auto& inputs = gps_[0].inputs();
        Eigen::MatrixXd k_star(n, m);
        for (Eigen::Index q = 0; q < m; ++q)
            for (Eigen::Index i = 0; i < n; ++i)
                k_star(i, q) = se_kernel(inputs[static_cast<std::size_t>(i)],
                                         queries[static_cast<std::size_t>(q)], cfg);
        return k_star;
    }

    std::array<double, 4> scales_;
    std::array<GaussianProcess, 4> gps_;
    std::array<PriorFn, 4> world_priors_;
};

/// Convenience wrappers matching the per-action contract used by the
/// agents: the model is keyed by the action's descriptor and its prior is
/// the action's simulated outcome.
inline PredictedOutcome outcome_predict(const OutcomeModel& model, const Action& action) {
    return model.predict(to_vec(action.descriptor));
}

inline void outcome_update(OutcomeModel& model, const Action& action, const Outcome& observed) {
    model.update(to_vec(action.descriptor), observed);
}

} // namespace rte
