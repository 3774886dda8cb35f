#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "rte/gp.hpp"

using Catch::Matchers::WithinAbs;

namespace {

const rte::KernelConfig kDefaultKernel{0.5, 1.0};
constexpr double kNoiseSq = 0.01;

} // namespace

TEST_CASE("se_kernel evaluates the squared-exponential form") {
    const Eigen::Vector2d a{0.3, 0.7};
    REQUIRE_THAT(rte::se_kernel(a, a, kDefaultKernel), WithinAbs(0.5, 1e-12));

    const Eigen::Vector2d b{0.3, 1.7};  // unit distance
    REQUIRE_THAT(rte::se_kernel(a, b, kDefaultKernel), WithinAbs(0.5 * std::exp(-1.0), 1e-12));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> coord(-2.0, 2.0);
    for (int i = 0; i < 100; ++i) {
        const Eigen::Vector2d p{coord(rng), coord(rng)};
        const Eigen::Vector2d q{coord(rng), coord(rng)};
        REQUIRE(rte::se_kernel(p, q, kDefaultKernel) == rte::se_kernel(q, p, kDefaultKernel));
    }
}

TEST_CASE("GaussianProcess with a single observation") {
    const auto prior = [](const Eigen::Vector2d& v) { return v.x() + 2.0; };
    rte::GaussianProcess gp(kDefaultKernel, kNoiseSq, prior);
    const Eigen::Vector2d x{0.4, 0.6};

    SECTION("empty data recovers the prior exactly") {
        const auto p = gp.predict(x);
        REQUIRE(p.mean == prior(x));
        REQUIRE(p.variance == 0.5);
    }
    SECTION("one point shrinks toward the observation by k/(k + noise)") {
        const double observation = prior(x) + 1.0;
        gp.add(x, observation);
        REQUIRE(gp.size() == 1);
        const auto p = gp.predict(x);
        const double expected = prior(x) + (0.5 / (0.5 + kNoiseSq)) * 1.0;
        REQUIRE_THAT(p.mean, WithinAbs(expected, 1e-12));
        REQUIRE_THAT(p.variance, WithinAbs(0.5 - 0.25 / (0.5 + kNoiseSq), 1e-12));
    }
    SECTION("observing the prior leaves predictions unchanged everywhere") {
        gp.add(x, prior(x));
        std::mt19937_64 rng(4);
        std::uniform_real_distribution<double> coord(0.0, 1.0);
        for (int i = 0; i < 50; ++i) {
            const Eigen::Vector2d q{coord(rng), coord(rng)};
            REQUIRE_THAT(gp.predict(q).mean, WithinAbs(prior(q), 1e-12));
        }
    }
}

TEST_CASE("duplicate inputs average between observations") {
    rte::GaussianProcess gp(kDefaultKernel, kNoiseSq, {});
    const Eigen::Vector2d x{0.2, 0.9};
    gp.add(x, 1.0);
    gp.add(x, 0.0);
    // 2x2 closed form with K = [[k+n, k], [k, k+n]] and k* = [k, k]:
    // mean = k (r1 + r2) / (k + k + n).
    const double expected = 0.5 * (1.0 + 0.0) / (2.0 * 0.5 + kNoiseSq);
    const auto p = gp.predict(x);
    REQUIRE_THAT(p.mean, WithinAbs(expected, 1e-12));
    REQUIRE(p.mean > 0.0);
    REQUIRE(p.mean < 1.0);
}

TEST_CASE("near-zero noise interpolates the data") {
    rte::GaussianProcess gp(kDefaultKernel, 1e-12, {});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    std::vector<Eigen::Vector2d> xs;
    for (int i = 0; i < 5; ++i) {
        const Eigen::Vector2d x{coord(rng), coord(rng)};
        xs.push_back(x);
        gp.add(x, std::sin(5.0 * x.x()) + x.y());
    }
    for (const auto& x : xs)
        REQUIRE_THAT(gp.predict(x).mean, WithinAbs(std::sin(5.0 * x.x()) + x.y(), 1e-5));
}

TEST_CASE("zero noise with duplicate points reports the factorization failure") {
    rte::GaussianProcess gp(kDefaultKernel, 0.0, {});
    const Eigen::Vector2d x{0.5, 0.5};
    gp.add(x, 1.0);
    REQUIRE_THROWS_AS(gp.add(x, 2.0), std::runtime_error);
    REQUIRE(gp.size() == 1);  // the failed update left the dataset untouched
}

TEST_CASE("gp_predict matches a dense-solve oracle") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    std::uniform_real_distribution<double> value(-2.0, 2.0);
    std::uniform_int_distribution<int> size(1, 120);
    const auto prior = [](const Eigen::Vector2d& v) { return 0.3 * v.x() - 0.1; };

    for (int trial = 0; trial < 25; ++trial) {
        rte::GaussianProcess gp(kDefaultKernel, kNoiseSq, prior);
        std::vector<Eigen::Vector2d> inputs;
        std::vector<double> observations;
        const int n = size(rng);
        for (int i = 0; i < n; ++i) {
            const Eigen::Vector2d x{coord(rng), coord(rng)};
            const double y = value(rng);
            inputs.push_back(x);
            observations.push_back(y);
            gp.add(x, y);
        }
        for (int q = 0; q < 5; ++q) {
            const Eigen::Vector2d query{coord(rng), coord(rng)};
            const auto got = gp.predict(query);
            const auto [mean, variance] = oracles::gp_dense(inputs, observations, prior, 0.5, 1.0,
                                                            kNoiseSq, query);
            REQUIRE_THAT(got.mean, WithinAbs(mean, 1e-8));
            REQUIRE_THAT(got.variance, WithinAbs(std::max(variance, 0.0), 1e-8));
        }
    }
}

TEST_CASE("posterior variance is bounded by the prior and shrinks with data") {
    rte::GaussianProcess gp(kDefaultKernel, kNoiseSq, {});
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    const Eigen::Vector2d query{0.5, 0.5};
    double last_variance = gp.predict(query).variance;
    REQUIRE(last_variance == 0.5);
    for (int i = 0; i < 60; ++i) {
        gp.add({coord(rng), coord(rng)}, coord(rng));
        const double v = gp.predict(query).variance;
        REQUIRE(v >= 0.0);
        REQUIRE(v <= 0.5);
        REQUIRE(v <= last_variance + 1e-10);
        last_variance = v;
    }
}

TEST_CASE("incremental factor extension equals a full refactorization") {
    rte::GaussianProcess gp(kDefaultKernel, kNoiseSq, {});
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    for (int i = 0; i < 80; ++i)
        gp.add({coord(rng), coord(rng)}, coord(rng));

    const auto n = static_cast<Eigen::Index>(gp.size());
    Eigen::MatrixXd K(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j)
            K(i, j) = rte::se_kernel(gp.inputs()[static_cast<std::size_t>(i)],
                                     gp.inputs()[static_cast<std::size_t>(j)], kDefaultKernel);
    K.diagonal().array() += kNoiseSq;
    const Eigen::MatrixXd full = Eigen::LLT<Eigen::MatrixXd>(K).matrixL();
    const Eigen::MatrixXd incremental = gp.chol_lower();
    REQUIRE((full - incremental).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("OutcomeModel keeps its four GPs in lockstep") {
    rte::Repertoire grid = rte::map_elites({2000, 500, 0.1, 20}, 12);
    REQUIRE(grid.size() > 20);
    rte::OutcomeModel model =
        rte::OutcomeModel::with_repertoire_prior(grid, kDefaultKernel, kNoiseSq);
    const rte::Action& action = *grid.cell(grid.filled().front());

    SECTION("empty model predicts the prior outcome with full variance") {
        const rte::PredictedOutcome p = rte::outcome_predict(model, action);
        REQUIRE(p.mean == action.prior_outcome);
        REQUIRE_THAT(p.variance[0], WithinAbs(0.5 * 100.0 * 100.0, 1e-9));
        REQUIRE_THAT(p.variance[2], WithinAbs(0.5, 1e-12));
    }
    SECTION("updates grow all four datasets together") {
        rte::outcome_update(model, action, action.prior_outcome);
        for (int d = 0; d < 4; ++d)
            REQUIRE(model.gp(d).size() == 1);
        const rte::Action& other = *grid.cell(grid.filled().back());
        rte::outcome_update(model, other, other.prior_outcome);
        for (int d = 0; d < 4; ++d)
            REQUIRE(model.gp(d).size() == 2);
    }
    SECTION("observing the simulated outcome keeps the prediction at the prior") {
        rte::outcome_update(model, action, action.prior_outcome);
        const rte::PredictedOutcome p = rte::outcome_predict(model, action);
        REQUIRE_THAT(p.mean.dx, WithinAbs(action.prior_outcome.dx, 1e-9));
        REQUIRE_THAT(p.mean.dy, WithinAbs(action.prior_outcome.dy, 1e-9));
        REQUIRE_THAT(p.mean.cos_dt, WithinAbs(action.prior_outcome.cos_dt, 1e-9));
    }
    SECTION("repeated observations converge to the observed value") {
        rte::Outcome halved = action.prior_outcome;
        halved.dy *= 0.5;
        halved.dx += 5.0;
        for (int i = 0; i < 5; ++i)
            rte::outcome_update(model, action, halved);
        const rte::PredictedOutcome p = rte::outcome_predict(model, action);
        REQUIRE(std::abs(p.mean.dy - halved.dy) <= 0.1 * std::max(1.0, std::abs(halved.dy)));
        REQUIRE(std::abs(p.mean.dx - halved.dx) <= 0.1 * std::max(1.0, std::abs(halved.dx)));
    }
    SECTION("batched prediction equals per-point prediction") {
        const rte::Action& other = *grid.cell(grid.filled().back());
        rte::outcome_update(model, action, action.prior_outcome);
        rte::outcome_update(model, other, other.prior_outcome);
        std::vector<Eigen::Vector2d> queries;
        for (int idx : grid.filled())
            queries.push_back(rte::to_vec(grid.cell(idx)->descriptor));
        const auto many = model.predict_many(queries);
        const auto means = model.predict_means(queries);
        for (std::size_t i = 0; i < queries.size(); ++i) {
            const rte::PredictedOutcome one = model.predict(queries[i]);
            REQUIRE_THAT(many[i].mean.dx, WithinAbs(one.mean.dx, 1e-9));
            REQUIRE_THAT(many[i].mean.dy, WithinAbs(one.mean.dy, 1e-9));
            REQUIRE_THAT(many[i].mean.cos_dt, WithinAbs(one.mean.cos_dt, 1e-12));
            REQUIRE_THAT(many[i].mean.sin_dt, WithinAbs(one.mean.sin_dt, 1e-12));
            for (int d = 0; d < 4; ++d)
                REQUIRE_THAT(many[i].variance[static_cast<std::size_t>(d)],
                             WithinAbs(one.variance[static_cast<std::size_t>(d)], 1e-9));
            REQUIRE_THAT(means[i].dx, WithinAbs(one.mean.dx, 1e-9));
        }
    }
}

TEST_CASE("zero-prior model predicts no displacement without data") {
    const rte::OutcomeModel model = rte::OutcomeModel::zero_prior(kDefaultKernel, kNoiseSq);
    const rte::PredictedOutcome p = model.predict({0.3, -0.4});
    REQUIRE(p.mean.dx == 0.0);
    REQUIRE(p.mean.dy == 0.0);
    REQUIRE(p.mean.cos_dt == 0.0);
    REQUIRE(p.mean.sin_dt == 0.0);
    REQUIRE_THAT(p.variance[0], WithinAbs(5000.0, 1e-9));
}
