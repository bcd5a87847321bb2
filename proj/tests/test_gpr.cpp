#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vgiq/gpr.hpp"

using namespace vgiq;
using Catch::Approx;

namespace {

QualityObservation qo(std::string id, double lat, double lon, double y, double q = 1.0, Slice s = 0) {
    return {{std::move(id), s, y}, {lat, lon}, q};
}

}  // namespace

TEST_CASE("fit a single observation", "[gpr]") {
    const std::vector<QualityObservation> obs{qo("A", 48, 8, 20.0)};
    const auto m = fit(obs, testutil::kernel(1.0, 1.0, 1.0));
    CHECK(m.mean_offset() == 20.0);
    CHECK((m.factor() * m.factor().transpose())(0, 0) == Approx(2.0).epsilon(1e-15));
    CHECK(m.alpha()(0) == 0.0);

    const GeoPoint at{48, 8};
    const auto p = predict(m, std::span(&at, 1));
    CHECK(p[0].mean == 20.0);
    CHECK(p[0].variance == Approx(0.5).epsilon(1e-14));
}

TEST_CASE("equal targets give zero weights", "[gpr]") {
    const std::vector<QualityObservation> obs{qo("A", 48, 8, 21.5), qo("B", 48.3, 8.4, 21.5)};
    const auto m = fit(obs, testutil::kernel(0.5, 2.0, 1.0));
    CHECK(m.alpha()(0) == 0.0);
    CHECK(m.alpha()(1) == 0.0);
}

TEST_CASE("fit preconditions", "[gpr]") {
    const auto p = testutil::kernel(1.0, 1.0, 1.0);
    CHECK_THROWS_AS(fit(std::vector<QualityObservation>{}, p), EmptyDataset);
    CHECK_THROWS_AS(fit(std::vector{qo("A", 48, 8, std::nan(""))}, p), DataError);
    CHECK_THROWS_AS(fit(std::vector{qo("A", 48, 8, 20, 0.0)}, p), DataError);
    CHECK_THROWS_AS(fit(std::vector{qo("A", 48, 8, 20, 1.5)}, p), DataError);
}

TEST_CASE("model invariants and alpha against a Gaussian-elimination solve", "[gpr]") {
    Rng rng(77);
    for (int trial = 0; trial < 50; ++trial) {
        const auto obs = testutil::random_obs(rng, 8);
        const auto p = testutil::kernel(rng.uniform(0.2, 1.5), rng.uniform(0.5, 4), rng.uniform(0.1, 2), 1e-10);
        const auto m = fit(obs, p);
        const Eigen::MatrixXd k = build_gram(obs, p);
        const Eigen::MatrixXd l = m.factor();
        CHECK((l * l.transpose() - k).norm() / k.norm() < 1e-8);
        CHECK(l.isLowerTriangular());

        const auto g = oracle::gram(testutil::to_points(obs), testutil::oracle_kernel(p));
        std::vector<double> y;
        double mean = 0.0;
        for (const auto& o : obs) mean += o.observation.value;
        mean /= 8.0;
        for (const auto& o : obs) y.push_back(o.observation.value - mean);
        const auto x = oracle::solve(g, y);
        for (int i = 0; i < 8; ++i) CHECK(m.alpha()(i) == Approx(x[i]).margin(1e-8));
        Eigen::VectorXd yc = Eigen::Map<const Eigen::VectorXd>(y.data(), 8);
        CHECK((k * m.alpha() - yc).norm() / yc.norm() < 1e-8);
    }
}

TEST_CASE("predict matches an explicit-inverse oracle", "[gpr][property]") {
    Rng rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const auto n = 1 + rng.index(10);
        const auto obs = testutil::random_obs(rng, n);
        auto p = testutil::kernel(rng.uniform(0.2, 2.0), rng.uniform(0.5, 5), rng.uniform(0.1, 2));
        p.matern.nu = std::array{Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves}[rng.index(3)];
        const auto m = fit(obs, p);
        std::vector<GeoPoint> qs;
        for (int j = 0; j < 5; ++j) qs.push_back({rng.uniform(47, 50), rng.uniform(7, 10)});
        qs.push_back(obs[0].location);
        const auto pred = predict(m, qs);
        const auto pts = testutil::to_points(obs);
        for (std::size_t j = 0; j < qs.size(); ++j) {
            const auto [mean, var] = oracle::predict(pts, testutil::oracle_kernel(p), qs[j].lat, qs[j].lon);
            CHECK(pred[j].mean == Approx(mean).margin(1e-8));
            CHECK(pred[j].variance == Approx(var).margin(1e-8));
            CHECK(pred[j].variance >= 0.0);
            CHECK(pred[j].variance <= p.matern.variance);
        }
        const auto means = predict_mean(m, qs);
        for (std::size_t j = 0; j < qs.size(); ++j) CHECK(means[j] == pred[j].mean);
    }
}

TEST_CASE("far queries revert to the prior", "[gpr]") {
    Rng rng(8);
    const auto obs = testutil::random_obs(rng, 6);
    const auto p = testutil::kernel(0.1, 2.0, 1.0);
    const auto m = fit(obs, p);
    const std::vector<GeoPoint> far{{60.0, 8.0}, {48.0, 30.0}};
    for (const auto& r : predict(m, far)) {
        CHECK(std::abs(r.mean - m.mean_offset()) < 1e-3);
        CHECK(std::abs(r.variance - 2.0) < 1e-3);
    }
}

TEST_CASE("a station's prediction approaches its value as its noise term vanishes", "[gpr]") {
    Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        auto pts = testutil::to_points(testutil::random_obs(rng, 6, 1.0));
        for (auto& x : pts) x.q = 1.0;
        const auto k = testutil::oracle_kernel(testutil::kernel(0.8, 1.0, 1.0));
        double prev = std::numeric_limits<double>::infinity();
        for (double q : {1.0, 10.0, 100.0}) {
            pts[0].q = q;
            const double err = std::abs(oracle::predict(pts, k, pts[0].lat, pts[0].lon).first - pts[0].y);
            CHECK(err <= prev + 1e-12);
            prev = err;
        }
        CHECK(prev < 0.01);

    }
}

TEST_CASE("interpolation error is non-increasing in quality", "[gpr][property]") {
    Rng rng(99);
    for (int trial = 0; trial < 100; ++trial) {
        auto obs = testutil::random_obs(rng, 7);
        const auto p = testutil::kernel(rng.uniform(0.2, 1.5), rng.uniform(0.5, 4), rng.uniform(0.1, 2));
        double prev = std::numeric_limits<double>::infinity();
        for (double q : {0.2, 0.5, 1.0}) {
            obs[0].q = q;
            const auto m = fit(obs, p);
            const GeoPoint at = obs[0].location;
            const double err = std::abs(predict_mean(m, std::span(&at, 1))[0] - obs[0].observation.value);
            CHECK(err <= prev + 1e-10);
            prev = err;
        }
    }
}

TEST_CASE("predictions are invariant to training order", "[gpr][property]") {
    Rng rng(55);
    for (int trial = 0; trial < 50; ++trial) {
        auto obs = testutil::random_obs(rng, 9);
        const auto p = testutil::kernel(rng.uniform(0.2, 1.5), rng.uniform(0.5, 4), rng.uniform(0.1, 2), 1e-10);
        const std::vector<GeoPoint> qs{{48.2, 8.1}, {49.0, 9.3}, obs[3].location};
        const auto a = predict(fit(obs, p), qs);
        rng.shuffle(obs);
        const auto b = predict(fit(obs, p), qs);
        for (std::size_t j = 0; j < qs.size(); ++j) {
            CHECK(std::abs(a[j].mean - b[j].mean) < 1e-10);
            CHECK(std::abs(a[j].variance - b[j].variance) < 1e-10);
        }
    }
}

TEST_CASE("with_targets reuses the factorization", "[gpr]") {
    Rng rng(12);
    auto obs = testutil::random_obs(rng, 6);
    const auto p = testutil::kernel(0.7, 1.5, 0.5);
    const auto m = fit(obs, p);
    std::vector<double> vals;
    for (auto& o : obs) {
        o.observation.value += rng.normal();
        vals.push_back(o.observation.value);
    }
    const auto a = m.with_targets(vals);
    const auto b = fit(obs, p);
    for (int i = 0; i < 6; ++i) CHECK(a.alpha()(i) == Approx(b.alpha()(i)).margin(1e-12));
    CHECK(a.mean_offset() == Approx(b.mean_offset()));
    CHECK_THROWS_AS(m.with_targets(std::vector<double>{1.0}), ConfigError);
}

TEST_CASE("coincident stations with q = 1 and zero jitter still factor", "[gpr]") {
    const std::vector<QualityObservation> obs{qo("A", 48, 8, 20.0), qo("B", 48, 8, 22.0)};
    auto p = testutil::kernel(1.0, 1.0, 1e-12);
    const auto m = fit(obs, p);
    CHECK(m.mean_offset() == 21.0);
}

TEST_CASE("CholeskyFailure after bounded jitter escalation", "[gpr]") {
    // three coincident stations with a vanishing noise term and a jitter too
    // small to survive three tenfold escalations
    std::vector<QualityObservation> obs{qo("A", 48, 8, 20.0), qo("B", 48, 8, 22.0), qo("C", 48, 8, 21.0)};
    auto p = testutil::kernel(1.0, 1.0, 1e-300, 1e-300);
    try {
        (void)fit(obs, p);
        FAIL("expected CholeskyFailure");
    } catch (const CholeskyFailure& e) {
        CHECK(e.last_jitter() == Approx(1e-297));
        CHECK(e.min_diagonal() == Approx(1.0));
        CHECK(e.max_diagonal() == Approx(1.0));
    }
    p.jitter = 0.0;
    CHECK(fit(obs, p).applied_jitter() > 0.0);
}

TEST_CASE("non-finite locations are rejected", "[gpr]") {
    CHECK_THROWS_AS(fit(std::vector{qo("A", std::nan(""), 8, 20.0)}, testutil::kernel(1, 1, 1)), DataError);
}

TEST_CASE("loo_squared_error against brute force", "[gpr]") {
    Rng rng(5);
    auto obs = testutil::random_obs(rng, 6);
    for (std::size_t i = 3; i < 6; ++i) obs[i].observation.slice = 1;
    const auto p = testutil::kernel(0.6, 2.0, 0.7);
    const auto k = testutil::oracle_kernel(p);
    double expected = 0.0;
    for (int s = 0; s < 2; ++s) {
        for (int i = 0; i < 3; ++i) {
            std::vector<oracle::Point> rest;
            for (int j = 0; j < 3; ++j) {
                if (j != i) rest.push_back(testutil::to_points(obs)[s * 3 + j]);
            }
            const auto& o = obs[s * 3 + i];
            const double r = o.observation.value - oracle::predict(rest, k, o.location.lat, o.location.lon).first;
            expected += r * r;
        }
    }
    CHECK(loo_squared_error(obs, p) == Approx(expected).epsilon(1e-10));
}

TEST_CASE("grid_search_hyperparams", "[gpr]") {
    Rng rng(17);
    SECTION("single candidate") {
        const auto obs = testutil::random_obs(rng, 5);
        const std::vector<CombinedKernelParams> grid{testutil::kernel(0.4, 1.0, 1.0)};
        const auto r = grid_search_hyperparams(obs, grid);
        CHECK(r.best_index == 0);
        CHECK(r.best.matern.length_scale == 0.4);
    }
    SECTION("identical candidates: first wins") {
        const auto obs = testutil::random_obs(rng, 5);
        const std::vector<CombinedKernelParams> grid{testutil::kernel(0.4, 1.0, 1.0), testutil::kernel(0.4, 1.0, 1.0)};
        CHECK(grid_search_hyperparams(obs, grid).best_index == 0);
    }
    SECTION("argmin over an exhaustive grid on a GP sample") {
        // draw a sample from a known GP via the oracle Cholesky-free route:
        // y = L z with L from Eigen on the oracle Gram
        auto obs = testutil::random_obs(rng, 15, 1.0);
        const auto truth = testutil::kernel(0.5, 2.0, 1e-4);
        const Eigen::MatrixXd k = build_gram(obs, truth);
        const Eigen::MatrixXd l = Eigen::LLT<Eigen::MatrixXd>(k).matrixL();
        Eigen::VectorXd z(15);
        for (int i = 0; i < 15; ++i) z(i) = rng.normal();
        const Eigen::VectorXd y = l * z;
        for (int i = 0; i < 15; ++i) obs[i].observation.value = 20.0 + y(i);

        std::vector<CombinedKernelParams> grid;
        for (double ell : {0.1, 0.5, 2.0}) {
            for (double s2 : {0.5, 2.0}) {
                for (double lam : {1e-4, 1.0}) grid.push_back(testutil::kernel(ell, s2, lam));
            }
        }
        const auto r = grid_search_hyperparams(obs, grid);
        for (std::size_t c = 0; c < grid.size(); ++c) {
            CHECK(r.scores[c] == Approx(loo_squared_error(obs, grid[c])));
            CHECK(r.scores[r.best_index] <= r.scores[c]);
        }
        CHECK(r.warnings.empty());
    }
    SECTION("empty grid") {
        const auto obs = testutil::random_obs(rng, 3);
        CHECK_THROWS_AS(grid_search_hyperparams(obs, std::vector<CombinedKernelParams>{}), ConfigError);
    }
}

TEST_CASE("data_driven_kernel", "[gpr]") {
    std::vector<QualityObservation> obs{qo("A", 0, 0, 1.0, 1, 0), qo("B", 0, 1, 3.0, 1, 0), qo("C", 0, 3, 5.0, 1, 1),
                                        qo("A", 0, 0, 7.0, 1, 1)};
    const auto p = data_driven_kernel(obs);
    // slice 0: mean 2, ss 2; slice 1: mean 6, ss 2 -> 4 / 4
    CHECK(p.matern.variance == Approx(1.0));
    // pairwise distances 1, 3, 2 -> median 2
    CHECK(p.matern.length_scale == Approx(2.0));
    CHECK(p.quality.lambda == 1.0);
    CHECK(p.jitter == Approx(1e-10));

    const std::vector<QualityObservation> flat{qo("A", 0, 0, 5.0), qo("B", 0, 0, 5.0)};
    const auto f = data_driven_kernel(flat);
    CHECK(f.matern.variance == 1.0);
    CHECK(f.matern.length_scale == 1.0);
}
