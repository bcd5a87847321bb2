#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include "oracles.hpp"
#include "test_util.hpp"
#include "vgiq/kernels.hpp"

using namespace vgiq;
using Catch::Approx;

TEST_CASE("matern_cov closed forms", "[kernels]") {
    CHECK(matern_cov(0.0, {Smoothness::ThreeHalves, 1.0, 1.0}) == 1.0);
    // (1 + sqrt3) e^{-sqrt3}
    CHECK(matern_cov(1.0, {Smoothness::ThreeHalves, 1.0, 1.0}) == Approx(0.4833577245965077).epsilon(1e-14));
    // 4 e^{-1}
    CHECK(matern_cov(2.0, {Smoothness::Half, 2.0, 4.0}) == Approx(1.4715177646857693).epsilon(1e-14));

    Rng rng(3);
    for (int i = 0; i < 300; ++i) {
        const double d = rng.uniform(0, 5), ell = rng.uniform(0.1, 3), s2 = rng.uniform(0.1, 10);
        CHECK(matern_cov(d, {Smoothness::Half, ell, s2}) == Approx(oracle::matern(d, 1, ell, s2)).epsilon(1e-13));
        CHECK(matern_cov(d, {Smoothness::ThreeHalves, ell, s2}) == Approx(oracle::matern(d, 3, ell, s2)).epsilon(1e-13));
        CHECK(matern_cov(d, {Smoothness::FiveHalves, ell, s2}) == Approx(oracle::matern(d, 5, ell, s2)).epsilon(1e-13));
    }
}

TEST_CASE("matern_cov rejects negative distance", "[kernels]") {
    CHECK_THROWS_AS(matern_cov(-0.1, {}), ConfigError);
}

TEST_CASE("matern_cov is positive and decreasing", "[kernels][property]") {
    Rng rng(5);
    for (auto nu : {Smoothness::Half, Smoothness::ThreeHalves, Smoothness::FiveHalves}) {
        for (int i = 0; i < 1000; ++i) {
            const MaternParams p{nu, rng.uniform(0.05, 2.0), rng.uniform(0.1, 5.0)};
            double d1 = rng.uniform(0, 3), d2 = rng.uniform(0, 3);
            if (d1 > d2) std::swap(d1, d2);
            CHECK(matern_cov(d1, p) >= matern_cov(d2, p));
            CHECK(matern_cov(d2, p) > 0.0);
        }
    }
}

TEST_CASE("quality_cov", "[kernels]") {
    CHECK(quality_cov(true, 1.0, {0.5}) == 0.5);
    CHECK(quality_cov(true, 0.5, {1.0}) == 4.0);
    CHECK(quality_cov(false, 0.3, {2.0}) == 0.0);
    CHECK(quality_cov(false, 1.0, {0.1}) == 0.0);
    CHECK_THROWS_AS(quality_cov(true, 0.0, {1.0}), ConfigError);
    CHECK_THROWS_AS(quality_cov(true, -0.5, {1.0}), ConfigError);

    Rng rng(9);
    for (int i = 0; i < 1000; ++i) {
        double q1 = rng.uniform(0.01, 1.0), q2 = rng.uniform(0.01, 1.0);
        if (q1 == q2) continue;
        if (q1 > q2) std::swap(q1, q2);
        const QualityKernelParams p{rng.uniform(0.1, 3.0)};
        CHECK(quality_cov(true, q1, p) > quality_cov(true, q2, p));
        CHECK(quality_cov(true, q2, p) >= p.lambda);
    }
}

TEST_CASE("build_gram small cases", "[kernels]") {
    const auto p = testutil::kernel(1.0, 1.0, 1.0);
    SECTION("single observation") {
        std::vector<QualityObservation> obs{{{"A", 0, 20.0}, {48, 8}, 1.0}};
        const auto k = build_gram(obs, p);
        REQUIRE(k.rows() == 1);
        CHECK(k(0, 0) == 2.0);
    }
    SECTION("two coincident points") {
        std::vector<QualityObservation> obs{{{"A", 0, 20.0}, {48, 8}, 1.0}, {{"B", 0, 21.0}, {48, 8}, 1.0}};
        const auto k = build_gram(obs, p);
        Eigen::Matrix2d expected;
        expected << 2, 1, 1, 2;
        CHECK(k == expected);
    }
}

TEST_CASE("build_gram matches a naive double loop", "[kernels]") {
    Rng rng(21);
    for (int trial = 0; trial < 20; ++trial) {
        const auto obs = testutil::random_obs(rng, 5);
        const auto p = testutil::kernel(rng.uniform(0.2, 1.5), rng.uniform(0.5, 4), rng.uniform(0.1, 2), 1e-9);
        const auto k = build_gram(obs, p);
        const auto g = oracle::gram(testutil::to_points(obs), testutil::oracle_kernel(p));
        for (int i = 0; i < 5; ++i) {
            for (int j = 0; j < 5; ++j) CHECK(k(i, j) == Approx(g[i][j]).epsilon(1e-13));
        }
        CHECK(k == k.transpose());
    }
}

TEST_CASE("cross_cov carries no quality term", "[kernels]") {
    const auto p = testutil::kernel(1.0, 1.0, 1.0);
    std::vector<QualityObservation> train{{{"A", 0, 20.0}, {48, 8}, 0.3}};
    const std::vector<GeoPoint> q{{48, 8}};
    CHECK(cross_cov(train, q, p)(0, 0) == 1.0);

    SECTION("far queries vanish") {
        const std::vector<GeoPoint> far{{48 + 10.5, 8}, {48, 8 - 12}};
        const auto k = cross_cov(train, far, p);
        // tail at 10 length scales: (1 + 10 sqrt3) e^{-10 sqrt3} ~ 5.5e-7
        CHECK(k.maxCoeff() < 1e-4);
        CHECK(oracle::matern(10.0, 3, 1.0, 1.0) < 1e-4);
    }
    SECTION("matches naive loop") {
        Rng rng(4);
        const auto tr = testutil::random_obs(rng, 3);
        const std::vector<GeoPoint> qs{{48.1, 8.2}, {49.3, 9.0}};
        const auto k = cross_cov(tr, qs, p);
        REQUIRE(k.rows() == 3);
        REQUIRE(k.cols() == 2);
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 2; ++j) {
                const double d = oracle::euclid(tr[i].location.lat, tr[i].location.lon, qs[j].lat, qs[j].lon);
                CHECK(k(i, j) == Approx(oracle::matern(d, 3, 1.0, 1.0)).epsilon(1e-13));
            }
        }
    }
}

TEST_CASE("Gram matrices are positive definite with tiny jitter", "[kernels][property]") {
    Rng rng(1234);
    int failures = 0;
    for (int trial = 0; trial < 1000; ++trial) {
        const auto n = 1 + rng.index(50);
        auto obs = testutil::random_obs(rng, n, 1e-3);
        if (trial % 10 == 0 && n > 1) obs[1].location = obs[0].location;  // coincident stations
        const auto p = testutil::kernel(rng.uniform(0.05, 3.0), rng.uniform(0.1, 10), rng.uniform(0.01, 3), 1e-8);
        const Eigen::MatrixXd k = build_gram(obs, p);
        if (k != k.transpose()) ++failures;
        Eigen::LLT<Eigen::MatrixXd> llt(k);
        if (llt.info() != Eigen::Success) ++failures;
    }
    CHECK(failures == 0);
}
