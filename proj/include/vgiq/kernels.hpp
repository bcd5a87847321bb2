#pragma once

#include <cmath>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "vgiq/error.hpp"
#include "vgiq/geo.hpp"

namespace vgiq {

/// Matérn smoothness. Only the half-integer values with closed forms are offered.
enum class Smoothness { Half, ThreeHalves, FiveHalves };

[[nodiscard]] inline double smoothness_value(Smoothness nu) {
    switch (nu) {
        case Smoothness::Half: return 0.5;
        case Smoothness::ThreeHalves: return 1.5;
        case Smoothness::FiveHalves: return 2.5;
    }
    return 1.5;
}

struct MaternParams {
    Smoothness nu = Smoothness::ThreeHalves;
    double length_scale = 1.0;  ///< in distance-metric units
    double variance = 1.0;      ///< (°C)²

    void validate() const {
        if (!(std::isfinite(length_scale) && length_scale > 0.0)) throw ConfigError("length_scale must be > 0");
        if (!(std::isfinite(variance) && variance > 0.0)) throw ConfigError("variance must be > 0");
    }
};

struct QualityKernelParams {
    double lambda = 1.0;

    void validate() const {
        if (!(std::isfinite(lambda) && lambda > 0.0)) throw ConfigError("lambda must be > 0");
    }
};

struct CombinedKernelParams {
    MaternParams matern;
    QualityKernelParams quality;
    DistanceMetric metric = DistanceMetric::EuclideanDegrees;
    double jitter = 0.0;  ///< added to the Gram diagonal on top of the quality term

    void validate() const {
        matern.validate();
        quality.validate();
        if (!(std::isfinite(jitter) && jitter >= 0.0)) throw ConfigError("jitter must be >= 0");
    }
};

/// Matérn covariance at distance d.
[[nodiscard]] inline double matern_cov(double d, const MaternParams& p) {
    if (!(d >= 0.0)) throw ConfigError("matern_cov: distance must be >= 0");
    const double r = d / p.length_scale;
    switch (p.nu) {
        case Smoothness::Half:
            return p.variance * std::exp(-r);
        case Smoothness::ThreeHalves: {
            const double s = std::sqrt(3.0) * r;
            return p.variance * (1.0 + s) * std::exp(-s);
        }
        case Smoothness::FiveHalves: {
            const double s = std::sqrt(5.0) * r;
            return p.variance * (1.0 + s + 5.0 * r * r / 3.0) * std::exp(-s);
        }
    }
    return 0.0;
}

/// Quality covariance: lambda / q² for the same observation, zero otherwise.
[[nodiscard]] inline double quality_cov(bool same_point, double q, const QualityKernelParams& p) {
    if (!(q > 0.0)) throw ConfigError("quality_cov: quality must be > 0");
    return same_point ? p.lambda / (q * q) : 0.0;
}

/// Training covariance: Matérn between locations plus, on the diagonal only,
/// the quality term and jitter. Both triangles are filled from one evaluation.
[[nodiscard]] inline Eigen::MatrixXd build_gram(std::span<const QualityObservation> obs,
                                                const CombinedKernelParams& params) {
    const auto n = static_cast<Eigen::Index>(obs.size());
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& oi = obs[static_cast<std::size_t>(i)];
        if (!valid_quality(oi.q)) throw ConfigError("build_gram: quality outside (0, 1]");
        k(i, i) = params.matern.variance + quality_cov(true, oi.q, params.quality) + params.jitter;
        for (Eigen::Index j = 0; j < i; ++j) {
            const auto& oj = obs[static_cast<std::size_t>(j)];
            const double c = matern_cov(distance(oi.location, oj.location, params.metric), params.matern);
            k(i, j) = c;
            k(j, i) = c;
        }
    }
    return k;
}

/// Train x query covariance. Query points are never the same observation as a
/// training point, so no quality term appears.
[[nodiscard]] inline Eigen::MatrixXd cross_cov(std::span<const QualityObservation> train,
                                               std::span<const GeoPoint> query, const CombinedKernelParams& params) {
    Eigen::MatrixXd k(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(query.size()));
    for (std::size_t j = 0; j < query.size(); ++j) {
        for (std::size_t i = 0; i < train.size(); ++i) {
            k(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
                matern_cov(distance(train[i].location, query[j], params.metric), params.matern);
        }
    }
    return k;
}

}  // namespace vgiq
