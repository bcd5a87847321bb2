#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "vgiq/error.hpp"
#include "vgiq/geo.hpp"
#include "vgiq/kernels.hpp"

namespace vgiq {

struct Prediction {
    double mean = 0.0;      ///< °C
    double variance = 0.0;  ///< (°C)², latent field (no quality term)
};

/// Number of times jitter is multiplied by 10 after a failed factorization.
inline constexpr int kJitterEscalations = 3;

/// Zero-mean GP on centred targets of one time slice. The constant mean is
/// the training sample mean, which stands in for the generalized-least-squares
/// constant of ordinary kriging.
class GprModel {
public:
    [[nodiscard]] const std::vector<QualityObservation>& training() const noexcept { return training_; }
    [[nodiscard]] const CombinedKernelParams& params() const noexcept { return params_; }
    [[nodiscard]] double mean_offset() const noexcept { return mean_offset_; }
    /// Lower-triangular Cholesky factor of the Gram matrix.
    [[nodiscard]] const Eigen::MatrixXd& factor() const noexcept { return factor_; }
    [[nodiscard]] const Eigen::VectorXd& alpha() const noexcept { return alpha_; }
    /// Jitter actually used, after any escalation.
    [[nodiscard]] double applied_jitter() const noexcept { return applied_jitter_; }

    /// Same locations and qualities, new target values. Reuses the factorization.
    [[nodiscard]] GprModel with_targets(std::span<const double> values) const {
        if (values.size() != training_.size()) throw ConfigError("with_targets: size mismatch");
        GprModel m = *this;
        for (std::size_t i = 0; i < values.size(); ++i) m.training_[i].observation.value = values[i];
        m.solve_alpha();
        return m;
    }

private:
    friend GprModel fit(std::span<const QualityObservation>, const CombinedKernelParams&);

    void solve_alpha() {
        const auto n = static_cast<Eigen::Index>(training_.size());
        Eigen::VectorXd y(n);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            y(i) = training_[static_cast<std::size_t>(i)].observation.value;
            sum += y(i);
        }
        mean_offset_ = sum / static_cast<double>(n);
        y.array() -= mean_offset_;
        const Eigen::VectorXd z = factor_.triangularView<Eigen::Lower>().solve(y);
        alpha_ = factor_.transpose().triangularView<Eigen::Upper>().solve(z);
    }

    std::vector<QualityObservation> training_;
    CombinedKernelParams params_;
    double mean_offset_ = 0.0;
    Eigen::MatrixXd factor_;
    Eigen::VectorXd alpha_;
    double applied_jitter_ = 0.0;
};

/// Fits one slice. Throws CholeskyFailure when the Gram matrix stays
/// indefinite after the jitter escalations.
[[nodiscard]] inline GprModel fit(std::span<const QualityObservation> obs, const CombinedKernelParams& params) {
    params.validate();
    if (obs.empty()) throw EmptyDataset("fit: no observations");
    for (const auto& o : obs) {
        if (!std::isfinite(o.observation.value)) throw DataError("fit: non-finite observation value");
        if (!o.location.valid()) throw DataError("fit: invalid location for '" + o.observation.station_id + "'");
        if (!valid_quality(o.q)) throw DataError("fit: quality outside (0, 1] for '" + o.observation.station_id + "'");
    }

    GprModel m;
    m.training_.assign(obs.begin(), obs.end());
    m.params_ = params;

    Eigen::MatrixXd gram = build_gram(obs, params);
    const Eigen::VectorXd base_diag = gram.diagonal();
    double jitter = params.jitter;
    for (int attempt = 0;; ++attempt) {
        Eigen::LLT<Eigen::MatrixXd> llt(gram);
        if (llt.info() == Eigen::Success) {
            m.factor_ = llt.matrixL();
            m.applied_jitter_ = jitter;
            break;
        }
        if (attempt == kJitterEscalations) {
            throw CholeskyFailure("Gram matrix of " + std::to_string(obs.size()) +
                                      " observations is not positive definite (jitter " + std::to_string(jitter) +
                                      ")",
                                  jitter, base_diag.minCoeff(), base_diag.maxCoeff());
        }
        const double next = jitter > 0.0 ? jitter * 10.0 : 1e-10 * params.matern.variance;
        gram.diagonal().array() += next - jitter;
        jitter = next;
    }
    m.solve_alpha();
    return m;
}

[[nodiscard]] inline std::vector<double> predict_mean(const GprModel& model, std::span<const GeoPoint> points) {
    const Eigen::MatrixXd kx = cross_cov(model.training(), points, model.params());
    const Eigen::VectorXd mean = kx.transpose() * model.alpha();
    std::vector<double> out(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) out[j] = model.mean_offset() + mean(static_cast<Eigen::Index>(j));
    return out;
}

/// Posterior mean and latent variance at each point.
[[nodiscard]] inline std::vector<Prediction> predict(const GprModel& model, std::span<const GeoPoint> points) {
    const Eigen::MatrixXd kx = cross_cov(model.training(), points, model.params());
    const Eigen::VectorXd mean = kx.transpose() * model.alpha();
    const Eigen::MatrixXd v = model.factor().triangularView<Eigen::Lower>().solve(kx);
    const double prior = matern_cov(0.0, model.params().matern);
    std::vector<Prediction> out(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        const auto jj = static_cast<Eigen::Index>(j);
        out[j].mean = model.mean_offset() + mean(jj);
        out[j].variance = std::clamp(prior - v.col(jj).squaredNorm(), 0.0, prior);
    }
    return out;
}

/// Groups observations by slice, preserving input order within each slice.
[[nodiscard]] inline std::map<Slice, std::vector<QualityObservation>> group_by_slice(
    std::span<const QualityObservation> obs) {
    std::map<Slice, std::vector<QualityObservation>> out;
    for (const auto& o : obs) out[o.observation.slice].push_back(o);
    return out;
}

/// Sum over slices of exact leave-one-out squared errors (each left-out
/// observation is predicted by a model refitted without it). Slices with a
/// single observation contribute nothing.
[[nodiscard]] inline double loo_squared_error(std::span<const QualityObservation> obs,
                                              const CombinedKernelParams& params) {
    double total = 0.0;
    for (const auto& [slice, group] : group_by_slice(obs)) {
        if (group.size() < 2) continue;
        std::vector<QualityObservation> rest;
        rest.reserve(group.size() - 1);
        for (std::size_t i = 0; i < group.size(); ++i) {
            rest.clear();
            for (std::size_t j = 0; j < group.size(); ++j) {
                if (j != i) rest.push_back(group[j]);
            }
            const GprModel m = fit(rest, params);
            const GeoPoint p = group[i].location;
            const double r = group[i].observation.value - predict_mean(m, std::span(&p, 1))[0];
            total += r * r;
        }
    }
    return total;
}

struct GridSearchResult {
    CombinedKernelParams best;
    std::size_t best_index = 0;
    std::vector<double> scores;         ///< LOO error per candidate, NaN where fitting failed
    std::vector<std::string> warnings;  ///< one entry per skipped candidate
};

/// Picks the candidate with the smallest leave-one-out squared error; the
/// first-listed candidate wins ties. Candidates whose fit fails are skipped.
[[nodiscard]] inline GridSearchResult grid_search_hyperparams(std::span<const QualityObservation> obs,
                                                              std::span<const CombinedKernelParams> candidates) {
    if (candidates.empty()) throw ConfigError("grid_search_hyperparams: empty candidate grid");
    GridSearchResult result;
    result.scores.assign(candidates.size(), std::numeric_limits<double>::quiet_NaN());
    bool found = false;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        try {
            result.scores[c] = loo_squared_error(obs, candidates[c]);
        } catch (const CholeskyFailure& e) {
            result.warnings.push_back("candidate " + std::to_string(c) + " skipped: " + e.what());
            continue;
        }
        if (!found || result.scores[c] < best) {
            best = result.scores[c];
            result.best_index = c;
            found = true;
        }
    }
    if (!found) throw CholeskyFailure("grid_search_hyperparams: every candidate failed", 0.0, 0.0, 0.0);
    result.best = candidates[result.best_index];
    return result;
}

/// Data-driven starting point: variance = pooled within-slice sample
/// variance of the targets, length scale = median pairwise distance between
/// distinct station locations, lambda = 1, jitter = 1e-10 variance.
[[nodiscard]] inline CombinedKernelParams data_driven_kernel(std::span<const QualityObservation> obs,
                                                             Smoothness nu = Smoothness::ThreeHalves,
                                                             DistanceMetric metric = DistanceMetric::EuclideanDegrees) {
    CombinedKernelParams p;
    p.matern.nu = nu;
    p.metric = metric;

    double ss = 0.0;
    std::size_t count = 0;
    for (const auto& [slice, group] : group_by_slice(obs)) {
        double mean = 0.0;
        for (const auto& o : group) mean += o.observation.value;
        mean /= static_cast<double>(group.size());
        for (const auto& o : group) ss += (o.observation.value - mean) * (o.observation.value - mean);
        count += group.size();
    }
    const double var = count > 0 ? ss / static_cast<double>(count) : 0.0;
    p.matern.variance = var > 0.0 ? var : 1.0;

    std::map<std::string, GeoPoint> locs;
    for (const auto& o : obs) locs.emplace(o.observation.station_id, o.location);
    std::vector<double> d;
    for (auto a = locs.begin(); a != locs.end(); ++a) {
        for (auto b = std::next(a); b != locs.end(); ++b) {
            const double x = distance(a->second, b->second, metric);
            if (x > 0.0) d.push_back(x);
        }
    }
    if (!d.empty()) {
        const auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
        std::nth_element(d.begin(), mid, d.end());
        p.matern.length_scale = *mid;
    }
    p.quality.lambda = 1.0;
    p.jitter = 1e-10 * p.matern.variance;
    return p;
}

}  // namespace vgiq
