#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "vgiq/dataio.hpp"
#include "vgiq/error.hpp"
#include "vgiq/evolve.hpp"
#include "vgiq/geo.hpp"
#include "vgiq/gpr.hpp"
#include "vgiq/rng.hpp"

namespace vgiq {

enum class ModelKind { Baseline, NaiveFusion, APriori, Learned };

[[nodiscard]] inline const char* to_string(ModelKind k) {
    switch (k) {
        case ModelKind::Baseline: return "baseline";
        case ModelKind::NaiveFusion: return "naive";
        case ModelKind::APriori: return "apriori";
        case ModelKind::Learned: return "learned";
    }
    return "?";
}

[[nodiscard]] inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "baseline") return ModelKind::Baseline;
    if (s == "naive") return ModelKind::NaiveFusion;
    if (s == "apriori") return ModelKind::APriori;
    if (s == "learned") return ModelKind::Learned;
    throw ConfigError("unknown model '" + std::string(s) + "' (expected baseline, naive, apriori or learned)");
}

struct ModelSpec {
    ModelKind kind = ModelKind::Baseline;
    double apriori_q_ref = 0.98;
    double apriori_q_vgi = 0.81;
    EvolveConfig evolve;  ///< Learned only; kernel and seed are filled in per fold

    void validate() const {
        if (!valid_quality(apriori_q_ref) || !valid_quality(apriori_q_vgi)) {
            throw ConfigError("a-priori qualities must be in (0, 1]");
        }
    }
};

[[nodiscard]] inline std::vector<ModelSpec> all_models(const EvolveConfig& evolve = {}) {
    std::vector<ModelSpec> out;
    for (auto k : {ModelKind::Baseline, ModelKind::NaiveFusion, ModelKind::APriori, ModelKind::Learned}) {
        ModelSpec s;
        s.kind = k;
        s.evolve = evolve;
        out.push_back(s);
    }
    return out;
}

/// Kernel settings where unset values are derived from data (see data_driven_kernel).
struct KernelSettings {
    Smoothness nu = Smoothness::ThreeHalves;
    DistanceMetric metric = DistanceMetric::EuclideanDegrees;
    std::optional<double> length_scale;
    std::optional<double> variance;
    double lambda = 1.0;
    std::optional<double> jitter;

    [[nodiscard]] CombinedKernelParams resolve(std::span<const QualityObservation> obs) const {
        CombinedKernelParams p = data_driven_kernel(obs, nu, metric);
        if (length_scale) p.matern.length_scale = *length_scale;
        if (variance) p.matern.variance = *variance;
        p.quality.lambda = lambda;
        p.jitter = jitter ? *jitter : 1e-10 * p.matern.variance;
        p.validate();
        return p;
    }
};

struct FoldSplit {
    std::vector<std::vector<std::string>> folds;
};

/// Seeded permutation of the (sorted) ids, then round-robin into k folds.
[[nodiscard]] inline FoldSplit kfold(std::vector<std::string> station_ids, int k, std::uint64_t seed) {
    if (k <= 0) throw ConfigError("kfold: k must be > 0");
    if (static_cast<std::size_t>(k) > station_ids.size()) {
        throw KTooLarge("kfold: k = " + std::to_string(k) + " exceeds " + std::to_string(station_ids.size()) +
                        " stations");
    }
    std::sort(station_ids.begin(), station_ids.end());
    Rng rng(seed);
    rng.shuffle(station_ids);
    FoldSplit split;
    split.folds.resize(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < station_ids.size(); ++i) {
        split.folds[i % static_cast<std::size_t>(k)].push_back(station_ids[i]);
    }
    return split;
}

struct MaeSd {
    double mae = 0.0;
    double sd = 0.0;  ///< population sd of the absolute errors
};

[[nodiscard]] inline MaeSd mae_and_sd(std::span<const double> errors) {
    if (errors.empty()) throw EmptyErrors("mae_and_sd: no errors");
    const auto n = static_cast<double>(errors.size());
    double sum = 0.0;
    for (double e : errors) sum += std::abs(e);
    const double mae = sum / n;
    double ss = 0.0;
    for (double e : errors) ss += (std::abs(e) - mae) * (std::abs(e) - mae);
    return {mae, std::sqrt(ss / n)};
}

/// Population sd of the signed errors.
[[nodiscard]] inline double signed_sd(std::span<const double> errors) {
    if (errors.empty()) throw EmptyErrors("signed_sd: no errors");
    const auto n = static_cast<double>(errors.size());
    double mean = 0.0;
    for (double e : errors) mean += e;
    mean /= n;
    double ss = 0.0;
    for (double e : errors) ss += (e - mean) * (e - mean);
    return std::sqrt(ss / n);
}

/// Contiguous bins [i w, (i+1) w) covering the error range.
struct Histogram {
    double bin_width = 1.0;
    long long first_bin = 0;
    std::vector<std::size_t> counts;

    [[nodiscard]] double lower(std::size_t i) const {
        return static_cast<double>(first_bin + static_cast<long long>(i)) * bin_width;
    }
    [[nodiscard]] double upper(std::size_t i) const { return lower(i + 1); }
    [[nodiscard]] std::size_t total() const {
        std::size_t t = 0;
        for (auto c : counts) t += c;
        return t;
    }
};

[[nodiscard]] inline Histogram histogram(std::span<const double> errors, double bin_width) {
    if (errors.empty()) throw EmptyErrors("histogram: no errors");
    if (!(bin_width > 0.0)) throw ConfigError("histogram: bin_width must be > 0");
    const auto bin = [bin_width](double e) { return static_cast<long long>(std::floor(e / bin_width)); };
    const auto [lo, hi] = std::minmax_element(errors.begin(), errors.end());
    Histogram h;
    h.bin_width = bin_width;
    h.first_bin = bin(*lo);
    h.counts.assign(static_cast<std::size_t>(bin(*hi) - h.first_bin + 1), 0);
    for (double e : errors) ++h.counts[static_cast<std::size_t>(bin(e) - h.first_bin)];
    return h;
}

struct EvalOptions {
    std::set<Slice> train_slices{0, 1, 2, 3};
    std::set<Slice> eval_slices{4, 5, 6, 7};
    double bin_width = 1.0;
    KernelSettings kernel;
};

struct FoldReport {
    int fold = 0;
    double mae = 0.0;
    double sd_abs = 0.0;
    double sd_signed = 0.0;
    std::size_t n = 0;
};

struct ModelReport {
    ModelSpec spec;
    std::vector<double> errors;  ///< predicted - observed, pooled over folds
    double mae = 0.0;
    double sd_abs = 0.0;
    double sd_signed = 0.0;
    Histogram histogram;
    std::vector<FoldReport> folds;
    std::vector<QualityMap> learned_qualities;  ///< Learned only, one per fold
    std::vector<EvolveResult> evolve_runs;      ///< Learned only, one per fold
};

struct EvalReport {
    std::vector<ModelReport> models;
    FoldSplit split;
    std::vector<CombinedKernelParams> fold_kernels;

    [[nodiscard]] const ModelReport& model(ModelKind k) const {
        for (const auto& m : models) {
            if (m.spec.kind == k) return m;
        }
        throw ConfigError(std::string("report has no model '") + to_string(k) + "'");
    }
};

/// Quality-tagged training data a model conditions on, before any learning.
/// `reference_train` must already exclude the held-out stations.
[[nodiscard]] inline Dataset model_training_data(const ModelSpec& spec, const Dataset& reference_train,
                                                 const Dataset& volunteered) {
    switch (spec.kind) {
        case ModelKind::Baseline:
            return reference_train.with_uniform_quality(1.0);
        case ModelKind::NaiveFusion:
            return Dataset::merge(reference_train, volunteered).with_uniform_quality(1.0);
        case ModelKind::APriori:
        case ModelKind::Learned: {
            const double q_vgi = spec.kind == ModelKind::APriori ? spec.apriori_q_vgi : spec.evolve.mu;
            const double q_ref = spec.kind == ModelKind::APriori ? spec.apriori_q_ref : 1.0;
            return Dataset::merge(reference_train.with_uniform_quality(q_ref), volunteered.with_uniform_quality(q_vgi));
        }
    }
    return {};
}

/// k-fold cross-validation over reference stations. Every model is fitted
/// per evaluation slice on the fold's training stations and scored at the
/// held-out reference stations; the Learned model first runs the
/// evolutionary search on the training slices.
[[nodiscard]] inline EvalReport run_evaluation(const Dataset& reference, const Dataset& volunteered,
                                               std::span<const ModelSpec> specs, int k, std::uint64_t seed,
                                               const EvalOptions& options = {}) {
    for (const auto& s : specs) s.validate();
    std::vector<std::string> ref_ids;
    for (const auto& s : reference.stations()) ref_ids.push_back(s.id);

    EvalReport report;
    report.split = kfold(ref_ids, k, seed);
    for (const auto& s : specs) report.models.push_back({.spec = s});

    for (std::size_t f = 0; f < report.split.folds.size(); ++f) {
        const std::set<std::string> held(report.split.folds[f].begin(), report.split.folds[f].end());
        const Dataset ref_train =
            reference.filter_stations([&held](const SensorStation& s) { return !held.contains(s.id); });
        const Dataset ref_held =
            reference.filter_stations([&held](const SensorStation& s) { return held.contains(s.id); });
        const auto kernel = options.kernel.resolve(ref_train.filter_slices(options.train_slices).quality_observations());
        report.fold_kernels.push_back(kernel);

        for (auto& mr : report.models) {
            Dataset data = model_training_data(mr.spec, ref_train, volunteered);
            if (mr.spec.kind == ModelKind::Learned) {
                EvolveConfig cfg = mr.spec.evolve;
                cfg.kernel = kernel;
                cfg.seed = Rng::derive(mr.spec.evolve.seed ^ seed, f);
                auto res = run(ref_train.filter_slices(options.train_slices),
                               volunteered.filter_slices(options.train_slices), cfg);
                data = data.with_qualities(res.final_qualities);
                mr.learned_qualities.push_back(res.final_qualities);
                mr.evolve_runs.push_back(std::move(res));
            }

            std::vector<double> fold_errors;
            for (Slice t : options.eval_slices) {
                const auto targets = ref_held.quality_observations(t);
                if (targets.empty()) continue;
                const auto train = data.quality_observations(t);
                if (train.empty()) {
                    throw EmptyDataset(std::string("evaluation: model '") + to_string(mr.spec.kind) +
                                       "' has no training observations in slice " + std::to_string(t));
                }
                const GprModel m = fit(train, kernel);
                std::vector<GeoPoint> points;
                for (const auto& o : targets) points.push_back(o.location);
                const auto mean = predict_mean(m, points);
                for (std::size_t i = 0; i < targets.size(); ++i) {
                    fold_errors.push_back(mean[i] - targets[i].observation.value);
                }
            }
            FoldReport fr;
            fr.fold = static_cast<int>(f);
            fr.n = fold_errors.size();
            if (!fold_errors.empty()) {
                const auto ms = mae_and_sd(fold_errors);
                fr.mae = ms.mae;
                fr.sd_abs = ms.sd;
                fr.sd_signed = signed_sd(fold_errors);
            }
            mr.folds.push_back(fr);
            mr.errors.insert(mr.errors.end(), fold_errors.begin(), fold_errors.end());
        }
    }

    for (auto& mr : report.models) {
        if (mr.errors.empty()) throw EmptyErrors("evaluation produced no held-out predictions");
        const auto ms = mae_and_sd(mr.errors);
        mr.mae = ms.mae;
        mr.sd_abs = ms.sd;
        mr.sd_signed = signed_sd(mr.errors);
        mr.histogram = histogram(mr.errors, options.bin_width);
    }
    return report;
}

inline void write_report_csv(std::ostream& os, const EvalReport& r) {
    os << "model,fold,mae_c,sd_abs_c,sd_signed_c,n\n";
    for (const auto& m : r.models) {
        for (const auto& f : m.folds) {
            os << to_string(m.spec.kind) << ',' << f.fold << ',' << format_double(f.mae) << ','
               << format_double(f.sd_abs) << ',' << format_double(f.sd_signed) << ',' << f.n << '\n';
        }
    }
}

inline void write_aggregate_csv(std::ostream& os, const EvalReport& r) {
    os << "model,mae_c,sd_abs_c\n";
    for (const auto& m : r.models) {
        os << to_string(m.spec.kind) << ',' << format_double(m.mae) << ',' << format_double(m.sd_abs) << '\n';
    }
}

inline void write_histogram_csv(std::ostream& os, const EvalReport& r) {
    os << "model,bin_lo,bin_hi,count\n";
    for (const auto& m : r.models) {
        for (std::size_t i = 0; i < m.histogram.counts.size(); ++i) {
            os << to_string(m.spec.kind) << ',' << format_double(m.histogram.lower(i)) << ','
               << format_double(m.histogram.upper(i)) << ',' << m.histogram.counts[i] << '\n';
        }
    }
}

}  // namespace vgiq
