#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "vgiq/error.hpp"
#include "vgiq/geo.hpp"
#include "vgiq/gpr.hpp"
#include "vgiq/kernels.hpp"
#include "vgiq/rng.hpp"

namespace vgiq {

/// What a step compares its selected variant against before accepting it.
enum class RollbackRule {
    /// The parent's qualities scored on the same partition as the variants.
    SamePartition,
    /// The fitness the parent generation was accepted with (scored on the
    /// parent's own partition). Makes the accepted trace non-increasing.
    AcceptedFitness,
};

struct Proportions {
    double pred = 0.3;
    double unchanged = 0.5;
    double mut = 0.2;
};

struct EvolveConfig {
    double mu = 0.81;  ///< initial quality of volunteered stations
    Proportions proportions;
    double top_quality_fraction = 0.2;  ///< share of all stations seeding the prediction set
    int min_iter = 20;
    int max_iter = 100;
    int convergence_window = 5;
    double convergence_threshold = 1e-4;  ///< on the summed relative improvement over the window
    bool freeze_reference = true;
    RollbackRule rollback = RollbackRule::SamePartition;
    std::uint64_t seed = 0;
    CombinedKernelParams kernel;

    void validate() const {
        if (!valid_quality(mu)) throw ConfigError("mu must be in (0, 1]");
        const auto& p = proportions;
        for (double f : {p.pred, p.unchanged, p.mut}) {
            if (!(f > 0.0 && f < 1.0)) throw ConfigError("proportions must each lie in (0, 1)");
        }
        if (std::abs(p.pred + p.unchanged + p.mut - 1.0) > 1e-9) throw ConfigError("proportions must sum to 1");
        if (!(top_quality_fraction >= 0.0 && top_quality_fraction <= p.pred)) {
            throw ConfigError("top_quality_fraction must be in [0, pred proportion]");
        }
        if (min_iter <= 0 || min_iter > max_iter) throw ConfigError("need 0 < min_iter <= max_iter");
        if (convergence_window <= 0) throw ConfigError("convergence_window must be > 0");
        if (!(convergence_threshold >= 0.0)) throw ConfigError("convergence_threshold must be >= 0");
        kernel.validate();
    }
};

struct Generation {
    QualityMap qualities;
    double fitness = 0.0;  ///< sum of squared prediction errors the generation was accepted with
    int iteration = 0;
};

struct Partition {
    std::vector<std::string> pred;
    std::vector<std::string> unchanged;
    std::vector<std::string> mut;
};

enum class Variant { Unchanged, Raised, Lowered };

[[nodiscard]] inline const char* to_string(Variant v) {
    switch (v) {
        case Variant::Unchanged: return "unchanged";
        case Variant::Raised: return "raised";
        case Variant::Lowered: return "lowered";
    }
    return "?";
}

enum class Termination { Converged, MaxIterReached };

struct IterationRecord {
    int iteration = 0;
    double accepted_fitness = 0.0;
    double reference_fitness = 0.0;  ///< what the selected variant was compared against
    std::array<double, 3> candidate_fitness{};
    Variant variant = Variant::Unchanged;
    bool rolled_back = false;
};

struct EvolveResult {
    QualityMap final_qualities;
    std::vector<double> fitness_trace;
    int iterations_run = 0;
    Termination termination = Termination::MaxIterReached;
    double initial_fitness = 0.0;
    std::vector<IterationRecord> log;
};

inline constexpr std::size_t kMinPartitionStations = 10;

[[nodiscard]] inline double raise_quality(double q) { return std::min(1.0, 0.9 * q + 0.1); }
[[nodiscard]] inline double lower_quality(double q) { return 0.9 * q; }

[[nodiscard]] inline QualityMap mutate_up(const QualityMap& qualities) {
    QualityMap out;
    for (const auto& [id, q] : qualities) out.emplace(id, raise_quality(q));
    return out;
}

[[nodiscard]] inline QualityMap mutate_down(const QualityMap& qualities) {
    QualityMap out;
    for (const auto& [id, q] : qualities) out.emplace(id, lower_quality(q));
    return out;
}

/// Sum over `pred_set` of squared differences between each observation and
/// the posterior mean conditioned on `conditioning_set` for the same slice.
/// Slices whose conditioning stations coincide share one factorization.
[[nodiscard]] inline double fitness(std::span<const QualityObservation> pred_set,
                                    std::span<const QualityObservation> conditioning_set,
                                    const CombinedKernelParams& kernel) {
    if (pred_set.empty() || conditioning_set.empty()) throw EmptyDataset("fitness: empty observation set");
    const auto preds = group_by_slice(pred_set);
    const auto conds = group_by_slice(conditioning_set);

    struct Cached {
        std::vector<std::pair<std::string, double>> key;
        GprModel model;
    };
    std::vector<Cached> cache;

    double total = 0.0;
    for (const auto& [slice, targets] : preds) {
        auto it = conds.find(slice);
        if (it == conds.end()) {
            throw EmptyDataset("fitness: no conditioning observations in slice " + std::to_string(slice));
        }
        const auto& cond = it->second;
        std::vector<std::pair<std::string, double>> key;
        key.reserve(cond.size());
        for (const auto& o : cond) key.emplace_back(o.observation.station_id, o.q);

        const GprModel* model = nullptr;
        GprModel refit;
        for (const auto& c : cache) {
            if (c.key == key) {
                std::vector<double> values;
                values.reserve(cond.size());
                for (const auto& o : cond) values.push_back(o.observation.value);
                refit = c.model.with_targets(values);
                model = &refit;
                break;
            }
        }
        if (model == nullptr) {
            cache.push_back({std::move(key), fit(cond, kernel)});
            model = &cache.back().model;
        }

        std::vector<GeoPoint> points;
        points.reserve(targets.size());
        for (const auto& o : targets) points.push_back(o.location);
        const auto mean = predict_mean(*model, points);
        for (std::size_t i = 0; i < targets.size(); ++i) {
            const double r = targets[i].observation.value - mean[i];
            total += r * r;
        }
    }
    return total;
}

/// Splits the stations of `gen` into prediction, unchanged and mutation sets.
/// The prediction set is seeded with the highest-quality stations (ties by
/// id) and filled up at random; the mutation set is drawn from the rest.
[[nodiscard]] inline Partition partition(const Generation& gen, Rng& rng, const EvolveConfig& config = {}) {
    const std::size_t n = gen.qualities.size();
    if (n < kMinPartitionStations) {
        throw TooFewStations("partition needs at least " + std::to_string(kMinPartitionStations) +
                             " stations, got " + std::to_string(n));
    }
    const auto count = [n](double f) { return static_cast<std::size_t>(std::lround(f * static_cast<double>(n))); };
    const std::size_t n_pred = count(config.proportions.pred);
    const std::size_t n_mut = count(config.proportions.mut);
    const std::size_t n_top = std::min(count(config.top_quality_fraction), n_pred);

    std::vector<std::pair<std::string, double>> ranked(gen.qualities.begin(), gen.qualities.end());
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Partition p;
    std::vector<std::string> rest;
    for (std::size_t i = 0; i < ranked.size(); ++i) {
        (i < n_top ? p.pred : rest).push_back(ranked[i].first);
    }
    std::sort(rest.begin(), rest.end());
    rng.shuffle(rest);

    std::size_t i = 0;
    for (; i < rest.size() && p.pred.size() < n_pred; ++i) p.pred.push_back(rest[i]);
    for (; i < rest.size() && p.mut.size() < n_mut; ++i) p.mut.push_back(rest[i]);
    for (; i < rest.size(); ++i) p.unchanged.push_back(rest[i]);

    std::sort(p.pred.begin(), p.pred.end());
    std::sort(p.mut.begin(), p.mut.end());
    std::sort(p.unchanged.begin(), p.unchanged.end());
    return p;
}

namespace detail {

// Observations of the stations in `ids`, carrying qualities from `qualities`.
inline std::vector<QualityObservation> observations_of(const Dataset& data, const std::set<std::string>& ids,
                                                       const QualityMap& qualities) {
    std::vector<QualityObservation> out;
    for (const auto& o : data.observations()) {
        if (!ids.contains(o.station_id)) continue;
        out.push_back({o, data.station(o.station_id).location, qualities.at(o.station_id)});
    }
    return out;
}

inline double partition_fitness(const Dataset& data, const Partition& part, const QualityMap& qualities,
                                const CombinedKernelParams& kernel) {
    const std::set<std::string> pred(part.pred.begin(), part.pred.end());
    std::set<std::string> cond(part.unchanged.begin(), part.unchanged.end());
    cond.insert(part.mut.begin(), part.mut.end());
    const auto p = observations_of(data, pred, qualities);
    const auto c = observations_of(data, cond, qualities);
    return fitness(p, c, kernel);
}

}  // namespace detail

/// Starting generation: quality 1 for reference stations, mu for volunteered
/// ones, fitness scored on one partition drawn from `rng`.
[[nodiscard]] inline Generation initialize(const Dataset& reference_train, const Dataset& volunteered,
                                           const EvolveConfig& config, Rng& rng) {
    config.validate();
    if (reference_train.observations().empty()) throw EmptyDataset("initialize: reference dataset has no observations");
    if (volunteered.observations().empty()) throw EmptyDataset("initialize: volunteered dataset has no observations");
    Generation gen;
    for (const auto& s : reference_train.stations()) gen.qualities.emplace(s.id, 1.0);
    for (const auto& s : volunteered.stations()) {
        if (!gen.qualities.emplace(s.id, config.mu).second) {
            throw DuplicateError("initialize: station '" + s.id + "' is in both datasets");
        }
    }
    const Dataset data = Dataset::merge(reference_train, volunteered);
    const Partition part = partition(gen, rng, config);
    gen.fitness = detail::partition_fitness(data, part, gen.qualities, config.kernel);
    return gen;
}

struct StepOutcome {
    Generation next;
    IterationRecord record;
    Partition partition;
};

/// One generation: partition, score the unchanged / raised / lowered variants
/// of the mutation set, keep the lowest error, roll back if it is worse than
/// the comparison fitness chosen by `config.rollback`.
[[nodiscard]] inline StepOutcome step(const Generation& gen, const Dataset& data, const EvolveConfig& config,
                                      Rng& rng) {
    StepOutcome out;
    out.partition = partition(gen, rng, config);

    std::array<QualityMap, 3> candidates{gen.qualities, gen.qualities, gen.qualities};
    for (const auto& id : out.partition.mut) {
        if (config.freeze_reference && data.station(id).source == Source::Reference) continue;
        const double q = gen.qualities.at(id);
        candidates[1][id] = raise_quality(q);
        candidates[2][id] = lower_quality(q);
    }

    auto& rec = out.record;
    rec.iteration = gen.iteration + 1;
    std::size_t best = 0;
    for (std::size_t v = 0; v < candidates.size(); ++v) {
        rec.candidate_fitness[v] = detail::partition_fitness(data, out.partition, candidates[v], config.kernel);
        if (rec.candidate_fitness[v] < rec.candidate_fitness[best]) best = v;
    }
    rec.variant = static_cast<Variant>(best);
    rec.reference_fitness =
        config.rollback == RollbackRule::SamePartition ? rec.candidate_fitness[0] : gen.fitness;

    if (rec.candidate_fitness[best] > rec.reference_fitness) {
        rec.rolled_back = true;
        out.next = {gen.qualities, rec.reference_fitness, rec.iteration};
    } else {
        out.next = {std::move(candidates[best]), rec.candidate_fitness[best], rec.iteration};
    }
    rec.accepted_fitness = out.next.fitness;
    return out;
}

/// Runs the evolutionary loop until convergence (after min_iter) or max_iter.
/// Station roles come from dataset membership, not from the Source field.
[[nodiscard]] inline EvolveResult run(const Dataset& reference_train, const Dataset& volunteered,
                                      const EvolveConfig& config) {
    config.validate();
    const auto relabel = [](const Dataset& d, Source s) {
        auto stations = d.stations();
        for (auto& st : stations) st.source = s;
        return Dataset(std::move(stations), d.observations(), d.qualities());
    };
    const Dataset data =
        Dataset::merge(relabel(reference_train, Source::Reference), relabel(volunteered, Source::Volunteered));

    Rng rng(config.seed);
    Generation gen = initialize(reference_train, volunteered, config, rng);

    EvolveResult result;
    result.initial_fitness = gen.fitness;
    std::vector<double> improvement;
    while (true) {
        StepOutcome s = step(gen, data, config, rng);
        const auto& rec = s.record;
        improvement.push_back(rec.reference_fitness > 0.0
                                  ? (rec.reference_fitness - rec.accepted_fitness) / rec.reference_fitness
                                  : 0.0);
        result.fitness_trace.push_back(rec.accepted_fitness);
        result.log.push_back(rec);
        gen = std::move(s.next);

        const int t = gen.iteration;
        if (t >= config.min_iter && improvement.size() >= static_cast<std::size_t>(config.convergence_window)) {
            double recent = 0.0;
            for (auto it = improvement.end() - config.convergence_window; it != improvement.end(); ++it) recent += *it;
            if (recent < config.convergence_threshold) {
                result.termination = Termination::Converged;
                break;
            }
        }
        if (t >= config.max_iter) {
            result.termination = Termination::MaxIterReached;
            break;
        }
    }
    result.final_qualities = std::move(gen.qualities);
    result.iterations_run = gen.iteration;
    return result;
}

/// CSV iteration log: `iteration,accepted_fitness,variant,rolled_back`.
inline void write_iteration_log(std::ostream& os, std::span<const IterationRecord> log) {
    os << "iteration,accepted_fitness,variant,rolled_back\n";
    os.precision(17);
    for (const auto& r : log) {
        os << r.iteration << ',' << r.accepted_fitness << ',' << to_string(r.variant) << ','
           << (r.rolled_back ? 1 : 0) << '\n';
    }
}

}  // namespace vgiq
