#pragma once

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "vgiq/dataio.hpp"
#include "vgiq/error.hpp"
#include "vgiq/evaluate.hpp"
#include "vgiq/evolve.hpp"

namespace vgiq {

/// Everything a CLI run needs. Read from a flat `key = value` file.
struct RunConfig {
    std::optional<std::filesystem::path> stations;      ///< default <out>/stations.csv
    std::optional<std::filesystem::path> observations;  ///< default <out>/observations.csv
    std::optional<std::filesystem::path> qualities;     ///< default <out>/qualities.csv
    std::filesystem::path out = ".";
    std::uint64_t seed = 0;

    BBox bbox;
    double resolution = 20.0;  ///< grid cells per degree

    KernelSettings kernel;
    EvolveConfig evolve;

    std::vector<ModelKind> models{ModelKind::Baseline, ModelKind::NaiveFusion, ModelKind::APriori,
                                  ModelKind::Learned};
    double q_ref = 0.98;
    double q_vgi = 0.81;
    int k = 10;
    std::set<Slice> train_slices{0, 1, 2, 3};
    std::set<Slice> eval_slices{4, 5, 6, 7};
    double bin_width = 1.0;

    ModelKind predict_model = ModelKind::Learned;
    std::optional<Slice> predict_slice;  ///< default: first evaluation slice

    SyntheticScenarioConfig synth;
    std::optional<std::vector<Bump>> bumps;  ///< default: default_bumps(bbox)

    [[nodiscard]] std::filesystem::path stations_path() const { return stations.value_or(out / "stations.csv"); }
    [[nodiscard]] std::filesystem::path observations_path() const {
        return observations.value_or(out / "observations.csv");
    }
    [[nodiscard]] std::filesystem::path qualities_path() const { return qualities.value_or(out / "qualities.csv"); }

    [[nodiscard]] std::vector<ModelSpec> model_specs() const {
        std::vector<ModelSpec> out_specs;
        for (auto kind : models) {
            ModelSpec s;
            s.kind = kind;
            s.apriori_q_ref = q_ref;
            s.apriori_q_vgi = q_vgi;
            s.evolve = evolve;
            s.evolve.seed = seed;
            out_specs.push_back(s);
        }
        return out_specs;
    }

    [[nodiscard]] EvalOptions eval_options() const { return {train_slices, eval_slices, bin_width, kernel}; }

    [[nodiscard]] SyntheticScenarioConfig synth_config() const {
        auto c = synth;
        c.bbox = bbox;
        c.seed = seed;
        c.field.bumps = bumps.value_or(default_bumps(bbox));
        return c;
    }

    void validate() const {
        bbox.validate();
        if (!(resolution > 0.0)) throw ConfigError("resolution must be > 0");
        if (k <= 0) throw ConfigError("k must be > 0");
        if (!(bin_width > 0.0)) throw ConfigError("bin_width must be > 0");
        if (!valid_quality(q_ref) || !valid_quality(q_vgi)) throw ConfigError("q_ref/q_vgi must be in (0, 1]");
        if (train_slices.empty() || eval_slices.empty()) throw ConfigError("train_slices/eval_slices must be nonempty");
        if (models.empty()) throw ConfigError("models must be nonempty");
        auto e = evolve;
        e.kernel = CombinedKernelParams{};
        e.validate();
    }
};

namespace detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.push_back(trim(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

inline double to_real(const std::string& key, const std::string& v) {
    double x = 0.0;
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size() || !std::isfinite(x)) {
        throw ConfigError(key + ": expected a number, got '" + v + "'");
    }
    return x;
}

template <typename Int>
Int to_int(const std::string& key, const std::string& v) {
    Int x{};
    auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
    if (v.empty() || ec != std::errc{} || ptr != v.data() + v.size()) {
        throw ConfigError(key + ": expected an integer, got '" + v + "'");
    }
    return x;
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

inline std::optional<double> to_auto_real(const std::string& key, const std::string& v) {
    if (v == "auto") return std::nullopt;
    return to_real(key, v);
}

/// "0-3" or "0,1,2,3" (or a mix).
inline std::set<Slice> to_slices(const std::string& key, const std::string& v) {
    std::set<Slice> out;
    for (const auto& part : split(v, ',')) {
        const auto dash = part.find('-');
        if (dash == std::string::npos) {
            out.insert(to_int<Slice>(key, part));
        } else {
            const auto a = to_int<Slice>(key, trim(part.substr(0, dash)));
            const auto b = to_int<Slice>(key, trim(part.substr(dash + 1)));
            if (a > b) throw ConfigError(key + ": empty range '" + part + "'");
            for (Slice s = a; s <= b; ++s) out.insert(s);
        }
    }
    for (Slice s : out) {
        if (s < 0) throw ConfigError(key + ": slices must be nonnegative");
    }
    return out;
}

}  // namespace detail

/// Applies one `key = value` setting. Unknown keys are an error.
inline void apply_setting(RunConfig& c, const std::string& key, const std::string& value) {
    using namespace detail;
    const auto& v = value;
    auto& e = c.evolve;
    auto& s = c.synth;
    if (key == "stations") c.stations = v;
    else if (key == "observations") c.observations = v;
    else if (key == "qualities") c.qualities = v;
    else if (key == "out") c.out = v;
    else if (key == "seed") c.seed = to_int<std::uint64_t>(key, v);
    else if (key == "lat_min") c.bbox.lat_min = to_real(key, v);
    else if (key == "lat_max") c.bbox.lat_max = to_real(key, v);
    else if (key == "lon_min") c.bbox.lon_min = to_real(key, v);
    else if (key == "lon_max") c.bbox.lon_max = to_real(key, v);
    else if (key == "resolution") c.resolution = to_real(key, v);
    else if (key == "nu") {
        if (v == "0.5" || v == "1/2") c.kernel.nu = Smoothness::Half;
        else if (v == "1.5" || v == "3/2") c.kernel.nu = Smoothness::ThreeHalves;
        else if (v == "2.5" || v == "5/2") c.kernel.nu = Smoothness::FiveHalves;
        else throw ConfigError("nu: expected 0.5, 1.5 or 2.5, got '" + v + "'");
    } else if (key == "metric") {
        if (v == "euclidean") c.kernel.metric = DistanceMetric::EuclideanDegrees;
        else if (v == "haversine") c.kernel.metric = DistanceMetric::HaversineKm;
        else throw ConfigError("metric: expected euclidean or haversine, got '" + v + "'");
    } else if (key == "length_scale") c.kernel.length_scale = to_auto_real(key, v);
    else if (key == "variance") c.kernel.variance = to_auto_real(key, v);
    else if (key == "lambda") c.kernel.lambda = to_real(key, v);
    else if (key == "jitter") c.kernel.jitter = to_auto_real(key, v);
    else if (key == "mu") e.mu = to_real(key, v);
    else if (key == "prop_pred") e.proportions.pred = to_real(key, v);
    else if (key == "prop_unchanged") e.proportions.unchanged = to_real(key, v);
    else if (key == "prop_mut") e.proportions.mut = to_real(key, v);
    else if (key == "top_quality_fraction") e.top_quality_fraction = to_real(key, v);
    else if (key == "min_iter") e.min_iter = to_int<int>(key, v);
    else if (key == "max_iter") e.max_iter = to_int<int>(key, v);
    else if (key == "convergence_window") e.convergence_window = to_int<int>(key, v);
    else if (key == "convergence_threshold") e.convergence_threshold = to_real(key, v);
    else if (key == "freeze_reference") e.freeze_reference = to_bool(key, v);
    else if (key == "rollback") {
        if (v == "partition") e.rollback = RollbackRule::SamePartition;
        else if (v == "accepted") e.rollback = RollbackRule::AcceptedFitness;
        else throw ConfigError("rollback: expected partition or accepted, got '" + v + "'");
    } else if (key == "models") {
        c.models.clear();
        for (const auto& m : split(v, ',')) c.models.push_back(parse_model_kind(m));
    } else if (key == "q_ref") c.q_ref = to_real(key, v);
    else if (key == "q_vgi") c.q_vgi = to_real(key, v);
    else if (key == "k") c.k = to_int<int>(key, v);
    else if (key == "train_slices") c.train_slices = to_slices(key, v);
    else if (key == "eval_slices") c.eval_slices = to_slices(key, v);
    else if (key == "bin_width") c.bin_width = to_real(key, v);
    else if (key == "model") c.predict_model = parse_model_kind(v);
    else if (key == "predict_slice") c.predict_slice = to_int<Slice>(key, v);
    else if (key == "n_reference") s.n_reference = to_int<int>(key, v);
    else if (key == "n_volunteered") s.n_volunteered = to_int<int>(key, v);
    else if (key == "n_slices") s.n_slices = to_int<int>(key, v);
    else if (key == "noise_good") s.noise_good = to_real(key, v);
    else if (key == "slice_offset_sd") s.slice_offset_sd = to_real(key, v);
    else if (key == "corruption_fraction") s.corruption_fraction = to_real(key, v);
    else if (key == "corruption") {
        s.corruption_models.clear();
        if (v == "none") return;
        for (const auto& item : split(v, ',')) {
            const auto kv = split(item, ':');
            if (kv.size() != 2) throw ConfigError("corruption: expected kind:value, got '" + item + "'");
            CorruptionModel m;
            if (kv[0] == "stuck") m.kind = CorruptionKind::ConstantStuck;
            else if (kv[0] == "bias") m.kind = CorruptionKind::Bias;
            else if (kv[0] == "noise") m.kind = CorruptionKind::HighNoise;
            else throw ConfigError("corruption: unknown kind '" + kv[0] + "' (stuck, bias, noise)");
            m.value = to_real(key, kv[1]);
            s.corruption_models.push_back(m);
        }
    } else if (key == "base_temp") s.field.base = to_real(key, v);
    else if (key == "grad_lat") s.field.grad_lat = to_real(key, v);
    else if (key == "grad_lon") s.field.grad_lon = to_real(key, v);
    else if (key == "bumps") {
        c.bumps.emplace();
        if (v == "none") return;
        for (const auto& item : split(v, ';')) {
            const auto f = split(item, ':');
            if (f.size() != 4) throw ConfigError("bumps: expected lat:lon:amplitude:width, got '" + item + "'");
            c.bumps->push_back({{to_real(key, f[0]), to_real(key, f[1])}, to_real(key, f[2]), to_real(key, f[3])});
        }
    } else {
        throw ConfigError("unknown config key '" + key + "'");
    }
}

/// Reads `key = value` lines; `#` starts a comment.
inline void read_config(std::istream& in, RunConfig& c, const std::string& name = "config") {
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto t = detail::trim(line);
        if (t.empty()) continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw ConfigError(name + ":" + std::to_string(n) + ": expected key = value");
        try {
            apply_setting(c, detail::trim(t.substr(0, eq)), detail::trim(t.substr(eq + 1)));
        } catch (const ConfigError& err) {
            throw ConfigError(name + ":" + std::to_string(n) + ": " + err.what());
        }
    }
}

inline void load_config(const std::filesystem::path& path, RunConfig& c) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
    read_config(in, c, path.string());
}

}  // namespace vgiq
