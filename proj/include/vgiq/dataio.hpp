#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "vgiq/error.hpp"
#include "vgiq/geo.hpp"
#include "vgiq/rng.hpp"

namespace vgiq {

// ---------------------------------------------------------------------------
// CSV plumbing
// ---------------------------------------------------------------------------

/// Shortest decimal string that parses back to exactly `x`.
[[nodiscard]] inline std::string format_double(double x) {
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, x);
    if (ec != std::errc{}) throw Error("format_double: conversion failed");
    return {buf, end};
}

namespace detail {

class CsvReader {
public:
    CsvReader(std::istream& in, std::string name, std::vector<std::string> header)
        : in_(in), name_(std::move(name)), header_(std::move(header)) {
        std::string line;
        if (!std::getline(in_, line)) throw ParseError(name_, 1, header_.front(), "missing header");
        strip_cr(line);
        std::string expected;
        for (std::size_t i = 0; i < header_.size(); ++i) expected += (i ? "," : "") + header_[i];
        if (line != expected) throw ParseError(name_, 1, header_.front(), "expected header '" + expected + "'");
        line_no_ = 1;
    }

    /// Next non-empty row split into fields; false at end of input.
    bool next(std::vector<std::string>& fields) {
        std::string line;
        while (std::getline(in_, line)) {
            ++line_no_;
            strip_cr(line);
            if (line.empty()) continue;
            fields.clear();
            std::size_t start = 0;
            while (true) {
                const auto pos = line.find(',', start);
                fields.push_back(line.substr(start, pos - start));
                if (pos == std::string::npos) break;
                start = pos + 1;
            }
            if (fields.size() != header_.size()) {
                throw ParseError(name_, line_no_, header_[std::min(fields.size(), header_.size()) - 1],
                                 "expected " + std::to_string(header_.size()) + " fields, got " +
                                     std::to_string(fields.size()));
            }
            return true;
        }
        return false;
    }

    [[nodiscard]] std::size_t line() const noexcept { return line_no_; }

    [[nodiscard]] double real(const std::vector<std::string>& f, std::size_t col) const {
        double v = 0.0;
        const auto& s = f[col];
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) fail(col, "not a number: '" + s + "'");
        if (!std::isfinite(v)) fail(col, "value must be finite");
        return v;
    }

    [[nodiscard]] long long integer(const std::vector<std::string>& f, std::size_t col) const {
        long long v = 0;
        const auto& s = f[col];
        auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) fail(col, "not an integer: '" + s + "'");
        return v;
    }

    [[noreturn]] void fail(std::size_t col, const std::string& what) const {
        throw ParseError(name_, line_no_, header_[col], what);
    }

    [[nodiscard]] const std::string& name() const noexcept { return name_; }

private:
    static void strip_cr(std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    }

    std::istream& in_;
    std::string name_;
    std::vector<std::string> header_;
    std::size_t line_no_ = 0;
};

inline std::ifstream open_input(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path.string() + "'");
    return in;
}

}  // namespace detail

/// Writes through a temporary file renamed into place on success.
inline void atomic_write(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write '" + tmp.string() + "'");
        body(out);
        out.flush();
        if (!out) throw DataError("write failed for '" + tmp.string() + "'");
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// stations.csv  station_id,lat,lon,source
// ---------------------------------------------------------------------------

inline std::vector<SensorStation> read_stations(std::istream& in, const std::string& name = "stations.csv") {
    detail::CsvReader csv(in, name, {"station_id", "lat", "lon", "source"});
    std::vector<SensorStation> out;
    std::set<std::string> ids;
    std::vector<std::string> f;
    while (csv.next(f)) {
        SensorStation s;
        s.id = f[0];
        if (s.id.empty()) csv.fail(0, "empty station id");
        s.location = {csv.real(f, 1), csv.real(f, 2)};
        if (s.location.lat < -90.0 || s.location.lat > 90.0) csv.fail(1, "latitude outside [-90, 90]");
        if (s.location.lon < -180.0 || s.location.lon > 180.0) csv.fail(2, "longitude outside [-180, 180]");
        if (f[3] == "REF") {
            s.source = Source::Reference;
        } else if (f[3] == "VGI") {
            s.source = Source::Volunteered;
        } else {
            csv.fail(3, "source must be REF or VGI, got '" + f[3] + "'");
        }
        if (!ids.insert(s.id).second) {
            throw DuplicateError(name + ":" + std::to_string(csv.line()) + ": duplicate station id '" + s.id + "'");
        }
        out.push_back(std::move(s));
    }
    return out;
}

inline void write_stations(std::ostream& os, std::span<const SensorStation> stations) {
    os << "station_id,lat,lon,source\n";
    for (const auto& s : stations) {
        os << s.id << ',' << format_double(s.location.lat) << ',' << format_double(s.location.lon) << ','
           << (s.source == Source::Reference ? "REF" : "VGI") << '\n';
    }
}

inline std::vector<SensorStation> load_stations(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_stations(in, path.string());
}

inline void save_stations(const std::filesystem::path& path, std::span<const SensorStation> stations) {
    atomic_write(path, [&](std::ostream& os) { write_stations(os, stations); });
}

// ---------------------------------------------------------------------------
// observations.csv  station_id,slice,value_c
// ---------------------------------------------------------------------------

inline Dataset read_observations(std::istream& in, std::vector<SensorStation> stations,
                                 const std::string& name = "observations.csv") {
    detail::CsvReader csv(in, name, {"station_id", "slice", "value_c"});
    std::set<std::string> known;
    for (const auto& s : stations) known.insert(s.id);
    std::set<std::pair<std::string, Slice>> seen;
    std::vector<Observation> obs;
    std::vector<std::string> f;
    while (csv.next(f)) {
        Observation o;
        o.station_id = f[0];
        if (!known.contains(o.station_id)) {
            throw ReferentialError(name + ":" + std::to_string(csv.line()) + ": unknown station id '" +
                                   o.station_id + "'");
        }
        const long long slice = csv.integer(f, 1);
        if (slice < 0 || slice > std::numeric_limits<Slice>::max()) csv.fail(1, "slice must be a nonnegative integer");
        o.slice = static_cast<Slice>(slice);
        o.value = csv.real(f, 2);
        if (!seen.emplace(o.station_id, o.slice).second) {
            throw DuplicateError(name + ":" + std::to_string(csv.line()) + ": duplicate observation for '" +
                                 o.station_id + "' in slice " + std::to_string(o.slice));
        }
        obs.push_back(std::move(o));
    }
    return Dataset(std::move(stations), std::move(obs));
}

inline void write_observations(std::ostream& os, std::span<const Observation> obs) {
    os << "station_id,slice,value_c\n";
    for (const auto& o : obs) os << o.station_id << ',' << o.slice << ',' << format_double(o.value) << '\n';
}

inline Dataset load_observations(const std::filesystem::path& path, std::vector<SensorStation> stations) {
    auto in = detail::open_input(path);
    return read_observations(in, std::move(stations), path.string());
}

inline void save_observations(const std::filesystem::path& path, std::span<const Observation> obs) {
    atomic_write(path, [&](std::ostream& os) { write_observations(os, obs); });
}

// ---------------------------------------------------------------------------
// qualities.csv  station_id,quality
// ---------------------------------------------------------------------------

inline QualityMap read_qualities(std::istream& in, const std::string& name = "qualities.csv") {
    detail::CsvReader csv(in, name, {"station_id", "quality"});
    QualityMap out;
    std::vector<std::string> f;
    while (csv.next(f)) {
        const double q = csv.real(f, 1);
        if (!valid_quality(q)) csv.fail(1, "quality must be in (0, 1]");
        if (!out.emplace(f[0], q).second) {
            throw DuplicateError(name + ":" + std::to_string(csv.line()) + ": duplicate station id '" + f[0] + "'");
        }
    }
    return out;
}

inline void write_qualities(std::ostream& os, const QualityMap& qualities) {
    os << "station_id,quality\n";
    for (const auto& [id, q] : qualities) os << id << ',' << format_double(q) << '\n';
}

inline QualityMap load_qualities(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_qualities(in, path.string());
}

inline void save_qualities(const std::filesystem::path& path, const QualityMap& qualities) {
    atomic_write(path, [&](std::ostream& os) { write_qualities(os, qualities); });
}

// ---------------------------------------------------------------------------
// grid.csv  lat,lon,mean_c,variance_c2
// ---------------------------------------------------------------------------

struct GridCell {
    GeoPoint center;
    double mean = 0.0;
    double variance = 0.0;

    friend bool operator==(const GridCell&, const GridCell&) = default;
};

inline std::vector<GridCell> read_grid(std::istream& in, const std::string& name = "grid.csv") {
    detail::CsvReader csv(in, name, {"lat", "lon", "mean_c", "variance_c2"});
    std::vector<GridCell> out;
    std::vector<std::string> f;
    while (csv.next(f)) {
        GridCell c{{csv.real(f, 0), csv.real(f, 1)}, csv.real(f, 2), csv.real(f, 3)};
        if (c.variance < 0.0) csv.fail(3, "variance must be >= 0");
        out.push_back(c);
    }
    return out;
}

inline void write_grid(std::ostream& os, std::span<const GridCell> grid) {
    os << "lat,lon,mean_c,variance_c2\n";
    for (const auto& c : grid) {
        os << format_double(c.center.lat) << ',' << format_double(c.center.lon) << ',' << format_double(c.mean)
           << ',' << format_double(c.variance) << '\n';
    }
}

inline std::vector<GridCell> load_grid(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_grid(in, path.string());
}

inline void save_grid(const std::filesystem::path& path, std::span<const GridCell> grid) {
    atomic_write(path, [&](std::ostream& os) { write_grid(os, grid); });
}

// ---------------------------------------------------------------------------
// truth.csv  station_id,slice,truth_c,corrupted   (synthetic scenarios only)
// ---------------------------------------------------------------------------

struct TruthRow {
    std::string station_id;
    Slice slice = 0;
    double truth = 0.0;
    bool corrupted = false;

    friend bool operator==(const TruthRow&, const TruthRow&) = default;
};

inline std::vector<TruthRow> read_truth(std::istream& in, const std::string& name = "truth.csv") {
    detail::CsvReader csv(in, name, {"station_id", "slice", "truth_c", "corrupted"});
    std::vector<TruthRow> out;
    std::vector<std::string> f;
    while (csv.next(f)) {
        TruthRow r;
        r.station_id = f[0];
        const long long slice = csv.integer(f, 1);
        if (slice < 0 || slice > std::numeric_limits<Slice>::max()) csv.fail(1, "slice must be a nonnegative integer");
        r.slice = static_cast<Slice>(slice);
        r.truth = csv.real(f, 2);
        if (f[3] == "1") {
            r.corrupted = true;
        } else if (f[3] != "0") {
            csv.fail(3, "corrupted must be 0 or 1");
        }
        out.push_back(std::move(r));
    }
    return out;
}

inline void write_truth(std::ostream& os, std::span<const TruthRow> rows) {
    os << "station_id,slice,truth_c,corrupted\n";
    for (const auto& r : rows) {
        os << r.station_id << ',' << r.slice << ',' << format_double(r.truth) << ',' << (r.corrupted ? 1 : 0)
           << '\n';
    }
}

inline std::vector<TruthRow> load_truth(const std::filesystem::path& path) {
    auto in = detail::open_input(path);
    return read_truth(in, path.string());
}

inline void save_truth(const std::filesystem::path& path, std::span<const TruthRow> rows) {
    atomic_write(path, [&](std::ostream& os) { write_truth(os, rows); });
}

/// Stations file plus observations file; qualities default to 1.
inline Dataset load_dataset(const std::filesystem::path& stations, const std::filesystem::path& observations) {
    return load_observations(observations, load_stations(stations));
}

// ---------------------------------------------------------------------------
// Synthetic scenarios
// ---------------------------------------------------------------------------

struct BBox {
    double lat_min = 47.5;
    double lat_max = 49.5;
    double lon_min = 7.5;
    double lon_max = 9.5;

    void validate() const {
        if (!(lat_min < lat_max)) throw ConfigError("bbox: lat_min must be < lat_max");
        if (!(lon_min < lon_max)) throw ConfigError("bbox: lon_min must be < lon_max");
        if (!GeoPoint{lat_min, lon_min}.valid() || !GeoPoint{lat_max, lon_max}.valid()) {
            throw ConfigError("bbox: corners outside valid coordinates");
        }
    }

    [[nodiscard]] GeoPoint center() const { return {(lat_min + lat_max) / 2.0, (lon_min + lon_max) / 2.0}; }

    [[nodiscard]] bool contains(const GeoPoint& p) const {
        return p.lat >= lat_min && p.lat <= lat_max && p.lon >= lon_min && p.lon <= lon_max;
    }
};

struct Bump {
    GeoPoint center;
    double amplitude = 0.0;  ///< °C
    double width = 0.25;     ///< degrees
};

/// T(p) = base + grad_lat (lat - origin.lat) + grad_lon (lon - origin.lon)
///        + sum_b amplitude_b exp(-|p - center_b|² / (2 width_b²)),
/// with |.| in degrees and origin the bbox centre.
struct FieldSpec {
    double base = 24.0;
    double grad_lat = -1.0;  ///< °C per degree latitude
    double grad_lon = 0.5;   ///< °C per degree longitude
    std::vector<Bump> bumps;
};

/// A few warm and cool spots laid out relative to the bbox.
[[nodiscard]] inline std::vector<Bump> default_bumps(const BBox& b) {
    const auto at = [&b](double fy, double fx) {
        return GeoPoint{b.lat_min + fy * (b.lat_max - b.lat_min), b.lon_min + fx * (b.lon_max - b.lon_min)};
    };
    return {
        {at(0.25, 0.25), 3.0, 0.25},  {at(0.75, 0.75), -2.5, 0.30}, {at(0.60, 0.35), 2.0, 0.20},
        {at(0.20, 0.80), -2.0, 0.25}, {at(0.85, 0.20), 1.5, 0.20},  {at(0.45, 0.60), -1.5, 0.15},
    };
}

enum class CorruptionKind { ConstantStuck, Bias, HighNoise };

struct CorruptionModel {
    CorruptionKind kind = CorruptionKind::ConstantStuck;
    double value = 0.0;  ///< stuck value, bias offset or noise sd, all °C
};

struct SyntheticScenarioConfig {
    BBox bbox;
    int n_reference = 20;
    int n_volunteered = 200;
    int n_slices = 8;
    FieldSpec field{24.0, -1.0, 0.5, default_bumps(BBox{})};
    double slice_offset_sd = 1.5;  ///< sd of the per-slice scalar shift
    double noise_good = 0.3;
    double corruption_fraction = 0.3;
    std::vector<CorruptionModel> corruption_models{{CorruptionKind::ConstantStuck, 21.5},
                                                   {CorruptionKind::Bias, 3.0}};
    std::uint64_t seed = 0;

    void validate() const {
        bbox.validate();
        if (n_reference <= 0 || n_volunteered <= 0 || n_slices <= 0) throw ConfigError("counts must be > 0");
        if (!(noise_good >= 0.0)) throw ConfigError("noise_good must be >= 0");
        if (!(slice_offset_sd >= 0.0)) throw ConfigError("slice_offset_sd must be >= 0");
        if (!(corruption_fraction >= 0.0 && corruption_fraction <= 1.0)) {
            throw ConfigError("corruption_fraction must be in [0, 1]");
        }
        if (corruption_fraction > 0.0 && corruption_models.empty()) {
            throw ConfigError("corruption_fraction > 0 needs at least one corruption model");
        }
        for (const auto& b : field.bumps) {
            if (!(b.width > 0.0)) throw ConfigError("bump width must be > 0");
        }
        for (const auto& m : corruption_models) {
            if (m.kind == CorruptionKind::HighNoise && !(m.value >= 0.0)) throw ConfigError("HighNoise sd must be >= 0");
        }
    }
};

struct GroundTruth {
    FieldSpec field;
    GeoPoint origin;
    std::vector<double> slice_offsets;

    [[nodiscard]] double at(const GeoPoint& p, Slice slice) const {
        double t = field.base + field.grad_lat * (p.lat - origin.lat) + field.grad_lon * (p.lon - origin.lon);
        for (const auto& b : field.bumps) {
            const double dy = p.lat - b.center.lat;
            const double dx = p.lon - b.center.lon;
            t += b.amplitude * std::exp(-(dy * dy + dx * dx) / (2.0 * b.width * b.width));
        }
        return t + slice_offsets.at(static_cast<std::size_t>(slice));
    }
};

struct SyntheticScenario {
    Dataset reference;
    Dataset volunteered;
    GroundTruth truth;
    std::set<std::string> corrupted_ids;
    std::map<std::string, CorruptionModel> corruption_of;

    /// One row per observation, reference stations first.
    [[nodiscard]] std::vector<TruthRow> truth_rows() const {
        std::vector<TruthRow> rows;
        for (const Dataset* d : {&reference, &volunteered}) {
            for (const auto& o : d->observations()) {
                rows.push_back({o.station_id, o.slice, truth.at(d->station(o.station_id).location, o.slice),
                                corrupted_ids.contains(o.station_id)});
            }
        }
        return rows;
    }
};

namespace detail {

inline std::string padded_id(const char* prefix, int i, int n) {
    const std::size_t width = std::max<std::size_t>(3, std::to_string(n - 1).size());
    const std::string num = std::to_string(i);
    return prefix + std::string(width - std::min(num.size(), width), '0') + num;
}

}  // namespace detail

/// Seeded synthetic analog of a reference + volunteered station network.
[[nodiscard]] inline SyntheticScenario generate_scenario(const SyntheticScenarioConfig& config) {
    config.validate();
    Rng rng(config.seed);
    SyntheticScenario sc;
    sc.truth.field = config.field;
    sc.truth.origin = config.bbox.center();
    for (int s = 0; s < config.n_slices; ++s) sc.truth.slice_offsets.push_back(rng.normal(0.0, config.slice_offset_sd));

    const auto place = [&] {
        const double lat = rng.uniform(config.bbox.lat_min, config.bbox.lat_max);
        const double lon = rng.uniform(config.bbox.lon_min, config.bbox.lon_max);
        return GeoPoint{lat, lon};
    };
    std::vector<SensorStation> ref, vgi;
    for (int i = 0; i < config.n_reference; ++i) {
        ref.push_back({detail::padded_id("REF", i, config.n_reference), place(), Source::Reference});
    }
    for (int i = 0; i < config.n_volunteered; ++i) {
        vgi.push_back({detail::padded_id("VGI", i, config.n_volunteered), place(), Source::Volunteered});
    }

    const auto n_corrupt = static_cast<std::size_t>(
        std::lround(config.corruption_fraction * static_cast<double>(config.n_volunteered)));
    std::vector<std::size_t> order(vgi.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t k = 0; k < n_corrupt; ++k) {
        const auto& id = vgi[order[k]].id;
        sc.corrupted_ids.insert(id);
        sc.corruption_of.emplace(id, config.corruption_models[k % config.corruption_models.size()]);
    }

    const auto observe = [&](const std::vector<SensorStation>& stations) {
        std::vector<Observation> obs;
        for (const auto& s : stations) {
            auto model = sc.corruption_of.find(s.id);
            for (Slice t = 0; t < config.n_slices; ++t) {
                const double truth = sc.truth.at(s.location, t);
                double value = 0.0;
                if (model == sc.corruption_of.end()) {
                    value = truth + rng.normal(0.0, config.noise_good);
                } else {
                    switch (model->second.kind) {
                        case CorruptionKind::ConstantStuck:
                            value = model->second.value;
                            break;
                        case CorruptionKind::Bias:
                            value = truth + model->second.value + rng.normal(0.0, config.noise_good);
                            break;
                        case CorruptionKind::HighNoise:
                            value = truth + rng.normal(0.0, model->second.value);
                            break;
                    }
                }
                obs.push_back({s.id, t, value});
            }
        }
        return obs;
    };
    auto ref_obs = observe(ref);
    auto vgi_obs = observe(vgi);
    sc.reference = Dataset(std::move(ref), std::move(ref_obs));
    sc.volunteered = Dataset(std::move(vgi), std::move(vgi_obs));
    return sc;
}

}  // namespace vgiq
