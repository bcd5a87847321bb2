#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "vgiq/error.hpp"

namespace vgiq {

struct GeoPoint {
    double lat = 0.0;  ///< degrees, [-90, 90]
    double lon = 0.0;  ///< degrees, [-180, 180]

    [[nodiscard]] bool valid() const noexcept {
        return std::isfinite(lat) && std::isfinite(lon) && lat >= -90.0 && lat <= 90.0 && lon >= -180.0 &&
               lon <= 180.0;
    }

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

enum class DistanceMetric { EuclideanDegrees, HaversineKm };

inline constexpr double kEarthRadiusKm = 6371.0;

/// Distance between two points. EuclideanDegrees treats (lat, lon) as plane
/// coordinates; HaversineKm is the great-circle distance on a sphere.
[[nodiscard]] inline double distance(const GeoPoint& a, const GeoPoint& b,
                                     DistanceMetric metric = DistanceMetric::EuclideanDegrees) {
    switch (metric) {
        case DistanceMetric::EuclideanDegrees:
            return std::hypot(a.lat - b.lat, a.lon - b.lon);
        case DistanceMetric::HaversineKm: {
            constexpr double rad = std::numbers::pi / 180.0;
            const double dlat = (b.lat - a.lat) * rad;
            const double dlon = (b.lon - a.lon) * rad;
            const double s = std::sin(dlat / 2.0);
            const double t = std::sin(dlon / 2.0);
            const double h = s * s + std::cos(a.lat * rad) * std::cos(b.lat * rad) * t * t;
            return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
        }
    }
    return 0.0;
}

enum class Source { Reference, Volunteered };

struct SensorStation {
    std::string id;
    GeoPoint location;
    Source source = Source::Reference;

    friend bool operator==(const SensorStation&, const SensorStation&) = default;
};

using Slice = int;

struct Observation {
    std::string station_id;
    Slice slice = 0;
    double value = 0.0;  ///< °C

    friend bool operator==(const Observation&, const Observation&) = default;
};

/// An observation joined with its station's location and current quality.
struct QualityObservation {
    Observation observation;
    GeoPoint location;
    double q = 1.0;  ///< (0, 1]
};

[[nodiscard]] inline bool valid_quality(double q) noexcept { return std::isfinite(q) && q > 0.0 && q <= 1.0; }

using QualityMap = std::map<std::string, double>;

/// Stations, their observations and one quality per station. Immutable once
/// built; every "modification" returns a new dataset.
class Dataset {
public:
    Dataset() = default;

    /// Validates referential integrity. Stations without an entry in
    /// `qualities` get quality 1.
    Dataset(std::vector<SensorStation> stations, std::vector<Observation> observations, QualityMap qualities = {})
        : stations_(std::move(stations)), observations_(std::move(observations)) {
        for (std::size_t i = 0; i < stations_.size(); ++i) {
            const auto& s = stations_[i];
            if (!s.location.valid()) {
                throw DataError("station '" + s.id + "' has invalid coordinates");
            }
            if (!index_.emplace(s.id, i).second) {
                throw DuplicateError("duplicate station id '" + s.id + "'");
            }
        }
        std::set<std::pair<std::string, Slice>> seen;
        for (const auto& o : observations_) {
            if (!index_.contains(o.station_id)) {
                throw ReferentialError("observation references unknown station '" + o.station_id + "'");
            }
            if (!std::isfinite(o.value)) {
                throw DataError("non-finite value for station '" + o.station_id + "', slice " +
                                std::to_string(o.slice));
            }
            if (o.slice < 0) {
                throw DataError("negative slice for station '" + o.station_id + "'");
            }
            if (!seen.emplace(o.station_id, o.slice).second) {
                throw DuplicateError("duplicate observation for station '" + o.station_id + "', slice " +
                                     std::to_string(o.slice));
            }
        }
        for (const auto& [id, q] : qualities) {
            if (!index_.contains(id)) {
                throw ReferentialError("quality given for unknown station '" + id + "'");
            }
            if (!valid_quality(q)) {
                throw DataError("quality of station '" + id + "' outside (0, 1]");
            }
        }
        for (const auto& s : stations_) {
            auto it = qualities.find(s.id);
            qualities_.emplace(s.id, it == qualities.end() ? 1.0 : it->second);
        }
    }

    [[nodiscard]] const std::vector<SensorStation>& stations() const noexcept { return stations_; }
    [[nodiscard]] const std::vector<Observation>& observations() const noexcept { return observations_; }
    [[nodiscard]] const QualityMap& qualities() const noexcept { return qualities_; }
    [[nodiscard]] bool empty() const noexcept { return stations_.empty(); }

    [[nodiscard]] const SensorStation* find(const std::string& id) const {
        auto it = index_.find(id);
        return it == index_.end() ? nullptr : &stations_[it->second];
    }

    [[nodiscard]] const SensorStation& station(const std::string& id) const {
        const auto* s = find(id);
        if (s == nullptr) throw ReferentialError("unknown station '" + id + "'");
        return *s;
    }

    [[nodiscard]] double quality(const std::string& id) const {
        auto it = qualities_.find(id);
        if (it == qualities_.end()) throw ReferentialError("unknown station '" + id + "'");
        return it->second;
    }

    /// Sorted distinct slice indices present in the observations.
    [[nodiscard]] std::vector<Slice> slices() const {
        std::set<Slice> s;
        for (const auto& o : observations_) s.insert(o.slice);
        return {s.begin(), s.end()};
    }

    /// Replaces qualities; entries for unknown stations are rejected, missing ones keep their value.
    [[nodiscard]] Dataset with_qualities(const QualityMap& qualities) const {
        QualityMap merged = qualities_;
        for (const auto& [id, q] : qualities) {
            if (!index_.contains(id)) throw ReferentialError("quality given for unknown station '" + id + "'");
            merged[id] = q;
        }
        return Dataset(stations_, observations_, std::move(merged));
    }

    [[nodiscard]] Dataset with_uniform_quality(double q) const {
        QualityMap m;
        for (const auto& s : stations_) m.emplace(s.id, q);
        return Dataset(stations_, observations_, std::move(m));
    }

    [[nodiscard]] Dataset filter_stations(const std::function<bool(const SensorStation&)>& keep) const {
        std::vector<SensorStation> st;
        std::set<std::string> kept;
        for (const auto& s : stations_) {
            if (keep(s)) {
                st.push_back(s);
                kept.insert(s.id);
            }
        }
        std::vector<Observation> obs;
        for (const auto& o : observations_) {
            if (kept.contains(o.station_id)) obs.push_back(o);
        }
        QualityMap q;
        for (const auto& id : kept) q.emplace(id, qualities_.at(id));
        return Dataset(std::move(st), std::move(obs), std::move(q));
    }

    [[nodiscard]] Dataset filter_source(Source source) const {
        return filter_stations([source](const SensorStation& s) { return s.source == source; });
    }

    /// Keeps only observations whose slice is in `slices`; stations are kept.
    [[nodiscard]] Dataset filter_slices(const std::set<Slice>& slices) const {
        std::vector<Observation> obs;
        for (const auto& o : observations_) {
            if (slices.contains(o.slice)) obs.push_back(o);
        }
        return Dataset(stations_, std::move(obs), qualities_);
    }

    /// Observations of one slice joined with location and quality, in observation order.
    [[nodiscard]] std::vector<QualityObservation> quality_observations(Slice slice) const {
        std::vector<QualityObservation> out;
        for (const auto& o : observations_) {
            if (o.slice != slice) continue;
            out.push_back({o, stations_[index_.at(o.station_id)].location, qualities_.at(o.station_id)});
        }
        return out;
    }

    [[nodiscard]] std::vector<QualityObservation> quality_observations() const {
        std::vector<QualityObservation> out;
        out.reserve(observations_.size());
        for (const auto& o : observations_) {
            out.push_back({o, stations_[index_.at(o.station_id)].location, qualities_.at(o.station_id)});
        }
        return out;
    }

    /// Union of two datasets with disjoint station ids.
    [[nodiscard]] static Dataset merge(const Dataset& a, const Dataset& b) {
        std::vector<SensorStation> st = a.stations_;
        st.insert(st.end(), b.stations_.begin(), b.stations_.end());
        std::vector<Observation> obs = a.observations_;
        obs.insert(obs.end(), b.observations_.begin(), b.observations_.end());
        QualityMap q = a.qualities_;
        q.insert(b.qualities_.begin(), b.qualities_.end());
        return Dataset(std::move(st), std::move(obs), std::move(q));
    }

private:
    std::vector<SensorStation> stations_;
    std::vector<Observation> observations_;
    QualityMap qualities_;
    std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace vgiq
