#include "upho/geo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <set>

#include "upho/error.hpp"

namespace upho::geo {

namespace {

constexpr double kDegToRad = std::numbers::pi / 180.0;

void validate_ring(const Ring& ring, const std::string& unit_id) {
    if (ring.size() < 4) {
        throw Error(Errc::InvalidGeometry, "unit '" + unit_id + "': ring has fewer than 4 points");
    }
    if (!(ring.front() == ring.back())) {
        throw Error(Errc::InvalidGeometry, "unit '" + unit_id + "': ring is not closed");
    }
    for (const auto& p : ring) {
        if (!is_valid(p)) {
            throw Error(Errc::InvalidGeometry, "unit '" + unit_id + "': coordinate out of range");
        }
    }
}

struct AreaMoment {
    double area = 0.0;  // unsigned
    double cx = 0.0;
    double cy = 0.0;
};

AreaMoment ring_moment(const Ring& ring) {
    double a2 = 0.0;
    double cx = 0.0;
    double cy = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const auto& p = ring[i];
        const auto& q = ring[i + 1];
        const double cross = p.lon * q.lat - q.lon * p.lat;
        a2 += cross;
        cx += (p.lon + q.lon) * cross;
        cy += (p.lat + q.lat) * cross;
    }
    if (a2 == 0.0) {
        return {};
    }
    return {std::abs(a2) / 2.0, cx / (3.0 * a2), cy / (3.0 * a2)};
}

bool on_segment(GeoPoint p, GeoPoint a, GeoPoint b) noexcept {
    const double dx = b.lon - a.lon;
    const double dy = b.lat - a.lat;
    const double cross = dx * (p.lat - a.lat) - dy * (p.lon - a.lon);
    const double len2 = dx * dx + dy * dy;
    if (std::abs(cross) > 1e-12 * std::max(len2, 1e-300)) {
        return false;
    }
    return p.lon >= std::min(a.lon, b.lon) && p.lon <= std::max(a.lon, b.lon) &&
           p.lat >= std::min(a.lat, b.lat) && p.lat <= std::max(a.lat, b.lat);
}

bool on_ring_boundary(GeoPoint p, const Ring& ring) noexcept {
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        if (on_segment(p, ring[i], ring[i + 1])) {
            return true;
        }
    }
    return false;
}

// Even-odd crossing test; boundary handled separately.
bool strictly_inside_ring(GeoPoint p, const Ring& ring) noexcept {
    bool inside = false;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        const auto& a = ring[i];
        const auto& b = ring[i + 1];
        if ((a.lat > p.lat) != (b.lat > p.lat)) {
            const double x = a.lon + (p.lat - a.lat) * (b.lon - a.lon) / (b.lat - a.lat);
            if (p.lon < x) {
                inside = !inside;
            }
        }
    }
    return inside;
}

bool point_in_polygon(GeoPoint p, const Polygon& poly) noexcept {
    if (on_ring_boundary(p, poly.exterior)) {
        return true;
    }
    if (!strictly_inside_ring(p, poly.exterior)) {
        return false;
    }
    for (const auto& hole : poly.holes) {
        if (on_ring_boundary(p, hole)) {
            return true;
        }
        if (strictly_inside_ring(p, hole)) {
            return false;
        }
    }
    return true;
}

std::vector<GeoPoint> centroids_of(std::span<const GeoUnit> units) {
    std::vector<GeoPoint> out;
    out.reserve(units.size());
    for (const auto& u : units) {
        out.push_back(u.centroid());
    }
    return out;
}

GeoPoint parse_position(const json& pos) {
    if (!pos.is_array() || pos.size() < 2 || !pos[0].is_number() || !pos[1].is_number()) {
        throw Error(Errc::ParseError, "GeoJSON position must be [lon, lat]");
    }
    return {pos[0].get<double>(), pos[1].get<double>()};
}

Polygon parse_polygon(const json& rings) {
    if (!rings.is_array() || rings.empty()) {
        throw Error(Errc::ParseError, "GeoJSON polygon must be a non-empty array of rings");
    }
    Polygon poly;
    for (std::size_t r = 0; r < rings.size(); ++r) {
        Ring ring;
        if (!rings[r].is_array()) {
            throw Error(Errc::ParseError, "GeoJSON ring must be an array of positions");
        }
        for (const auto& pos : rings[r]) {
            ring.push_back(parse_position(pos));
        }
        if (r == 0) {
            poly.exterior = std::move(ring);
        } else {
            poly.holes.push_back(std::move(ring));
        }
    }
    return poly;
}

json ring_to_json(const Ring& ring) {
    json out = json::array();
    for (const auto& p : ring) {
        out.push_back(json::array({p.lon, p.lat}));
    }
    return out;
}

}  // namespace

bool is_valid(GeoPoint p) noexcept {
    return std::isfinite(p.lon) && std::isfinite(p.lat) && p.lon >= -180.0 && p.lon <= 180.0 &&
           p.lat >= -90.0 && p.lat <= 90.0;
}

std::string_view to_string(Level level) {
    switch (level) {
        case Level::PostalCode: return "postal_code";
        case Level::Tract: return "tract";
        case Level::BlockGroup: return "block_group";
    }
    return "";
}

std::optional<Level> try_parse_level(std::string_view text) {
    for (auto level : kAllLevels) {
        if (to_string(level) == text) {
            return level;
        }
    }
    return std::nullopt;
}

Level parse_level(std::string_view text) {
    if (auto level = try_parse_level(text)) {
        return *level;
    }
    throw Error(Errc::InvalidArgument,
                "level must be one of postal_code, tract, block_group; got '" + std::string(text) + "'");
}

GeoUnit::GeoUnit(std::string unit_id, Level level, std::vector<Polygon> parts)
    : unit_id_{std::move(unit_id)}, level_{level}, parts_{std::move(parts)} {
    if (unit_id_.empty()) {
        throw Error(Errc::InvalidGeometry, "unit_id must be non-empty");
    }
    if (parts_.empty()) {
        throw Error(Errc::InvalidGeometry, "unit '" + unit_id_ + "' has no polygons");
    }
    bbox_ = {std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity(),
             -std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const auto& part : parts_) {
        validate_ring(part.exterior, unit_id_);
        if (ring_signed_area(part.exterior) == 0.0) {
            throw Error(Errc::DegenerateGeometry, "unit '" + unit_id_ + "': exterior ring has zero area");
        }
        for (const auto& hole : part.holes) {
            validate_ring(hole, unit_id_);
        }
        for (const auto& p : part.exterior) {
            bbox_.min_lon = std::min(bbox_.min_lon, p.lon);
            bbox_.min_lat = std::min(bbox_.min_lat, p.lat);
            bbox_.max_lon = std::max(bbox_.max_lon, p.lon);
            bbox_.max_lat = std::max(bbox_.max_lat, p.lat);
        }
    }
    try {
        centroid_ = geo::centroid(parts_);
    } catch (const Error& e) {
        throw Error(Errc::DegenerateGeometry, "unit '" + unit_id_ + "': " + e.what());
    }
}

double haversine_km(GeoPoint a, GeoPoint b) noexcept {
    const double phi1 = a.lat * kDegToRad;
    const double phi2 = b.lat * kDegToRad;
    const double dphi = (b.lat - a.lat) * kDegToRad;
    const double dlambda = (b.lon - a.lon) * kDegToRad;
    const double s1 = std::sin(dphi / 2.0);
    const double s2 = std::sin(dlambda / 2.0);
    double h = s1 * s1 + std::cos(phi1) * std::cos(phi2) * s2 * s2;
    h = std::clamp(h, 0.0, 1.0);
    return 2.0 * kEarthRadiusKm * std::asin(std::sqrt(h));
}

bool point_in_unit(GeoPoint p, const GeoUnit& unit) {
    if (!unit.bbox().contains(p)) {
        return false;
    }
    return std::any_of(unit.parts().begin(), unit.parts().end(),
                       [&](const Polygon& poly) { return point_in_polygon(p, poly); });
}

double ring_signed_area(const Ring& ring) noexcept {
    double a2 = 0.0;
    for (std::size_t i = 0; i + 1 < ring.size(); ++i) {
        a2 += ring[i].lon * ring[i + 1].lat - ring[i + 1].lon * ring[i].lat;
    }
    return a2 / 2.0;
}

GeoPoint centroid(std::span<const Polygon> parts) {
    double area = 0.0;
    double mx = 0.0;
    double my = 0.0;
    for (const auto& part : parts) {
        const auto ext = ring_moment(part.exterior);
        if (ext.area == 0.0) {
            throw Error(Errc::DegenerateGeometry, "exterior ring has zero area");
        }
        area += ext.area;
        mx += ext.area * ext.cx;
        my += ext.area * ext.cy;
        for (const auto& hole : part.holes) {
            const auto h = ring_moment(hole);
            area -= h.area;
            mx -= h.area * h.cx;
            my -= h.area * h.cy;
        }
    }
    if (!(area > 0.0)) {
        throw Error(Errc::DegenerateGeometry, "net polygon area is zero");
    }
    return {mx / area, my / area};
}

// ---------------------------------------------------------------------------

double SpatialWeights::weight(std::size_t i, std::size_t j) const noexcept {
    const auto& row = rows[i];
    auto it = std::lower_bound(row.begin(), row.end(), j,
                               [](const WeightEntry& e, std::size_t col) { return e.j < col; });
    return (it != row.end() && it->j == j) ? it->w : 0.0;
}

double SpatialWeights::row_sum(std::size_t i) const noexcept {
    double s = 0.0;
    for (const auto& e : rows[i]) {
        s += e.w;
    }
    return s;
}

void SpatialWeights::validate() const {
    if (rows.size() != n) {
        throw Error(Errc::InvalidArgument, "weights row count does not match n");
    }
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < rows[i].size(); ++k) {
            const auto& e = rows[i][k];
            if (e.j >= n || !std::isfinite(e.w) || e.w < 0.0) {
                throw Error(Errc::InvalidArgument, "invalid weight entry in row " + std::to_string(i));
            }
            if (k > 0 && rows[i][k - 1].j >= e.j) {
                throw Error(Errc::InvalidArgument, "weights row " + std::to_string(i) + " not sorted");
            }
        }
        if (row_standardized && !rows[i].empty() && std::abs(row_sum(i) - 1.0) > 1e-9) {
            throw Error(Errc::InvalidArgument, "row-standardized row " + std::to_string(i) + " does not sum to 1");
        }
        if (includes_self && weight(i, i) <= 0.0) {
            throw Error(Errc::InvalidArgument, "self weight missing in row " + std::to_string(i));
        }
    }
}

SpatialWeights row_standardize(SpatialWeights weights) {
    if (weights.row_standardized) {
        return weights;
    }
    weights.raw_row_sums.assign(weights.n, 0.0);
    for (std::size_t i = 0; i < weights.n; ++i) {
        const double s = weights.row_sum(i);
        weights.raw_row_sums[i] = s;
        if (s > 0.0) {
            for (auto& e : weights.rows[i]) {
                e.w /= s;
            }
        }
    }
    weights.row_standardized = true;
    return weights;
}

SpatialWeights destandardize(SpatialWeights weights) {
    if (!weights.row_standardized) {
        return weights;
    }
    for (std::size_t i = 0; i < weights.n; ++i) {
        const double s = weights.raw_row_sums[i];
        if (s > 0.0) {
            for (auto& e : weights.rows[i]) {
                e.w *= s;
            }
        }
    }
    weights.raw_row_sums.clear();
    weights.row_standardized = false;
    return weights;
}

std::vector<double> distance_matrix_km(std::span<const GeoPoint> points) {
    const std::size_t n = points.size();
    std::vector<double> d(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double dij = haversine_km(points[i], points[j]);
            d[i * n + j] = dij;
            d[j * n + i] = dij;
        }
    }
    return d;
}

SpatialWeights build_weights(std::span<const GeoUnit> units, const WeightsScheme& scheme,
                             const WeightsOptions& options) {
    const std::size_t n = units.size();
    if (n < 2) {
        throw Error(Errc::TooFewUnits, "spatial weights need at least 2 units, got " + std::to_string(n));
    }
    for (const auto& u : units) {
        if (u.level() != units.front().level()) {
            throw Error(Errc::InvalidArgument, "all units must share one level");
        }
    }
    const auto points = centroids_of(units);
    const auto dist = distance_matrix_km(points);

    SpatialWeights out;
    out.n = n;
    out.scheme = scheme;
    out.includes_self = options.include_self;
    out.rows.resize(n);

    if (const auto* knn = std::get_if<KNearest>(&scheme)) {
        if (knn->k < 1 || knn->k >= n) {
            throw Error(Errc::InvalidArgument, "KNearest requires 1 <= k < n");
        }
        std::vector<std::size_t> order(n);
        for (std::size_t i = 0; i < n; ++i) {
            order.clear();
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    order.push_back(j);
                }
            }
            std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
                const double da = dist[i * n + a];
                const double db = dist[i * n + b];
                if (da != db) {
                    return da < db;
                }
                return units[a].unit_id() < units[b].unit_id();
            });
            for (std::size_t r = 0; r < knn->k; ++r) {
                out.rows[i].push_back({order[r], 1.0});
            }
            if (options.include_self) {
                out.rows[i].push_back({i, 1.0});
            }
        }
    } else if (const auto* band = std::get_if<FixedBand>(&scheme)) {
        if (!(band->d_km >= 0.0)) {
            throw Error(Errc::InvalidArgument, "FixedBand distance must be >= 0");
        }
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) {
                    if (options.include_self) {
                        out.rows[i].push_back({i, 1.0});
                    }
                } else if (dist[i * n + j] <= band->d_km) {
                    out.rows[i].push_back({j, 1.0});
                }
            }
            const bool has_neighbor = std::any_of(out.rows[i].begin(), out.rows[i].end(),
                                                  [i](const WeightEntry& e) { return e.j != i; });
            if (!has_neighbor) {
                out.isolated.push_back(i);
            }
        }
    } else {
        const auto& kb = std::get<KernelBand>(scheme);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i && !options.include_self) {
                    continue;
                }
                const double w = kernel_weight(dist[i * n + j], kb.bandwidth_km, kb.kernel);
                if (w > 0.0) {
                    out.rows[i].push_back({j, w});
                }
            }
        }
    }

    for (auto& row : out.rows) {
        std::sort(row.begin(), row.end(), [](const WeightEntry& a, const WeightEntry& b) { return a.j < b.j; });
    }
    if (options.row_standardize) {
        out = row_standardize(std::move(out));
    }
    return out;
}

double min_connecting_band_km(std::span<const GeoUnit> units) {
    const std::size_t n = units.size();
    if (n < 2) {
        throw Error(Errc::TooFewUnits, "need at least 2 units");
    }
    const auto points = centroids_of(units);
    double band = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        double nearest = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n; ++j) {
            if (j != i) {
                nearest = std::min(nearest, haversine_km(points[i], points[j]));
            }
        }
        band = std::max(band, nearest);
    }
    return band;
}

// ---------------------------------------------------------------------------

std::vector<GeoUnit> parse_geojson(const json& doc) {
    if (!doc.is_object() || doc.value("type", "") != "FeatureCollection" || !doc.contains("features") ||
        !doc["features"].is_array()) {
        throw Error(Errc::ParseError, "expected a GeoJSON FeatureCollection");
    }
    std::vector<GeoUnit> units;
    std::map<Level, std::set<std::string>> seen;
    std::size_t index = 0;
    for (const auto& feature : doc["features"]) {
        const std::string where = "feature " + std::to_string(index++);
        if (!feature.is_object() || !feature.contains("geometry") || !feature.contains("properties")) {
            throw Error(Errc::ParseError, where + ": missing geometry or properties");
        }
        const auto& props = feature["properties"];
        if (!props.is_object() || !props.contains("unit_id") || !props["unit_id"].is_string()) {
            throw Error(Errc::ParseError, where + ": property unit_id (string) is required");
        }
        if (!props.contains("level") || !props["level"].is_string()) {
            throw Error(Errc::ParseError, where + ": property level is required");
        }
        const auto id = props["unit_id"].get<std::string>();
        const auto level = try_parse_level(props["level"].get<std::string>());
        if (!level) {
            throw Error(Errc::ParseError, where + ": unknown level '" + props["level"].get<std::string>() + "'");
        }
        if (!seen[*level].insert(id).second) {
            throw Error(Errc::DuplicateUnit, "duplicate unit_id '" + id + "' at level " + std::string(to_string(*level)));
        }
        const auto& geom = feature["geometry"];
        const std::string type = geom.is_object() ? geom.value("type", "") : "";
        std::vector<Polygon> parts;
        if (type == "Polygon") {
            parts.push_back(parse_polygon(geom.at("coordinates")));
        } else if (type == "MultiPolygon") {
            for (const auto& poly : geom.at("coordinates")) {
                parts.push_back(parse_polygon(poly));
            }
        } else {
            throw Error(Errc::ParseError, where + ": geometry must be Polygon or MultiPolygon");
        }
        units.emplace_back(id, *level, std::move(parts));
    }
    return units;
}

json to_geojson(std::span<const GeoUnit> units) {
    json features = json::array();
    for (const auto& u : units) {
        json polys = json::array();
        for (const auto& part : u.parts()) {
            json rings = json::array();
            rings.push_back(ring_to_json(part.exterior));
            for (const auto& hole : part.holes) {
                rings.push_back(ring_to_json(hole));
            }
            polys.push_back(std::move(rings));
        }
        json geometry;
        if (polys.size() == 1) {
            geometry = {{"type", "Polygon"}, {"coordinates", polys[0]}};
        } else {
            geometry = {{"type", "MultiPolygon"}, {"coordinates", polys}};
        }
        features.push_back({{"type", "Feature"},
                            {"geometry", geometry},
                            {"properties", {{"unit_id", u.unit_id()}, {"level", std::string(to_string(u.level()))}}}});
    }
    return {{"type", "FeatureCollection"}, {"features", features}};
}

}  // namespace upho::geo
