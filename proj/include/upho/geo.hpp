#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "upho/canonical.hpp"
#include "upho/kernel.hpp"

namespace upho::geo {

inline constexpr double kEarthRadiusKm = 6371.0088;

struct GeoPoint {
    double lon = 0.0;  // degrees east, [-180, 180]
    double lat = 0.0;  // degrees north, [-90, 90]

    friend bool operator==(const GeoPoint&, const GeoPoint&) = default;
};

bool is_valid(GeoPoint p) noexcept;

enum class Level { PostalCode, Tract, BlockGroup };

inline constexpr std::array<Level, 3> kAllLevels{Level::PostalCode, Level::Tract, Level::BlockGroup};

std::string_view to_string(Level level);
std::optional<Level> try_parse_level(std::string_view text);
Level parse_level(std::string_view text);

using Ring = std::vector<GeoPoint>;

/// One polygon part: exterior ring followed by zero or more holes.
struct Polygon {
    Ring exterior;
    std::vector<Ring> holes;
};

struct BoundingBox {
    double min_lon, min_lat, max_lon, max_lat;

    bool contains(GeoPoint p) const noexcept {
        return p.lon >= min_lon && p.lon <= max_lon && p.lat >= min_lat && p.lat <= max_lat;
    }
};

/// A geographic unit at one granularity level. Multi-part geometries keep
/// each part with its own holes. Immutable after construction; the
/// constructor validates rings and computes the centroid.
class GeoUnit {
public:
    GeoUnit(std::string unit_id, Level level, std::vector<Polygon> parts);

    const std::string& unit_id() const noexcept { return unit_id_; }
    Level level() const noexcept { return level_; }
    const std::vector<Polygon>& parts() const noexcept { return parts_; }
    GeoPoint centroid() const noexcept { return centroid_; }
    const BoundingBox& bbox() const noexcept { return bbox_; }

private:
    std::string unit_id_;
    Level level_;
    std::vector<Polygon> parts_;
    GeoPoint centroid_;
    BoundingBox bbox_;
};

/// Great-circle distance on a sphere of radius kEarthRadiusKm.
double haversine_km(GeoPoint a, GeoPoint b) noexcept;

/// Closed containment: boundary points are inside; points strictly inside a
/// hole are outside.
bool point_in_unit(GeoPoint p, const GeoUnit& unit);

/// Planar area-weighted centroid of all parts (exterior minus holes).
/// Throws DegenerateGeometry when the net area is zero.
GeoPoint centroid(std::span<const Polygon> parts);
inline GeoPoint centroid(const GeoUnit& unit) { return unit.centroid(); }

/// Signed planar (shoelace) area of a closed ring; counter-clockwise positive.
double ring_signed_area(const Ring& ring) noexcept;

// ---------------------------------------------------------------------------
// Spatial weights

struct KNearest {
    std::size_t k = 1;
};
struct FixedBand {
    double d_km = 0.0;
};
struct KernelBand {
    Kernel kernel = Kernel::Gaussian;
    double bandwidth_km = 0.0;
};
using WeightsScheme = std::variant<KNearest, FixedBand, KernelBand>;

struct WeightsOptions {
    bool row_standardize = false;
    bool include_self = false;
};

struct WeightEntry {
    std::size_t j = 0;
    double w = 0.0;

    friend bool operator==(const WeightEntry&, const WeightEntry&) = default;
};

/// Sparse row-major weights; each row sorted by column index.
struct SpatialWeights {
    std::size_t n = 0;
    WeightsScheme scheme = KNearest{};
    std::vector<std::vector<WeightEntry>> rows;
    bool row_standardized = false;
    bool includes_self = false;
    /// Pre-standardization row sums (empty unless row_standardized).
    std::vector<double> raw_row_sums;
    /// FixedBand units with no neighbor besides themselves; reported, not fatal.
    std::vector<std::size_t> isolated;

    double weight(std::size_t i, std::size_t j) const noexcept;
    double row_sum(std::size_t i) const noexcept;

    /// Throws InvalidArgument on any violated invariant.
    void validate() const;
};

SpatialWeights row_standardize(SpatialWeights weights);
SpatialWeights destandardize(SpatialWeights weights);

/// Builds weights over unit centroids. KNearest ties go to the smaller
/// unit_id. Throws TooFewUnits for fewer than 2 units.
SpatialWeights build_weights(std::span<const GeoUnit> units, const WeightsScheme& scheme,
                             const WeightsOptions& options = {});

/// Smallest distance band under which every unit has at least one neighbor.
double min_connecting_band_km(std::span<const GeoUnit> units);

/// Dense centroid distance matrix (row-major n*n).
std::vector<double> distance_matrix_km(std::span<const GeoPoint> points);

// ---------------------------------------------------------------------------
// GeoJSON

/// Parses a FeatureCollection of Polygon/MultiPolygon features carrying
/// `unit_id` and `level` properties. Throws ParseError/InvalidGeometry, or
/// DuplicateUnit naming the repeated id within a level.
std::vector<GeoUnit> parse_geojson(const json& doc);

json to_geojson(std::span<const GeoUnit> units);

}  // namespace upho::geo
