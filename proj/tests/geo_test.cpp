#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "support.hpp"
#include "upho/error.hpp"
#include "upho/geo.hpp"

namespace {

using namespace upho;
using namespace upho::geo;
namespace ts = upho::test_support;

// Spherical law of cosines in long double; independent of the haversine form.
double cosine_law_km(GeoPoint a, GeoPoint b) {
    const long double d2r = std::numbers::pi_v<long double> / 180.0L;
    const long double c = std::sin(a.lat * d2r) * std::sin(b.lat * d2r) +
                          std::cos(a.lat * d2r) * std::cos(b.lat * d2r) * std::cos((b.lon - a.lon) * d2r);
    return static_cast<double>(kEarthRadiusKm * std::acos(std::clamp(c, -1.0L, 1.0L)));
}

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no upho::Error thrown";
    return Errc::InvalidArgument;
}

TEST(Haversine, OneDegreeOfLatitude) {
    EXPECT_NEAR(haversine_km({0, 0}, {0, 1}), kEarthRadiusKm * std::numbers::pi / 180.0, 1e-9);
    EXPECT_DOUBLE_EQ(haversine_km({-90, 35}, {-90, 35}), 0.0);
}

TEST(Haversine, MatchesCosineLaw) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> lon(-180, 180), lat(-80, 80);
    for (int i = 0; i < 500; ++i) {
        GeoPoint a{lon(rng), lat(rng)}, b{lon(rng), lat(rng)};
        const double d = haversine_km(a, b);
        EXPECT_NEAR(d, cosine_law_km(a, b), 1e-6 * std::max(1.0, d));
        EXPECT_DOUBLE_EQ(d, haversine_km(b, a));
    }
}

TEST(PointInUnit, ClosedBoundaryAndHoles) {
    Polygon outer = ts::square(0, 0, 4);
    outer.holes.push_back({{1, 1}, {1, 2}, {2, 2}, {2, 1}, {1, 1}});
    const GeoUnit u("a", Level::Tract, {outer});
    EXPECT_TRUE(point_in_unit({3, 3}, u));
    EXPECT_TRUE(point_in_unit({0, 0}, u));      // vertex
    EXPECT_TRUE(point_in_unit({4, 2}, u));      // edge
    EXPECT_FALSE(point_in_unit({1.5, 1.5}, u)); // inside the hole
    EXPECT_TRUE(point_in_unit({1, 1.5}, u));    // on the hole boundary
    EXPECT_FALSE(point_in_unit({4.01, 2}, u));
}

TEST(PointInUnit, MultiPart) {
    const GeoUnit u("m", Level::PostalCode, {ts::square(0, 0, 1), ts::square(5, 5, 1)});
    EXPECT_TRUE(point_in_unit({5.5, 5.5}, u));
    EXPECT_TRUE(point_in_unit({0.5, 0.5}, u));
    EXPECT_FALSE(point_in_unit({3, 3}, u));
}

TEST(Centroid, LShapeMatchesRectangleDecomposition) {
    // L = [0,2]x[0,1] plus [0,1]x[1,3]
    const Polygon l{{{0, 0}, {2, 0}, {2, 1}, {1, 1}, {1, 3}, {0, 3}, {0, 0}}, {}};
    const double a1 = 2.0, a2 = 2.0;
    const double cx = (a1 * 1.0 + a2 * 0.5) / (a1 + a2);
    const double cy = (a1 * 0.5 + a2 * 2.0) / (a1 + a2);
    const auto c = centroid(std::vector<Polygon>{l});
    EXPECT_NEAR(c.lon, cx, 1e-12);
    EXPECT_NEAR(c.lat, cy, 1e-12);
    EXPECT_NEAR(ring_signed_area(l.exterior), 4.0, 1e-12);
}

TEST(Centroid, HoleShiftsCentroid) {
    Polygon p = ts::square(0, 0, 4);
    p.holes.push_back({{0, 0}, {0, 2}, {2, 2}, {2, 0}, {0, 0}});
    // 16-area square minus 4-area corner square
    const double cx = (16 * 2.0 - 4 * 1.0) / 12.0;
    const auto c = centroid(std::vector<Polygon>{p});
    EXPECT_NEAR(c.lon, cx, 1e-12);
    EXPECT_NEAR(c.lat, cx, 1e-12);
}

TEST(GeoUnit, RejectsBadRings) {
    EXPECT_EQ(code_of([] { GeoUnit("a", Level::Tract, {Polygon{{{0, 0}, {1, 0}, {0, 0}}, {}}}); }),
              Errc::InvalidGeometry);
    EXPECT_EQ(code_of([] { GeoUnit("a", Level::Tract, {Polygon{{{0, 0}, {1, 0}, {1, 1}, {0, 1}}, {}}}); }),
              Errc::InvalidGeometry);
    EXPECT_EQ(code_of([] { GeoUnit("a", Level::Tract, {Polygon{{{0, 0}, {1, 0}, {2, 0}, {0, 0}}, {}}}); }),
              Errc::DegenerateGeometry);
    EXPECT_EQ(code_of([] { GeoUnit u("", Level::Tract, {ts::square(0, 0, 1)}); }), Errc::InvalidGeometry);
}

TEST(Weights, KNearestMatchesBruteForce) {
    const auto units = ts::grid_units(4, 5);
    const auto pts = ts::centroids(units);
    const std::size_t n = units.size();
    for (std::size_t k : {1u, 3u, 4u, 8u}) {
        const auto w = build_weights(units, KNearest{k});
        w.validate();
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<std::pair<double, std::string>> cand;
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    cand.emplace_back(haversine_km(pts[i], pts[j]), units[j].unit_id());
                }
            }
            std::sort(cand.begin(), cand.end());
            std::vector<std::string> expected;
            for (std::size_t m = 0; m < k; ++m) {
                expected.push_back(cand[m].second);
            }
            std::sort(expected.begin(), expected.end());
            std::vector<std::string> got;
            for (const auto& e : w.rows[i]) {
                got.push_back(units[e.j].unit_id());
                EXPECT_EQ(e.w, 1.0);
            }
            EXPECT_EQ(got, expected) << "row " << i << " k " << k;
        }
    }
}

TEST(Weights, FixedBandAndIsolation) {
    const auto units = ts::grid_units(3, 3, 0.01);
    const auto pts = ts::centroids(units);
    const double band = haversine_km(pts[0], pts[1]) * 1.01;
    const auto w = build_weights(units, FixedBand{band});
    for (std::size_t i = 0; i < units.size(); ++i) {
        for (std::size_t j = 0; j < units.size(); ++j) {
            const bool expect = i != j && haversine_km(pts[i], pts[j]) <= band;
            EXPECT_EQ(w.weight(i, j), expect ? 1.0 : 0.0);
        }
    }
    EXPECT_TRUE(w.isolated.empty());

    const auto tiny = build_weights(units, FixedBand{0.001});
    EXPECT_EQ(tiny.isolated.size(), units.size());
    const auto with_self = build_weights(units, FixedBand{0.001}, {.include_self = true});
    EXPECT_EQ(with_self.isolated.size(), units.size());
    EXPECT_EQ(with_self.weight(4, 4), 1.0);
    EXPECT_EQ(with_self.rows[4].size(), 1u);
}

TEST(Weights, KernelBandUsesKernelWeights) {
    const auto units = ts::grid_units(2, 3);
    const auto pts = ts::centroids(units);
    const auto w = build_weights(units, KernelBand{Kernel::Gaussian, 2.0}, {.include_self = true});
    for (std::size_t i = 0; i < units.size(); ++i) {
        for (std::size_t j = 0; j < units.size(); ++j) {
            const double d = haversine_km(pts[i], pts[j]);
            EXPECT_NEAR(w.weight(i, j), std::exp(-0.5 * (d / 2.0) * (d / 2.0)), 1e-14);
        }
    }
}

TEST(Weights, RowStandardizeRoundTrip) {
    const auto units = ts::grid_units(3, 4);
    const auto raw = build_weights(units, KNearest{3});
    const auto rs = row_standardize(raw);
    rs.validate();
    for (std::size_t i = 0; i < rs.n; ++i) {
        EXPECT_NEAR(rs.row_sum(i), 1.0, 1e-12);
    }
    const auto back = destandardize(rs);
    for (std::size_t i = 0; i < raw.n; ++i) {
        for (std::size_t j = 0; j < raw.n; ++j) {
            EXPECT_NEAR(back.weight(i, j), raw.weight(i, j), 1e-12);
        }
    }
}

TEST(Weights, MinConnectingBandIsMaxNearestNeighborDistance) {
    std::vector<GeoUnit> units;
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> pos(0, 0.2);
    for (int i = 0; i < 15; ++i) {
        units.emplace_back("u" + std::to_string(i), Level::Tract,
                           std::vector<Polygon>{ts::square(-90 + pos(rng), 35 + pos(rng), 0.001)});
    }
    const auto pts = ts::centroids(units);
    double oracle = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
        double nearest = INFINITY;
        for (std::size_t j = 0; j < pts.size(); ++j) {
            if (i != j) nearest = std::min(nearest, haversine_km(pts[i], pts[j]));
        }
        oracle = std::max(oracle, nearest);
    }
    EXPECT_NEAR(min_connecting_band_km(units), oracle, 1e-12);
    EXPECT_TRUE(build_weights(units, FixedBand{min_connecting_band_km(units)}).isolated.empty());
}

TEST(Weights, Errors) {
    const auto one = ts::grid_units(1, 1);
    EXPECT_EQ(code_of([&] { build_weights(one, KNearest{1}); }), Errc::TooFewUnits);
    const auto units = ts::grid_units(2, 2);
    EXPECT_EQ(code_of([&] { build_weights(units, KNearest{4}); }), Errc::InvalidArgument);
    EXPECT_EQ(code_of([&] { build_weights(units, FixedBand{-1}); }), Errc::InvalidArgument);
}

TEST(GeoJson, RoundTrip) {
    auto units = ts::grid_units(2, 2);
    units.emplace_back("z", Level::PostalCode,
                       std::vector<Polygon>{ts::square(0, 0, 1), ts::square(3, 3, 1)});
    const auto doc = to_geojson(units);
    const auto back = parse_geojson(doc);
    ASSERT_EQ(back.size(), units.size());
    for (std::size_t i = 0; i < units.size(); ++i) {
        EXPECT_EQ(back[i].unit_id(), units[i].unit_id());
        EXPECT_EQ(back[i].level(), units[i].level());
        EXPECT_EQ(back[i].parts().size(), units[i].parts().size());
        EXPECT_EQ(back[i].centroid(), units[i].centroid());
    }
}

TEST(GeoJson, Errors) {
    auto units = ts::grid_units(1, 2);
    auto doc = to_geojson(units);
    doc["features"][1]["properties"]["unit_id"] = units[0].unit_id();
    EXPECT_EQ(code_of([&] { parse_geojson(doc); }), Errc::DuplicateUnit);

    doc = to_geojson(units);
    doc["features"][0]["properties"].erase("level");
    EXPECT_EQ(code_of([&] { parse_geojson(doc); }), Errc::ParseError);

    doc = to_geojson(units);
    doc["features"][0]["properties"]["level"] = "county";
    EXPECT_EQ(code_of([&] { parse_geojson(doc); }), Errc::ParseError);

    doc = to_geojson(units);
    doc["features"][0]["geometry"]["type"] = "Point";
    EXPECT_EQ(code_of([&] { parse_geojson(doc); }), Errc::ParseError);

    EXPECT_EQ(code_of([] { parse_geojson(json::object()); }), Errc::ParseError);
}

TEST(GeoJson, SameIdAtDifferentLevelsIsAllowed) {
    std::vector<GeoUnit> units{GeoUnit("x", Level::Tract, {ts::square(0, 0, 1)}),
                               GeoUnit("x", Level::PostalCode, {ts::square(0, 0, 1)})};
    EXPECT_EQ(parse_geojson(to_geojson(units)).size(), 2u);
}

TEST(Levels, OnlyThreeGranularities) {
    EXPECT_EQ(try_parse_level("postal_code"), Level::PostalCode);
    EXPECT_EQ(try_parse_level("tract"), Level::Tract);
    EXPECT_EQ(try_parse_level("block_group"), Level::BlockGroup);
    EXPECT_FALSE(try_parse_level("county"));
    EXPECT_FALSE(try_parse_level("Tract"));
}

}  // namespace
