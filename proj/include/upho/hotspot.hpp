#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "upho/date.hpp"
#include "upho/geo.hpp"
#include "upho/ingestion.hpp"

namespace upho::hotspot {

struct GiStar {
    std::vector<double> z;
    std::vector<double> p;  // two-sided, standard normal
    bool zero_variance = false;
};

/// Getis-Ord Gi* with self-inclusive weights, global mean and population
/// standard deviation. A constant field yields z = 0, p = 1 and the
/// zero_variance flag instead of an error.
GiStar getis_ord_gstar(std::span<const double> values, const geo::SpatialWeights& weights);

double two_sided_normal_p(double z);

/// Benjamini-Hochberg step-up adjusted p-values, in input order.
std::vector<double> benjamini_hochberg(std::span<const double> p);

enum class HotspotClass { Hot99, Hot95, Hot90, Cold90, Cold95, Cold99, NotSignificant };

std::string_view to_string(HotspotClass c);
bool is_hot(HotspotClass c) noexcept;

struct HotspotResult {
    std::vector<std::string> unit_ids;
    std::vector<double> z;
    std::vector<double> p;
    std::vector<double> p_adjusted;
    std::vector<HotspotClass> klass;
    bool zero_variance = false;
};

/// Hot/cold at adjusted p < 0.01 / 0.05 / 0.10 by the sign of z.
HotspotResult classify_hotspots(std::span<const double> z, std::span<const double> p, bool fdr);

/// Default Gi* weights: unit self-weight plus binary neighbors within the
/// smallest band that leaves no unit isolated.
geo::SpatialWeights default_gstar_weights(std::span<const geo::GeoUnit> units);

struct SpaceTimeCube {
    std::vector<std::string> unit_ids;
    std::vector<Date> bins;  // uniform, contiguous bin starts
    Calendar calendar = Calendar::Daily;
    Eigen::MatrixXd counts;  // units x bins

    std::size_t n() const noexcept { return unit_ids.size(); }
    std::size_t t() const noexcept { return bins.size(); }
};

/// Dense zero-filled cube over [min date, max date] of the series. `units`
/// fixes row order and may include units without any events.
SpaceTimeCube build_cube(const ingest::OutcomeSeries& series, Calendar bin, std::vector<std::string> units = {},
                         std::string_view stratum = ingest::kAllStratum);

struct MannKendall {
    long long s = 0;
    double variance = 0.0;
    double z = 0.0;
};

/// Throws SeriesTooShort for fewer than 4 observations.
MannKendall mann_kendall(std::span<const double> series);

enum class EmergingPattern { New, Intensifying, Persistent, Diminishing, Sporadic, None };

std::string_view to_string(EmergingPattern p);

struct EmergingHotspotResult {
    std::vector<std::string> unit_ids;
    std::vector<EmergingPattern> pattern;
    std::vector<double> mk_z;
    std::vector<int> hot_bin_count;
    Eigen::MatrixXd z;  // units x bins Gi* z-scores
};

/// Gi* per bin, then per-unit pattern from the hot/not sequence and the
/// Mann-Kendall trend of its z-series. Throws SeriesTooShort (T < 4).
EmergingHotspotResult emerging_hotspot(const SpaceTimeCube& cube, const geo::SpatialWeights& weights,
                                       bool fdr = true);

}  // namespace upho::hotspot
