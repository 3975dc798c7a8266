#include "upho/hotspot.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "upho/error.hpp"

namespace upho::hotspot {

GiStar getis_ord_gstar(std::span<const double> values, const geo::SpatialWeights& weights) {
    const std::size_t n = values.size();
    if (n < 3) {
        throw Error(Errc::InvalidArgument, "Gi* needs at least 3 units");
    }
    if (weights.n != n) {
        throw Error(Errc::InvalidArgument, "weights size does not match the value vector");
    }
    if (!weights.includes_self) {
        throw Error(Errc::InvalidArgument, "Gi* requires self-inclusive weights");
    }
    for (double v : values) {
        if (!std::isfinite(v)) {
            throw Error(Errc::InvalidArgument, "Gi* values must be finite");
        }
    }
    const double nn = static_cast<double>(n);
    double mean = 0.0;
    for (double v : values) {
        mean += v;
    }
    mean /= nn;
    double ss = 0.0;
    for (double v : values) {
        ss += (v - mean) * (v - mean);
    }
    const double s = std::sqrt(ss / nn);

    GiStar out;
    out.z.assign(n, 0.0);
    out.p.assign(n, 1.0);
    if (!(s > 0.0)) {
        out.zero_variance = true;
        return out;
    }
    for (std::size_t i = 0; i < n; ++i) {
        double wx = 0.0;
        double wsum = 0.0;
        double w2 = 0.0;
        for (const auto& e : weights.rows[i]) {
            wx += e.w * values[e.j];
            wsum += e.w;
            w2 += e.w * e.w;
        }
        const double spread = (nn * w2 - wsum * wsum) / (nn - 1.0);
        if (!(spread > 0.0)) {
            continue;  // every unit weighted equally: statistic undefined, leave z = 0
        }
        out.z[i] = (wx - mean * wsum) / (s * std::sqrt(spread));
        out.p[i] = two_sided_normal_p(out.z[i]);
    }
    return out;
}

double two_sided_normal_p(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

std::vector<double> benjamini_hochberg(std::span<const double> p) {
    const std::size_t m = p.size();
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    std::vector<double> adjusted(m, 1.0);
    double running = 1.0;
    for (std::size_t r = m; r-- > 0;) {
        const std::size_t idx = order[r];
        running = std::min(running, p[idx] * static_cast<double>(m) / static_cast<double>(r + 1));
        adjusted[idx] = std::min(running, 1.0);
    }
    return adjusted;
}

std::string_view to_string(HotspotClass c) {
    switch (c) {
        case HotspotClass::Hot99: return "hot99";
        case HotspotClass::Hot95: return "hot95";
        case HotspotClass::Hot90: return "hot90";
        case HotspotClass::Cold90: return "cold90";
        case HotspotClass::Cold95: return "cold95";
        case HotspotClass::Cold99: return "cold99";
        case HotspotClass::NotSignificant: return "not_significant";
    }
    return "";
}

bool is_hot(HotspotClass c) noexcept {
    return c == HotspotClass::Hot99 || c == HotspotClass::Hot95 || c == HotspotClass::Hot90;
}

HotspotResult classify_hotspots(std::span<const double> z, std::span<const double> p, bool fdr) {
    if (z.size() != p.size()) {
        throw Error(Errc::LengthMismatch, "z and p must have the same length");
    }
    HotspotResult out;
    out.z.assign(z.begin(), z.end());
    out.p.assign(p.begin(), p.end());
    out.p_adjusted = fdr ? benjamini_hochberg(p) : out.p;
    out.klass.resize(z.size(), HotspotClass::NotSignificant);
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double q = out.p_adjusted[i];
        if (z[i] > 0.0) {
            out.klass[i] = q < 0.01 ? HotspotClass::Hot99
                         : q < 0.05 ? HotspotClass::Hot95
                         : q < 0.10 ? HotspotClass::Hot90
                                    : HotspotClass::NotSignificant;
        } else if (z[i] < 0.0) {
            out.klass[i] = q < 0.01 ? HotspotClass::Cold99
                         : q < 0.05 ? HotspotClass::Cold95
                         : q < 0.10 ? HotspotClass::Cold90
                                    : HotspotClass::NotSignificant;
        }
    }
    return out;
}

geo::SpatialWeights default_gstar_weights(std::span<const geo::GeoUnit> units) {
    const double band = geo::min_connecting_band_km(units);
    return geo::build_weights(units, geo::FixedBand{band}, {.row_standardize = false, .include_self = true});
}

SpaceTimeCube build_cube(const ingest::OutcomeSeries& series, Calendar bin, std::vector<std::string> units,
                         std::string_view stratum) {
    if (series.cells.empty()) {
        throw Error(Errc::InvalidArgument, "cannot build a cube from an empty series");
    }
    if (series.calendar == Calendar::Weekly && bin == Calendar::Daily) {
        throw Error(Errc::InvalidArgument, "cannot re-bin a weekly series to daily bins");
    }
    const auto range = *series.date_range();
    SpaceTimeCube cube;
    cube.calendar = bin;
    const Date first = bin_start(range.start, bin);
    const Date last = bin_start(range.end, bin);
    const int width = bin_width_days(bin);
    for (Date d = first; d <= last; d += std::chrono::days{width}) {
        cube.bins.push_back(d);
    }
    if (units.empty()) {
        const auto ids = series.unit_ids();
        units.assign(ids.begin(), ids.end());
    }
    cube.unit_ids = std::move(units);
    std::map<std::string, Eigen::Index> row_of;
    for (std::size_t i = 0; i < cube.unit_ids.size(); ++i) {
        row_of.emplace(cube.unit_ids[i], static_cast<Eigen::Index>(i));
    }
    cube.counts = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cube.n()), static_cast<Eigen::Index>(cube.t()));
    for (const auto& [key, count] : series.cells) {
        if (key.stratum != stratum) {
            continue;
        }
        auto it = row_of.find(key.unit_id);
        if (it == row_of.end()) {
            continue;
        }
        const auto col = (bin_start(key.date, bin) - first).count() / width;
        cube.counts(it->second, static_cast<Eigen::Index>(col)) += static_cast<double>(count);
    }
    return cube;
}

MannKendall mann_kendall(std::span<const double> series) {
    const std::size_t t = series.size();
    if (t < 4) {
        throw Error(Errc::SeriesTooShort, "Mann-Kendall needs at least 4 observations, got " + std::to_string(t));
    }
    MannKendall out;
    for (std::size_t k = 0; k < t; ++k) {
        for (std::size_t l = k + 1; l < t; ++l) {
            const double d = series[l] - series[k];
            out.s += (d > 0.0) - (d < 0.0);
        }
    }
    std::map<double, long long> ties;
    for (double v : series) {
        ++ties[v];
    }
    const double tt = static_cast<double>(t);
    double var = tt * (tt - 1.0) * (2.0 * tt + 5.0);
    for (const auto& [_, c] : ties) {
        const double g = static_cast<double>(c);
        var -= g * (g - 1.0) * (2.0 * g + 5.0);
    }
    out.variance = var / 18.0;
    if (out.s == 0 || !(out.variance > 0.0)) {
        out.z = 0.0;
    } else if (out.s > 0) {
        out.z = (static_cast<double>(out.s) - 1.0) / std::sqrt(out.variance);
    } else {
        out.z = (static_cast<double>(out.s) + 1.0) / std::sqrt(out.variance);
    }
    return out;
}

std::string_view to_string(EmergingPattern p) {
    switch (p) {
        case EmergingPattern::New: return "new";
        case EmergingPattern::Intensifying: return "intensifying";
        case EmergingPattern::Persistent: return "persistent";
        case EmergingPattern::Diminishing: return "diminishing";
        case EmergingPattern::Sporadic: return "sporadic";
        case EmergingPattern::None: return "none";
    }
    return "";
}

EmergingHotspotResult emerging_hotspot(const SpaceTimeCube& cube, const geo::SpatialWeights& weights, bool fdr) {
    const std::size_t n = cube.n();
    const std::size_t t = cube.t();
    if (t < 4) {
        throw Error(Errc::SeriesTooShort, "emerging hotspot analysis needs at least 4 time bins, got " +
                                              std::to_string(t));
    }
    EmergingHotspotResult out;
    out.unit_ids = cube.unit_ids;
    out.z.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(t));
    std::vector<std::vector<bool>> hot(n, std::vector<bool>(t, false));
    std::vector<double> column(n);
    for (std::size_t b = 0; b < t; ++b) {
        for (std::size_t i = 0; i < n; ++i) {
            column[i] = cube.counts(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
        }
        const auto gi = getis_ord_gstar(column, weights);
        const auto cls = classify_hotspots(gi.z, gi.p, fdr);
        for (std::size_t i = 0; i < n; ++i) {
            out.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b)) = gi.z[i];
            hot[i][b] = is_hot(cls.klass[i]);
        }
    }

    out.pattern.resize(n, EmergingPattern::None);
    out.mk_z.resize(n, 0.0);
    out.hot_bin_count.resize(n, 0);
    std::vector<double> zs(t);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t b = 0; b < t; ++b) {
            zs[b] = out.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b));
        }
        const auto mk = mann_kendall(zs);
        out.mk_z[i] = mk.z;
        const int count = static_cast<int>(std::count(hot[i].begin(), hot[i].end(), true));
        out.hot_bin_count[i] = count;
        const bool mostly_hot = 10 * static_cast<std::size_t>(count) >= 9 * t;
        if (count == 0) {
            out.pattern[i] = EmergingPattern::None;
        } else if (count == 1 && hot[i][t - 1]) {
            out.pattern[i] = EmergingPattern::New;
        } else if (mostly_hot && mk.z > 1.96) {
            out.pattern[i] = EmergingPattern::Intensifying;
        } else if (mostly_hot && mk.z < -1.96) {
            out.pattern[i] = EmergingPattern::Diminishing;
        } else if (mostly_hot) {
            out.pattern[i] = EmergingPattern::Persistent;
        } else {
            out.pattern[i] = EmergingPattern::Sporadic;
        }
    }
    return out;
}

}  // namespace upho::hotspot
