// Writes the bundled demonstration inputs: a 7x7 tract mesh and a 4x4
// postal-code grid over one study area, an event registry with deliberate
// defects (rejects, unassigned points, duplicates), indicators at both
// levels, daily mobility, a token file and a domain-knowledge whitelist.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "upho/canonical.hpp"
#include "upho/csv.hpp"
#include "upho/date.hpp"
#include "upho/geo.hpp"
#include "upho/ingestion.hpp"

namespace {

using namespace upho;
namespace fs = std::filesystem;

constexpr double kLonMin = -90.10;
constexpr double kLonMax = -89.80;
constexpr double kLatMin = 35.00;
constexpr double kLatMax = 35.21;
constexpr int kTractGrid = 7;
constexpr int kPostalGrid = 4;

struct Tract {
    std::string id;
    geo::GeoUnit unit;
    double pct_baccalaureate;
    double housing_unit_count;
    double pct_no_vehicle;
    double pct_poverty;
    double air_quality_index;
    double population;
};

std::string format(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

geo::Polygon quad(geo::GeoPoint a, geo::GeoPoint b, geo::GeoPoint c, geo::GeoPoint d) {
    return {{a, b, c, d, a}, {}};
}

geo::GeoPoint sample_in(const geo::GeoUnit& unit, std::mt19937_64& rng) {
    const auto& box = unit.bbox();
    std::uniform_real_distribution<double> lon(box.min_lon, box.max_lon);
    std::uniform_real_distribution<double> lat(box.min_lat, box.max_lat);
    for (;;) {
        geo::GeoPoint p{lon(rng), lat(rng)};
        if (geo::point_in_unit(p, unit)) {
            return p;
        }
    }
}

std::vector<Tract> make_tracts(std::mt19937_64& rng) {
    const int nodes = kTractGrid + 1;
    const double dlon = (kLonMax - kLonMin) / kTractGrid;
    const double dlat = (kLatMax - kLatMin) / kTractGrid;
    std::uniform_real_distribution<double> jitter(-0.15, 0.15);
    std::vector<std::vector<geo::GeoPoint>> node(nodes, std::vector<geo::GeoPoint>(nodes));
    for (int r = 0; r < nodes; ++r) {
        for (int c = 0; c < nodes; ++c) {
            const bool interior = r > 0 && r < kTractGrid && c > 0 && c < kTractGrid;
            node[r][c] = {kLonMin + (c + (interior ? jitter(rng) : 0.0)) * dlon,
                          kLatMin + (r + (interior ? jitter(rng) : 0.0)) * dlat};
        }
    }
    std::normal_distribution<double> noise(0.0, 1.0);
    std::vector<Tract> out;
    for (int r = 0; r < kTractGrid; ++r) {
        for (int c = 0; c < kTractGrid; ++c) {
            char id[16];
            std::snprintf(id, sizeof id, "47157%06d", 100 * (1 + r * kTractGrid + c));
            geo::GeoUnit unit(id, geo::Level::Tract,
                              {quad(node[r][c], node[r][c + 1], node[r + 1][c + 1], node[r + 1][c])});
            const double east = static_cast<double>(c) / (kTractGrid - 1);
            const double north = static_cast<double>(r) / (kTractGrid - 1);
            Tract t{id,
                    unit,
                    std::clamp(12.0 + 40.0 * east + 5.0 * noise(rng), 2.0, 80.0),
                    std::round(std::max(300.0, 1200.0 + 900.0 * north + 250.0 * noise(rng))),
                    std::clamp(25.0 - 18.0 * east + 4.0 * noise(rng), 1.0, 60.0),
                    std::clamp(35.0 - 20.0 * east + 6.0 * noise(rng), 3.0, 70.0),
                    std::clamp(42.0 + 10.0 * (1.0 - north) + 4.0 * noise(rng), 20.0, 90.0),
                    std::round(std::max(1200.0, 3800.0 + 700.0 * noise(rng)))};
            out.push_back(std::move(t));
        }
    }
    return out;
}

std::vector<geo::GeoUnit> make_postal_codes() {
    const double dlon = (kLonMax - kLonMin) / kPostalGrid;
    const double dlat = (kLatMax - kLatMin) / kPostalGrid;
    std::vector<geo::GeoUnit> out;
    for (int r = 0; r < kPostalGrid; ++r) {
        for (int c = 0; c < kPostalGrid; ++c) {
            const geo::GeoPoint a{kLonMin + c * dlon, kLatMin + r * dlat};
            const geo::GeoPoint b{kLonMin + (c + 1) * dlon, kLatMin + r * dlat};
            const geo::GeoPoint d{kLonMin + c * dlon, kLatMin + (r + 1) * dlat};
            const geo::GeoPoint e{kLonMin + (c + 1) * dlon, kLatMin + (r + 1) * dlat};
            out.emplace_back("381" + format(10.0 + r * kPostalGrid + c, 0), geo::Level::PostalCode,
                             std::vector<geo::Polygon>{quad(a, b, e, d)});
        }
    }
    return out;
}

double zscore(double v, double mean, double sd) { return (v - mean) / sd; }

}  // namespace

int main(int argc, char** argv) {
    if (argc != 2) {
        std::cerr << "usage: make_fixture <output-dir>\n";
        return 2;
    }
    const fs::path dir = argv[1];
    fs::create_directories(dir);
    std::mt19937_64 rng(20200413);

    auto tracts = make_tracts(rng);
    const auto postal = make_postal_codes();

    {
        std::vector<geo::GeoUnit> all;
        for (const auto& t : tracts) {
            all.push_back(t.unit);
        }
        all.insert(all.end(), postal.begin(), postal.end());
        std::ofstream(dir / "geo.geojson") << geo::to_geojson(all).dump(1) << "\n";
    }

    // Indicators: tracts directly, postal codes aggregated from the tracts
    // whose centroid they contain.
    {
        std::ofstream out(dir / "indicators.csv");
        out << ingest::kIndicatorsHeader << "\n";
        auto row = [&](const std::string& id, std::string_view level, std::string_view key, double v, int digits) {
            out << id << "," << level << "," << key << "," << format(v, digits) << "\n";
        };
        for (const auto& t : tracts) {
            row(t.id, "tract", "pct_baccalaureate", t.pct_baccalaureate, 1);
            row(t.id, "tract", "housing_unit_count", t.housing_unit_count, 0);
            row(t.id, "tract", "pct_no_vehicle", t.pct_no_vehicle, 1);
            row(t.id, "tract", "pct_poverty", t.pct_poverty, 1);
            row(t.id, "tract", "air_quality_index", t.air_quality_index, 1);
            row(t.id, "tract", "population_total", t.population, 0);
        }
        for (const auto& p : postal) {
            double pop = 0, housing = 0, bacc = 0, novehicle = 0, poverty = 0, aqi = 0;
            int members = 0;
            for (const auto& t : tracts) {
                if (!geo::point_in_unit(t.unit.centroid(), p)) {
                    continue;
                }
                ++members;
                pop += t.population;
                housing += t.housing_unit_count;
                bacc += t.population * t.pct_baccalaureate;
                novehicle += t.population * t.pct_no_vehicle;
                poverty += t.population * t.pct_poverty;
                aqi += t.air_quality_index;
            }
            if (members == 0) {
                continue;
            }
            const auto& id = p.unit_id();
            row(id, "postal_code", "pct_baccalaureate", bacc / pop, 1);
            row(id, "postal_code", "housing_unit_count", housing, 0);
            row(id, "postal_code", "pct_no_vehicle", novehicle / pop, 1);
            row(id, "postal_code", "pct_poverty", poverty / pop, 1);
            row(id, "postal_code", "air_quality_index", aqi / members, 1);
            row(id, "postal_code", "population_total", pop, 0);
        }
    }

    auto mean_sd = [&](auto field) {
        double m = 0;
        for (const auto& t : tracts) m += field(t);
        m /= tracts.size();
        double s = 0;
        for (const auto& t : tracts) s += (field(t) - m) * (field(t) - m);
        return std::pair{m, std::sqrt(s / tracts.size())};
    };
    const auto [bm, bs] = mean_sd([](const Tract& t) { return t.pct_baccalaureate; });
    const auto [hm, hs] = mean_sd([](const Tract& t) { return t.housing_unit_count; });
    const auto [vm, vs] = mean_sd([](const Tract& t) { return t.pct_no_vehicle; });
    const auto [pm, ps] = mean_sd([](const Tract& t) { return t.pct_poverty; });

    const Date first = parse_date_or_throw("2020-01-06");
    const Date intervention = parse_date_or_throw("2020-04-13");
    const int days = 175;

    std::vector<double> test_weight;
    std::vector<double> severe_weight;
    for (const auto& t : tracts) {
        const double zb = zscore(t.pct_baccalaureate, bm, bs);
        const double zh = zscore(t.housing_unit_count, hm, hs);
        const double zv = zscore(t.pct_no_vehicle, vm, vs);
        const double zp = zscore(t.pct_poverty, pm, ps);
        test_weight.push_back(t.population * std::exp(0.35 * zb + 0.3 * zh - 0.35 * zv));
        severe_weight.push_back(t.population * std::exp(0.4 * zp));
    }
    auto normalize = [](std::vector<double>& w) {
        double s = 0;
        for (double v : w) s += v;
        for (double& v : w) v /= s;
    };
    normalize(test_weight);
    normalize(severe_weight);

    // Late-spring case cluster in the south-west corner.
    const std::set<std::size_t> cluster{0, 1, static_cast<std::size_t>(kTractGrid)};

    std::vector<ingest::EventRecord> events;
    std::vector<std::string> lines;  // serialized rows, defects appended later
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    const std::array<std::string, 6> races{"W", "B", "B", "H", "A", "O"};
    int next_id = 1;
    auto demographics = [&](ingest::EventRecord& e) {
        const double a = u01(rng);
        e.age = a < 0.15   ? ingest::AgeBand::Age0To17
              : a < 0.55   ? ingest::AgeBand::Age18To44
              : a < 0.82   ? ingest::AgeBand::Age45To64
              : a < 0.98   ? ingest::AgeBand::Age65Plus
                           : ingest::AgeBand::Unknown;
        const double s = u01(rng);
        e.sex = s < 0.51 ? ingest::Sex::Female : s < 0.99 ? ingest::Sex::Male : ingest::Sex::Unknown;
        e.race = u01(rng) < 0.03 ? "U" : races[static_cast<std::size_t>(u01(rng) * races.size())];
    };
    auto pick = [&](const std::vector<double>& w) {
        double x = u01(rng);
        for (std::size_t i = 0; i < w.size(); ++i) {
            x -= w[i];
            if (x <= 0) return i;
        }
        return w.size() - 1;
    };

    for (int d = 0; d < days; ++d) {
        const Date date = first + std::chrono::days{d};
        const double week = d / 7.0;
        const double tests = (14.0 + 0.45 * week) * (date >= intervention ? 1.5 : 1.0);
        const double severe = 3.0 + 0.12 * week;
        std::poisson_distribution<int> n_tests(tests);
        std::poisson_distribution<int> n_severe(severe);
        const int nt = n_tests(rng);
        for (int k = 0; k < nt; ++k) {
            ingest::EventRecord e;
            e.event_id = "E" + std::to_string(next_id++);
            e.date = date;
            e.type = ingest::EventType::Test;
            const auto i = pick(test_weight);
            e.result = u01(rng) < 0.12 ? ingest::TestResult::Positive : ingest::TestResult::Negative;
            if (u01(rng) < 0.03) {
                e.unit_id = tracts[i].id;
            } else {
                e.point = sample_in(tracts[i].unit, rng);
            }
            demographics(e);
            events.push_back(e);
        }
        const int ns = n_severe(rng);
        for (int k = 0; k < ns; ++k) {
            ingest::EventRecord e;
            e.event_id = "E" + std::to_string(next_id++);
            e.date = date;
            const double t = u01(rng);
            e.type = t < 0.55 ? ingest::EventType::Case : t < 0.85 ? ingest::EventType::Hospitalization
                                                                    : ingest::EventType::Death;
            auto i = pick(severe_weight);
            if (week >= 14 && e.type == ingest::EventType::Case && u01(rng) < 0.6) {
                i = *std::next(cluster.begin(), static_cast<long>(u01(rng) * cluster.size()));
            }
            e.point = sample_in(tracts[i].unit, rng);
            demographics(e);
            events.push_back(e);
        }
    }

    // Events located by postal code only, and events outside the study area.
    std::uniform_int_distribution<int> any_day(0, days - 1);
    for (int k = 0; k < 40; ++k) {
        ingest::EventRecord e;
        e.event_id = "E" + std::to_string(next_id++);
        e.date = first + std::chrono::days{any_day(rng)};
        e.type = ingest::EventType::Test;
        e.result = ingest::TestResult::Negative;
        e.unit_id = postal[static_cast<std::size_t>(u01(rng) * postal.size())].unit_id();
        demographics(e);
        events.push_back(e);
    }
    for (int k = 0; k < 30; ++k) {
        ingest::EventRecord e;
        e.event_id = "E" + std::to_string(next_id++);
        e.date = first + std::chrono::days{any_day(rng)};
        e.type = ingest::EventType::Case;
        e.point = geo::GeoPoint{kLonMax + 0.05 + 0.1 * u01(rng), kLatMin + 0.2 * u01(rng)};
        demographics(e);
        events.push_back(e);
    }

    {
        std::ostringstream body;
        ingest::write_registry(body, events);
        std::string text = body.str();
        // Re-sent copies of a few rows: same event_id, counted once downstream.
        std::istringstream again(text);
        std::string header;
        std::getline(again, header);
        std::vector<std::string> rows;
        for (std::string line; std::getline(again, line);) {
            rows.push_back(line);
        }
        for (int k = 0; k < 10; ++k) {
            text += rows[static_cast<std::size_t>(k * 97 % rows.size())] + "\n";
        }
        const std::vector<std::string> defects{
            "R1,2020-02-30,test,negative,35.1,-89.9,,18-44,F,W",
            "R2,2020-03-01,vaccination,,35.1,-89.9,,18-44,F,W",
            "R3,2020-03-02,test,,35.1,-89.9,,45-64,M,B",
            "R4,2020-03-03,case,,,,,45-64,M,B",
            "R5,2020-03-04,case,,35.1,,,65+,F,B",
            "R6,2020-03-05,death,positive,35.1,-89.9,,65+,M,W",
            "R7,2020-03-06,case,,35.1,-89.9,,elderly,F,H",
            "R8,2020-03-07,case,,35.1,-89.9,,18-44,X,H",
            "R9,2020-03-08,case,,95.1,-89.9,,18-44,F,H",
            "R10,03/09/2020,case,,35.1,-89.9,,18-44,F,H",
            "R11,2020-03-10,case,,35.1,-89.9",
            ",2020-03-11,case,,35.1,-89.9,,18-44,F,H",
        };
        for (const auto& d : defects) {
            text += d + "\n";
        }
        // Located twice: the unit_id wins over the coordinates.
        text += "E900001,2020-05-05,case,,35.10,-89.95," + tracts[24].id + ",45-64,F,B\n";
        text += "E900002,2020-05-06,case,,35.05,-90.05," + tracts[3].id + ",18-44,M,W\n";
        std::ofstream(dir / "registry.csv") << text;
    }

    // Daily mobility by postal code: time at home rises after mid-March.
    {
        std::ofstream out(dir / "mobility.csv");
        out << ingest::kMobilityHeader << "\n";
        const Date lockdown = parse_date_or_throw("2020-03-16");
        std::normal_distribution<double> noise(0.0, 1.0);
        for (const auto& p : postal) {
            for (int d = 0; d < days; ++d) {
                const Date date = first + std::chrono::days{d};
                const double shift = date >= lockdown ? 1.0 : 0.0;
                const double home = std::clamp(28.0 + 16.0 * shift + 2.0 * noise(rng), 0.0, 100.0);
                const double away = std::max(0.0, 240.0 - 80.0 * shift + 15.0 * noise(rng));
                const double visits = std::max(0.0, 2.4 - 0.9 * shift + 0.15 * noise(rng));
                out << p.unit_id() << "," << format_date(date) << ",pct_home," << format(home, 2) << "\n";
                out << p.unit_id() << "," << format_date(date) << ",median_away_minutes," << format(away, 1) << "\n";
                out << p.unit_id() << "," << format_date(date) << ",visits_per_capita," << format(visits, 3) << "\n";
            }
        }
    }

    std::ofstream(dir / "tokens.json") << json{{"tokens",
                                                 {{"official-demo-token", "official"},
                                                  {"clinician-demo-token", "clinician"},
                                                  {"public-demo-token", "public"}}}}
                                              .dump(2)
                                       << "\n";
    std::ofstream(dir / "whitelist.txt") << "# indicator_key outcome\n"
                                            "pct_baccalaureate tests\n"
                                            "housing_unit_count tests\n"
                                            "pct_no_vehicle tests\n"
                                            "pct_poverty cases\n"
                                            "pct_poverty hospitalizations\n"
                                            "pct_poverty deaths\n"
                                            "air_quality_index hospitalizations\n";

    std::cout << "wrote " << events.size() << " events to " << dir << "\n";
    return 0;
}
