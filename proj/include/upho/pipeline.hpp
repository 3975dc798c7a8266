#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "upho/canonical.hpp"
#include "upho/catalog.hpp"
#include "upho/date.hpp"
#include "upho/geo.hpp"
#include "upho/ingestion.hpp"
#include "upho/kernel.hpp"
#include "upho/repo.hpp"

namespace upho::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Result-key parameters shared by the analyze pipeline and the API.

inline constexpr std::array<std::string_view, 4> kStratifyOptions{"none", "age", "sex", "race"};

json causal_params(const std::set<catalog::SdohDomain>& domains);
json regression_params(std::string_view model);  // "ols" | "gwr"
json impact_params(Date intervention, Calendar period, std::string_view stratify);
json hotspot_params(std::string_view mode);  // "snapshot" | "emerging"
json distribution_params();

// ---------------------------------------------------------------------------

struct IngestOptions {
    fs::path geo;
    fs::path registry;
    fs::path indicators;
    std::optional<fs::path> mobility;
    std::optional<fs::path> catalog;
    fs::path out;
    bool reproducible = false;
};

struct LevelCounts {
    std::size_t assigned = 0;
    std::size_t unassigned = 0;
};

struct IngestReport {
    std::size_t events = 0;  // registry data rows
    std::size_t rejects = 0;
    std::map<geo::Level, LevelCounts> levels;
    std::vector<ingest::Reject> reject_details;
    std::size_t indicator_rejects = 0;
    std::size_t mobility_rejects = 0;
    std::vector<std::string> notes;

    json to_json() const;
};

/// Staging layout under the repository root.
fs::path staging_counts_path(const fs::path& root, geo::Level level);
fs::path staging_indicators_path(const fs::path& root);
fs::path staging_mobility_path(const fs::path& root);
fs::path staging_catalog_path(const fs::path& root);

/// Loads, joins and aggregates the raw inputs into a repository. Throws
/// upho::Error on schema problems (SchemaMismatch, EmptyFile, ParseError,
/// DuplicateUnit, InvalidGeometry, ...).
IngestReport run_ingest(const IngestOptions& options);

/// Events carrying a unit_id of another level are relocated to that unit's
/// centroid so they can be joined at `level`.
std::vector<ingest::EventRecord> relocate_for_level(std::span<const ingest::EventRecord> events,
                                                    const std::map<std::string, geo::GeoPoint>& foreign_centroids,
                                                    const std::set<std::string>& level_ids);

// ---------------------------------------------------------------------------

struct AnalyzeOptions {
    fs::path repo;
    std::string disease = "covid19";
    std::vector<ingest::Outcome> outcomes{ingest::kAllOutcomes.begin(), ingest::kAllOutcomes.end()};
    std::vector<geo::Level> levels;  // empty: every ingested level
    std::set<repo::Analytic> analytics{repo::kAllAnalytics.begin(), repo::kAllAnalytics.end()};
    std::optional<Date> intervention;
    std::optional<fs::path> controls;
    std::uint64_t seed = 0;
    bool reproducible = false;

    std::vector<std::string> predictors;  // empty: every non-population indicator at the level
    Kernel kernel = Kernel::Bisquare;
    bool adaptive = true;
    std::optional<double> bandwidth;  // empty: AICc selection

    Calendar hotspot_bin = Calendar::Weekly;
    bool fdr = true;

    double tau = 0.3;
    double alpha = 0.05;
    std::optional<fs::path> whitelist;
    std::map<std::string, std::string> proxies;  // indicator key -> mobility metric

    std::size_t n_sims = 1000;
};

/// Default indicator-to-mobility links used for the temporality criterion.
std::map<std::string, std::string> default_proxies();

/// Raised when one analytic fails for one (outcome, level) combination.
class AnalysisFailure : public std::runtime_error {
public:
    AnalysisFailure(repo::Analytic analytic, ingest::Outcome outcome, geo::Level level, const std::string& cause);

    repo::Analytic analytic;
    ingest::Outcome outcome;
    geo::Level level;
};

struct AnalyzeReport {
    std::size_t written = 0;
    std::size_t new_entries = 0;
    std::vector<std::string> notes;
};

/// Input problems (missing staging tables, bad controls file, impact without
/// an intervention date) throw upho::Error; analytic failures throw
/// AnalysisFailure.
AnalyzeReport run_analyze(const AnalyzeOptions& options);

/// Reads `date,<series>...` CSV; one column per control series.
std::map<Date, std::vector<double>> read_controls(const fs::path& path);

}  // namespace upho::pipeline
