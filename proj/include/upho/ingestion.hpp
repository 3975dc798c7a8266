#pragma once

#include <array>
#include <compare>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "upho/catalog.hpp"
#include "upho/date.hpp"
#include "upho/frame.hpp"
#include "upho/geo.hpp"

namespace upho::ingest {

enum class EventType { Test, Case, Hospitalization, Death };
enum class TestResult { Positive, Negative, NA };
enum class AgeBand { Age0To17, Age18To44, Age45To64, Age65Plus, Unknown };
enum class Sex { Female, Male, Unknown };

enum class Outcome { Tests, Cases, Hospitalizations, Deaths };
inline constexpr std::array<Outcome, 4> kAllOutcomes{Outcome::Tests, Outcome::Cases, Outcome::Hospitalizations,
                                                     Outcome::Deaths};

std::string_view to_string(EventType t);
std::string_view to_string(TestResult r);
std::string_view to_string(AgeBand a);
std::string_view to_string(Sex s);
std::string_view to_string(Outcome o);
std::optional<Outcome> try_parse_outcome(std::string_view text);
Outcome parse_outcome(std::string_view text);

inline constexpr std::array<AgeBand, 5> kAllAgeBands{AgeBand::Age0To17, AgeBand::Age18To44, AgeBand::Age45To64,
                                                     AgeBand::Age65Plus, AgeBand::Unknown};
inline constexpr std::array<Sex, 3> kAllSexes{Sex::Female, Sex::Male, Sex::Unknown};

struct EventRecord {
    std::string event_id;
    Date date{};
    EventType type = EventType::Test;
    TestResult result = TestResult::NA;
    std::optional<geo::GeoPoint> point;  // set iff unit_id is empty
    std::string unit_id;
    AgeBand age = AgeBand::Unknown;
    Sex sex = Sex::Unknown;
    std::string race = "U";

    friend bool operator==(const EventRecord&, const EventRecord&) = default;
};

struct Reject {
    std::size_t line = 0;
    std::string reason;
};

struct RegistryLoad {
    std::vector<EventRecord> records;
    std::vector<Reject> rejects;
    std::vector<std::string> notes;
    std::size_t data_rows = 0;
};

inline constexpr std::string_view kRegistryHeader = "event_id,date,event_type,result,lat,lon,unit_id,age_band,sex,race";
inline constexpr std::string_view kIndicatorsHeader = "unit_id,level,indicator_key,value";
inline constexpr std::string_view kMobilityHeader = "unit_id,date,metric_key,value";

/// Throws EmptyFile or SchemaMismatch (naming the first missing column).
/// Bad rows go to the rejects report with their line number.
RegistryLoad load_registry(std::istream& in);
void write_registry(std::ostream& out, std::span<const EventRecord> records);

struct JoinResult {
    std::vector<EventRecord> assigned;    // every record carries unit_id
    std::vector<EventRecord> unassigned;  // outside every unit, or unknown unit_id
};

/// Assigns point-located events to the containing unit (closed boundary,
/// lowest unit_id on overlap). Events already carrying a unit_id of this
/// level pass through.
JoinResult spatial_join(std::span<const EventRecord> events, std::span<const geo::GeoUnit> units);

// ---------------------------------------------------------------------------

inline constexpr std::string_view kAllStratum = "all";

std::string age_stratum(AgeBand a);
std::string sex_stratum(Sex s);
std::string race_stratum(std::string_view race);

struct CellKey {
    std::string unit_id;
    Date date{};
    std::string stratum;

    auto operator<=>(const CellKey&) const = default;
};

/// Counts per (unit, date-bin, stratum). Strata: `all`, `age:<band>`,
/// `sex:<F|M|U>`, `race:<code>`; each dimension sums to `all`.
struct OutcomeSeries {
    Outcome outcome = Outcome::Tests;
    geo::Level level = geo::Level::Tract;
    Calendar calendar = Calendar::Daily;
    std::map<CellKey, long long> cells;

    long long total(std::string_view stratum = kAllStratum) const;
    std::set<std::string> unit_ids() const;
    std::set<std::string> strata() const;
    std::optional<DateWindow> date_range() const;
};

/// Tests: all test events; Cases: positive tests plus case events;
/// each outcome de-duplicated by event_id. Weekly bins start Monday.
std::map<Outcome, OutcomeSeries> aggregate_events(std::span<const EventRecord> events, geo::Level level,
                                                  Calendar calendar);

void write_counts_csv(std::ostream& out, const std::map<Outcome, OutcomeSeries>& series);
std::map<Outcome, OutcomeSeries> read_counts_csv(std::istream& in, geo::Level level);

// ---------------------------------------------------------------------------

struct IndicatorTable {
    geo::Level level = geo::Level::Tract;
    std::map<std::pair<std::string, std::string>, double> values;  // (unit_id, key)

    std::optional<double> get(const std::string& unit_id, const std::string& key) const;
    std::set<std::string> unit_ids() const;
    std::set<std::string> keys() const;
};

struct IndicatorLoad {
    std::map<geo::Level, IndicatorTable> tables;
    std::vector<Reject> rejects;
};

/// Rows with unknown indicator keys, unknown unit ids (when `known_units` is
/// given), non-numeric values or duplicates are rejected with line numbers.
IndicatorLoad load_indicators(std::istream& in, const catalog::Catalog& catalog,
                              const std::map<geo::Level, std::set<std::string>>* known_units = nullptr);
void write_indicators(std::ostream& out, const std::map<geo::Level, IndicatorTable>& tables);

inline constexpr std::array<std::string_view, 3> kMobilityMetrics{"pct_home", "median_away_minutes",
                                                                  "visits_per_capita"};

struct MobilitySeries {
    std::map<std::tuple<std::string, Date, std::string>, double> metrics;  // (unit_id, date, metric)

    /// Mean over units of `metric` per date, ordered by date.
    std::vector<std::pair<Date, double>> citywide(std::string_view metric) const;
};

struct MobilityLoad {
    MobilitySeries series;
    std::vector<Reject> rejects;
};

MobilityLoad load_mobility(std::istream& in);
void write_mobility(std::ostream& out, const MobilitySeries& series);

// ---------------------------------------------------------------------------

enum class Impute { Drop, LevelMedian };

struct ConsolidateOptions {
    std::vector<std::string> predictors;
    std::string population_key = std::string(catalog::kPopulationKey);
    DateWindow window{};
    bool per_capita = true;
    Impute impute = Impute::Drop;
    /// Unit universe; defaults to every unit seen in the indicator table or the series.
    std::vector<std::string> units;
};

/// y = windowed All-stratum total per unit (per 100,000 when per_capita).
/// Throws UnknownIndicator, InsufficientUnits (n < p + 2) or InvalidArgument.
AnalysisFrame consolidate(const OutcomeSeries& outcome, const IndicatorTable& indicators,
                          const catalog::Catalog& catalog, const ConsolidateOptions& options);

}  // namespace upho::ingest
