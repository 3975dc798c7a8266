#include "upho/ingestion.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "upho/csv.hpp"
#include "upho/error.hpp"

namespace upho::ingest {

namespace {

std::vector<std::string> split_header(std::string_view header) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto end = header.find(',', start);
        out.emplace_back(header.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
        if (end == std::string_view::npos) {
            break;
        }
        start = end + 1;
    }
    return out;
}

void check_header(const csv::Row& row, std::string_view expected, std::string_view what) {
    const auto columns = split_header(expected);
    for (std::size_t i = 0; i < columns.size(); ++i) {
        if (i >= row.fields.size() || row.fields[i] != columns[i]) {
            throw Error(Errc::SchemaMismatch, std::string(what) + " header: missing column '" + columns[i] +
                                                  "' at position " + std::to_string(i + 1) + " (expected '" +
                                                  std::string(expected) + "')");
        }
    }
    if (row.fields.size() != columns.size()) {
        throw Error(Errc::SchemaMismatch, std::string(what) + " header has unexpected extra columns (expected '" +
                                              std::string(expected) + "')");
    }
}

std::optional<double> parse_double(std::string_view s) {
    if (s.empty()) {
        return std::nullopt;
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::optional<EventType> parse_event_type(std::string_view s) {
    const auto l = lower(s);
    if (l == "test") return EventType::Test;
    if (l == "case") return EventType::Case;
    if (l == "hospitalization") return EventType::Hospitalization;
    if (l == "death") return EventType::Death;
    return std::nullopt;
}

std::optional<TestResult> parse_result(std::string_view s) {
    const auto l = lower(s);
    if (l == "positive") return TestResult::Positive;
    if (l == "negative") return TestResult::Negative;
    if (l.empty() || l == "na") return TestResult::NA;
    return std::nullopt;
}

std::optional<AgeBand> parse_age(std::string_view s) {
    if (s == "0-17") return AgeBand::Age0To17;
    if (s == "18-44") return AgeBand::Age18To44;
    if (s == "45-64") return AgeBand::Age45To64;
    if (s == "65+") return AgeBand::Age65Plus;
    if (s.empty() || s == "U") return AgeBand::Unknown;
    return std::nullopt;
}

std::optional<Sex> parse_sex(std::string_view s) {
    if (s == "F") return Sex::Female;
    if (s == "M") return Sex::Male;
    if (s.empty() || s == "U") return Sex::Unknown;
    return std::nullopt;
}

std::string format_number(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// Total order used to pick one representative among records sharing an
// event_id, so aggregation does not depend on input order.
auto representative_key(const EventRecord& e) {
    return std::tuple(e.date, e.unit_id, static_cast<int>(e.age), static_cast<int>(e.sex), e.race,
                      static_cast<int>(e.type), static_cast<int>(e.result));
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

}  // namespace

std::string_view to_string(EventType t) {
    switch (t) {
        case EventType::Test: return "test";
        case EventType::Case: return "case";
        case EventType::Hospitalization: return "hospitalization";
        case EventType::Death: return "death";
    }
    return "";
}

std::string_view to_string(TestResult r) {
    switch (r) {
        case TestResult::Positive: return "positive";
        case TestResult::Negative: return "negative";
        case TestResult::NA: return "";
    }
    return "";
}

std::string_view to_string(AgeBand a) {
    switch (a) {
        case AgeBand::Age0To17: return "0-17";
        case AgeBand::Age18To44: return "18-44";
        case AgeBand::Age45To64: return "45-64";
        case AgeBand::Age65Plus: return "65+";
        case AgeBand::Unknown: return "U";
    }
    return "U";
}

std::string_view to_string(Sex s) {
    switch (s) {
        case Sex::Female: return "F";
        case Sex::Male: return "M";
        case Sex::Unknown: return "U";
    }
    return "U";
}

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Tests: return "tests";
        case Outcome::Cases: return "cases";
        case Outcome::Hospitalizations: return "hospitalizations";
        case Outcome::Deaths: return "deaths";
    }
    return "";
}

std::optional<Outcome> try_parse_outcome(std::string_view text) {
    for (auto o : kAllOutcomes) {
        if (to_string(o) == text) {
            return o;
        }
    }
    return std::nullopt;
}

Outcome parse_outcome(std::string_view text) {
    if (auto o = try_parse_outcome(text)) {
        return *o;
    }
    throw Error(Errc::InvalidArgument,
                "outcome must be one of tests, cases, hospitalizations, deaths; got '" + std::string(text) + "'");
}

RegistryLoad load_registry(std::istream& in) {
    csv::Reader reader{in};
    auto header = reader.next();
    if (!header || (header->fields.size() == 1 && header->fields[0].empty())) {
        throw Error(Errc::EmptyFile, "registry CSV is empty");
    }
    check_header(*header, kRegistryHeader, "registry");

    RegistryLoad out;
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        if (f.size() == 1 && f[0].empty()) {
            continue;  // blank line
        }
        ++out.data_rows;
        auto reject = [&](std::string reason) { out.rejects.push_back({row->line, std::move(reason)}); };
        if (f.size() != 10) {
            reject("expected 10 fields, got " + std::to_string(f.size()));
            continue;
        }
        EventRecord e;
        e.event_id = f[0];
        if (e.event_id.empty()) {
            reject("empty event_id");
            continue;
        }
        auto date = parse_date(f[1]);
        if (!date) {
            reject("invalid date '" + f[1] + "'");
            continue;
        }
        e.date = *date;
        auto type = parse_event_type(f[2]);
        if (!type) {
            reject("unknown event_type '" + f[2] + "'");
            continue;
        }
        e.type = *type;
        auto result = parse_result(f[3]);
        if (!result) {
            reject("unknown result '" + f[3] + "'");
            continue;
        }
        e.result = *result;
        if (e.type == EventType::Test && e.result == TestResult::NA) {
            reject("test event without a result");
            continue;
        }
        if (e.type != EventType::Test && e.result != TestResult::NA) {
            reject("non-test event carries a result");
            continue;
        }
        const bool has_lat = !f[4].empty();
        const bool has_lon = !f[5].empty();
        if (has_lat != has_lon) {
            reject("lat and lon must both be present or both empty");
            continue;
        }
        if (has_lat) {
            auto lat = parse_double(f[4]);
            auto lon = parse_double(f[5]);
            if (!lat || !lon || !geo::is_valid({*lon, *lat})) {
                reject("invalid coordinates");
                continue;
            }
            e.point = geo::GeoPoint{*lon, *lat};
        }
        e.unit_id = f[6];
        if (!e.point && e.unit_id.empty()) {
            reject("no location (lat/lon or unit_id)");
            continue;
        }
        if (e.point && !e.unit_id.empty()) {
            out.notes.push_back("line " + std::to_string(row->line) + ": both lat/lon and unit_id given; unit_id '" +
                                e.unit_id + "' kept");
            e.point.reset();
        }
        auto age = parse_age(f[7]);
        if (!age) {
            reject("unknown age_band '" + f[7] + "'");
            continue;
        }
        e.age = *age;
        auto sex = parse_sex(f[8]);
        if (!sex) {
            reject("unknown sex '" + f[8] + "'");
            continue;
        }
        e.sex = *sex;
        e.race = f[9].empty() ? "U" : f[9];
        if (e.race.find(':') != std::string::npos) {
            reject("race code must not contain ':'");
            continue;
        }
        out.records.push_back(std::move(e));
    }
    return out;
}

void write_registry(std::ostream& out, std::span<const EventRecord> records) {
    out << kRegistryHeader << '\n';
    for (const auto& e : records) {
        csv::write_row(out, {e.event_id, format_date(e.date), std::string(to_string(e.type)),
                             std::string(to_string(e.result)), e.point ? format_number(e.point->lat) : "",
                             e.point ? format_number(e.point->lon) : "", e.unit_id, std::string(to_string(e.age)),
                             std::string(to_string(e.sex)), e.race});
    }
}

JoinResult spatial_join(std::span<const EventRecord> events, std::span<const geo::GeoUnit> units) {
    for (const auto& u : units) {
        if (u.level() != units.front().level()) {
            throw Error(Errc::InvalidArgument, "spatial_join: all units must share one level");
        }
    }
    std::vector<const geo::GeoUnit*> sorted;
    sorted.reserve(units.size());
    for (const auto& u : units) {
        sorted.push_back(&u);
    }
    std::sort(sorted.begin(), sorted.end(),
              [](const geo::GeoUnit* a, const geo::GeoUnit* b) { return a->unit_id() < b->unit_id(); });
    std::set<std::string, std::less<>> ids;
    for (const auto* u : sorted) {
        ids.insert(u->unit_id());
    }

    JoinResult out;
    for (const auto& e : events) {
        if (!e.unit_id.empty()) {
            (ids.contains(e.unit_id) ? out.assigned : out.unassigned).push_back(e);
            continue;
        }
        const geo::GeoUnit* hit = nullptr;
        for (const auto* u : sorted) {
            if (geo::point_in_unit(*e.point, *u)) {
                hit = u;
                break;
            }
        }
        if (hit) {
            EventRecord assigned = e;
            assigned.unit_id = hit->unit_id();
            assigned.point.reset();
            out.assigned.push_back(std::move(assigned));
        } else {
            out.unassigned.push_back(e);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string age_stratum(AgeBand a) { return "age:" + std::string(to_string(a)); }
std::string sex_stratum(Sex s) { return "sex:" + std::string(to_string(s)); }
std::string race_stratum(std::string_view race) { return "race:" + std::string(race); }

long long OutcomeSeries::total(std::string_view stratum) const {
    long long t = 0;
    for (const auto& [key, count] : cells) {
        if (key.stratum == stratum) {
            t += count;
        }
    }
    return t;
}

std::set<std::string> OutcomeSeries::unit_ids() const {
    std::set<std::string> out;
    for (const auto& [key, _] : cells) {
        out.insert(key.unit_id);
    }
    return out;
}

std::set<std::string> OutcomeSeries::strata() const {
    std::set<std::string> out;
    for (const auto& [key, _] : cells) {
        out.insert(key.stratum);
    }
    return out;
}

std::optional<DateWindow> OutcomeSeries::date_range() const {
    if (cells.empty()) {
        return std::nullopt;
    }
    DateWindow w{cells.begin()->first.date, cells.begin()->first.date};
    for (const auto& [key, _] : cells) {
        w.start = std::min(w.start, key.date);
        w.end = std::max(w.end, key.date);
    }
    return w;
}

std::map<Outcome, OutcomeSeries> aggregate_events(std::span<const EventRecord> events, geo::Level level,
                                                  Calendar calendar) {
    std::map<Outcome, std::map<std::string, const EventRecord*>> chosen;
    auto offer = [&](Outcome o, const EventRecord& e) {
        auto& slot = chosen[o][e.event_id];
        if (slot == nullptr || representative_key(e) < representative_key(*slot)) {
            slot = &e;
        }
    };
    for (const auto& e : events) {
        if (e.unit_id.empty()) {
            throw Error(Errc::InvalidArgument, "aggregate_events: event '" + e.event_id + "' has no unit_id");
        }
        switch (e.type) {
            case EventType::Test:
                offer(Outcome::Tests, e);
                if (e.result == TestResult::Positive) {
                    offer(Outcome::Cases, e);
                }
                break;
            case EventType::Case: offer(Outcome::Cases, e); break;
            case EventType::Hospitalization: offer(Outcome::Hospitalizations, e); break;
            case EventType::Death: offer(Outcome::Deaths, e); break;
        }
    }

    std::map<Outcome, OutcomeSeries> out;
    for (auto o : kAllOutcomes) {
        auto& series = out[o];
        series.outcome = o;
        series.level = level;
        series.calendar = calendar;
        for (const auto& [_, e] : chosen[o]) {
            const Date bin = bin_start(e->date, calendar);
            for (const auto& stratum :
                 {std::string(kAllStratum), age_stratum(e->age), sex_stratum(e->sex), race_stratum(e->race)}) {
                ++series.cells[{e->unit_id, bin, stratum}];
            }
        }
    }
    return out;
}

void write_counts_csv(std::ostream& out, const std::map<Outcome, OutcomeSeries>& series) {
    out << "outcome,unit_id,date,stratum,count\n";
    for (const auto& [o, s] : series) {
        for (const auto& [key, count] : s.cells) {
            csv::write_row(out, {std::string(to_string(o)), key.unit_id, format_date(key.date), key.stratum,
                                 std::to_string(count)});
        }
    }
}

std::map<Outcome, OutcomeSeries> read_counts_csv(std::istream& in, geo::Level level) {
    csv::Reader reader{in};
    auto header = reader.next();
    if (!header) {
        throw Error(Errc::EmptyFile, "counts CSV is empty");
    }
    check_header(*header, "outcome,unit_id,date,stratum,count", "counts");
    std::map<Outcome, OutcomeSeries> out;
    for (auto o : kAllOutcomes) {
        out[o].outcome = o;
        out[o].level = level;
    }
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        if (f.size() == 1 && f[0].empty()) {
            continue;
        }
        if (f.size() != 5) {
            throw Error(Errc::ParseError, "counts line " + std::to_string(row->line) + ": wrong field count");
        }
        const auto count = parse_double(f[4]);
        if (!count || *count < 0 || *count != std::floor(*count)) {
            throw Error(Errc::ParseError, "counts line " + std::to_string(row->line) + ": invalid count");
        }
        out[parse_outcome(f[0])].cells[{f[1], parse_date_or_throw(f[2]), f[3]}] = static_cast<long long>(*count);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::optional<double> IndicatorTable::get(const std::string& unit_id, const std::string& key) const {
    auto it = values.find({unit_id, key});
    if (it == values.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::set<std::string> IndicatorTable::unit_ids() const {
    std::set<std::string> out;
    for (const auto& [k, _] : values) {
        out.insert(k.first);
    }
    return out;
}

std::set<std::string> IndicatorTable::keys() const {
    std::set<std::string> out;
    for (const auto& [k, _] : values) {
        out.insert(k.second);
    }
    return out;
}

IndicatorLoad load_indicators(std::istream& in, const catalog::Catalog& catalog,
                              const std::map<geo::Level, std::set<std::string>>* known_units) {
    csv::Reader reader{in};
    auto header = reader.next();
    if (!header || (header->fields.size() == 1 && header->fields[0].empty())) {
        throw Error(Errc::EmptyFile, "indicators CSV is empty");
    }
    check_header(*header, kIndicatorsHeader, "indicators");
    IndicatorLoad out;
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        if (f.size() == 1 && f[0].empty()) {
            continue;
        }
        auto reject = [&](std::string reason) { out.rejects.push_back({row->line, std::move(reason)}); };
        if (f.size() != 4) {
            reject("expected 4 fields");
            continue;
        }
        auto level = geo::try_parse_level(f[1]);
        if (!level) {
            reject("unknown level '" + f[1] + "'");
            continue;
        }
        if (!catalog.contains(f[2])) {
            reject("unknown indicator_key '" + f[2] + "'");
            continue;
        }
        if (known_units) {
            auto it = known_units->find(*level);
            if (it == known_units->end() || !it->second.contains(f[0])) {
                reject("unknown unit_id '" + f[0] + "' at level " + f[1]);
                continue;
            }
        }
        auto value = parse_double(f[3]);
        if (!value) {
            reject("non-numeric value '" + f[3] + "'");
            continue;
        }
        auto& table = out.tables[*level];
        table.level = *level;
        if (!table.values.emplace(std::pair{f[0], f[2]}, *value).second) {
            reject("duplicate value for (" + f[0] + ", " + f[2] + ")");
        }
    }
    return out;
}

void write_indicators(std::ostream& out, const std::map<geo::Level, IndicatorTable>& tables) {
    out << kIndicatorsHeader << '\n';
    for (const auto& [level, table] : tables) {
        for (const auto& [k, v] : table.values) {
            csv::write_row(out, {k.first, std::string(geo::to_string(level)), k.second, format_number(v)});
        }
    }
}

std::vector<std::pair<Date, double>> MobilitySeries::citywide(std::string_view metric) const {
    std::map<Date, std::pair<double, int>> acc;
    for (const auto& [key, v] : metrics) {
        if (std::get<2>(key) == metric) {
            auto& a = acc[std::get<1>(key)];
            a.first += v;
            a.second += 1;
        }
    }
    std::vector<std::pair<Date, double>> out;
    for (const auto& [d, a] : acc) {
        out.emplace_back(d, a.first / a.second);
    }
    return out;
}

MobilityLoad load_mobility(std::istream& in) {
    csv::Reader reader{in};
    auto header = reader.next();
    if (!header || (header->fields.size() == 1 && header->fields[0].empty())) {
        throw Error(Errc::EmptyFile, "mobility CSV is empty");
    }
    check_header(*header, kMobilityHeader, "mobility");
    MobilityLoad out;
    while (auto row = reader.next()) {
        const auto& f = row->fields;
        if (f.size() == 1 && f[0].empty()) {
            continue;
        }
        auto reject = [&](std::string reason) { out.rejects.push_back({row->line, std::move(reason)}); };
        if (f.size() != 4) {
            reject("expected 4 fields");
            continue;
        }
        auto date = parse_date(f[1]);
        if (!date) {
            reject("invalid date '" + f[1] + "'");
            continue;
        }
        if (std::find(kMobilityMetrics.begin(), kMobilityMetrics.end(), f[2]) == kMobilityMetrics.end()) {
            reject("unknown metric_key '" + f[2] + "'");
            continue;
        }
        auto value = parse_double(f[3]);
        if (!value || *value < 0 || (f[2] == "pct_home" && *value > 100.0)) {
            reject("value out of range '" + f[3] + "'");
            continue;
        }
        if (!out.series.metrics.emplace(std::tuple{f[0], *date, f[2]}, *value).second) {
            reject("duplicate mobility value");
        }
    }
    return out;
}

void write_mobility(std::ostream& out, const MobilitySeries& series) {
    out << kMobilityHeader << '\n';
    for (const auto& [key, v] : series.metrics) {
        csv::write_row(out, {std::get<0>(key), format_date(std::get<1>(key)), std::get<2>(key), format_number(v)});
    }
}

// ---------------------------------------------------------------------------

AnalysisFrame consolidate(const OutcomeSeries& outcome, const IndicatorTable& indicators,
                          const catalog::Catalog& catalog, const ConsolidateOptions& options) {
    if (outcome.level != indicators.level) {
        throw Error(Errc::InvalidArgument, "outcome and indicators are at different levels");
    }
    if (options.window.end < options.window.start) {
        throw Error(Errc::InvalidArgument, "empty date window");
    }
    const auto table_keys = indicators.keys();
    std::vector<std::string> columns = options.predictors;
    if (options.per_capita) {
        columns.push_back(options.population_key);
    }
    for (const auto& key : columns) {
        if (!catalog.contains(key)) {
            throw Error(Errc::UnknownIndicator, "indicator '" + key + "' is not in the catalog");
        }
        if (!table_keys.contains(key)) {
            throw Error(Errc::UnknownIndicator,
                        "indicator '" + key + "' has no values at level " + std::string(geo::to_string(indicators.level)));
        }
    }

    std::set<std::string> universe;
    if (!options.units.empty()) {
        universe.insert(options.units.begin(), options.units.end());
    } else {
        universe = indicators.unit_ids();
        for (auto& id : outcome.unit_ids()) {
            universe.insert(id);
        }
    }

    std::map<std::string, double> totals;
    for (const auto& [key, count] : outcome.cells) {
        if (key.stratum == kAllStratum && options.window.contains(key.date)) {
            totals[key.unit_id] += static_cast<double>(count);
        }
    }

    std::vector<double> medians(columns.size(), 0.0);
    if (options.impute == Impute::LevelMedian) {
        for (std::size_t c = 0; c < columns.size(); ++c) {
            std::vector<double> present;
            for (const auto& id : universe) {
                if (auto v = indicators.get(id, columns[c])) {
                    present.push_back(*v);
                }
            }
            if (present.empty()) {
                throw Error(Errc::UnknownIndicator, "indicator '" + columns[c] + "' has no values to impute from");
            }
            medians[c] = median(std::move(present));
        }
    }

    std::vector<std::string> kept;
    std::vector<double> y;
    std::vector<std::vector<double>> rows;
    for (const auto& id : universe) {
        std::vector<double> row(columns.size());
        bool complete = true;
        for (std::size_t c = 0; c < columns.size(); ++c) {
            if (auto v = indicators.get(id, columns[c])) {
                row[c] = *v;
            } else if (options.impute == Impute::LevelMedian) {
                row[c] = medians[c];
            } else {
                complete = false;
                break;
            }
        }
        if (!complete) {
            continue;
        }
        double value = totals.contains(id) ? totals.at(id) : 0.0;
        if (options.per_capita) {
            const double population = row.back();
            if (!(population > 0.0)) {
                continue;
            }
            value /= population * 1e-5;
            row.pop_back();
        }
        kept.push_back(id);
        y.push_back(value);
        rows.push_back(std::move(row));
    }

    const std::size_t p = options.predictors.size();
    if (kept.size() < p + 2) {
        throw Error(Errc::InsufficientUnits, "consolidated frame has " + std::to_string(kept.size()) +
                                                 " units, need at least " + std::to_string(p + 2));
    }

    AnalysisFrame frame;
    frame.level = outcome.level;
    frame.unit_ids = std::move(kept);
    frame.predictor_keys = options.predictors;
    frame.window = options.window;
    frame.outcome = std::string(to_string(outcome.outcome));
    frame.per_capita = options.per_capita;
    frame.y = Eigen::Map<Eigen::VectorXd>(y.data(), static_cast<Eigen::Index>(y.size()));
    frame.X.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(p));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        for (std::size_t c = 0; c < p; ++c) {
            frame.X(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
        }
    }
    return frame;
}

}  // namespace upho::ingest
