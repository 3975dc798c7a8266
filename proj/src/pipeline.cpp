#include "upho/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "upho/causal.hpp"
#include "upho/csv.hpp"
#include "upho/error.hpp"
#include "upho/hotspot.hpp"
#include "upho/regression.hpp"

namespace upho::pipeline {

json causal_params(const std::set<catalog::SdohDomain>& domains) {
    std::vector<std::string> codes;
    for (auto d : domains) {
        codes.emplace_back(catalog::code(d));
    }
    std::sort(codes.begin(), codes.end());
    return {{"domains", codes}};
}

json regression_params(std::string_view model) { return {{"model", model}}; }

json impact_params(Date intervention, Calendar period, std::string_view stratify) {
    return {{"intervention", format_date(intervention)}, {"period", to_string(period)}, {"stratify", stratify}};
}

json hotspot_params(std::string_view mode) { return {{"mode", mode}}; }

json distribution_params() { return json::object(); }

// ---------------------------------------------------------------------------

json IngestReport::to_json() const {
    json lv = json::object();
    for (const auto& [level, c] : levels) {
        lv[std::string(geo::to_string(level))] = {{"assigned", c.assigned}, {"unassigned", c.unassigned}};
    }
    json details = json::array();
    for (const auto& r : reject_details) {
        details.push_back({{"line", r.line}, {"reason", r.reason}});
    }
    return {{"events", events},
            {"rejects", rejects},
            {"levels", lv},
            {"reject_details", details},
            {"indicator_rejects", indicator_rejects},
            {"mobility_rejects", mobility_rejects},
            {"notes", notes}};
}

fs::path staging_counts_path(const fs::path& root, geo::Level level) {
    return root / "staging" / std::string(geo::to_string(level)) / "daily_counts.csv";
}
fs::path staging_indicators_path(const fs::path& root) { return root / "staging" / "indicators.csv"; }
fs::path staging_mobility_path(const fs::path& root) { return root / "staging" / "mobility.csv"; }
fs::path staging_catalog_path(const fs::path& root) { return root / "staging" / "catalog.csv"; }

namespace {

std::ifstream open_input(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::NotFound, "cannot open " + path.string());
    }
    return in;
}

std::string relative_to(const fs::path& root, const fs::path& path) {
    return fs::relative(path, root).generic_string();
}

}  // namespace

std::vector<ingest::EventRecord> relocate_for_level(std::span<const ingest::EventRecord> events,
                                                    const std::map<std::string, geo::GeoPoint>& foreign_centroids,
                                                    const std::set<std::string>& level_ids) {
    std::vector<ingest::EventRecord> out(events.begin(), events.end());
    for (auto& e : out) {
        if (e.unit_id.empty() || level_ids.contains(e.unit_id)) {
            continue;
        }
        if (auto it = foreign_centroids.find(e.unit_id); it != foreign_centroids.end()) {
            e.point = it->second;
            e.unit_id.clear();
        }
    }
    return out;
}

IngestReport run_ingest(const IngestOptions& options) {
    IngestReport report;

    std::vector<geo::GeoUnit> units;
    {
        auto in = open_input(options.geo);
        json doc;
        try {
            doc = json::parse(in);
        } catch (const json::exception& ex) {
            throw Error(Errc::ParseError, options.geo.string() + ": " + ex.what());
        }
        units = geo::parse_geojson(doc);
    }
    std::map<geo::Level, std::vector<geo::GeoUnit>> by_level;
    std::map<geo::Level, std::set<std::string>> known_units;
    for (const auto& u : units) {
        by_level[u.level()].push_back(u);
        known_units[u.level()].insert(u.unit_id());
    }

    catalog::Catalog cat = catalog::builtin_catalog();
    if (options.catalog) {
        auto in = open_input(*options.catalog);
        cat = catalog::read_catalog_csv(in);
    }

    ingest::RegistryLoad registry;
    {
        auto in = open_input(options.registry);
        registry = ingest::load_registry(in);
    }
    report.events = registry.data_rows;
    report.rejects = registry.rejects.size();
    report.reject_details = registry.rejects;
    report.notes = registry.notes;

    ingest::IndicatorLoad indicators;
    {
        auto in = open_input(options.indicators);
        indicators = ingest::load_indicators(in, cat, &known_units);
    }
    report.indicator_rejects = indicators.rejects.size();

    std::optional<ingest::MobilityLoad> mobility;
    if (options.mobility) {
        auto in = open_input(*options.mobility);
        mobility = ingest::load_mobility(in);
        report.mobility_rejects = mobility->rejects.size();
    }

    repo::Writer writer(options.out, options.reproducible);
    for (const auto& [level, level_units] : by_level) {
        writer.write_geo(level, canonical_dump(geo::to_geojson(level_units)) + "\n");

        std::map<std::string, geo::GeoPoint> foreign;
        for (const auto& u : units) {
            if (u.level() != level) {
                foreign.emplace(u.unit_id(), u.centroid());
            }
        }
        const auto events = relocate_for_level(registry.records, foreign, known_units[level]);
        const auto joined = ingest::spatial_join(events, level_units);
        report.levels[level] = {joined.assigned.size(), joined.unassigned.size()};

        const auto series = ingest::aggregate_events(joined.assigned, level, Calendar::Daily);
        std::ostringstream counts;
        ingest::write_counts_csv(counts, series);
        writer.write_file(relative_to(options.out, staging_counts_path(options.out, level)), counts.str());
    }

    std::ostringstream ind;
    ingest::write_indicators(ind, indicators.tables);
    writer.write_file(relative_to(options.out, staging_indicators_path(options.out)), ind.str());

    std::ostringstream catalog_csv;
    catalog::write_catalog_csv(catalog_csv, cat);
    writer.write_file(relative_to(options.out, staging_catalog_path(options.out)), catalog_csv.str());

    if (mobility) {
        std::ostringstream mob;
        ingest::write_mobility(mob, mobility->series);
        writer.write_file(relative_to(options.out, staging_mobility_path(options.out)), mob.str());
    }

    writer.write_file("ingest_report.json", canonical_dump(report.to_json()) + "\n");
    return report;
}

// ---------------------------------------------------------------------------

std::map<std::string, std::string> default_proxies() {
    return {{"pct_no_vehicle", "median_away_minutes"}, {"pct_public_transit", "visits_per_capita"}};
}

AnalysisFailure::AnalysisFailure(repo::Analytic a, ingest::Outcome o, geo::Level l, const std::string& cause)
    : std::runtime_error("analytic " + std::string(repo::to_string(a)) + " failed for outcome " +
                         std::string(ingest::to_string(o)) + " at level " + std::string(geo::to_string(l)) + ": " +
                         cause),
      analytic(a),
      outcome(o),
      level(l) {}

std::map<Date, std::vector<double>> read_controls(const fs::path& path) {
    auto in = open_input(path);
    csv::Reader reader(in);
    auto header = reader.next();
    if (!header || header->fields.size() < 2 || header->fields[0] != "date") {
        throw Error(Errc::SchemaMismatch, path.string() + ": expected header `date,<series>...`");
    }
    const std::size_t k = header->fields.size() - 1;
    std::map<Date, std::vector<double>> out;
    while (auto row = reader.next()) {
        const std::string where = path.string() + " line " + std::to_string(row->line);
        if (row->fields.size() != k + 1) {
            throw Error(Errc::ParseError, where + ": expected " + std::to_string(k + 1) + " fields");
        }
        const auto date = parse_date(row->fields[0]);
        if (!date) {
            throw Error(Errc::ParseError, where + ": bad date '" + row->fields[0] + "'");
        }
        std::vector<double> values(k);
        for (std::size_t c = 0; c < k; ++c) {
            try {
                std::size_t used = 0;
                values[c] = std::stod(row->fields[c + 1], &used);
                if (used != row->fields[c + 1].size() || !std::isfinite(values[c])) {
                    throw std::invalid_argument("trailing");
                }
            } catch (const std::exception&) {
                throw Error(Errc::ParseError, where + ": bad value '" + row->fields[c + 1] + "'");
            }
        }
        if (!out.emplace(*date, std::move(values)).second) {
            throw Error(Errc::ParseError, where + ": duplicate date");
        }
    }
    return out;
}

namespace {

using repo::Analytic;

json vector_by_key(const Eigen::VectorXd& v, const std::vector<std::string>& keys) {
    json out = json::object();
    for (std::size_t i = 0; i < keys.size(); ++i) {
        out[keys[i]] = number_or_null(v(static_cast<Eigen::Index>(i)));
    }
    return out;
}

json comparison_json(const regression::ModelComparison& c) {
    return {{"ols_aicc", number_or_null(c.ols_aicc)},
            {"gwr_aicc", number_or_null(c.gwr_aicc)},
            {"delta", number_or_null(c.delta)},
            {"preferred", regression::to_string(c.preferred)}};
}

json window_json(const DateWindow& w) { return {{"start", format_date(w.start)}, {"end", format_date(w.end)}}; }

struct LevelData {
    geo::Level level;
    std::vector<geo::GeoUnit> units;
    std::map<ingest::Outcome, ingest::OutcomeSeries> series;
    ingest::IndicatorTable indicators;
};

class Analyzer {
public:
    explicit Analyzer(const AnalyzeOptions& options) : opt_(options) {
        {
            auto in = open_input(staging_catalog_path(opt_.repo));
            catalog_ = catalog::read_catalog_csv(in);
        }
        {
            auto in = open_input(staging_indicators_path(opt_.repo));
            indicators_ = ingest::load_indicators(in, catalog_).tables;
        }
        if (fs::exists(staging_mobility_path(opt_.repo))) {
            auto in = open_input(staging_mobility_path(opt_.repo));
            mobility_ = ingest::load_mobility(in).series;
        }
        if (opt_.whitelist) {
            auto in = open_input(*opt_.whitelist);
            whitelist_ = causal::read_whitelist(in);
        }
        if (opt_.controls) {
            controls_ = read_controls(*opt_.controls);
        }
        levels_ = opt_.levels;
        if (levels_.empty()) {
            for (auto level : geo::kAllLevels) {
                if (fs::exists(repo::geo_path(opt_.repo, level))) {
                    levels_.push_back(level);
                }
            }
        }
        if (levels_.empty()) {
            throw Error(Errc::NotFound, "repository " + opt_.repo.string() + " has no ingested levels");
        }
    }

    AnalyzeReport run() {
        repo::Writer writer(opt_.repo, opt_.reproducible);
        const std::size_t before = writer.manifest().entries.size();
        for (auto level : levels_) {
            const LevelData data = load_level(level);
            for (auto outcome : opt_.outcomes) {
                auto it = data.series.find(outcome);
                if (it == data.series.end() || it->second.cells.empty()) {
                    report_.notes.push_back("no " + std::string(ingest::to_string(outcome)) + " events at level " +
                                            std::string(geo::to_string(level)));
                    continue;
                }
                for (auto analytic : opt_.analytics) {
                    try {
                        run_one(writer, analytic, data, it->second);
                    } catch (const AnalysisFailure&) {
                        throw;
                    } catch (const std::exception& ex) {
                        throw AnalysisFailure(analytic, outcome, level, ex.what());
                    }
                }
            }
        }
        report_.new_entries = writer.manifest().entries.size() - before;
        return report_;
    }

private:
    LevelData load_level(geo::Level level) const {
        LevelData d;
        d.level = level;
        const auto doc = json::parse(repo::read_file(repo::geo_path(opt_.repo, level)));
        for (auto& u : geo::parse_geojson(doc)) {
            if (u.level() == level) {
                d.units.push_back(std::move(u));
            }
        }
        std::sort(d.units.begin(), d.units.end(),
                  [](const geo::GeoUnit& a, const geo::GeoUnit& b) { return a.unit_id() < b.unit_id(); });
        auto in = open_input(staging_counts_path(opt_.repo, level));
        d.series = ingest::read_counts_csv(in, level);
        if (auto it = indicators_.find(level); it != indicators_.end()) {
            d.indicators = it->second;
        } else {
            d.indicators.level = level;
        }
        return d;
    }

    std::vector<std::string> unit_ids(const LevelData& d) const {
        std::vector<std::string> ids;
        for (const auto& u : d.units) {
            ids.push_back(u.unit_id());
        }
        return ids;
    }

    std::vector<std::string> predictors(const LevelData& d) const {
        if (!opt_.predictors.empty()) {
            return opt_.predictors;
        }
        std::vector<std::string> keys;
        for (const auto& k : d.indicators.keys()) {
            if (k != catalog::kPopulationKey) {
                keys.push_back(k);
            }
        }
        return keys;
    }

    AnalysisFrame frame(const LevelData& d, const ingest::OutcomeSeries& s, std::vector<std::string> keys) const {
        ingest::ConsolidateOptions co;
        co.predictors = std::move(keys);
        co.window = *s.date_range();
        co.units = unit_ids(d);
        co.per_capita = d.indicators.keys().contains(std::string(catalog::kPopulationKey));
        return ingest::consolidate(s, d.indicators, catalog_, co);
    }

    std::vector<geo::GeoPoint> centroids_of(const LevelData& d, const std::vector<std::string>& ids) const {
        std::map<std::string, geo::GeoPoint> by_id;
        for (const auto& u : d.units) {
            by_id.emplace(u.unit_id(), u.centroid());
        }
        std::vector<geo::GeoPoint> out;
        for (const auto& id : ids) {
            out.push_back(by_id.at(id));
        }
        return out;
    }

    std::vector<geo::GeoUnit> units_of(const LevelData& d, const std::vector<std::string>& ids) const {
        const std::set<std::string> wanted(ids.begin(), ids.end());
        std::vector<geo::GeoUnit> out;
        for (const auto& u : d.units) {
            if (wanted.contains(u.unit_id())) {
                out.push_back(u);
            }
        }
        return out;
    }

    void put(repo::Writer& w, Analytic a, const LevelData& d, ingest::Outcome o, const json& params,
             const json& payload) {
        w.write_result(repo::make_key(opt_.disease, o, a, d.level, params), payload);
        ++report_.written;
    }

    json frame_json(const AnalysisFrame& f) const {
        return {{"n", f.n()},
                {"window", window_json(f.window)},
                {"per_capita", f.per_capita},
                {"predictors", f.predictor_keys}};
    }

    void run_one(repo::Writer& w, Analytic a, const LevelData& d, const ingest::OutcomeSeries& s) {
        switch (a) {
            case Analytic::CausalStructure: return run_causal(w, d, s);
            case Analytic::Regression: return run_regression(w, d, s);
            case Analytic::Impact: return run_impact(w, d, s);
            case Analytic::Hotspots: return run_hotspots(w, d, s);
            case Analytic::Distribution: return run_distribution(w, d, s);
        }
    }

    std::map<std::string, causal::TemporalProxy> proxies(const LevelData& d, const ingest::OutcomeSeries& s) const {
        std::map<std::string, causal::TemporalProxy> out;
        if (!mobility_) {
            return out;
        }
        std::map<Date, double> outcome_by_date;
        for (const auto& [key, count] : s.cells) {
            if (key.stratum == ingest::kAllStratum) {
                outcome_by_date[key.date] += static_cast<double>(count);
            }
        }
        const auto links = opt_.proxies.empty() ? default_proxies() : opt_.proxies;
        const auto keys = d.indicators.keys();
        for (const auto& [indicator, metric] : links) {
            if (!keys.contains(indicator)) {
                continue;
            }
            causal::TemporalProxy tp;
            for (const auto& [date, value] : mobility_->citywide(metric)) {
                tp.proxy.push_back(value);
                auto it = outcome_by_date.find(date);
                tp.outcome.push_back(it == outcome_by_date.end() ? 0.0 : it->second);
            }
            if (!tp.proxy.empty()) {
                out.emplace(indicator, std::move(tp));
            }
        }
        return out;
    }

    void run_causal(repo::Writer& w, const LevelData& d, const ingest::OutcomeSeries& s) {
        const auto f = frame(d, s, predictors(d));
        causal::CausalConfig config;
        config.tau = opt_.tau;
        config.alpha = opt_.alpha;
        config.hill.seed = opt_.seed;
        config.whitelist = whitelist_;
        config.proxies = proxies(d, s);
        const std::string outcome(ingest::to_string(s.outcome));
        constexpr std::array<catalog::SdohDomain, 6> all{
            catalog::SdohDomain::AccessResources, catalog::SdohDomain::Exposure,  catalog::SdohDomain::PolicyAdherence,
            catalog::SdohDomain::Community,       catalog::SdohDomain::Awareness, catalog::SdohDomain::BuiltEnvironment};
        for (unsigned mask = 1; mask < (1U << all.size()); ++mask) {
            std::set<catalog::SdohDomain> domains;
            for (std::size_t b = 0; b < all.size(); ++b) {
                if (mask & (1U << b)) {
                    domains.insert(all[b]);
                }
            }
            causal::CausalStructure cs;
            try {
                cs = causal::build_causal_structure(f, outcome, catalog_, domains, config);
            } catch (const Error& e) {
                if (e.code() == Errc::NoIndicatorsSelected) {
                    continue;
                }
                throw;
            }
            json payload = causal::to_json(cs);
            const json params = causal_params(domains);
            payload["domains"] = params.at("domains");
            payload["frame"] = frame_json(f);
            payload["seed"] = opt_.seed;
            put(w, Analytic::CausalStructure, d, s.outcome, params, payload);
        }
    }

    void run_regression(repo::Writer& w, const LevelData& d, const ingest::OutcomeSeries& s) {
        const auto f = frame(d, s, predictors(d));
        std::vector<std::string> coef_names{"intercept"};
        coef_names.insert(coef_names.end(), f.predictor_keys.begin(), f.predictor_keys.end());

        const auto ols = regression::fit_ols(f);
        const auto centroids = centroids_of(d, f.unit_ids);
        regression::GwrSpec spec{opt_.kernel, 0.0, opt_.adaptive};
        json selection = nullptr;
        if (opt_.bandwidth) {
            spec.bandwidth = *opt_.bandwidth;
        } else {
            const auto sel = regression::select_bandwidth(f, centroids, opt_.kernel, opt_.adaptive);
            spec.bandwidth = sel.bandwidth;
            selection = {{"lower", sel.lower}, {"upper", sel.upper}, {"evaluations", sel.evaluations},
                         {"aicc", number_or_null(sel.aicc)}};
        }
        const auto gwr = regression::fit_gwr(f, centroids, spec);
        const json comparison = comparison_json(regression::compare_models(ols, gwr));

        json residuals = json::object();
        for (std::size_t i = 0; i < f.n(); ++i) {
            residuals[f.unit_ids[i]] = number_or_null(ols.residuals(static_cast<Eigen::Index>(i)));
        }
        json ols_payload = {{"model", "ols"},
                            {"frame", frame_json(f)},
                            {"beta", vector_by_key(ols.beta, coef_names)},
                            {"std_err", vector_by_key(ols.std_err, coef_names)},
                            {"t_stats", vector_by_key(ols.t_stats, coef_names)},
                            {"vif", vector_by_key(ols.vif, f.predictor_keys)},
                            {"rss", number_or_null(ols.rss)},
                            {"r2", number_or_null(ols.r2)},
                            {"adj_r2", number_or_null(ols.adj_r2)},
                            {"aicc", number_or_null(ols.aicc)},
                            {"residuals", residuals},
                            {"warnings", ols.warnings},
                            {"comparison", comparison}};
        put(w, Analytic::Regression, d, s.outcome, regression_params("ols"), ols_payload);

        json local = json::object();
        for (std::size_t i = 0; i < f.n(); ++i) {
            const auto r = static_cast<Eigen::Index>(i);
            local[f.unit_ids[i]] = {{"beta", vector_by_key(gwr.local_beta.row(r).transpose(), coef_names)},
                                    {"std_err", vector_by_key(gwr.local_std_err.row(r).transpose(), coef_names)},
                                    {"fitted", number_or_null(gwr.fitted(r))},
                                    {"residual", number_or_null(gwr.local_residuals(r))},
                                    {"local_r2", number_or_null(gwr.local_r2(r))}};
        }
        json summary = json::object();
        for (std::size_t c = 0; c < coef_names.size(); ++c) {
            std::vector<double> col(f.n());
            for (std::size_t i = 0; i < f.n(); ++i) {
                col[i] = gwr.local_beta(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
            }
            std::sort(col.begin(), col.end());
            summary[coef_names[c]] = {{"min", number_or_null(col.front())},
                                      {"median", number_or_null(causal::sorted_quantile(col, 0.5))},
                                      {"max", number_or_null(col.back())}};
        }
        json gwr_payload = {{"model", "gwr"},
                            {"frame", frame_json(f)},
                            {"kernel", to_string(gwr.kernel)},
                            {"adaptive", gwr.adaptive},
                            {"bandwidth", gwr.bandwidth},
                            {"bandwidth_selection", selection},
                            {"rss", number_or_null(gwr.rss)},
                            {"aicc", number_or_null(gwr.aicc)},
                            {"effective_params", number_or_null(gwr.effective_params)},
                            {"local", local},
                            {"coefficient_summary", summary},
                            {"comparison", comparison}};
        put(w, Analytic::Regression, d, s.outcome, regression_params("gwr"), gwr_payload);
    }

    std::vector<std::pair<std::string, std::vector<std::string>>> strata_groups(const ingest::OutcomeSeries& s) const {
        std::vector<std::pair<std::string, std::vector<std::string>>> out;
        out.push_back({"none", {std::string(ingest::kAllStratum)}});
        std::vector<std::string> age;
        for (auto a : ingest::kAllAgeBands) {
            age.push_back(ingest::age_stratum(a));
        }
        out.push_back({"age", age});
        std::vector<std::string> sex;
        for (auto x : ingest::kAllSexes) {
            sex.push_back(ingest::sex_stratum(x));
        }
        out.push_back({"sex", sex});
        std::vector<std::string> race;
        for (const auto& st : s.strata()) {
            if (st.starts_with("race:")) {
                race.push_back(st);
            }
        }
        out.push_back({"race", race});
        return out;
    }

    void run_impact(repo::Writer& w, const LevelData& d, const ingest::OutcomeSeries& s) {
        if (!opt_.intervention) {
            throw Error(Errc::InvalidArgument, "impact analysis needs an intervention date");
        }
        const auto range = *s.date_range();
        for (auto period : {Calendar::Daily, Calendar::Weekly}) {
            std::vector<Date> bins;
            const int width = bin_width_days(period);
            for (Date b = bin_start(range.start, period); b <= bin_start(range.end, period);
                 b += std::chrono::days{width}) {
                bins.push_back(b);
            }
            std::optional<Eigen::MatrixXd> controls;
            if (controls_) {
                controls = control_matrix(bins, period);
            }
            for (const auto& [stratify, strata] : strata_groups(s)) {
                json results = json::object();
                for (const auto& stratum : strata) {
                    std::map<Date, double> totals;
                    for (const auto& [key, count] : s.cells) {
                        if (key.stratum == stratum) {
                            totals[bin_start(key.date, period)] += static_cast<double>(count);
                        }
                    }
                    std::vector<double> y;
                    for (auto b : bins) {
                        auto it = totals.find(b);
                        y.push_back(it == totals.end() ? 0.0 : it->second);
                    }
                    causal::ImpactConfig ic{opt_.n_sims, opt_.seed};
                    const auto result = causal::causal_impact(bins, y, bin_start(*opt_.intervention, period),
                                                              controls ? &*controls : nullptr, ic);
                    results[stratum] = causal::to_json(result);
                }
                json payload = {{"intervention", format_date(*opt_.intervention)},
                                {"period", to_string(period)},
                                {"stratify", stratify},
                                {"strata", results},
                                {"n_sims", opt_.n_sims},
                                {"seed", opt_.seed},
                                {"controls", controls_.has_value()}};
                put(w, Analytic::Impact, d, s.outcome, impact_params(*opt_.intervention, period, stratify), payload);
            }
        }
    }

    Eigen::MatrixXd control_matrix(const std::vector<Date>& bins, Calendar period) const {
        const std::size_t k = controls_->begin()->second.size();
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(bins.size()), static_cast<Eigen::Index>(k));
        for (std::size_t r = 0; r < bins.size(); ++r) {
            const int width = bin_width_days(period);
            for (int day = 0; day < width; ++day) {
                const Date date = bins[r] + std::chrono::days{day};
                auto it = controls_->find(date);
                if (it == controls_->end()) {
                    throw Error(Errc::InvalidArgument, "control series has no value for " + format_date(date));
                }
                for (std::size_t c = 0; c < k; ++c) {
                    m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) += it->second[c] / width;
                }
            }
        }
        return m;
    }

    void run_hotspots(repo::Writer& w, const LevelData& d, const ingest::OutcomeSeries& s) {
        {
            const auto f = frame(d, s, {});
            const auto units = units_of(d, f.unit_ids);
            const auto weights = hotspot::default_gstar_weights(units);
            const std::vector<double> values(f.y.data(), f.y.data() + f.y.size());
            const auto gi = hotspot::getis_ord_gstar(values, weights);
            const auto cls = hotspot::classify_hotspots(gi.z, gi.p, opt_.fdr);
            json per_unit = json::object();
            for (std::size_t i = 0; i < f.n(); ++i) {
                per_unit[f.unit_ids[i]] = {{"value", number_or_null(values[i])},
                                           {"z", number_or_null(gi.z[i])},
                                           {"p", number_or_null(gi.p[i])},
                                           {"p_adj", number_or_null(cls.p_adjusted[i])},
                                           {"class", hotspot::to_string(cls.klass[i])}};
            }
            json payload = {{"mode", "snapshot"},
                            {"value", f.per_capita ? "rate_per_100k" : "count"},
                            {"window", window_json(f.window)},
                            {"weights", {{"scheme", "fixed_band"},
                                         {"band_km", std::get<geo::FixedBand>(weights.scheme).d_km},
                                         {"include_self", true}}},
                            {"fdr", opt_.fdr},
                            {"zero_variance", gi.zero_variance},
                            {"units", per_unit}};
            put(w, Analytic::Hotspots, d, s.outcome, hotspot_params("snapshot"), payload);
        }
        {
            const auto cube = hotspot::build_cube(s, opt_.hotspot_bin, unit_ids(d));
            const auto weights = hotspot::default_gstar_weights(d.units);
            const auto eh = hotspot::emerging_hotspot(cube, weights, opt_.fdr);
            json bins = json::array();
            for (auto b : cube.bins) {
                bins.push_back(format_date(b));
            }
            json per_unit = json::object();
            for (std::size_t i = 0; i < cube.n(); ++i) {
                std::vector<json> z;
                for (std::size_t b = 0; b < cube.t(); ++b) {
                    z.push_back(number_or_null(eh.z(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(b))));
                }
                per_unit[cube.unit_ids[i]] = {{"pattern", hotspot::to_string(eh.pattern[i])},
                                              {"mk_z", number_or_null(eh.mk_z[i])},
                                              {"hot_bins", eh.hot_bin_count[i]},
                                              {"z", z}};
            }
            json payload = {{"mode", "emerging"},
                            {"bin", to_string(opt_.hotspot_bin)},
                            {"bins", bins},
                            {"fdr", opt_.fdr},
                            {"weights", {{"scheme", "fixed_band"},
                                         {"band_km", std::get<geo::FixedBand>(weights.scheme).d_km},
                                         {"include_self", true}}},
                            {"units", per_unit}};
            put(w, Analytic::Hotspots, d, s.outcome, hotspot_params("emerging"), payload);
        }
    }

    void run_distribution(repo::Writer& w, const LevelData& d, const ingest::OutcomeSeries& s) {
        const auto range = *s.date_range();
        std::map<std::string, long long> totals;
        for (const auto& [key, count] : s.cells) {
            if (key.stratum == ingest::kAllStratum) {
                totals[key.unit_id] += count;
            }
        }
        const auto keys = d.indicators.keys();
        json per_unit = json::object();
        for (const auto& u : d.units) {
            const auto& id = u.unit_id();
            const long long count = totals.contains(id) ? totals.at(id) : 0;
            json indicators = json::object();
            for (const auto& k : keys) {
                if (auto v = d.indicators.get(id, k)) {
                    indicators[k] = number_or_null(*v);
                }
            }
            json rate = nullptr;
            if (auto pop = d.indicators.get(id, std::string(catalog::kPopulationKey)); pop && *pop > 0.0) {
                rate = number_or_null(1e5 * static_cast<double>(count) / *pop);
            }
            per_unit[id] = {{"count", count},
                            {"rate_per_100k", rate},
                            {"centroid", {u.centroid().lon, u.centroid().lat}},
                            {"indicators", indicators}};
        }
        json payload = {{"level", geo::to_string(d.level)},
                        {"window", window_json(range)},
                        {"indicators", std::vector<std::string>(keys.begin(), keys.end())},
                        {"total", s.total()},
                        {"units", per_unit}};
        put(w, Analytic::Distribution, d, s.outcome, distribution_params(), payload);
    }

    const AnalyzeOptions& opt_;
    catalog::Catalog catalog_;
    std::map<geo::Level, ingest::IndicatorTable> indicators_;
    std::optional<ingest::MobilitySeries> mobility_;
    causal::Whitelist whitelist_;
    std::optional<std::map<Date, std::vector<double>>> controls_;
    std::vector<geo::Level> levels_;
    AnalyzeReport report_;
};

}  // namespace

AnalyzeReport run_analyze(const AnalyzeOptions& options) {
    if (options.analytics.contains(Analytic::Impact) && !options.intervention) {
        throw Error(Errc::InvalidArgument, "impact analysis needs --intervention");
    }
    Analyzer analyzer(options);
    return analyzer.run();
}

}  // namespace upho::pipeline
