#include "upho/catalog.hpp"

#include <algorithm>

#include "upho/csv.hpp"
#include "upho/error.hpp"

namespace upho::catalog {

namespace {

const std::vector<std::string> kCatalogHeader{"indicator_key", "name",      "domain_code",
                                              "unit_of_measure", "direction", "source"};

using D = SdohDomain;
using Dir = Direction;

IndicatorDef def(std::string key, std::string name, D domain, std::string unit, Dir dir, std::string source,
                 std::vector<D> cross = {}) {
    return {std::move(key), std::move(name), domain, std::move(unit), dir, std::move(source), std::move(cross)};
}

}  // namespace

std::string_view code(SdohDomain domain) {
    switch (domain) {
        case D::AccessResources: return "access_resources";
        case D::Exposure: return "exposure";
        case D::PolicyAdherence: return "policy_adherence";
        case D::Community: return "community";
        case D::Awareness: return "awareness";
        case D::BuiltEnvironment: return "built_environment";
    }
    return "";
}

std::string_view label(SdohDomain domain) {
    switch (domain) {
        case D::AccessResources: return "SDoH that affect access to resources";
        case D::Exposure: return "SDoH that increase disease exposure";
        case D::PolicyAdherence: return "SDoH that affect adherence to laws and policies";
        case D::Community: return "SDoH that are community characteristics";
        case D::Awareness:
            return "SDoH that enable increasing awareness, knowledge dissemination, and health education";
        case D::BuiltEnvironment:
            return "SDoH specific to neighborhood and built environment that can impact COVID-19 associated "
                   "co-morbidities";
    }
    return "";
}

std::optional<SdohDomain> try_parse_domain(std::string_view text) {
    for (auto d : kAllDomains) {
        if (code(d) == text) {
            return d;
        }
    }
    return std::nullopt;
}

SdohDomain parse_domain(std::string_view text) {
    if (auto d = try_parse_domain(text)) {
        return *d;
    }
    throw Error(Errc::UnknownDomain, "unknown domain code '" + std::string(text) + "'");
}

std::string_view to_string(Direction d) {
    switch (d) {
        case Dir::Risk: return "risk";
        case Dir::Protective: return "protective";
        case Dir::Neutral: return "neutral";
    }
    return "";
}

Direction parse_direction(std::string_view text) {
    if (text == "risk") return Dir::Risk;
    if (text == "protective") return Dir::Protective;
    if (text == "neutral") return Dir::Neutral;
    throw Error(Errc::ParseError, "direction must be risk, protective or neutral; got '" + std::string(text) + "'");
}

void Catalog::add(IndicatorDef def) {
    if (def.key.empty()) {
        throw Error(Errc::InvalidArgument, "indicator key must be non-empty");
    }
    if (defs_.contains(def.key)) {
        throw Error(Errc::DuplicateKey, "indicator '" + def.key + "' already registered");
    }
    auto key = def.key;
    defs_.emplace(std::move(key), std::move(def));
}

const IndicatorDef* Catalog::find(std::string_view key) const {
    auto it = defs_.find(key);
    return it == defs_.end() ? nullptr : &it->second;
}

std::vector<IndicatorDef> Catalog::all() const {
    std::vector<IndicatorDef> out;
    out.reserve(defs_.size());
    for (const auto& [_, d] : defs_) {
        out.push_back(d);
    }
    return out;
}

Catalog builtin_catalog() {
    const std::string acs = "ACS 2018 5-year";
    const std::string policymap = "PolicyMap";
    const std::string usda = "USDA";
    const std::string local = "local open data";

    Catalog c;
    // Access to resources
    c.add(def("dist_health_facility", "Distance (miles/hour) to the closest health care facility", D::AccessResources,
              "km", Dir::Risk, policymap));
    c.add(def("transportation_burden_index", "Transportation burden index", D::AccessResources, "index", Dir::Risk,
              policymap));
    c.add(def("dist_food_market", "Distance to the nearest food market", D::AccessResources, "km", Dir::Risk, usda,
              {D::BuiltEnvironment}));
    c.add(def("pct_no_vehicle", "Proportion of people without access to a vehicle", D::AccessResources, "percent",
              Dir::Risk, acs, {D::Exposure}));

    // Disease exposure
    c.add(def("pct_public_transit", "Proportion of people relying on public transportation", D::Exposure, "percent",
              Dir::Risk, acs));
    c.add(def("pct_carpool", "Proportion of people relying on carpooling", D::Exposure, "percent", Dir::Risk, acs));
    c.add(def("pct_dependents_under_18", "Dependents under 18 years of age", D::Exposure, "percent", Dir::Risk, acs));
    c.add(def("pct_elderly_over_65", "Elderly over 65 years of age", D::Exposure, "percent", Dir::Risk, acs));
    c.add(def("pct_single_parent_households", "Proportion of single-parent households", D::Exposure, "percent",
              Dir::Risk, acs, {D::PolicyAdherence}));
    c.add(def("pct_households_with_dependents", "Households with dependents (children and elderly)", D::Exposure,
              "percent", Dir::Risk, acs));
    c.add(def("age_group_time_use", "How the different age groups spend their time", D::Exposure, "index",
              Dir::Neutral, local));
    c.add(def("pct_health_care_workers", "Proportion of health care workers", D::Exposure, "percent", Dir::Risk, acs,
              {D::PolicyAdherence}));
    c.add(def("pct_frontline_workers", "Proportion of frontline workers", D::Exposure, "percent", Dir::Risk, acs,
              {D::PolicyAdherence}));
    c.add(def("pct_single_earner_households", "Proportion of single vs multiple household earners", D::Exposure,
              "percent", Dir::Risk, acs));

    // Adherence to laws and policies
    c.add(def("housing_unit_count", "Count of housing units", D::PolicyAdherence, "count", Dir::Risk, acs));
    c.add(def("avg_household_size", "Average household size", D::PolicyAdherence, "persons", Dir::Risk, acs));
    c.add(def("pct_multifamily_residences", "Multifamily vs single-family residences", D::PolicyAdherence, "percent",
              Dir::Risk, acs));
    c.add(def(std::string(kPopulationKey), "Total population", D::PolicyAdherence, "persons", Dir::Neutral, acs));

    // Community characteristics
    c.add(def("pct_ethnic_minorities", "Proportion of ethnic minorities", D::Community, "percent", Dir::Risk, acs));
    c.add(def("pct_racial_minorities", "Proportion of racial minorities", D::Community, "percent", Dir::Risk, acs));
    c.add(def("pct_first_gen_immigrants", "Proportion of first-generation immigrants", D::Community, "percent",
              Dir::Risk, acs, {D::Awareness}));
    c.add(def("social_deprivation_index", "Social deprivation index", D::Community, "index", Dir::Risk, policymap,
              {D::BuiltEnvironment}));
    c.add(def("blight_rating", "Blight rating", D::Community, "index", Dir::Risk, local, {D::BuiltEnvironment}));
    c.add(def("pct_poverty", "Proportion of people under the federal poverty line", D::Community, "percent",
              Dir::Risk, acs));
    c.add(def("pct_unemployment", "Proportion of unemployment", D::Community, "percent", Dir::Risk, acs));
    c.add(def("pct_incarcerated", "Proportion of current or previously incarcerated people", D::Community, "percent",
              Dir::Risk, policymap));
    c.add(def("crime_rate", "Crime rates", D::Community, "per 1,000 residents", Dir::Risk, local,
              {D::BuiltEnvironment}));
    c.add(def("dist_parks_community_centers", "Distance to parks and community centers", D::Community, "km",
              Dir::Risk, local, {D::BuiltEnvironment}));
    c.add(def("dist_police_fire_stations", "Distance to police or fire stations", D::Community, "km", Dir::Risk,
              local));
    c.add(def("pct_green_space", "Proportion of green space coverage", D::Community, "percent", Dir::Protective,
              local, {D::BuiltEnvironment}));
    c.add(def("air_quality_index", "Air quality index", D::Community, "index", Dir::Risk, policymap));

    // Awareness, knowledge dissemination, health education
    c.add(def("pct_internet_access", "Proportion of people who have access to Wi-Fi or the internet", D::Awareness,
              "percent", Dir::Protective, acs));
    c.add(def("pct_smartphone_users", "Proportion of cellphone or smartphone users", D::Awareness, "percent",
              Dir::Protective, acs));
    c.add(def("pct_literate", "Proportion of literate people", D::Awareness, "percent", Dir::Protective, policymap));
    c.add(def("pct_hs_diploma", "Proportion of people with a high school diploma", D::Awareness, "percent",
              Dir::Protective, acs));
    c.add(def("pct_two_year_college", "Proportion of people with a 2-year college diploma", D::Awareness, "percent",
              Dir::Protective, acs));
    c.add(def("pct_baccalaureate", "Proportion of people with a baccalaureate diploma", D::Awareness, "percent",
              Dir::Protective, acs));

    // Neighborhood and built environment
    c.add(def("parcel_building_characteristics", "Parcel or building characteristics", D::BuiltEnvironment, "index",
              Dir::Neutral, local));
    c.add(def("pct_backyards", "Proportion of residential addresses with backyards", D::BuiltEnvironment, "percent",
              Dir::Protective, local));
    c.add(def("pct_smokers", "Proportion of smokers", D::BuiltEnvironment, "percent", Dir::Risk, policymap));
    return c;
}

Catalog register_indicator(Catalog catalog, IndicatorDef def) {
    catalog.add(std::move(def));
    return catalog;
}

std::vector<IndicatorDef> filter_by_domains(const Catalog& catalog, const std::set<SdohDomain>& domains) {
    std::vector<IndicatorDef> out;
    for (auto& d : catalog.all()) {
        if (domains.contains(d.domain)) {
            out.push_back(std::move(d));
        }
    }
    return out;
}

void write_catalog_csv(std::ostream& out, const Catalog& catalog) {
    auto header = kCatalogHeader;
    header.push_back("cross_listed");
    csv::write_row(out, header);
    for (const auto& d : catalog.all()) {
        std::string cross;
        for (std::size_t i = 0; i < d.cross_listed.size(); ++i) {
            if (i > 0) {
                cross.push_back('|');
            }
            cross += code(d.cross_listed[i]);
        }
        csv::write_row(out, {d.key, d.name, std::string(code(d.domain)), d.unit_of_measure,
                             std::string(to_string(d.direction)), d.source, cross});
    }
}

Catalog read_catalog_csv(std::istream& in) {
    csv::Reader reader{in};
    auto header = reader.next();
    if (!header) {
        throw Error(Errc::EmptyFile, "catalog CSV is empty");
    }
    const bool has_cross = header->fields.size() == kCatalogHeader.size() + 1 &&
                           header->fields.back() == "cross_listed";
    if (!std::equal(kCatalogHeader.begin(), kCatalogHeader.end(), header->fields.begin(),
                    header->fields.begin() + std::min(header->fields.size(), kCatalogHeader.size())) ||
        header->fields.size() < kCatalogHeader.size() || (header->fields.size() > kCatalogHeader.size() && !has_cross)) {
        throw Error(Errc::SchemaMismatch,
                    "catalog header must be '" + csv::join_header(kCatalogHeader) + "'");
    }
    Catalog c;
    while (auto row = reader.next()) {
        if (row->fields.size() == 1 && row->fields[0].empty()) {
            continue;
        }
        if (row->fields.size() != header->fields.size()) {
            throw Error(Errc::ParseError, "catalog line " + std::to_string(row->line) + ": wrong field count");
        }
        const auto& f = row->fields;
        IndicatorDef d;
        d.key = f[0];
        d.name = f[1];
        try {
            d.domain = parse_domain(f[2]);
            d.direction = parse_direction(f[4]);
            if (has_cross && !f[6].empty()) {
                std::size_t start = 0;
                while (start <= f[6].size()) {
                    auto end = f[6].find('|', start);
                    if (end == std::string::npos) {
                        end = f[6].size();
                    }
                    d.cross_listed.push_back(parse_domain(std::string_view(f[6]).substr(start, end - start)));
                    start = end + 1;
                }
            }
        } catch (const Error& e) {
            throw Error(e.code(), "catalog line " + std::to_string(row->line) + ": " + e.what());
        }
        d.unit_of_measure = f[3];
        d.source = f[5];
        c.add(std::move(d));
    }
    return c;
}

json domains_json() {
    json out = json::array();
    for (auto d : kAllDomains) {
        out.push_back({{"code", std::string(code(d))}, {"label", std::string(label(d))}});
    }
    return out;
}

json to_json(const IndicatorDef& d) {
    json cross = json::array();
    for (auto c : d.cross_listed) {
        cross.push_back(std::string(code(c)));
    }
    return {{"key", d.key},
            {"name", d.name},
            {"domain", std::string(code(d.domain))},
            {"unit_of_measure", d.unit_of_measure},
            {"direction", std::string(to_string(d.direction))},
            {"source", d.source},
            {"cross_listed", cross}};
}

json to_json(const Catalog& catalog) {
    json indicators = json::array();
    for (const auto& d : catalog.all()) {
        indicators.push_back(to_json(d));
    }
    return {{"domains", domains_json()}, {"indicators", indicators}};
}

}  // namespace upho::catalog
