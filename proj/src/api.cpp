#include "upho/api.hpp"

#include <algorithm>
#include <fstream>

#include "upho/error.hpp"
#include "upho/pipeline.hpp"

namespace upho::api {

std::string_view to_string(Role r) {
    switch (r) {
        case Role::Official: return "official";
        case Role::Clinician: return "clinician";
        case Role::Public: return "public";
    }
    return "";
}

std::optional<Role> try_parse_role(std::string_view text) {
    for (auto r : kAllRoles) {
        if (to_string(r) == text) {
            return r;
        }
    }
    return std::nullopt;
}

std::string_view to_string(Feature f) {
    switch (f) {
        case Feature::F1: return "F1";
        case Feature::F2: return "F2";
        case Feature::F3: return "F3";
        case Feature::F4: return "F4";
        case Feature::F5: return "F5";
    }
    return "";
}

std::optional<Feature> try_parse_feature(std::string_view text) {
    for (auto f : kAllFeatures) {
        if (to_string(f) == text) {
            return f;
        }
    }
    return std::nullopt;
}

bool AuthConfig::permits(Role role, Feature feature) const {
    auto it = allowed.find(role);
    return it != allowed.end() && it->second.contains(feature);
}

std::map<Role, std::set<Feature>> default_gating() {
    return {{Role::Official, {Feature::F1, Feature::F2, Feature::F3, Feature::F4, Feature::F5}},
            {Role::Clinician, {Feature::F2, Feature::F3, Feature::F4, Feature::F5}},
            {Role::Public, {Feature::F4, Feature::F5}}};
}

AuthConfig read_auth(std::istream& in) {
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& ex) {
        throw Error(Errc::ParseError, std::string("auth config: ") + ex.what());
    }
    if (!doc.is_object() || !doc.contains("tokens") || !doc["tokens"].is_object()) {
        throw Error(Errc::ParseError, "auth config: expected a `tokens` object");
    }
    AuthConfig out;
    out.allowed = default_gating();
    for (const auto& [token, role] : doc["tokens"].items()) {
        const auto r = role.is_string() ? try_parse_role(role.get<std::string>()) : std::nullopt;
        if (!r || token.empty()) {
            throw Error(Errc::ParseError, "auth config: token entry '" + token + "' has no valid role");
        }
        out.tokens.emplace(token, *r);
    }
    if (doc.contains("roles")) {
        if (!doc["roles"].is_object()) {
            throw Error(Errc::ParseError, "auth config: `roles` must be an object");
        }
        for (const auto& [name, features] : doc["roles"].items()) {
            const auto r = try_parse_role(name);
            if (!r || !features.is_array()) {
                throw Error(Errc::ParseError, "auth config: bad role override '" + name + "'");
            }
            std::set<Feature> set;
            for (const auto& f : features) {
                const auto feature = f.is_string() ? try_parse_feature(f.get<std::string>()) : std::nullopt;
                if (!feature) {
                    throw Error(Errc::ParseError, "auth config: unknown feature for role '" + name + "'");
                }
                set.insert(*feature);
            }
            out.allowed[*r] = std::move(set);
        }
    }
    return out;
}

AuthConfig read_auth_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(Errc::NotFound, "cannot open auth file " + path.string());
    }
    return read_auth(in);
}

std::string envelope(const json& key, std::string_view generated_at, std::string_view payload) {
    std::string out = R"({"generated_at":)";
    out += json(std::string(generated_at)).dump();
    out += R"(,"key":)";
    out += canonical_dump(key);
    out += R"(,"payload":)";
    out += payload;
    out += '}';
    return out;
}

namespace {

Response error(int status, std::string_view code, const std::string& message) {
    return {status, canonical_dump({{"code", code}, {"message", message}}), "application/json"};
}

Response ok(json doc) { return {200, canonical_dump(doc), "application/json"}; }

std::vector<std::string> split_list(const std::string& text) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        const auto comma = text.find(',', start);
        const auto end = comma == std::string::npos ? text.size() : comma;
        if (end > start) {
            out.push_back(text.substr(start, end - start));
        }
        if (comma == std::string::npos) {
            break;
        }
        start = comma + 1;
    }
    return out;
}

struct BadRequest {
    std::string code;
    std::string message;
};

std::string param(const Request& r, const std::string& name, std::optional<std::string> fallback = std::nullopt) {
    auto it = r.query.find(name);
    if (it != r.query.end()) {
        return it->second;
    }
    if (fallback) {
        return *fallback;
    }
    throw BadRequest{"missing_param", "query parameter `" + name + "` is required"};
}

template <typename T>
T require(std::optional<T> value, const std::string& name, const std::string& raw, std::string_view allowed) {
    if (!value) {
        throw BadRequest{"invalid_param",
                         "invalid " + name + " '" + raw + "'" + (allowed.empty() ? "" : "; expected " + std::string(allowed))};
    }
    return *value;
}

std::optional<Feature> feature_for(std::string_view path) {
    if (path == "/analytics/causal-structure") return Feature::F1;
    if (path == "/analytics/regression") return Feature::F2;
    if (path == "/analytics/impact") return Feature::F3;
    if (path == "/analytics/hotspots") return Feature::F4;
    if (path == "/analytics/distribution") return Feature::F5;
    return std::nullopt;
}

repo::Analytic analytic_for(Feature f) {
    switch (f) {
        case Feature::F1: return repo::Analytic::CausalStructure;
        case Feature::F2: return repo::Analytic::Regression;
        case Feature::F3: return repo::Analytic::Impact;
        case Feature::F4: return repo::Analytic::Hotspots;
        case Feature::F5: return repo::Analytic::Distribution;
    }
    return repo::Analytic::Distribution;
}

json levels_json() {
    json out = json::array();
    for (auto l : geo::kAllLevels) {
        out.push_back(geo::to_string(l));
    }
    return out;
}

json outcomes_json() {
    json out = json::array();
    for (auto o : ingest::kAllOutcomes) {
        out.push_back(ingest::to_string(o));
    }
    return out;
}

}  // namespace

Service::Service(repo::Reader reader, catalog::Catalog catalog, AuthConfig auth, Clock clock)
    : reader_(std::move(reader)), catalog_(std::move(catalog)), auth_(std::move(auth)), clock_(std::move(clock)) {
    if (!clock_) {
        clock_ = repo::utc_timestamp;
    }
}

Response Service::handle(const Request& request) const {
    std::optional<Role> role;
    if (request.authorization && request.authorization->starts_with("Bearer ")) {
        auto it = auth_.tokens.find(request.authorization->substr(7));
        if (it != auth_.tokens.end()) {
            role = it->second;
        }
    }
    if (!role) {
        return error(401, "unauthorized", "missing or unknown bearer token");
    }
    if (request.method != "GET") {
        return error(404, "not_found", "no route for " + request.method + " " + request.path);
    }

    const std::string& path = request.path;
    if (path == "/meta/catalog") {
        return ok(catalog::to_json(catalog_));
    }
    if (path == "/meta/levels") {
        return ok(levels_json());
    }
    if (path == "/meta/outcomes") {
        return ok(outcomes_json());
    }
    if (path.starts_with("/geo/") && path.ends_with(".geojson")) {
        const std::string name = path.substr(5, path.size() - 5 - 8);
        const auto level = geo::try_parse_level(name);
        if (!level) {
            return error(400, "invalid_param", "invalid level '" + name + "'; expected postal_code, tract or block_group");
        }
        auto bytes = reader_.read_geo(*level);
        if (!bytes) {
            return error(404, "not_computed", "no geometry ingested for level " + name + "; run `upho ingest`");
        }
        return {200, std::move(*bytes), "application/json"};
    }
    const auto feature = feature_for(path);
    if (!feature) {
        return error(404, "not_found", "no route for " + path);
    }
    if (!auth_.permits(*role, *feature)) {
        return error(403, "forbidden",
                     "role " + std::string(to_string(*role)) + " may not access " + std::string(to_string(*feature)));
    }
    try {
        return analytics(*feature, request);
    } catch (const BadRequest& bad) {
        return error(400, bad.code, bad.message);
    }
}

Response Service::analytics(Feature feature, const Request& request) const {
    const std::string disease = param(request, "disease", "covid19");
    if (disease.empty() || disease.find_first_of("/\\.") != std::string::npos) {
        throw BadRequest{"invalid_param", "invalid disease '" + disease + "'"};
    }
    const std::string outcome_raw = param(request, "outcome");
    const auto outcome = require(ingest::try_parse_outcome(outcome_raw), "outcome", outcome_raw,
                                 "tests, cases, hospitalizations or deaths");
    const std::string level_raw = param(request, "level");
    const auto level = require(geo::try_parse_level(level_raw), "level", level_raw, "postal_code, tract or block_group");

    json params;
    json extra = json::object();
    switch (feature) {
        case Feature::F1: {
            std::set<catalog::SdohDomain> domains;
            const auto raw = param(request, "domains", "");
            for (const auto& code : split_list(raw)) {
                domains.insert(require(catalog::try_parse_domain(code), "domain", code, ""));
            }
            if (domains.empty()) {
                domains = {catalog::SdohDomain::AccessResources, catalog::SdohDomain::Exposure,
                           catalog::SdohDomain::PolicyAdherence, catalog::SdohDomain::Community,
                           catalog::SdohDomain::Awareness,       catalog::SdohDomain::BuiltEnvironment};
            }
            params = pipeline::causal_params(domains);
            break;
        }
        case Feature::F2: {
            const auto model = param(request, "model", "ols");
            if (model != "ols" && model != "gwr") {
                throw BadRequest{"invalid_param", "invalid model '" + model + "'; expected ols or gwr"};
            }
            params = pipeline::regression_params(model);
            break;
        }
        case Feature::F3: {
            const auto raw = param(request, "intervention");
            const auto date = require(parse_date(raw), "intervention", raw, "YYYY-MM-DD");
            const auto period_raw = param(request, "period", "daily");
            const auto period = require(try_parse_calendar(period_raw), "period", period_raw, "daily or weekly");
            const auto stratify = param(request, "stratify", "none");
            if (std::find(pipeline::kStratifyOptions.begin(), pipeline::kStratifyOptions.end(), stratify) ==
                pipeline::kStratifyOptions.end()) {
                throw BadRequest{"invalid_param", "invalid stratify '" + stratify + "'; expected none, age, sex or race"};
            }
            params = pipeline::impact_params(date, period, stratify);
            break;
        }
        case Feature::F4: {
            const auto mode = param(request, "mode", "snapshot");
            if (mode != "snapshot" && mode != "emerging") {
                throw BadRequest{"invalid_param", "invalid mode '" + mode + "'; expected snapshot or emerging"};
            }
            params = pipeline::hotspot_params(mode);
            break;
        }
        case Feature::F5: {
            json selected = json::array();
            for (const auto& key : split_list(param(request, "indicators", ""))) {
                if (!catalog_.contains(key)) {
                    throw BadRequest{"invalid_param", "unknown indicator '" + key + "'"};
                }
                selected.push_back(key);
            }
            extra["indicators"] = selected;
            params = pipeline::distribution_params();
            break;
        }
    }

    const auto key = repo::make_key(disease, outcome, analytic_for(feature), level, params);
    std::string bytes;
    try {
        bytes = reader_.read_result(key);
    } catch (const Error& e) {
        if (e.code() == Errc::DigestMismatch) {
            return error(404, "digest_mismatch", "stored result failed verification: " + key.relative_path());
        }
        return error(404, "not_computed",
                     "no precomputed result for " + key.relative_path() +
                         "; run `upho analyze` for this disease, outcome and level");
    }
    json key_doc = key.to_json();
    key_doc["params"] = params;
    for (const auto& [k, v] : extra.items()) {
        key_doc[k] = v;
    }
    return {200, envelope(key_doc, clock_(), bytes), "application/json"};
}

}  // namespace upho::api
