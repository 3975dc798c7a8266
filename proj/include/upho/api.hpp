#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "upho/canonical.hpp"
#include "upho/catalog.hpp"
#include "upho/repo.hpp"

namespace upho::api {

enum class Role { Official, Clinician, Public };
enum class Feature { F1, F2, F3, F4, F5 };

inline constexpr std::array<Role, 3> kAllRoles{Role::Official, Role::Clinician, Role::Public};
inline constexpr std::array<Feature, 5> kAllFeatures{Feature::F1, Feature::F2, Feature::F3, Feature::F4, Feature::F5};

std::string_view to_string(Role r);
std::optional<Role> try_parse_role(std::string_view text);
std::string_view to_string(Feature f);
std::optional<Feature> try_parse_feature(std::string_view text);

struct AuthConfig {
    std::map<std::string, Role> tokens;
    std::map<Role, std::set<Feature>> allowed;

    bool permits(Role role, Feature feature) const;
};

/// Official: all features; Clinician: F2-F5; Public: F4, F5.
std::map<Role, std::set<Feature>> default_gating();

/// `{"tokens": {"<token>": "<role>"}, "roles": {"<role>": ["F1", ...]}}`;
/// `roles` is optional and overrides the default gating per role.
/// Throws ParseError.
AuthConfig read_auth(std::istream& in);
AuthConfig read_auth_file(const std::filesystem::path& path);

struct Request {
    std::string method = "GET";
    std::string path;
    std::map<std::string, std::string> query;
    std::optional<std::string> authorization;  // raw header value
};

struct Response {
    int status = 200;
    std::string body;
    std::string content_type = "application/json";
};

/// Stateless request handler over a read-only repository. Checks run in the
/// order: authentication (401), route (404), role gating (403), parameter
/// validation (400), result lookup (404).
class Service {
public:
    using Clock = std::function<std::string()>;

    Service(repo::Reader reader, catalog::Catalog catalog, AuthConfig auth, Clock clock = {});

    Response handle(const Request& request) const;

    const repo::Reader& reader() const noexcept { return reader_; }

private:
    Response analytics(Feature feature, const Request& request) const;

    repo::Reader reader_;
    catalog::Catalog catalog_;
    AuthConfig auth_;
    Clock clock_;
};

/// `{"generated_at":...,"key":...,"payload":<payload bytes verbatim>}`
std::string envelope(const json& key, std::string_view generated_at, std::string_view payload);

struct ServeOptions {
    std::filesystem::path repo;
    std::string bind = "127.0.0.1:8080";
    std::filesystem::path auth;
    std::optional<std::filesystem::path> app;  // static files mounted at /app
};

/// Runs until SIGINT/SIGTERM. Returns 0 on clean shutdown, 4 when the
/// service cannot start.
int serve(const ServeOptions& options, std::ostream& log);

}  // namespace upho::api
