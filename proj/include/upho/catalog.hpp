#pragma once

#include <array>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "upho/canonical.hpp"

namespace upho::catalog {

/// The six COVID-specific social-determinant domains.
enum class SdohDomain { AccessResources, Exposure, PolicyAdherence, Community, Awareness, BuiltEnvironment };

inline constexpr std::array<SdohDomain, 6> kAllDomains{
    SdohDomain::AccessResources, SdohDomain::Exposure,  SdohDomain::PolicyAdherence,
    SdohDomain::Community,       SdohDomain::Awareness, SdohDomain::BuiltEnvironment};

/// Machine code, e.g. `access_resources`.
std::string_view code(SdohDomain domain);
/// Display heading of the domain.
std::string_view label(SdohDomain domain);
std::optional<SdohDomain> try_parse_domain(std::string_view code);
SdohDomain parse_domain(std::string_view code);

enum class Direction { Risk, Protective, Neutral };

std::string_view to_string(Direction d);
Direction parse_direction(std::string_view text);

struct IndicatorDef {
    std::string key;
    std::string name;
    SdohDomain domain = SdohDomain::AccessResources;
    std::string unit_of_measure;
    Direction direction = Direction::Neutral;
    std::string source;
    /// Further domains the same variable is listed under.
    std::vector<SdohDomain> cross_listed;

    friend bool operator==(const IndicatorDef&, const IndicatorDef&) = default;
};

inline constexpr std::string_view kPopulationKey = "population_total";

/// Key-ordered indicator registry. Value type: `add` mutates this copy only.
class Catalog {
public:
    Catalog() = default;

    /// Throws DuplicateKey.
    void add(IndicatorDef def);

    const IndicatorDef* find(std::string_view key) const;
    bool contains(std::string_view key) const { return find(key) != nullptr; }
    std::size_t size() const noexcept { return defs_.size(); }

    /// All definitions ordered by key.
    std::vector<IndicatorDef> all() const;

    friend bool operator==(const Catalog&, const Catalog&) = default;

private:
    std::map<std::string, IndicatorDef, std::less<>> defs_;
};

Catalog builtin_catalog();

/// Returns `catalog` extended with `def`; throws DuplicateKey.
Catalog register_indicator(Catalog catalog, IndicatorDef def);

/// Key-ordered subset whose canonical domain is in `domains`.
std::vector<IndicatorDef> filter_by_domains(const Catalog& catalog, const std::set<SdohDomain>& domains);

/// Header `indicator_key,name,domain_code,unit_of_measure,direction,source`
/// plus an optional trailing `cross_listed` column (`|`-separated codes).
void write_catalog_csv(std::ostream& out, const Catalog& catalog);
Catalog read_catalog_csv(std::istream& in);

json domains_json();
json to_json(const IndicatorDef& def);
json to_json(const Catalog& catalog);

}  // namespace upho::catalog
