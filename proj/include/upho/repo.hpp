#pragma once

#include <compare>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "upho/canonical.hpp"
#include "upho/geo.hpp"
#include "upho/ingestion.hpp"

namespace upho::repo {

namespace fs = std::filesystem;

enum class Analytic { CausalStructure, Regression, Impact, Hotspots, Distribution };

inline constexpr std::array<Analytic, 5> kAllAnalytics{Analytic::CausalStructure, Analytic::Regression,
                                                       Analytic::Impact, Analytic::Hotspots, Analytic::Distribution};

/// Directory names: causal_structure, regression, impact, hotspots, distribution.
std::string_view to_string(Analytic a);
std::optional<Analytic> try_parse_analytic(std::string_view text);

struct ResultKey {
    std::string disease;
    ingest::Outcome outcome = ingest::Outcome::Tests;
    Analytic analytic = Analytic::Regression;
    geo::Level level = geo::Level::Tract;
    std::string params_hash;

    /// `results/<disease>/<outcome>/<analytic>/<level>/<params_hash>.json`
    std::string relative_path() const;
    json to_json() const;

    auto operator<=>(const ResultKey&) const = default;
};

ResultKey make_key(std::string disease, ingest::Outcome outcome, Analytic analytic, geo::Level level,
                   const json& params);

/// Inverse of relative_path; empty when the path does not follow the layout.
std::optional<ResultKey> parse_relative_path(std::string_view path);

struct ManifestEntry {
    ResultKey key;
    std::string path;
    std::size_t bytes = 0;
    std::string digest;

    friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

inline constexpr int kSchemaVersion = 1;
inline constexpr std::string_view kEpoch = "1970-01-01T00:00:00Z";

struct Manifest {
    int schema_version = kSchemaVersion;
    std::string created{kEpoch};
    std::vector<ManifestEntry> entries;  // ordered by path

    const ManifestEntry* find(const ResultKey& key) const;
    json to_json() const;
    static Manifest from_json(const json& doc);

    friend bool operator==(const Manifest&, const Manifest&) = default;
};

struct KeyFilter {
    std::optional<std::string> disease;
    std::optional<ingest::Outcome> outcome;
    std::optional<Analytic> analytic;
    std::optional<geo::Level> level;
    std::optional<std::string> params_hash;

    bool matches(const ResultKey& key) const;
};

/// Writes `bytes` to a sibling temporary file and renames it over `path`.
/// Throws WriteFailed naming the path.
void atomic_write(const fs::path& path, std::string_view bytes);

std::string read_file(const fs::path& path);

/// Current UTC time as YYYY-MM-DDTHH:MM:SSZ.
std::string utc_timestamp();

/// Exclusive writer handle on a repository. Creating one takes the `.lock`
/// file (throws RepoLocked when present); destruction releases it.
class Writer {
public:
    /// Initializes the layout and an empty manifest when absent.
    /// `reproducible` pins the manifest timestamp to the epoch.
    explicit Writer(fs::path root, bool reproducible = false);
    ~Writer();
    Writer(const Writer&) = delete;
    Writer& operator=(const Writer&) = delete;

    /// Canonical, newline-terminated payload; manifest updated atomically.
    fs::path write_result(const ResultKey& key, const json& payload);
    fs::path write_geo(geo::Level level, std::string_view geojson);
    /// Any other file under the root (ingest staging tables, reports).
    fs::path write_file(const fs::path& relative, std::string_view bytes);

    const Manifest& manifest() const noexcept { return manifest_; }
    const fs::path& root() const noexcept { return root_; }

private:
    void save_manifest();

    fs::path root_;
    fs::path lock_path_;
    bool reproducible_;
    Manifest manifest_;
};

/// Read-only view loaded once from manifest.json.
class Reader {
public:
    /// Throws NotFound when the directory has no manifest.
    explicit Reader(fs::path root);

    /// Stored bytes after digest verification. Throws NotFound or DigestMismatch.
    std::string read_result(const ResultKey& key) const;
    std::vector<ResultKey> list_results(const KeyFilter& filter = {}) const;
    std::optional<std::string> read_geo(geo::Level level) const;

    const Manifest& manifest() const noexcept { return manifest_; }
    const fs::path& root() const noexcept { return root_; }

private:
    fs::path root_;
    Manifest manifest_;
};

fs::path manifest_path(const fs::path& root);
fs::path geo_path(const fs::path& root, geo::Level level);

/// Manifest entries rebuilt from the files under results/.
std::vector<ManifestEntry> rescan(const fs::path& root);

}  // namespace upho::repo
