#include "upho/repo.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "upho/error.hpp"

namespace upho::repo {

std::string_view to_string(Analytic a) {
    switch (a) {
        case Analytic::CausalStructure: return "causal_structure";
        case Analytic::Regression: return "regression";
        case Analytic::Impact: return "impact";
        case Analytic::Hotspots: return "hotspots";
        case Analytic::Distribution: return "distribution";
    }
    return "";
}

std::optional<Analytic> try_parse_analytic(std::string_view text) {
    for (auto a : kAllAnalytics) {
        if (to_string(a) == text) {
            return a;
        }
    }
    return std::nullopt;
}

std::string ResultKey::relative_path() const {
    std::string out = "results/";
    out += disease;
    out += '/';
    out += ingest::to_string(outcome);
    out += '/';
    out += repo::to_string(analytic);
    out += '/';
    out += geo::to_string(level);
    out += '/';
    out += params_hash;
    out += ".json";
    return out;
}

json ResultKey::to_json() const {
    return {{"disease", disease},
            {"outcome", ingest::to_string(outcome)},
            {"analytic", repo::to_string(analytic)},
            {"level", geo::to_string(level)},
            {"params_hash", params_hash}};
}

ResultKey make_key(std::string disease, ingest::Outcome outcome, Analytic analytic, geo::Level level,
                   const json& params) {
    if (disease.empty() || disease.find_first_of("/\\.") != std::string::npos) {
        throw Error(Errc::InvalidArgument, "disease name '" + disease + "' is not a valid path component");
    }
    return {std::move(disease), outcome, analytic, level, params_hash(params)};
}

std::optional<ResultKey> parse_relative_path(std::string_view path) {
    std::vector<std::string_view> parts;
    while (!path.empty()) {
        const auto slash = path.find('/');
        parts.push_back(path.substr(0, slash));
        path = slash == std::string_view::npos ? std::string_view{} : path.substr(slash + 1);
    }
    if (parts.size() != 6 || parts[0] != "results" || parts[1].empty()) {
        return std::nullopt;
    }
    const auto outcome = ingest::try_parse_outcome(parts[2]);
    const auto analytic = try_parse_analytic(parts[3]);
    const auto level = geo::try_parse_level(parts[4]);
    std::string_view file = parts[5];
    if (!outcome || !analytic || !level || file.size() != 21 || !file.ends_with(".json")) {
        return std::nullopt;
    }
    const auto hash = file.substr(0, 16);
    if (!std::all_of(hash.begin(), hash.end(), [](char c) { return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f'); })) {
        return std::nullopt;
    }
    return ResultKey{std::string(parts[1]), *outcome, *analytic, *level, std::string(hash)};
}

const ManifestEntry* Manifest::find(const ResultKey& key) const {
    auto it = std::find_if(entries.begin(), entries.end(), [&](const ManifestEntry& e) { return e.key == key; });
    return it == entries.end() ? nullptr : &*it;
}

json Manifest::to_json() const {
    json list = json::array();
    for (const auto& e : entries) {
        json item = e.key.to_json();
        item["path"] = e.path;
        item["bytes"] = e.bytes;
        item["digest"] = e.digest;
        list.push_back(std::move(item));
    }
    return {{"schema_version", schema_version}, {"created", created}, {"entries", std::move(list)}};
}

Manifest Manifest::from_json(const json& doc) {
    try {
        Manifest m;
        m.schema_version = doc.at("schema_version").get<int>();
        m.created = doc.at("created").get<std::string>();
        for (const auto& item : doc.at("entries")) {
            ManifestEntry e;
            e.path = item.at("path").get<std::string>();
            auto key = parse_relative_path(e.path);
            if (!key) {
                throw Error(Errc::ParseError, "manifest entry has a malformed path: " + e.path);
            }
            e.key = *key;
            e.bytes = item.at("bytes").get<std::size_t>();
            e.digest = item.at("digest").get<std::string>();
            m.entries.push_back(std::move(e));
        }
        return m;
    } catch (const json::exception& ex) {
        throw Error(Errc::ParseError, std::string("malformed manifest: ") + ex.what());
    }
}

bool KeyFilter::matches(const ResultKey& key) const {
    return (!disease || *disease == key.disease) && (!outcome || *outcome == key.outcome) &&
           (!analytic || *analytic == key.analytic) && (!level || *level == key.level) &&
           (!params_hash || *params_hash == key.params_hash);
}

void atomic_write(const fs::path& path, std::string_view bytes) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
        throw Error(Errc::WriteFailed, path.string() + ": " + ec.message());
    }
    const fs::path tmp = path.string() + ".tmp" + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            fs::remove(tmp, ec);
            throw Error(Errc::WriteFailed, path.string() + ": could not write temporary file");
        }
    }
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(Errc::WriteFailed, path.string() + ": " + ec.message());
    }
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::NotFound, "cannot open " + path.string());
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string utc_timestamp() {
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    const auto day = std::chrono::floor<std::chrono::days>(now);
    const std::chrono::hh_mm_ss hms(now - day);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%sT%02d:%02d:%02dZ", format_date(day).c_str(), static_cast<int>(hms.hours().count()),
                  static_cast<int>(hms.minutes().count()), static_cast<int>(hms.seconds().count()));
    return buf;
}

fs::path manifest_path(const fs::path& root) { return root / "manifest.json"; }

fs::path geo_path(const fs::path& root, geo::Level level) {
    return root / "geo" / (std::string(geo::to_string(level)) + ".geojson");
}

// ---------------------------------------------------------------------------

Writer::Writer(fs::path root, bool reproducible) : root_(std::move(root)), reproducible_(reproducible) {
    std::error_code ec;
    fs::create_directories(root_, ec);
    if (ec) {
        throw Error(Errc::WriteFailed, root_.string() + ": " + ec.message());
    }
    lock_path_ = root_ / ".lock";
    const int fd = ::open(lock_path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd < 0) {
        throw Error(Errc::RepoLocked, "repository " + root_.string() + " is locked by another writer (" +
                                          lock_path_.string() + ")");
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto written = ::write(fd, pid.data(), pid.size());
    ::close(fd);

    try {
        if (fs::exists(manifest_path(root_))) {
            manifest_ = Manifest::from_json(json::parse(read_file(manifest_path(root_))));
        } else {
            manifest_.created = std::string(kEpoch);
        }
        if (reproducible_) {
            manifest_.created = std::string(kEpoch);
        } else if (manifest_.created == kEpoch) {
            manifest_.created = utc_timestamp();
        }
        save_manifest();
    } catch (...) {
        fs::remove(lock_path_, ec);
        throw;
    }
}

Writer::~Writer() {
    std::error_code ec;
    fs::remove(lock_path_, ec);
}

void Writer::save_manifest() { atomic_write(manifest_path(root_), canonical_dump(manifest_.to_json()) + "\n"); }

fs::path Writer::write_result(const ResultKey& key, const json& payload) {
    const std::string bytes = canonical_dump(payload) + "\n";
    ManifestEntry entry{key, key.relative_path(), bytes.size(), sha256_hex(bytes)};
    const fs::path path = root_ / entry.path;
    atomic_write(path, bytes);
    auto it = std::lower_bound(manifest_.entries.begin(), manifest_.entries.end(), entry.path,
                               [](const ManifestEntry& e, const std::string& p) { return e.path < p; });
    if (it != manifest_.entries.end() && it->path == entry.path) {
        *it = std::move(entry);
    } else {
        manifest_.entries.insert(it, std::move(entry));
    }
    save_manifest();
    return path;
}

fs::path Writer::write_geo(geo::Level level, std::string_view geojson) {
    const fs::path path = geo_path(root_, level);
    atomic_write(path, geojson);
    return path;
}

fs::path Writer::write_file(const fs::path& relative, std::string_view bytes) {
    if (relative.is_absolute() || relative.empty() || *relative.begin() == "results" ||
        relative == "manifest.json") {
        throw Error(Errc::InvalidArgument, "write_file cannot target " + relative.string());
    }
    const fs::path path = root_ / relative;
    atomic_write(path, bytes);
    return path;
}

// ---------------------------------------------------------------------------

Reader::Reader(fs::path root) : root_(std::move(root)) {
    const auto path = manifest_path(root_);
    if (!fs::exists(path)) {
        throw Error(Errc::NotFound, "no repository manifest at " + path.string());
    }
    try {
        manifest_ = Manifest::from_json(json::parse(read_file(path)));
    } catch (const json::exception& ex) {
        throw Error(Errc::ParseError, path.string() + ": " + ex.what());
    }
}

std::string Reader::read_result(const ResultKey& key) const {
    const auto* entry = manifest_.find(key);
    if (entry == nullptr) {
        throw Error(Errc::NotFound, "no result stored for " + key.relative_path());
    }
    std::string bytes;
    try {
        bytes = read_file(root_ / entry->path);
    } catch (const Error&) {
        throw Error(Errc::DigestMismatch, entry->path + " is listed in the manifest but missing");
    }
    if (bytes.size() != entry->bytes || sha256_hex(bytes) != entry->digest) {
        throw Error(Errc::DigestMismatch, entry->path + " does not match its manifest digest");
    }
    return bytes;
}

std::vector<ResultKey> Reader::list_results(const KeyFilter& filter) const {
    std::vector<ResultKey> out;
    for (const auto& e : manifest_.entries) {
        if (filter.matches(e.key)) {
            out.push_back(e.key);
        }
    }
    return out;
}

std::optional<std::string> Reader::read_geo(geo::Level level) const {
    const auto path = geo_path(root_, level);
    if (!fs::exists(path)) {
        return std::nullopt;
    }
    return read_file(path);
}

std::vector<ManifestEntry> rescan(const fs::path& root) {
    std::vector<ManifestEntry> out;
    const fs::path results = root / "results";
    if (!fs::exists(results)) {
        return out;
    }
    for (const auto& item : fs::recursive_directory_iterator(results)) {
        if (!item.is_regular_file()) {
            continue;
        }
        const std::string rel = fs::relative(item.path(), root).generic_string();
        auto key = parse_relative_path(rel);
        if (!key) {
            continue;
        }
        const std::string bytes = read_file(item.path());
        out.push_back({*key, rel, bytes.size(), sha256_hex(bytes)});
    }
    std::sort(out.begin(), out.end(), [](const ManifestEntry& a, const ManifestEntry& b) { return a.path < b.path; });
    return out;
}

}  // namespace upho::repo
