#include "upho/canonical.hpp"

#include <openssl/evp.h>

#include <cmath>

#include "upho/error.hpp"

namespace upho {

namespace {

json sanitized(const json& doc) {
    switch (doc.type()) {
        case json::value_t::object: {
            json out = json::object();
            for (auto it = doc.begin(); it != doc.end(); ++it) {
                out[it.key()] = sanitized(it.value());
            }
            return out;
        }
        case json::value_t::array: {
            json out = json::array();
            for (const auto& v : doc) {
                out.push_back(sanitized(v));
            }
            return out;
        }
        case json::value_t::number_float:
            return number_or_null(doc.get<double>());
        default:
            return doc;
    }
}

}  // namespace

std::string canonical_dump(const json& doc) { return sanitized(doc).dump(); }

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error(Errc::InvalidArgument, "SHA-256 computation failed");
    }
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0x0f]);
    }
    return out;
}

std::string params_hash(const json& params) { return sha256_hex(canonical_dump(params)).substr(0, 16); }

json number_or_null(double v) {
    if (!std::isfinite(v)) {
        return nullptr;
    }
    return v;
}

}  // namespace upho
