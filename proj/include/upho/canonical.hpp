#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

namespace upho {

using json = nlohmann::json;

/// Compact serialization with lexicographically sorted object keys and
/// shortest round-trip number formatting. Non-finite numbers become null.
std::string canonical_dump(const json& doc);

/// SHA-256 of `bytes` as 64 lowercase hex characters.
std::string sha256_hex(std::string_view bytes);

/// First 16 hex characters of the SHA-256 of the canonical parameter document.
std::string params_hash(const json& params);

/// Finite doubles as numbers, NaN/inf as null.
json number_or_null(double v);

}  // namespace upho
