#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace upho {

enum class Errc {
    InvalidArgument,
    ParseError,
    // geo
    InvalidGeometry,
    DegenerateGeometry,
    DuplicateUnit,
    TooFewUnits,
    // catalog / ingestion
    DuplicateKey,
    UnknownDomain,
    SchemaMismatch,
    EmptyFile,
    InsufficientUnits,
    UnknownIndicator,
    // regression
    SingularDesign,
    InsufficientRows,
    NonpositiveBandwidth,
    SingularLocalFit,
    NoFeasibleBandwidth,
    FrameMismatch,
    ZeroVarianceColumn,
    // hotspot
    SeriesTooShort,
    // causal
    LengthMismatch,
    ZeroVariance,
    NoIndicatorsSelected,
    PrePeriodTooShort,
    InsufficientPrePeriod,
    InterventionOutOfRange,
    // repository
    RepoLocked,
    WriteFailed,
    NotFound,
    DigestMismatch,
};

std::string_view to_string(Errc code) noexcept;

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_{code} {}

    Errc code() const noexcept { return code_; }

private:
    Errc code_;
};

}  // namespace upho
