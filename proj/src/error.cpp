#include "upho/error.hpp"

namespace upho {

std::string_view to_string(Errc code) noexcept {
    switch (code) {
        case Errc::InvalidArgument: return "InvalidArgument";
        case Errc::ParseError: return "ParseError";
        case Errc::InvalidGeometry: return "InvalidGeometry";
        case Errc::DegenerateGeometry: return "DegenerateGeometry";
        case Errc::DuplicateUnit: return "DuplicateUnit";
        case Errc::TooFewUnits: return "TooFewUnits";
        case Errc::DuplicateKey: return "DuplicateKey";
        case Errc::UnknownDomain: return "UnknownDomain";
        case Errc::SchemaMismatch: return "SchemaMismatch";
        case Errc::EmptyFile: return "EmptyFile";
        case Errc::InsufficientUnits: return "InsufficientUnits";
        case Errc::UnknownIndicator: return "UnknownIndicator";
        case Errc::SingularDesign: return "SingularDesign";
        case Errc::InsufficientRows: return "InsufficientRows";
        case Errc::NonpositiveBandwidth: return "NonpositiveBandwidth";
        case Errc::SingularLocalFit: return "SingularLocalFit";
        case Errc::NoFeasibleBandwidth: return "NoFeasibleBandwidth";
        case Errc::FrameMismatch: return "FrameMismatch";
        case Errc::ZeroVarianceColumn: return "ZeroVarianceColumn";
        case Errc::SeriesTooShort: return "SeriesTooShort";
        case Errc::LengthMismatch: return "LengthMismatch";
        case Errc::ZeroVariance: return "ZeroVariance";
        case Errc::NoIndicatorsSelected: return "NoIndicatorsSelected";
        case Errc::PrePeriodTooShort: return "PrePeriodTooShort";
        case Errc::InsufficientPrePeriod: return "InsufficientPrePeriod";
        case Errc::InterventionOutOfRange: return "InterventionOutOfRange";
        case Errc::RepoLocked: return "RepoLocked";
        case Errc::WriteFailed: return "WriteFailed";
        case Errc::NotFound: return "NotFound";
        case Errc::DigestMismatch: return "DigestMismatch";
    }
    return "Unknown";
}

}  // namespace upho
