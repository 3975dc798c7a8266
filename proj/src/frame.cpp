#include "upho/frame.hpp"

#include "upho/error.hpp"

namespace upho {

void AnalysisFrame::validate() const {
    const auto rows = static_cast<Eigen::Index>(unit_ids.size());
    if (y.size() != rows || X.rows() != rows || X.cols() != static_cast<Eigen::Index>(predictor_keys.size())) {
        throw Error(Errc::InvalidArgument, "analysis frame shape mismatch");
    }
    if (!y.allFinite() || !X.allFinite()) {
        throw Error(Errc::InvalidArgument, "analysis frame contains non-finite values");
    }
}

}  // namespace upho
