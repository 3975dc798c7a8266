#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "upho/date.hpp"
#include "upho/geo.hpp"

namespace upho {

struct DateWindow {
    Date start;
    Date end;  // inclusive

    bool contains(Date d) const noexcept { return d >= start && d <= end; }
};

/// Unit x variable table for one outcome at one level: outcome vector `y`
/// and predictor matrix `X` (no intercept column). Rows follow `unit_ids`,
/// columns follow `predictor_keys`.
struct AnalysisFrame {
    geo::Level level = geo::Level::Tract;
    std::vector<std::string> unit_ids;
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    std::vector<std::string> predictor_keys;
    DateWindow window{};
    std::string outcome;
    bool per_capita = false;

    std::size_t n() const noexcept { return unit_ids.size(); }
    std::size_t p() const noexcept { return predictor_keys.size(); }

    /// Throws InvalidArgument when shapes disagree or values are not finite.
    void validate() const;
};

}  // namespace upho
