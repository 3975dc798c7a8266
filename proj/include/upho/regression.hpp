#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "upho/frame.hpp"
#include "upho/geo.hpp"
#include "upho/kernel.hpp"

namespace upho::regression {

inline constexpr double kVifWarningThreshold = 10.0;
inline constexpr double kAiccDecisionThreshold = 3.0;

/// Global least-squares fit. Coefficient vectors have the intercept first.
struct OlsResult {
    Eigen::VectorXd beta;
    Eigen::VectorXd std_err;
    Eigen::VectorXd t_stats;
    Eigen::VectorXd residuals;
    Eigen::VectorXd fitted;
    Eigen::VectorXd vif;  // one per predictor
    double rss = 0.0;
    double r2 = 0.0;
    double adj_r2 = 0.0;
    double aicc = 0.0;
    std::vector<std::string> warnings;
};

/// Intercept column followed by the frame's predictors.
Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& X);

/// n ln(RSS/n) + 2kn/(n-k-1) with k = p + 2; +inf when n - k - 1 <= 0.
double ols_aicc(double rss, std::size_t n, std::size_t p);

/// Same scale as ols_aicc with the hat-matrix trace in place of p + 1;
/// +inf when n - trace - 2 <= 0.
double gwr_aicc(double rss, std::size_t n, double trace);

/// Throws InsufficientRows (n < p + 2) or SingularDesign naming a
/// dependent column.
OlsResult fit_ols(const AnalysisFrame& frame);

/// Solves min sum_j w_j (y_j - design_j b)^2 by orthogonal decomposition of
/// the weighted system. Rows with zero weight are ignored. Throws
/// SingularLocalFit when the weighted design is rank deficient.
Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w);

struct GwrSpec {
    Kernel kernel = Kernel::Bisquare;
    /// km for fixed bandwidths, neighbor count for adaptive ones.
    double bandwidth = 0.0;
    bool adaptive = true;
};

struct GwrResult {
    Eigen::MatrixXd local_beta;  // n x (p + 1), rows in frame order
    Eigen::MatrixXd local_std_err;
    Eigen::VectorXd fitted;
    Eigen::VectorXd local_residuals;
    Eigen::VectorXd local_r2;
    Kernel kernel = Kernel::Bisquare;
    double bandwidth = 0.0;
    bool adaptive = true;
    double rss = 0.0;
    double aicc = 0.0;
    double effective_params = 0.0;  // trace of the hat matrix
};

/// Fills `w` (length n) with the weights used for the regression at location i.
using LocalWeights = std::function<void(std::size_t i, Eigen::Ref<Eigen::VectorXd> w)>;

/// Location-wise weighted fits with caller-supplied weights. Throws
/// SingularLocalFit naming the location.
GwrResult fit_gwr_weighted(const AnalysisFrame& frame, const LocalWeights& weights);

/// Kernel GWR over haversine distances between centroids. For adaptive
/// bandwidths the local bandwidth is the distance to the k-th nearest other
/// location. Throws NonpositiveBandwidth, InvalidArgument or SingularLocalFit.
GwrResult fit_gwr(const AnalysisFrame& frame, std::span<const geo::GeoPoint> centroids, const GwrSpec& spec);

/// GWR AICc at one bandwidth; +inf when the fit is infeasible.
double gwr_aicc_at(const AnalysisFrame& frame, std::span<const geo::GeoPoint> centroids, const GwrSpec& spec);

struct BandwidthSelection {
    double bandwidth = 0.0;
    double aicc = 0.0;
    double lower = 0.0;
    double upper = 0.0;
    std::size_t evaluations = 0;
};

/// Minimises GWR AICc over [lower, upper]: a 50-point scan brackets the
/// minimum, then golden-section search refines inside the bracket. Fixed:
/// lower guarantees p + 2 nonzero weights at every location, upper is the
/// largest pairwise distance. Adaptive: integer search over [p + 2, n - 1].
/// Throws NoFeasibleBandwidth.
BandwidthSelection select_bandwidth(const AnalysisFrame& frame, std::span<const geo::GeoPoint> centroids,
                                    Kernel kernel, bool adaptive);

enum class Preferred { Global, Local, Inconclusive };

std::string_view to_string(Preferred p);

struct ModelComparison {
    double ols_aicc = 0.0;
    double gwr_aicc = 0.0;
    double delta = 0.0;  // ols_aicc - gwr_aicc
    Preferred preferred = Preferred::Inconclusive;
};

ModelComparison compare_aicc(double ols_aicc, double gwr_aicc);

/// Throws FrameMismatch when the fits cover different row counts.
ModelComparison compare_models(const OlsResult& ols, const GwrResult& gwr);

struct ScalingRecord {
    Eigen::VectorXd mean;
    Eigen::VectorXd sd;  // population standard deviation
};

struct StandardizedFrame {
    AnalysisFrame frame;
    ScalingRecord scaling;
};

/// Centers and scales every predictor column; throws ZeroVarianceColumn.
StandardizedFrame standardize(const AnalysisFrame& frame);

/// Maps coefficients fitted on standardized predictors back to raw units.
Eigen::VectorXd unstandardize_coefficients(const Eigen::VectorXd& beta, const ScalingRecord& scaling);

}  // namespace upho::regression
