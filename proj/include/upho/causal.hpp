#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "upho/canonical.hpp"
#include "upho/catalog.hpp"
#include "upho/date.hpp"
#include "upho/frame.hpp"

namespace upho::causal {

struct SpearmanResult {
    double rho = 0.0;
    double p = 1.0;
};

/// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> mid_ranks(std::span<const double> x);

/// Pearson correlation of mid-ranks with a two-sided Student-t p-value on
/// n - 2 degrees of freedom. Throws LengthMismatch, InvalidArgument (n < 3)
/// or ZeroVariance (a fully tied input).
SpearmanResult spearman(std::span<const double> x, std::span<const double> y);

// ---------------------------------------------------------------------------

struct HillWeights {
    double strength = 1.0;
    double consistency = 1.0;
    double temporality = 1.0;
    double gradient = 1.0;
    double plausibility = 1.0;
};

struct HillConfig {
    HillWeights weights;
    std::uint64_t seed = 0;
    int subsamples = 20;
    double subsample_fraction = 0.8;
    int max_lag = 14;
};

/// Time-aligned series used to judge whether an indicator's time-varying
/// proxy moves ahead of the outcome.
struct TemporalProxy {
    std::vector<double> proxy;
    std::vector<double> outcome;
};

struct HillScore {
    double strength = 0.0;
    double consistency = 0.0;
    double temporality = 0.0;
    double gradient = 0.0;
    double plausibility = 0.0;
    double total = 0.0;
};

double hill_total(const HillScore& score, const HillWeights& weights);

/// Sign agreement of subsample correlations with `full_sign`, mapped from
/// [0.5, 1] onto [0, 1]. Subsamples whose correlation is undefined count as
/// disagreeing.
double consistency_score(std::span<const double> x, std::span<const double> y, double full_sign,
                         const HillConfig& config, std::uint64_t stream);

/// |Spearman| between quartile index 1..4 of x and the mean of y within each
/// quartile; 0 when fewer than 4 units or the quartile means are all equal.
double gradient_score(std::span<const double> x, std::span<const double> y);

/// Lag in bins at which |cross-correlation| of proxy against outcome peaks;
/// positive when the proxy leads. Empty when either series is too short or
/// constant.
std::optional<int> peak_lag(const TemporalProxy& proxy, int max_lag);

/// 1 when the proxy leads by at least one bin, 0 otherwise, 0.5 without a
/// usable proxy.
double temporality_score(const TemporalProxy* proxy, int max_lag);

/// `stream` separates the bootstrap streams of different edges.
HillScore hill_score(std::span<const double> x, std::span<const double> y, const TemporalProxy* proxy,
                     bool whitelisted, const HillConfig& config, std::uint64_t stream = 0);

// ---------------------------------------------------------------------------

class Whitelist {
public:
    void add(std::string indicator_key, std::string outcome);
    bool contains(const std::string& indicator_key, const std::string& outcome) const;
    std::size_t size() const noexcept { return pairs_.size(); }

private:
    std::set<std::pair<std::string, std::string>> pairs_;
};

/// One `indicator_key outcome_name` pair per line; blank lines and `#`
/// comments are skipped. Throws ParseError with the line number.
Whitelist read_whitelist(std::istream& in);

enum class Sign { Positive, Negative };

std::string_view to_string(Sign s);

struct CausalEdge {
    std::string from;
    std::string to;
    bool directed = false;
    double rho = 0.0;
    double p = 1.0;
    double p_adjusted = 1.0;
    std::optional<HillScore> hill;  // directed edges only
    Sign sign = Sign::Positive;
};

struct CausalNode {
    std::string id;
    bool is_outcome = false;
    std::optional<catalog::SdohDomain> domain;
};

struct CausalConfig {
    double tau = 0.3;
    double alpha = 0.05;
    HillConfig hill;
    Whitelist whitelist;
    std::map<std::string, TemporalProxy> proxies;  // by indicator key
};

struct CausalStructure {
    std::string outcome;
    std::vector<CausalNode> nodes;
    std::vector<CausalEdge> edges;
    std::vector<std::string> dropped;  // candidate indicators without variation
    double tau = 0.0;
    double alpha = 0.0;
};

/// Candidate indicators are the frame predictors catalogued under any of
/// `domains`. Every indicator-outcome test and every indicator-indicator test
/// forms one Benjamini-Hochberg family. Throws NoIndicatorsSelected.
CausalStructure build_causal_structure(const AnalysisFrame& frame, const std::string& outcome,
                                       const catalog::Catalog& catalog, const std::set<catalog::SdohDomain>& domains,
                                       const CausalConfig& config);

json to_json(const HillScore& score);
json to_json(const CausalStructure& structure);

// ---------------------------------------------------------------------------

struct KalmanOutput {
    std::vector<double> predicted_mean;  // a_t given y_0..y_{t-1}
    std::vector<double> predicted_var;
    std::vector<double> innovation_var;  // F_t
    std::vector<double> filtered_mean;
    std::vector<double> filtered_var;
    double loglik = 0.0;
};

/// Local-level filter y_t = mu_t + eps_t, mu_{t+1} = mu_t + eta_t started
/// from mu_0 ~ N(a0, p0).
KalmanOutput kalman_filter(std::span<const double> y, double var_obs, double var_level, double a0, double p0);

/// Innovation log-likelihood under a diffuse initial level: y_0 fixes the
/// level and contributes no term.
double local_level_loglik(std::span<const double> y, double var_obs, double var_level);

struct LocalLevelModel {
    double var_obs = 0.0;
    double var_level = 0.0;
    double level_mean = 0.0;  // filtered level at the last observation
    double level_var = 0.0;
    double loglik = 0.0;
    double scale = 0.0;  // variance the grid is anchored to
    bool degenerate = false;
    std::size_t grid_i = 0;  // chosen var_obs index
    std::size_t grid_j = 0;  // chosen var_level index
};

inline constexpr std::size_t kGridSize = 50;
inline constexpr double kGridLow = 1e-6;
inline constexpr double kGridHigh = 1e2;

double grid_value(std::size_t index);

/// Grid maximum-likelihood fit. Throws PrePeriodTooShort (< 10 points).
LocalLevelModel fit_local_level(std::span<const double> y_pre);

struct Band {
    double mean = 0.0;
    double lower = 0.0;
    double upper = 0.0;
};

struct ImpactPoint {
    Date date{};
    double observed = 0.0;
    Band counterfactual;
    Band effect;
    std::optional<Band> cumulative_effect;  // post-period only
};

struct ImpactConfig {
    std::size_t n_sims = 1000;
    std::uint64_t seed = 0;
};

struct ImpactResult {
    Date intervention{};
    std::vector<ImpactPoint> points;
    Band cumulative_effect;
    std::optional<Band> relative_effect_pct;
    double tail_prob = 0.0;
    std::size_t pre_length = 0;
    std::size_t post_length = 0;
    LocalLevelModel model;
    Eigen::VectorXd control_beta;  // empty without controls
};

/// Observations dated before `intervention` form the pre-period. Controls,
/// when given, have one row per observation. Throws InsufficientPrePeriod
/// (< 10 pre points), InterventionOutOfRange (< 3 post points or the date
/// outside the series) or LengthMismatch.
ImpactResult causal_impact(std::span<const Date> dates, std::span<const double> y, Date intervention,
                           const Eigen::MatrixXd* controls, const ImpactConfig& config);

json to_json(const ImpactResult& result);

/// Linear-interpolation percentile of an ascending-sorted sample, q in [0, 1].
double sorted_quantile(std::span<const double> sorted, double q);

}  // namespace upho::causal
