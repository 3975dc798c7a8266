#include "upho/causal.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <istream>
#include <array>
#include <numeric>
#include <random>
#include <sstream>

#include "upho/error.hpp"
#include "upho/hotspot.hpp"

namespace upho::causal {

namespace {

double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    if (!(saa > 0.0) || !(sbb > 0.0)) {
        return std::numeric_limits<double>::quiet_NaN();
    }
    return sab / std::sqrt(saa * sbb);
}

bool all_tied(std::span<const double> x) {
    return std::all_of(x.begin(), x.end(), [&](double v) { return v == x.front(); });
}

std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::mt19937_64 seeded_stream(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

std::vector<double> mid_ranks(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && x[order[j + 1]] == x[order[i]]) {
            ++j;
        }
        const double avg = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    return ranks;
}

SpearmanResult spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) {
        throw Error(Errc::LengthMismatch,
                    "spearman inputs differ in length: " + std::to_string(x.size()) + " vs " + std::to_string(y.size()));
    }
    const std::size_t n = x.size();
    if (n < 3) {
        throw Error(Errc::InvalidArgument, "spearman needs at least 3 observations");
    }
    if (all_tied(x) || all_tied(y)) {
        throw Error(Errc::ZeroVariance, "spearman input is fully tied");
    }
    const auto rx = mid_ranks(x);
    const auto ry = mid_ranks(y);
    SpearmanResult out;
    out.rho = std::clamp(pearson(rx, ry), -1.0, 1.0);
    if (std::abs(out.rho) >= 1.0) {
        out.p = 0.0;
        return out;
    }
    const double df = static_cast<double>(n) - 2.0;
    const double t = out.rho * std::sqrt(df / (1.0 - out.rho * out.rho));
    const boost::math::students_t dist(df);
    out.p = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    return out;
}

// ---------------------------------------------------------------------------

double hill_total(const HillScore& s, const HillWeights& w) {
    const double wsum = w.strength + w.consistency + w.temporality + w.gradient + w.plausibility;
    if (!(wsum > 0.0)) {
        throw Error(Errc::InvalidArgument, "Hill weights must have a positive sum");
    }
    return (w.strength * s.strength + w.consistency * s.consistency + w.temporality * s.temporality +
            w.gradient * s.gradient + w.plausibility * s.plausibility) /
           wsum;
}

double consistency_score(std::span<const double> x, std::span<const double> y, double full_sign,
                         const HillConfig& config, std::uint64_t stream) {
    const std::size_t n = x.size();
    const auto m = static_cast<std::size_t>(std::floor(config.subsample_fraction * static_cast<double>(n)));
    if (config.subsamples <= 0 || m < 3) {
        return 0.0;
    }
    auto rng = seeded_stream(config.seed, stream);
    std::vector<std::size_t> idx(n);
    std::vector<double> xs(m);
    std::vector<double> ys(m);
    int agree = 0;
    for (int r = 0; r < config.subsamples; ++r) {
        std::iota(idx.begin(), idx.end(), 0);
        // partial Fisher-Yates: the first m slots become the subsample
        for (std::size_t i = 0; i < m; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, n - 1);
            std::swap(idx[i], idx[pick(rng)]);
        }
        for (std::size_t i = 0; i < m; ++i) {
            xs[i] = x[idx[i]];
            ys[i] = y[idx[i]];
        }
        if (all_tied(xs) || all_tied(ys)) {
            continue;
        }
        const double rho = pearson(mid_ranks(xs), mid_ranks(ys));
        if (rho * full_sign > 0.0) {
            ++agree;
        }
    }
    const double fraction = static_cast<double>(agree) / static_cast<double>(config.subsamples);
    return std::clamp((fraction - 0.5) / 0.5, 0.0, 1.0);
}

double gradient_score(std::span<const double> x, std::span<const double> y) {
    const std::size_t n = x.size();
    if (n < 4) {
        return 0.0;
    }
    const auto ranks = mid_ranks(x);
    std::array<double, 4> sum{};
    std::array<int, 4> count{};
    for (std::size_t i = 0; i < n; ++i) {
        // mid-rank r in [1, n] -> quartile 0..3; tied x share a quartile
        const auto q = std::min<std::size_t>(3, static_cast<std::size_t>(4.0 * (ranks[i] - 1.0) / static_cast<double>(n)));
        sum[q] += y[i];
        ++count[q];
    }
    std::vector<double> index;
    std::vector<double> means;
    for (std::size_t q = 0; q < 4; ++q) {
        if (count[q] > 0) {
            index.push_back(static_cast<double>(q + 1));
            means.push_back(sum[q] / count[q]);
        }
    }
    if (means.size() < 3 || all_tied(means)) {
        return 0.0;
    }
    return std::abs(spearman(index, means).rho);
}

std::optional<int> peak_lag(const TemporalProxy& proxy, int max_lag) {
    const std::size_t t = std::min(proxy.proxy.size(), proxy.outcome.size());
    const int lag_limit = std::min<int>(max_lag, static_cast<int>(t) / 4);
    if (lag_limit < 1) {
        return std::nullopt;
    }
    const std::span<const double> a(proxy.proxy.data(), t);
    const std::span<const double> b(proxy.outcome.data(), t);
    if (all_tied(a) || all_tied(b)) {
        return std::nullopt;
    }
    std::optional<int> best;
    double best_abs = -1.0;
    for (int k = -lag_limit; k <= lag_limit; ++k) {
        // corr(proxy_s, outcome_{s+k})
        const std::size_t shift = static_cast<std::size_t>(std::abs(k));
        const std::size_t len = t - shift;
        const auto pa = k >= 0 ? a.subspan(0, len) : a.subspan(shift, len);
        const auto pb = k >= 0 ? b.subspan(shift, len) : b.subspan(0, len);
        const double r = pearson(pa, pb);
        if (std::isfinite(r) && std::abs(r) > best_abs) {
            best_abs = std::abs(r);
            best = k;
        }
    }
    return best;
}

double temporality_score(const TemporalProxy* proxy, int max_lag) {
    if (proxy == nullptr) {
        return 0.5;
    }
    const auto lag = peak_lag(*proxy, max_lag);
    if (!lag) {
        return 0.5;
    }
    return *lag >= 1 ? 1.0 : 0.0;
}

HillScore hill_score(std::span<const double> x, std::span<const double> y, const TemporalProxy* proxy,
                     bool whitelisted, const HillConfig& config, std::uint64_t stream) {
    const auto full = spearman(x, y);
    HillScore s;
    s.strength = std::abs(full.rho);
    s.consistency = full.rho == 0.0 ? 0.0 : consistency_score(x, y, full.rho > 0.0 ? 1.0 : -1.0, config, stream);
    s.temporality = temporality_score(proxy, config.max_lag);
    s.gradient = gradient_score(x, y);
    s.plausibility = whitelisted ? 1.0 : 0.0;
    s.total = hill_total(s, config.weights);
    return s;
}

// ---------------------------------------------------------------------------

void Whitelist::add(std::string indicator_key, std::string outcome) {
    pairs_.emplace(std::move(indicator_key), std::move(outcome));
}

bool Whitelist::contains(const std::string& indicator_key, const std::string& outcome) const {
    return pairs_.contains({indicator_key, outcome});
}

Whitelist read_whitelist(std::istream& in) {
    Whitelist out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (auto hash = line.find('#'); hash != std::string::npos) {
            line.erase(hash);
        }
        std::istringstream fields(line);
        std::string key;
        std::string outcome;
        std::string extra;
        if (!(fields >> key)) {
            continue;
        }
        if (!(fields >> outcome) || (fields >> extra)) {
            throw Error(Errc::ParseError,
                        "whitelist line " + std::to_string(line_no) + ": expected `indicator_key outcome_name`");
        }
        out.add(std::move(key), std::move(outcome));
    }
    return out;
}

std::string_view to_string(Sign s) { return s == Sign::Positive ? "positive" : "negative"; }

CausalStructure build_causal_structure(const AnalysisFrame& frame, const std::string& outcome,
                                       const catalog::Catalog& catalog, const std::set<catalog::SdohDomain>& domains,
                                       const CausalConfig& config) {
    frame.validate();
    CausalStructure out;
    out.outcome = outcome;
    out.tau = config.tau;
    out.alpha = config.alpha;
    out.nodes.push_back({outcome, true, std::nullopt});

    std::vector<std::size_t> cols;
    for (std::size_t c = 0; c < frame.p(); ++c) {
        const auto* def = catalog.find(frame.predictor_keys[c]);
        if (def == nullptr) {
            continue;
        }
        bool selected = domains.contains(def->domain);
        for (auto d : def->cross_listed) {
            selected = selected || domains.contains(d);
        }
        if (!selected) {
            continue;
        }
        const auto col = frame.X.col(static_cast<Eigen::Index>(c));
        if ((col.array() == col(0)).all()) {
            out.dropped.push_back(frame.predictor_keys[c]);
            continue;
        }
        cols.push_back(c);
        out.nodes.push_back({frame.predictor_keys[c], false, def->domain});
    }
    if (cols.empty()) {
        throw Error(Errc::NoIndicatorsSelected, "no indicator with variation in the selected domains");
    }
    if (all_tied(std::span<const double>(frame.y.data(), frame.n()))) {
        throw Error(Errc::ZeroVariance, "outcome '" + outcome + "' is constant across units");
    }

    auto column = [&](std::size_t c) {
        const auto col = frame.X.col(static_cast<Eigen::Index>(c));
        return std::vector<double>(col.data(), col.data() + col.size());
    };
    const std::vector<double> y(frame.y.data(), frame.y.data() + frame.y.size());

    struct Test {
        std::size_t a;
        std::optional<std::size_t> b;  // empty: against the outcome
        SpearmanResult r;
    };
    std::vector<Test> tests;
    for (std::size_t i = 0; i < cols.size(); ++i) {
        tests.push_back({i, std::nullopt, spearman(column(cols[i]), y)});
    }
    for (std::size_t i = 0; i < cols.size(); ++i) {
        for (std::size_t j = i + 1; j < cols.size(); ++j) {
            tests.push_back({i, j, spearman(column(cols[i]), column(cols[j]))});
        }
    }
    std::vector<double> p(tests.size());
    std::transform(tests.begin(), tests.end(), p.begin(), [](const Test& t) { return t.r.p; });
    const auto p_adj = hotspot::benjamini_hochberg(p);
    auto passes = [&](std::size_t k) { return std::abs(tests[k].r.rho) >= config.tau && p_adj[k] < config.alpha; };

    std::vector<bool> retained(cols.size(), false);
    for (std::size_t k = 0; k < tests.size(); ++k) {
        const auto& t = tests[k];
        const bool directed = !t.b.has_value();
        if (!passes(k) || (!directed && !(retained[t.a] && retained[*t.b]))) {
            continue;
        }
        CausalEdge e;
        e.from = frame.predictor_keys[cols[t.a]];
        e.to = directed ? outcome : frame.predictor_keys[cols[*t.b]];
        e.directed = directed;
        e.rho = t.r.rho;
        e.p = t.r.p;
        e.p_adjusted = p_adj[k];
        e.sign = t.r.rho >= 0.0 ? Sign::Positive : Sign::Negative;
        if (directed) {
            retained[t.a] = true;
            auto proxy = config.proxies.find(e.from);
            e.hill = hill_score(column(cols[t.a]), y, proxy == config.proxies.end() ? nullptr : &proxy->second,
                                config.whitelist.contains(e.from, outcome), config.hill, fnv1a(e.from));
        }
        out.edges.push_back(std::move(e));
    }
    return out;
}

json to_json(const HillScore& s) {
    return {{"strength", number_or_null(s.strength)},       {"consistency", number_or_null(s.consistency)},
            {"temporality", number_or_null(s.temporality)}, {"gradient", number_or_null(s.gradient)},
            {"plausibility", number_or_null(s.plausibility)}, {"total", number_or_null(s.total)}};
}

json to_json(const CausalStructure& cs) {
    json nodes = json::array();
    for (const auto& n : cs.nodes) {
        json node = {{"id", n.id}, {"kind", n.is_outcome ? "outcome" : "indicator"}};
        if (n.domain) {
            node["domain"] = catalog::code(*n.domain);
        }
        nodes.push_back(std::move(node));
    }
    json edges = json::array();
    for (const auto& e : cs.edges) {
        json edge = {{"from", e.from},
                     {"to", e.to},
                     {"directed", e.directed},
                     {"rho", number_or_null(e.rho)},
                     {"p", number_or_null(e.p)},
                     {"p_adj", number_or_null(e.p_adjusted)},
                     {"sign", to_string(e.sign)}};
        if (e.hill) {
            edge["hill"] = to_json(*e.hill);
        }
        edges.push_back(std::move(edge));
    }
    return {{"outcome", cs.outcome}, {"nodes", std::move(nodes)}, {"edges", std::move(edges)},
            {"dropped", cs.dropped},  {"tau", cs.tau},             {"alpha", cs.alpha}};
}

// ---------------------------------------------------------------------------

KalmanOutput kalman_filter(std::span<const double> y, double var_obs, double var_level, double a0, double p0) {
    KalmanOutput out;
    const std::size_t n = y.size();
    out.predicted_mean.resize(n);
    out.predicted_var.resize(n);
    out.innovation_var.resize(n);
    out.filtered_mean.resize(n);
    out.filtered_var.resize(n);
    double a = a0;
    double p = p0;
    constexpr double log_two_pi = 1.8378770664093453;
    for (std::size_t t = 0; t < n; ++t) {
        out.predicted_mean[t] = a;
        out.predicted_var[t] = p;
        const double f = p + var_obs;
        const double v = y[t] - a;
        const double k = p / f;
        out.innovation_var[t] = f;
        out.loglik += -0.5 * (log_two_pi + std::log(f) + v * v / f);
        const double af = a + k * v;
        const double pf = p * (1.0 - k);
        out.filtered_mean[t] = af;
        out.filtered_var[t] = pf;
        a = af;
        p = pf + var_level;
    }
    return out;
}

double local_level_loglik(std::span<const double> y, double var_obs, double var_level) {
    if (y.size() < 2) {
        return 0.0;
    }
    return kalman_filter(y.subspan(1), var_obs, var_level, y[0], var_obs + var_level).loglik;
}

double grid_value(std::size_t index) {
    const double step = std::log(kGridHigh / kGridLow) / static_cast<double>(kGridSize - 1);
    return kGridLow * std::exp(step * static_cast<double>(index));
}

LocalLevelModel fit_local_level(std::span<const double> y_pre) {
    const std::size_t n = y_pre.size();
    if (n < 10) {
        throw Error(Errc::PrePeriodTooShort, "local-level fit needs at least 10 observations, got " + std::to_string(n));
    }
    for (double v : y_pre) {
        if (!std::isfinite(v)) {
            throw Error(Errc::InvalidArgument, "series contains non-finite values");
        }
    }
    const double mean = std::accumulate(y_pre.begin(), y_pre.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double v : y_pre) {
        ss += (v - mean) * (v - mean);
    }
    LocalLevelModel m;
    m.scale = ss / static_cast<double>(n - 1);
    const double magnitude = std::max(1.0, mean * mean);
    if (!(m.scale > 1e-12 * magnitude)) {
        m.scale = 1e-6 * magnitude;
        m.degenerate = true;
    }

    m.loglik = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < kGridSize; ++i) {
        for (std::size_t j = 0; j < kGridSize; ++j) {
            const double ll = local_level_loglik(y_pre, grid_value(i) * m.scale, grid_value(j) * m.scale);
            if (ll > m.loglik) {
                m.loglik = ll;
                m.grid_i = i;
                m.grid_j = j;
            }
        }
    }
    m.var_obs = grid_value(m.grid_i) * m.scale;
    m.var_level = grid_value(m.grid_j) * m.scale;
    const auto kf = kalman_filter(y_pre.subspan(1), m.var_obs, m.var_level, y_pre[0], m.var_obs + m.var_level);
    m.level_mean = kf.filtered_mean.back();
    m.level_var = kf.filtered_var.back();
    return m;
}

double sorted_quantile(std::span<const double> sorted, double q) {
    if (sorted.empty()) {
        throw Error(Errc::InvalidArgument, "quantile of an empty sample");
    }
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace {

Band band_from(std::vector<double>& sample, double mean) {
    std::sort(sample.begin(), sample.end());
    Band b;
    b.mean = mean;
    b.lower = std::min(sorted_quantile(sample, 0.025), mean);
    b.upper = std::max(sorted_quantile(sample, 0.975), mean);
    return b;
}

}  // namespace

ImpactResult causal_impact(std::span<const Date> dates, std::span<const double> y, Date intervention,
                           const Eigen::MatrixXd* controls, const ImpactConfig& config) {
    const std::size_t n = y.size();
    if (dates.size() != n) {
        throw Error(Errc::LengthMismatch, "dates and observations differ in length");
    }
    if (controls != nullptr && static_cast<std::size_t>(controls->rows()) != n) {
        throw Error(Errc::LengthMismatch, "control matrix must have one row per observation");
    }
    if (!std::is_sorted(dates.begin(), dates.end()) ||
        std::adjacent_find(dates.begin(), dates.end()) != dates.end()) {
        throw Error(Errc::InvalidArgument, "dates must be strictly increasing");
    }
    if (config.n_sims == 0) {
        throw Error(Errc::InvalidArgument, "n_sims must be positive");
    }
    if (n == 0 || intervention > dates.back() || intervention <= dates.front()) {
        throw Error(Errc::InterventionOutOfRange, "intervention " + format_date(intervention) +
                                                      " is outside the observed series");
    }
    const auto pre = static_cast<std::size_t>(std::lower_bound(dates.begin(), dates.end(), intervention) - dates.begin());
    const std::size_t post = n - pre;
    if (pre < 10) {
        throw Error(Errc::InsufficientPrePeriod,
                    "need at least 10 pre-intervention observations, got " + std::to_string(pre));
    }
    if (post < 3) {
        throw Error(Errc::InterventionOutOfRange,
                    "need at least 3 post-intervention observations, got " + std::to_string(post));
    }

    ImpactResult out;
    out.intervention = intervention;
    out.pre_length = pre;
    out.post_length = post;

    // Control contribution fitted on the pre-period, applied throughout.
    Eigen::VectorXd baseline = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    if (controls != nullptr && controls->cols() > 0) {
        const auto k = controls->cols();
        Eigen::MatrixXd design(static_cast<Eigen::Index>(n), k + 1);
        design.col(0).setOnes();
        design.rightCols(k) = *controls;
        const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(n));
        const auto pre_rows = static_cast<Eigen::Index>(pre);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design.topRows(pre_rows));
        qr.setThreshold(1e-10);
        if (qr.rank() < design.cols()) {
            throw Error(Errc::SingularDesign, "control series are collinear over the pre-period");
        }
        out.control_beta = qr.solve(yv.head(pre_rows));
        baseline = design * out.control_beta;
    }
    std::vector<double> resid(n);
    for (std::size_t t = 0; t < n; ++t) {
        resid[t] = y[t] - baseline(static_cast<Eigen::Index>(t));
    }

    out.model = fit_local_level(std::span<const double>(resid.data(), pre));
    const auto& m = out.model;

    // Pre-period: one-step-ahead predictions from the fitted filter.
    const auto kf = kalman_filter(std::span<const double>(resid.data() + 1, pre - 1), m.var_obs, m.var_level, resid[0],
                                  m.var_obs + m.var_level);
    constexpr double z975 = 1.959963984540054;
    for (std::size_t t = 0; t < pre; ++t) {
        const double base = baseline(static_cast<Eigen::Index>(t));
        const double mean = t == 0 ? resid[0] : kf.predicted_mean[t - 1];
        const double sd = t == 0 ? std::sqrt(m.var_obs) : std::sqrt(kf.innovation_var[t - 1]);
        ImpactPoint pt;
        pt.date = dates[t];
        pt.observed = y[t];
        pt.counterfactual = {base + mean, base + mean - z975 * sd, base + mean + z975 * sd};
        pt.effect = {y[t] - pt.counterfactual.mean, y[t] - pt.counterfactual.upper, y[t] - pt.counterfactual.lower};
        out.points.push_back(pt);
    }

    // Post-period: simulated counterfactual paths, one seeded stream per path.
    const std::size_t sims = config.n_sims;
    std::vector<std::vector<double>> path(post, std::vector<double>(sims));
    std::vector<std::vector<double>> cum(post, std::vector<double>(sims));
    const double sd_level0 = std::sqrt(std::max(m.level_var, 0.0));
    const double sd_eta = std::sqrt(m.var_level);
    const double sd_eps = std::sqrt(m.var_obs);
    for (std::size_t s = 0; s < sims; ++s) {
        auto rng = seeded_stream(config.seed, s);
        std::normal_distribution<double> z(0.0, 1.0);
        double level = m.level_mean + sd_level0 * z(rng);
        double running = 0.0;
        for (std::size_t h = 0; h < post; ++h) {
            level += sd_eta * z(rng);
            const double v = baseline(static_cast<Eigen::Index>(pre + h)) + level + sd_eps * z(rng);
            running += v;
            path[h][s] = v;
            cum[h][s] = running;
        }
    }

    double observed_cum = 0.0;
    double expected_cum = 0.0;
    std::vector<double> sample(sims);
    for (std::size_t h = 0; h < post; ++h) {
        const std::size_t t = pre + h;
        const double expected = baseline(static_cast<Eigen::Index>(t)) + m.level_mean;
        observed_cum += y[t];
        expected_cum += expected;
        ImpactPoint pt;
        pt.date = dates[t];
        pt.observed = y[t];
        sample = path[h];
        pt.counterfactual = band_from(sample, expected);
        pt.effect = {y[t] - pt.counterfactual.mean, y[t] - pt.counterfactual.upper, y[t] - pt.counterfactual.lower};
        sample = cum[h];
        const Band cf_cum = band_from(sample, expected_cum);
        pt.cumulative_effect = Band{observed_cum - cf_cum.mean, observed_cum - cf_cum.upper, observed_cum - cf_cum.lower};
        out.points.push_back(pt);
    }
    out.cumulative_effect = *out.points.back().cumulative_effect;

    const auto& final_cum = cum.back();
    if (std::abs(expected_cum) > 0.0 && std::all_of(final_cum.begin(), final_cum.end(), [](double v) { return v != 0.0; })) {
        std::vector<double> rel(sims);
        for (std::size_t s = 0; s < sims; ++s) {
            rel[s] = 100.0 * (observed_cum - final_cum[s]) / final_cum[s];
        }
        std::sort(rel.begin(), rel.end());
        const double mean = 100.0 * (observed_cum - expected_cum) / expected_cum;
        out.relative_effect_pct = Band{mean, std::min(sorted_quantile(rel, 0.025), mean),
                                       std::max(sorted_quantile(rel, 0.975), mean)};
    }

    std::size_t beyond = 0;
    for (double c : final_cum) {
        if (out.cumulative_effect.mean >= 0.0 ? c >= observed_cum : c <= observed_cum) {
            ++beyond;
        }
    }
    out.tail_prob = static_cast<double>(beyond) / static_cast<double>(sims);
    return out;
}

namespace {

json band_json(const Band& b) {
    return {{"mean", number_or_null(b.mean)}, {"lower", number_or_null(b.lower)}, {"upper", number_or_null(b.upper)}};
}

}  // namespace

json to_json(const ImpactResult& r) {
    json points = json::array();
    for (const auto& p : r.points) {
        json pt = {{"date", format_date(p.date)},
                   {"observed", number_or_null(p.observed)},
                   {"counterfactual", band_json(p.counterfactual)},
                   {"effect", band_json(p.effect)}};
        if (p.cumulative_effect) {
            pt["cumulative_effect"] = band_json(*p.cumulative_effect);
        }
        points.push_back(std::move(pt));
    }
    json model = {{"sigma_obs", number_or_null(std::sqrt(r.model.var_obs))},
                  {"sigma_level", number_or_null(std::sqrt(r.model.var_level))},
                  {"level_mean", number_or_null(r.model.level_mean)},
                  {"level_var", number_or_null(r.model.level_var)},
                  {"loglik", number_or_null(r.model.loglik)},
                  {"degenerate", r.model.degenerate}};
    json out = {{"intervention_date", format_date(r.intervention)},
                {"pre_length", r.pre_length},
                {"post_length", r.post_length},
                {"points", std::move(points)},
                {"cumulative_effect", band_json(r.cumulative_effect)},
                {"relative_effect_pct", r.relative_effect_pct ? band_json(*r.relative_effect_pct) : json(nullptr)},
                {"tail_prob", number_or_null(r.tail_prob)},
                {"model", std::move(model)}};
    if (r.control_beta.size() > 0) {
        out["control_beta"] = std::vector<double>(r.control_beta.data(), r.control_beta.data() + r.control_beta.size());
    }
    return out;
}

}  // namespace upho::causal
