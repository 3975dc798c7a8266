#include "upho/regression.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "upho/error.hpp"

namespace upho::regression {

namespace {

constexpr double kRankThreshold = 1e-10;
constexpr double kInf = std::numeric_limits<double>::infinity();

std::string column_name(const AnalysisFrame& frame, Eigen::Index col) {
    return col == 0 ? std::string("intercept") : frame.predictor_keys[static_cast<std::size_t>(col - 1)];
}

// Variance inflation factors from auxiliary regressions of each predictor
// on the remaining ones.
Eigen::VectorXd variance_inflation(const Eigen::MatrixXd& X) {
    const Eigen::Index n = X.rows();
    const Eigen::Index p = X.cols();
    Eigen::VectorXd vif = Eigen::VectorXd::Ones(p);
    if (p < 2) {
        return vif;
    }
    for (Eigen::Index k = 0; k < p; ++k) {
        Eigen::MatrixXd others(n, p);
        others.col(0).setOnes();
        Eigen::Index c = 1;
        for (Eigen::Index j = 0; j < p; ++j) {
            if (j != k) {
                others.col(c++) = X.col(j);
            }
        }
        const Eigen::VectorXd target = X.col(k);
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(others);
        const Eigen::VectorXd fit = others * qr.solve(target);
        const double rss = (target - fit).squaredNorm();
        const double tss = (target.array() - target.mean()).matrix().squaredNorm();
        if (tss <= 0.0) {
            vif[k] = kInf;
            continue;
        }
        const double r2 = 1.0 - rss / tss;
        vif[k] = r2 >= 1.0 ? kInf : 1.0 / (1.0 - r2);
    }
    return vif;
}

// Shared per-frame state for repeated GWR evaluations.
struct GwrContext {
    const AnalysisFrame& frame;
    Eigen::MatrixXd design;
    std::size_t n;
    std::vector<double> dist;                 // n * n
    std::vector<std::vector<double>> sorted;  // per location, distances to other locations ascending

    GwrContext(const AnalysisFrame& f, std::span<const geo::GeoPoint> centroids)
        : frame{f}, design{design_matrix(f.X)}, n{f.n()} {
        if (centroids.size() != n) {
            throw Error(Errc::InvalidArgument, "GWR needs one centroid per frame row");
        }
        dist = geo::distance_matrix_km(centroids);
        sorted.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            auto& s = sorted[i];
            s.reserve(n - 1);
            for (std::size_t j = 0; j < n; ++j) {
                if (j != i) {
                    s.push_back(dist[i * n + j]);
                }
            }
            std::sort(s.begin(), s.end());
        }
    }

    double local_bandwidth(std::size_t i, const GwrSpec& spec) const {
        if (!spec.adaptive) {
            return spec.bandwidth;
        }
        const auto k = static_cast<std::size_t>(std::llround(spec.bandwidth));
        if (k < 1 || k > n - 1) {
            throw Error(Errc::InvalidArgument, "adaptive bandwidth must be a neighbor count in [1, n-1]");
        }
        return sorted[i][k - 1];
    }

    LocalWeights weights(const GwrSpec& spec) const {
        return [this, spec](std::size_t i, Eigen::Ref<Eigen::VectorXd> w) {
            const double b = local_bandwidth(i, spec);
            for (std::size_t j = 0; j < n; ++j) {
                w[static_cast<Eigen::Index>(j)] = kernel_weight(dist[i * n + j], b, spec.kernel);
            }
        };
    }
};

struct LocalSolve {
    Eigen::VectorXd beta;
    double leverage = 0.0;                // S_ii
    Eigen::MatrixXd influence;            // (p+1) x n, only when requested
};

LocalSolve solve_local(const Eigen::MatrixXd& design, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                       std::size_t i, bool want_influence) {
    const Eigen::Index n = design.rows();
    const Eigen::Index k = design.cols();
    std::vector<Eigen::Index> active;
    active.reserve(static_cast<std::size_t>(n));
    for (Eigen::Index j = 0; j < n; ++j) {
        if (w[j] > 0.0) {
            active.push_back(j);
        }
    }
    const auto m = static_cast<Eigen::Index>(active.size());
    if (m < k) {
        throw Error(Errc::SingularLocalFit, "location " + std::to_string(i) + ": only " + std::to_string(m) +
                                                " observations carry weight; increase the bandwidth");
    }
    Eigen::MatrixXd A(m, k);
    Eigen::VectorXd b(m);
    for (Eigen::Index r = 0; r < m; ++r) {
        const double s = std::sqrt(w[active[static_cast<std::size_t>(r)]]);
        A.row(r) = s * design.row(active[static_cast<std::size_t>(r)]);
        b[r] = s * y[active[static_cast<std::size_t>(r)]];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < k) {
        throw Error(Errc::SingularLocalFit, "location " + std::to_string(i) +
                                                ": weighted design is rank deficient; increase the bandwidth");
    }
    LocalSolve out;
    out.beta = qr.solve(b);

    const auto R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const auto& P = qr.colsPermutation();
    // (A'A)^{-1} = P R^{-1} R^{-T} P'
    const Eigen::VectorXd xi = design.row(static_cast<Eigen::Index>(i)).transpose();
    const Eigen::VectorXd z = R.transpose().solve(P.transpose() * xi);
    out.leverage = w[static_cast<Eigen::Index>(i)] * z.squaredNorm();

    if (want_influence) {
        // C = (A'A)^{-1} X' W, the map from y to the local coefficients.
        Eigen::MatrixXd XtW = Eigen::MatrixXd::Zero(k, n);
        for (Eigen::Index j : active) {
            XtW.col(j) = w[j] * design.row(j).transpose();
        }
        Eigen::MatrixXd tmp = R.transpose().solve(P.transpose() * XtW);
        out.influence = P * R.solve(tmp);
    }
    return out;
}

GwrResult run_gwr(const AnalysisFrame& frame, const LocalWeights& weights, bool full) {
    frame.validate();
    const std::size_t n = frame.n();
    const std::size_t p = frame.p();
    if (n < p + 2) {
        throw Error(Errc::InsufficientRows, "GWR needs n >= p + 2");
    }
    const Eigen::MatrixXd design = design_matrix(frame.X);
    const auto k = static_cast<Eigen::Index>(p + 1);

    GwrResult out;
    out.local_beta.resize(static_cast<Eigen::Index>(n), k);
    out.fitted.resize(static_cast<Eigen::Index>(n));
    out.local_r2.resize(static_cast<Eigen::Index>(n));
    Eigen::MatrixXd hat;
    std::vector<Eigen::MatrixXd> influences;
    if (full) {
        hat.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
        influences.reserve(n);
    }

    Eigen::VectorXd w(static_cast<Eigen::Index>(n));
    double trace = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        w.setZero();
        weights(i, w);
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            if (!std::isfinite(w[j]) || w[j] < 0.0) {
                throw Error(Errc::InvalidArgument, "local weights must be finite and nonnegative");
            }
        }
        auto local = solve_local(design, frame.y, w, i, full);
        out.local_beta.row(ii) = local.beta.transpose();
        out.fitted[ii] = design.row(ii).dot(local.beta);
        trace += local.leverage;

        // Weighted local R^2.
        const double wsum = w.sum();
        const double ybar = w.dot(frame.y) / wsum;
        double tss = 0.0;
        double rss = 0.0;
        for (Eigen::Index j = 0; j < w.size(); ++j) {
            if (w[j] > 0.0) {
                const double dy = frame.y[j] - ybar;
                const double e = frame.y[j] - design.row(j).dot(local.beta);
                tss += w[j] * dy * dy;
                rss += w[j] * e * e;
            }
        }
        out.local_r2[ii] = tss > 0.0 ? std::clamp(1.0 - rss / tss, 0.0, 1.0) : 1.0;

        if (full) {
            hat.row(ii) = design.row(ii) * local.influence;
            influences.push_back(std::move(local.influence));
        }
    }
    out.local_residuals = frame.y - out.fitted;
    double rss = 0.0;
    for (Eigen::Index i = 0; i < out.local_residuals.size(); ++i) {
        rss += out.local_residuals[i] * out.local_residuals[i];
    }
    out.rss = rss;
    out.effective_params = trace;
    out.aicc = gwr_aicc(rss, n, trace);

    if (full) {
        const double trace_sts = hat.squaredNorm();
        const double dof = static_cast<double>(n) - 2.0 * trace + trace_sts;
        const double sigma2 = dof > 0.0 ? rss / dof : std::numeric_limits<double>::quiet_NaN();
        out.local_std_err.resize(static_cast<Eigen::Index>(n), k);
        for (std::size_t i = 0; i < n; ++i) {
            const auto& C = influences[i];
            for (Eigen::Index c = 0; c < k; ++c) {
                out.local_std_err(static_cast<Eigen::Index>(i), c) = std::sqrt(sigma2 * C.row(c).squaredNorm());
            }
        }
    }
    return out;
}

}  // namespace

Eigen::MatrixXd design_matrix(const Eigen::MatrixXd& X) {
    Eigen::MatrixXd d(X.rows(), X.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(X.cols()) = X;
    return d;
}

double ols_aicc(double rss, std::size_t n, std::size_t p) {
    const double nn = static_cast<double>(n);
    const double k = static_cast<double>(p) + 2.0;
    const double denom = nn - k - 1.0;
    if (denom <= 0.0) {
        return kInf;
    }
    const double scale = std::max(rss / nn, std::numeric_limits<double>::min());
    return nn * std::log(scale) + 2.0 * k * nn / denom;
}

double gwr_aicc(double rss, std::size_t n, double trace) {
    const double nn = static_cast<double>(n);
    const double denom = nn - trace - 2.0;
    if (denom <= 0.0) {
        return kInf;
    }
    const double scale = std::max(rss / nn, std::numeric_limits<double>::min());
    return nn * std::log(scale) + 2.0 * nn * (trace + 1.0) / denom;
}

OlsResult fit_ols(const AnalysisFrame& frame) {
    frame.validate();
    const std::size_t n = frame.n();
    const std::size_t p = frame.p();
    if (n < p + 2) {
        throw Error(Errc::InsufficientRows,
                    "OLS needs n >= p + 2 (n = " + std::to_string(n) + ", p = " + std::to_string(p) + ")");
    }
    const Eigen::MatrixXd design = design_matrix(frame.X);
    const auto k = design.cols();
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    qr.setThreshold(kRankThreshold);
    if (qr.rank() < k) {
        const auto offending = qr.colsPermutation().indices()[qr.rank()];
        throw Error(Errc::SingularDesign, "design matrix is rank deficient; column '" + column_name(frame, offending) +
                                              "' is linearly dependent on the others");
    }
    OlsResult out;
    out.beta = qr.solve(frame.y);
    out.fitted = design * out.beta;
    out.residuals = frame.y - out.fitted;
    out.rss = out.residuals.squaredNorm();

    const double nn = static_cast<double>(n);
    const double tss = (frame.y.array() - frame.y.mean()).matrix().squaredNorm();
    out.r2 = tss > 0.0 ? std::clamp(1.0 - out.rss / tss, 0.0, 1.0) : (out.rss == 0.0 ? 1.0 : 0.0);
    out.adj_r2 = 1.0 - (1.0 - out.r2) * (nn - 1.0) / (nn - static_cast<double>(p) - 1.0);
    out.aicc = ols_aicc(out.rss, n, p);

    // cov = sigma^2 (X'X)^{-1} = sigma^2 P R^{-1} R^{-T} P'
    const double sigma2 = out.rss / (nn - static_cast<double>(p) - 1.0);
    const auto R = qr.matrixR().topLeftCorner(k, k).template triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv = R.solve(Eigen::MatrixXd::Identity(k, k));
    const Eigen::MatrixXd inv = qr.colsPermutation() * (Rinv * Rinv.transpose()) * qr.colsPermutation().transpose();
    out.std_err = (sigma2 * inv.diagonal()).cwiseSqrt();
    out.t_stats = out.beta.cwiseQuotient(out.std_err);

    out.vif = variance_inflation(frame.X);
    for (std::size_t j = 0; j < p; ++j) {
        if (out.vif[static_cast<Eigen::Index>(j)] > kVifWarningThreshold) {
            out.warnings.push_back("VIF of '" + frame.predictor_keys[j] + "' exceeds " +
                                   std::to_string(static_cast<int>(kVifWarningThreshold)) + " (collinear indicators)");
        }
    }
    return out;
}

Eigen::VectorXd weighted_least_squares(const Eigen::MatrixXd& design, const Eigen::VectorXd& y,
                                       const Eigen::VectorXd& w) {
    if (design.rows() != y.size() || w.size() != y.size()) {
        throw Error(Errc::InvalidArgument, "weighted_least_squares: shape mismatch");
    }
    return solve_local(design, y, w, 0, false).beta;
}

GwrResult fit_gwr_weighted(const AnalysisFrame& frame, const LocalWeights& weights) {
    return run_gwr(frame, weights, true);
}

GwrResult fit_gwr(const AnalysisFrame& frame, std::span<const geo::GeoPoint> centroids, const GwrSpec& spec) {
    if (!(spec.bandwidth > 0.0)) {
        throw Error(Errc::NonpositiveBandwidth, "GWR bandwidth must be > 0");
    }
    if (spec.adaptive && std::llround(spec.bandwidth) < static_cast<long long>(frame.p() + 2)) {
        throw Error(Errc::InvalidArgument, "adaptive bandwidth must be at least p + 2 neighbors");
    }
    GwrContext ctx(frame, centroids);
    auto out = run_gwr(frame, ctx.weights(spec), true);
    out.kernel = spec.kernel;
    out.bandwidth = spec.bandwidth;
    out.adaptive = spec.adaptive;
    return out;
}

double gwr_aicc_at(const AnalysisFrame& frame, std::span<const geo::GeoPoint> centroids, const GwrSpec& spec) {
    GwrContext ctx(frame, centroids);
    try {
        return run_gwr(frame, ctx.weights(spec), false).aicc;
    } catch (const Error& e) {
        if (e.code() == Errc::SingularLocalFit) {
            return kInf;
        }
        throw;
    }
}

BandwidthSelection select_bandwidth(const AnalysisFrame& frame, std::span<const geo::GeoPoint> centroids,
                                    Kernel kernel, bool adaptive) {
    frame.validate();
    const std::size_t n = frame.n();
    const std::size_t p = frame.p();
    if (n < p + 3) {
        throw Error(Errc::NoFeasibleBandwidth, "need at least p + 3 locations to select a bandwidth");
    }
    GwrContext ctx(frame, centroids);

    BandwidthSelection sel;
    std::map<double, double> cache;
    auto evaluate = [&](double b) {
        auto it = cache.find(b);
        if (it != cache.end()) {
            return it->second;
        }
        double value = kInf;
        try {
            value = run_gwr(frame, ctx.weights({kernel, b, adaptive}), false).aicc;
        } catch (const Error& e) {
            if (e.code() != Errc::SingularLocalFit) {
                throw;
            }
        }
        ++sel.evaluations;
        cache.emplace(b, value);
        return value;
    };

    constexpr double kRatio = 0.38196601125010515;  // 2 - golden ratio
    constexpr int kCoarsePoints = 50;
    auto best_cached = [&] {
        auto best = cache.begin();
        for (auto it = cache.begin(); it != cache.end(); ++it) {
            if (it->second < best->second) {
                best = it;
            }
        }
        return best->first;
    };
    if (adaptive) {
        const long long lo = static_cast<long long>(p + 2);
        const long long hi = static_cast<long long>(n - 1);
        sel.lower = static_cast<double>(lo);
        sel.upper = static_cast<double>(hi);
        // A coarse scan brackets the minimum; with at most kCoarsePoints
        // candidates it is exhaustive.
        const long long step = std::max<long long>(1, (hi - lo + kCoarsePoints - 1) / kCoarsePoints);
        for (long long b = lo; b <= hi; b += step) {
            evaluate(static_cast<double>(b));
        }
        evaluate(sel.upper);
        const auto centre = static_cast<long long>(best_cached());
        long long a = std::max(lo, centre - step);
        long long c = std::min(hi, centre + step);
        while (c - a > 3) {
            long long m1 = a + std::llround(kRatio * static_cast<double>(c - a));
            long long m2 = c - std::llround(kRatio * static_cast<double>(c - a));
            if (m2 <= m1) {
                m2 = m1 + 1;
            }
            if (evaluate(static_cast<double>(m1)) <= evaluate(static_cast<double>(m2))) {
                c = m2;
            } else {
                a = m1;
            }
        }
        for (long long b = a; b <= c; ++b) {
            evaluate(static_cast<double>(b));
        }
    } else {
        double lo = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            // p + 1 neighbors strictly inside the band plus the location itself.
            lo = std::max(lo, ctx.sorted[i][p]);
        }
        lo *= 1.0 + 1e-9;
        double hi = *std::max_element(ctx.dist.begin(), ctx.dist.end());
        if (!(hi > 0.0)) {
            throw Error(Errc::NoFeasibleBandwidth, "all centroids coincide");
        }
        hi = std::max(hi, lo);
        sel.lower = lo;
        sel.upper = hi;
        const double step = (hi - lo) / (kCoarsePoints - 1);
        for (int k = 0; k < kCoarsePoints; ++k) {
            evaluate(k + 1 == kCoarsePoints ? hi : lo + k * step);
        }
        const double centre = best_cached();
        double a = std::max(lo, centre - step);
        double b = std::min(hi, centre + step);
        const double tol = 1e-5 * hi;
        double x1 = a + kRatio * (b - a);
        double x2 = b - kRatio * (b - a);
        double f1 = evaluate(x1);
        double f2 = evaluate(x2);
        for (int iter = 0; iter < 200 && (b - a) > tol; ++iter) {
            if (f1 <= f2) {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = a + kRatio * (b - a);
                f1 = evaluate(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = b - kRatio * (b - a);
                f2 = evaluate(x2);
            }
        }
    }

    sel.aicc = kInf;
    for (const auto& [b, value] : cache) {
        if (value < sel.aicc) {
            sel.aicc = value;
            sel.bandwidth = b;
        }
    }
    if (!std::isfinite(sel.aicc)) {
        throw Error(Errc::NoFeasibleBandwidth, "no candidate bandwidth yields a feasible GWR fit");
    }
    return sel;
}

std::string_view to_string(Preferred p) {
    switch (p) {
        case Preferred::Global: return "global";
        case Preferred::Local: return "local";
        case Preferred::Inconclusive: return "inconclusive";
    }
    return "";
}

ModelComparison compare_aicc(double ols, double gwr) {
    ModelComparison out;
    out.ols_aicc = ols;
    out.gwr_aicc = gwr;
    out.delta = ols - gwr;
    if (out.delta > kAiccDecisionThreshold) {
        out.preferred = Preferred::Local;
    } else if (-out.delta > kAiccDecisionThreshold) {
        out.preferred = Preferred::Global;
    } else {
        out.preferred = Preferred::Inconclusive;
    }
    return out;
}

ModelComparison compare_models(const OlsResult& ols, const GwrResult& gwr) {
    if (ols.residuals.size() != gwr.local_residuals.size() || ols.beta.size() != gwr.local_beta.cols()) {
        throw Error(Errc::FrameMismatch, "OLS and GWR results were fitted on different frames");
    }
    return compare_aicc(ols.aicc, gwr.aicc);
}

StandardizedFrame standardize(const AnalysisFrame& frame) {
    frame.validate();
    StandardizedFrame out{frame, {}};
    const auto p = frame.X.cols();
    const double n = static_cast<double>(frame.X.rows());
    out.scaling.mean.resize(p);
    out.scaling.sd.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
        const double mean = frame.X.col(j).mean();
        const double var = (frame.X.col(j).array() - mean).square().sum() / n;
        if (!(var > 0.0)) {
            throw Error(Errc::ZeroVarianceColumn,
                        "predictor '" + frame.predictor_keys[static_cast<std::size_t>(j)] + "' has zero variance");
        }
        const double sd = std::sqrt(var);
        out.scaling.mean[j] = mean;
        out.scaling.sd[j] = sd;
        out.frame.X.col(j) = (frame.X.col(j).array() - mean) / sd;
    }
    return out;
}

Eigen::VectorXd unstandardize_coefficients(const Eigen::VectorXd& beta, const ScalingRecord& scaling) {
    const auto p = scaling.mean.size();
    if (beta.size() != p + 1) {
        throw Error(Errc::InvalidArgument, "coefficient vector length does not match scaling record");
    }
    Eigen::VectorXd raw(p + 1);
    raw[0] = beta[0];
    for (Eigen::Index j = 0; j < p; ++j) {
        raw[j + 1] = beta[j + 1] / scaling.sd[j];
        raw[0] -= beta[j + 1] * scaling.mean[j] / scaling.sd[j];
    }
    return raw;
}

}  // namespace upho::regression
