#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "support.hpp"
#include "upho/causal.hpp"
#include "upho/error.hpp"

namespace {

using namespace upho;
using namespace upho::causal;
namespace ts = upho::test_support;

Errc code_of(auto&& fn) {
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "no upho::Error thrown";
    return Errc::InvalidArgument;
}

// rank_i = #(x_j < x_i) + (#(x_j == x_i) + 1) / 2
std::vector<long double> oracle_ranks(const std::vector<double>& x) {
    std::vector<long double> r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        long double less = 0, equal = 0;
        for (double v : x) {
            less += v < x[i];
            equal += v == x[i];
        }
        r[i] = less + (equal + 1) / 2;
    }
    return r;
}

double oracle_rho(const std::vector<double>& x, const std::vector<double>& y) {
    const auto rx = oracle_ranks(x);
    const auto ry = oracle_ranks(y);
    const long double n = rx.size();
    long double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    long double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
        sxy += (rx[i] - mx) * (ry[i] - my);
        sxx += (rx[i] - mx) * (rx[i] - mx);
        syy += (ry[i] - my) * (ry[i] - my);
    }
    return static_cast<double>(sxy / std::sqrt(sxx * syy));
}

std::vector<double> normals(std::mt19937_64& rng, std::size_t n) {
    std::normal_distribution<double> z;
    std::vector<double> out(n);
    for (auto& v : out) v = z(rng);
    return out;
}

TEST(Spearman, ThreePointExample) {
    const std::vector<double> x{1, 2, 3}, y{2, 1, 3};
    EXPECT_NEAR(spearman(x, y).rho, 1.0 - 6.0 * 2.0 / (3.0 * 8.0), 1e-15);
}

TEST(Spearman, MonotoneIsOneWithZeroP) {
    const std::vector<double> x{1, 2, 3, 4, 5, 6}, y{-3, 0.5, 2, 10, 11, 400};
    const auto r = spearman(x, y);
    EXPECT_DOUBLE_EQ(r.rho, 1.0);
    EXPECT_EQ(r.p, 0.0);
    std::vector<double> down(y.rbegin(), y.rend());
    EXPECT_DOUBLE_EQ(spearman(x, down).rho, -1.0);
}

TEST(Spearman, AllPermutationsUpToSeven) {
    for (std::size_t n = 3; n <= 7; ++n) {
        std::vector<double> x(n);
        std::iota(x.begin(), x.end(), 1.0);
        // one untied and one tied reference
        std::vector<double> tied(n);
        for (std::size_t i = 0; i < n; ++i) tied[i] = static_cast<double>(i / 2);
        for (const auto& ref : {x, tied}) {
            std::vector<double> perm = x;
            do {
                EXPECT_NEAR(spearman(ref, perm).rho, oracle_rho(ref, perm), 1e-12);
            } while (std::next_permutation(perm.begin(), perm.end()));
        }
    }
}

TEST(Spearman, RandomTiedFixtures) {
    std::mt19937_64 rng(12);
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t n = 3 + rng() % 40;
        std::uniform_int_distribution<int> level(0, 1 + static_cast<int>(rng() % 6));
        std::vector<double> x(n), y(n);
        for (std::size_t i = 0; i < n; ++i) {
            x[i] = level(rng);
            y[i] = level(rng);
        }
        if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; }) ||
            std::all_of(y.begin(), y.end(), [&](double v) { return v == y[0]; })) {
            continue;
        }
        EXPECT_NEAR(spearman(x, y).rho, oracle_rho(x, y), 1e-12) << "rep " << rep;
    }
}

TEST(Spearman, ReferencePValues) {
    std::vector<double> a{17, 86, 60, 77, 47, 3, 70, 87, 88, 92};
    const std::vector<double> b{70, 29, 85, 61, 80, 34, 60, 31, 73, 66};
    auto r = spearman(a, b);
    EXPECT_NEAR(r.rho, -0.16363636363636364, 1e-14);
    EXPECT_NEAR(r.p, 0.6514773427962428, 1e-12);
    a[7] = 47;
    r = spearman(a, b);
    EXPECT_NEAR(r.rho, 0.024316221747202587, 1e-14);
    EXPECT_NEAR(r.p, 0.9468397049085097, 1e-12);
}

TEST(Spearman, SymmetricAndMonotoneInvariant) {
    std::mt19937_64 rng(13);
    for (int rep = 0; rep < 50; ++rep) {
        const auto x = normals(rng, 30);
        const auto y = normals(rng, 30);
        const auto base = spearman(x, y);
        EXPECT_EQ(base.rho, spearman(y, x).rho);
        std::vector<double> ex(x.size()), cube(y.size());
        std::transform(x.begin(), x.end(), ex.begin(), [](double v) { return std::exp(v); });
        std::transform(y.begin(), y.end(), cube.begin(), [](double v) { return v * v * v; });
        EXPECT_NEAR(spearman(ex, y).rho, base.rho, 1e-12);
        EXPECT_NEAR(spearman(x, cube).rho, base.rho, 1e-12);
        EXPECT_NEAR(spearman(ex, cube).p, base.p, 1e-12);
    }
}

TEST(Spearman, Errors) {
    const std::vector<double> three{1, 2, 3}, four{1, 2, 3, 4}, flat{5, 5, 5};
    EXPECT_EQ(code_of([&] { spearman(three, four); }), Errc::LengthMismatch);
    EXPECT_EQ(code_of([&] { spearman(three, flat); }), Errc::ZeroVariance);
    const std::vector<double> two{1, 2};
    EXPECT_EQ(code_of([&] { spearman(two, two); }), Errc::InvalidArgument);
}

TEST(MidRanks, TiesShareAverage) {
    const std::vector<double> x{3, 1, 3, 2, 3};
    const auto r = mid_ranks(x);
    EXPECT_EQ(r, (std::vector<double>{4, 1, 4, 2, 4}));
}

// ---------------------------------------------------------------------------

TEST(Hill, PerfectMonotoneWhitelistedStatic) {
    std::vector<double> x(40), y(40);
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = static_cast<double>(i);
        y[i] = std::exp(0.1 * static_cast<double>(i));
    }
    const auto h = hill_score(x, y, nullptr, true, HillConfig{});
    EXPECT_DOUBLE_EQ(h.strength, 1.0);
    EXPECT_DOUBLE_EQ(h.consistency, 1.0);
    EXPECT_DOUBLE_EQ(h.gradient, 1.0);
    EXPECT_DOUBLE_EQ(h.temporality, 0.5);
    EXPECT_DOUBLE_EQ(h.plausibility, 1.0);
    EXPECT_DOUBLE_EQ(h.total, 4.5 / 5.0);
}

TEST(Hill, TotalIsWeightedMean) {
    HillScore s{0.2, 0.4, 1.0, 0.6, 0.0, 0.0};
    EXPECT_DOUBLE_EQ(hill_total(s, HillWeights{}), (0.2 + 0.4 + 1.0 + 0.6) / 5.0);
    const HillWeights w{2.0, 0.0, 1.0, 1.0, 4.0};
    EXPECT_DOUBLE_EQ(hill_total(s, w), (0.4 + 1.0 + 0.6) / 8.0);
    EXPECT_EQ(code_of([&] { hill_total(s, HillWeights{0, 0, 0, 0, 0}); }), Errc::InvalidArgument);
}

TEST(Hill, ConsistencyIsSeededAndBounded) {
    std::mt19937_64 rng(21);
    const auto x = normals(rng, 60);
    const auto y = normals(rng, 60);
    HillConfig c;
    c.seed = 5;
    const double a = consistency_score(x, y, 1.0, c, 7);
    EXPECT_EQ(a, consistency_score(x, y, 1.0, c, 7));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, 1.0);
    // agreement fractions for opposite signs add to 1 when no subsample is tied
    const double b = consistency_score(x, y, -1.0, c, 7);
    EXPECT_TRUE(a == 0.0 || b == 0.0);
}

TEST(Hill, ConsistencyFractionRescaled) {
    std::mt19937_64 rng(22);
    auto x = normals(rng, 25);
    auto y = x;
    for (auto& v : y) v += 2.0 * normals(rng, 1)[0];
    HillConfig c;
    c.seed = 3;
    c.subsamples = 1;
    c.subsample_fraction = 1.0;  // the full sample, so the sign always agrees
    const double full = spearman(x, y).rho;
    EXPECT_DOUBLE_EQ(consistency_score(x, y, full > 0 ? 1.0 : -1.0, c, 0), 1.0);
    EXPECT_DOUBLE_EQ(consistency_score(x, y, full > 0 ? -1.0 : 1.0, c, 0), 0.0);
}

TEST(Hill, GradientFromQuartileMeans) {
    std::vector<double> x(16), y(16);
    for (std::size_t i = 0; i < 16; ++i) {
        x[i] = static_cast<double>(i);
        y[i] = static_cast<double>(i / 4 + 1);  // quartile means 1, 2, 3, 4
    }
    EXPECT_DOUBLE_EQ(gradient_score(x, y), 1.0);
    // means 2, 1, 3, 4 -> Spearman of (1..4) against them
    for (std::size_t i = 0; i < 4; ++i) {
        y[i] = 2;
        y[4 + i] = 1;
    }
    EXPECT_NEAR(gradient_score(x, y), 1.0 - 6.0 * 2.0 / (4.0 * 15.0), 1e-12);
    std::fill(y.begin(), y.end(), 3.0);
    EXPECT_EQ(gradient_score(x, y), 0.0);
    EXPECT_EQ(gradient_score(std::vector<double>{1, 2, 3}, std::vector<double>{1, 2, 3}), 0.0);
}

TEST(Hill, PeakLagSign) {
    std::mt19937_64 rng(23);
    const auto driver = normals(rng, 120);
    // outcome_{s+3} = proxy_s
    TemporalProxy leads{std::vector<double>(driver.begin() + 3, driver.end()),
                        std::vector<double>(driver.begin(), driver.end() - 3)};
    TemporalProxy lags{leads.outcome, leads.proxy};
    EXPECT_EQ(peak_lag(leads, 14), 3);
    EXPECT_EQ(temporality_score(&leads, 14), 1.0);
    EXPECT_EQ(peak_lag(lags, 14), -3);
    EXPECT_EQ(temporality_score(&lags, 14), 0.0);
    EXPECT_EQ(temporality_score(nullptr, 14), 0.5);

    TemporalProxy flat{std::vector<double>(50, 1.0), driver};
    flat.outcome.resize(50);
    EXPECT_FALSE(peak_lag(flat, 14).has_value());
    EXPECT_EQ(temporality_score(&flat, 14), 0.5);
    TemporalProxy short_series{{1, 2, 3}, {3, 1, 2}};
    EXPECT_FALSE(peak_lag(short_series, 14).has_value());
}

TEST(Hill, IndependentNoiseScoresLowStrength) {
    // Static indicators always contribute temporality 0.5, and 80% subsamples
    // mostly repeat the full-sample sign, so the total sits well above the
    // strength term even for noise.
    int weak = 0;
    int total_below = 0;
    for (int seed = 0; seed < 100; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        const auto x = normals(rng, 49);
        const auto y = normals(rng, 49);
        HillConfig c;
        c.seed = static_cast<std::uint64_t>(seed);
        const auto h = hill_score(x, y, nullptr, false, c);
        weak += h.strength < 0.3;
        total_below += h.total < 0.3;
        EXPECT_GE(h.total, 0.1);
        EXPECT_EQ(h.plausibility, 0.0);
    }
    EXPECT_GE(weak, 95);
    RecordProperty("total_below_0_3", total_below);
}

// ---------------------------------------------------------------------------

TEST(Whitelist, ParsesPairsAndComments) {
    std::istringstream in("# header\npct_poverty cases\n\n  air_quality_index   hospitalizations # trailing\n");
    const auto w = read_whitelist(in);
    EXPECT_EQ(w.size(), 2u);
    EXPECT_TRUE(w.contains("pct_poverty", "cases"));
    EXPECT_TRUE(w.contains("air_quality_index", "hospitalizations"));
    EXPECT_FALSE(w.contains("pct_poverty", "deaths"));
}

TEST(Whitelist, RejectsMalformedLines) {
    std::istringstream one("pct_poverty\n");
    EXPECT_EQ(code_of([&] { read_whitelist(one); }), Errc::ParseError);
    std::istringstream three("ok cases\na b c\n");
    try {
        read_whitelist(three);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
    }
}

// ---------------------------------------------------------------------------

struct Fixture {
    AnalysisFrame frame;
    catalog::Catalog catalog = catalog::builtin_catalog();
};

// Columns named with catalog keys; y depends on the first `signal` columns.
Fixture make_fixture(std::uint64_t seed, std::size_t n, const std::vector<std::string>& keys,
                     const std::vector<double>& effects) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> z;
    Eigen::MatrixXd X(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(keys.size()));
    for (Eigen::Index i = 0; i < X.rows(); ++i)
        for (Eigen::Index j = 0; j < X.cols(); ++j) X(i, j) = z(rng);
    Eigen::VectorXd y(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        y(i) = z(rng);
        for (std::size_t j = 0; j < effects.size(); ++j) y(i) += effects[j] * X(i, static_cast<Eigen::Index>(j));
    }
    Fixture f;
    f.frame = ts::make_frame(X, y);
    f.frame.predictor_keys = keys;
    return f;
}

const std::set<catalog::SdohDomain> kAllDomains{
    catalog::SdohDomain::AccessResources, catalog::SdohDomain::Exposure,  catalog::SdohDomain::PolicyAdherence,
    catalog::SdohDomain::Community,       catalog::SdohDomain::Awareness, catalog::SdohDomain::BuiltEnvironment};

const std::vector<std::string> kKeys{"pct_baccalaureate", "housing_unit_count", "pct_no_vehicle",
                                     "pct_poverty",       "crime_rate",         "pct_smokers"};

// Step-up BH on raw p-values: reject every p at or below the largest
// p_(k) with p_(k) <= k alpha / m.
std::vector<bool> bh_rejections(const std::vector<double>& p, double alpha) {
    std::vector<double> sorted = p;
    std::sort(sorted.begin(), sorted.end());
    const double m = static_cast<double>(p.size());
    double cut = -1.0;
    for (std::size_t k = 0; k < sorted.size(); ++k) {
        if (sorted[k] <= static_cast<double>(k + 1) * alpha / m) cut = sorted[k];
    }
    std::vector<bool> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i] <= cut;
    return out;
}

std::vector<double> column(const AnalysisFrame& f, std::size_t j) {
    const auto c = f.X.col(static_cast<Eigen::Index>(j));
    return {c.data(), c.data() + c.size()};
}

TEST(CausalStructure, EdgeSetMatchesStepUpOracle) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        auto fx = make_fixture(seed, 60, kKeys, {0.5, 0.3, -0.4, 0.15});
        // correlate two indicators so undirected edges appear
        fx.frame.X.col(1) += 0.6 * fx.frame.X.col(0);
        CausalConfig cfg;
        cfg.tau = 0.2;
        const auto cs = build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, cfg);

        const std::vector<double> y(fx.frame.y.data(), fx.frame.y.data() + fx.frame.y.size());
        struct T {
            std::size_t a;
            int b;
            SpearmanResult r;
        };
        std::vector<T> tests;
        for (std::size_t i = 0; i < kKeys.size(); ++i) tests.push_back({i, -1, spearman(column(fx.frame, i), y)});
        for (std::size_t i = 0; i < kKeys.size(); ++i)
            for (std::size_t j = i + 1; j < kKeys.size(); ++j)
                tests.push_back({i, static_cast<int>(j), spearman(column(fx.frame, i), column(fx.frame, j))});
        std::vector<double> p;
        for (const auto& t : tests) p.push_back(t.r.p);
        const auto reject = bh_rejections(p, cfg.alpha);

        std::set<std::string> retained;
        std::vector<std::tuple<std::string, std::string, bool>> expected;
        for (std::size_t k = 0; k < tests.size(); ++k) {
            const auto& t = tests[k];
            if (!reject[k] || std::abs(t.r.rho) < cfg.tau) continue;
            if (t.b < 0) {
                retained.insert(kKeys[t.a]);
                expected.emplace_back(kKeys[t.a], "tests", true);
            } else if (retained.contains(kKeys[t.a]) && retained.contains(kKeys[static_cast<std::size_t>(t.b)])) {
                expected.emplace_back(kKeys[t.a], kKeys[static_cast<std::size_t>(t.b)], false);
            }
        }
        std::vector<std::tuple<std::string, std::string, bool>> got;
        for (const auto& e : cs.edges) {
            got.emplace_back(e.from, e.to, e.directed);
            EXPECT_GE(std::abs(e.rho), cfg.tau);
            EXPECT_LT(e.p_adjusted, cfg.alpha);
            EXPECT_GE(e.p_adjusted, e.p);
            EXPECT_EQ(e.sign == Sign::Positive, e.rho >= 0);
            EXPECT_EQ(e.hill.has_value(), e.directed);
        }
        EXPECT_EQ(got, expected) << "seed " << seed;
    }
}

TEST(CausalStructure, SignsFollowEngineeredEffects) {
    const auto fx = make_fixture(4, 200, kKeys, {1.0, 1.0, -1.0});
    const auto cs = build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, CausalConfig{});
    std::map<std::string, Sign> directed;
    for (const auto& e : cs.edges)
        if (e.directed) directed[e.from] = e.sign;
    EXPECT_EQ(directed.at("pct_baccalaureate"), Sign::Positive);
    EXPECT_EQ(directed.at("housing_unit_count"), Sign::Positive);
    EXPECT_EQ(directed.at("pct_no_vehicle"), Sign::Negative);
}

TEST(CausalStructure, NoiseRarelyYieldsEdges) {
    int clean = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        const auto fx = make_fixture(500 + seed, 49, kKeys, {});
        const auto cs = build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, CausalConfig{});
        clean += cs.edges.empty();
    }
    EXPECT_GE(clean, 95);
}

TEST(CausalStructure, TauOneKeepsOnlyPerfectMonotone) {
    auto fx = make_fixture(6, 40, kKeys, {2.0});
    for (Eigen::Index i = 0; i < fx.frame.X.rows(); ++i) fx.frame.X(i, 2) = std::exp(fx.frame.y(i));
    CausalConfig cfg;
    cfg.tau = 1.0;
    const auto cs = build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, cfg);
    ASSERT_EQ(cs.edges.size(), 1u);
    EXPECT_EQ(cs.edges[0].from, "pct_no_vehicle");
    EXPECT_DOUBLE_EQ(cs.edges[0].rho, 1.0);
}

TEST(CausalStructure, DomainSelectionAndCrossListing) {
    const auto fx = make_fixture(7, 50, kKeys, {1.0, 1.0, -1.0});
    // pct_no_vehicle is cross-listed under Exposure
    const auto cs = build_causal_structure(fx.frame, "tests", fx.catalog, {catalog::SdohDomain::Exposure}, CausalConfig{});
    ASSERT_EQ(cs.nodes.size(), 2u);
    EXPECT_TRUE(cs.nodes[0].is_outcome);
    EXPECT_EQ(cs.nodes[1].id, "pct_no_vehicle");
    EXPECT_EQ(cs.nodes[1].domain, catalog::SdohDomain::AccessResources);
    EXPECT_EQ(code_of([&] {
                  build_causal_structure(fx.frame, "tests", fx.catalog, {}, CausalConfig{});
              }),
              Errc::NoIndicatorsSelected);
}

TEST(CausalStructure, ConstantColumnsAreDropped) {
    auto fx = make_fixture(8, 50, kKeys, {1.0});
    fx.frame.X.col(3).setConstant(12.5);
    const auto cs = build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, CausalConfig{});
    EXPECT_EQ(cs.dropped, std::vector<std::string>{"pct_poverty"});
    for (const auto& n : cs.nodes) EXPECT_NE(n.id, "pct_poverty");

    fx.frame.X.setConstant(1.0);
    EXPECT_EQ(code_of([&] {
                  build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, CausalConfig{});
              }),
              Errc::NoIndicatorsSelected);
    auto flat = make_fixture(8, 50, kKeys, {});
    flat.frame.y.setConstant(3.0);
    EXPECT_EQ(code_of([&] {
                  build_causal_structure(flat.frame, "tests", flat.catalog, kAllDomains, CausalConfig{});
              }),
              Errc::ZeroVariance);
}

TEST(CausalStructure, HillUsesWhitelistAndProxies) {
    const auto fx = make_fixture(9, 80, kKeys, {1.0, 1.0});
    CausalConfig cfg;
    cfg.whitelist.add("pct_baccalaureate", "tests");
    std::mt19937_64 rng(9);
    const auto d = normals(rng, 60);
    cfg.proxies["housing_unit_count"] = {std::vector<double>(d.begin() + 2, d.end()),
                                         std::vector<double>(d.begin(), d.end() - 2)};
    const auto cs = build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, cfg);
    std::map<std::string, HillScore> hill;
    for (const auto& e : cs.edges)
        if (e.directed) hill[e.from] = *e.hill;
    ASSERT_TRUE(hill.contains("pct_baccalaureate"));
    ASSERT_TRUE(hill.contains("housing_unit_count"));
    EXPECT_EQ(hill["pct_baccalaureate"].plausibility, 1.0);
    EXPECT_EQ(hill["pct_baccalaureate"].temporality, 0.5);
    EXPECT_EQ(hill["housing_unit_count"].plausibility, 0.0);
    EXPECT_EQ(hill["housing_unit_count"].temporality, 1.0);
}

TEST(CausalStructure, CanonicalJsonIsDeterministic) {
    const auto fx = make_fixture(10, 60, kKeys, {0.8, 0.6, -0.7});
    CausalConfig cfg;
    cfg.hill.seed = 99;
    const auto a = to_json(build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, cfg)).dump();
    const auto b = to_json(build_causal_structure(fx.frame, "tests", fx.catalog, kAllDomains, cfg)).dump();
    EXPECT_EQ(a, b);
    EXPECT_NE(a.find("\"hill\""), std::string::npos);
}

}  // namespace
