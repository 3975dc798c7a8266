#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "upho/api.hpp"
#include "upho/error.hpp"
#include "upho/pipeline.hpp"

namespace {

using namespace upho;

constexpr int kOk = 0;
constexpr int kUsage = 2;
constexpr int kAnalyticFailure = 3;

std::vector<std::string> split_list(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& item : items) {
        std::stringstream ss(item);
        std::string part;
        while (std::getline(ss, part, ',')) {
            if (!part.empty()) {
                out.push_back(part);
            }
        }
    }
    return out;
}

int ingest_command(const pipeline::IngestOptions& options) {
    try {
        const auto report = pipeline::run_ingest(options);
        std::cout << "events " << report.events << ", rejects " << report.rejects << "\n";
        for (const auto& [level, c] : report.levels) {
            std::cout << geo::to_string(level) << ": events " << report.events << " = assigned " << c.assigned
                      << " + unassigned " << c.unassigned << " + rejects " << report.rejects << "\n";
        }
        if (report.indicator_rejects > 0) {
            std::cout << "indicator rows rejected: " << report.indicator_rejects << "\n";
        }
        if (report.mobility_rejects > 0) {
            std::cout << "mobility rows rejected: " << report.mobility_rejects << "\n";
        }
        return kOk;
    } catch (const std::exception& ex) {
        std::cerr << "ingest: " << ex.what() << "\n";
        return kUsage;
    }
}

struct AnalyzeFlags {
    std::vector<std::string> outcomes;
    std::vector<std::string> levels;
    std::vector<std::string> analytics{"all"};
    std::vector<std::string> predictors;
    std::vector<std::string> proxies;
    std::string intervention;
    std::string kernel = "bisquare";
    std::string bandwidth = "auto";
    std::string hotspot_bin = "weekly";
    std::string controls;
    std::string whitelist;
    bool fixed = false;
    bool no_fdr = false;
};

int analyze_command(pipeline::AnalyzeOptions options, const AnalyzeFlags& flags) {
    try {
        if (auto o = split_list(flags.outcomes); !o.empty()) {
            options.outcomes.clear();
            for (const auto& name : o) {
                options.outcomes.push_back(ingest::parse_outcome(name));
            }
        }
        for (const auto& name : split_list(flags.levels)) {
            options.levels.push_back(geo::parse_level(name));
        }
        const auto analytics = split_list(flags.analytics);
        if (analytics.empty() || std::find(analytics.begin(), analytics.end(), "all") == analytics.end()) {
            options.analytics.clear();
            for (const auto& name : analytics) {
                const auto a = repo::try_parse_analytic(name);
                if (!a) {
                    throw Error(Errc::InvalidArgument, "unknown analytic '" + name + "'");
                }
                options.analytics.insert(*a);
            }
        }
        if (!flags.intervention.empty()) {
            options.intervention = parse_date_or_throw(flags.intervention);
        }
        if (options.analytics.contains(repo::Analytic::Impact) && !options.intervention) {
            std::cerr << "analyze: impact analysis requires --intervention YYYY-MM-DD\n";
            return kUsage;
        }
        options.predictors = split_list(flags.predictors);
        for (const auto& link : flags.proxies) {
            const auto eq = link.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == link.size()) {
                throw Error(Errc::InvalidArgument, "--proxy expects indicator_key=metric, got '" + link + "'");
            }
            options.proxies[link.substr(0, eq)] = link.substr(eq + 1);
        }
        options.kernel = parse_kernel(flags.kernel);
        options.adaptive = !flags.fixed;
        if (flags.bandwidth != "auto") {
            options.bandwidth = std::stod(flags.bandwidth);
        }
        options.hotspot_bin = parse_calendar(flags.hotspot_bin);
        options.fdr = !flags.no_fdr;
        if (!flags.controls.empty()) {
            options.controls = flags.controls;
        }
        if (!flags.whitelist.empty()) {
            options.whitelist = flags.whitelist;
        }

        const auto report = pipeline::run_analyze(options);
        for (const auto& note : report.notes) {
            std::cout << "note: " << note << "\n";
        }
        std::cout << "results written " << report.written << ", new manifest entries " << report.new_entries << "\n";
        return kOk;
    } catch (const pipeline::AnalysisFailure& ex) {
        std::cerr << "analyze: " << ex.what() << "\n";
        return kAnalyticFailure;
    } catch (const std::exception& ex) {
        std::cerr << "analyze: " << ex.what() << "\n";
        return kUsage;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Urban population health observatory: ingest, analyze and serve surveillance analytics"};
    app.require_subcommand(1);

    pipeline::IngestOptions ingest;
    std::string mobility;
    std::string catalog_path;
    auto* ingest_cmd = app.add_subcommand("ingest", "Join and aggregate raw inputs into a repository");
    ingest_cmd->add_option("--geo", ingest.geo, "GeoJSON FeatureCollection of units")->required();
    ingest_cmd->add_option("--registry", ingest.registry, "Disease-event registry CSV")->required();
    ingest_cmd->add_option("--indicators", ingest.indicators, "Indicator values CSV")->required();
    ingest_cmd->add_option("--mobility", mobility, "Mobility metrics CSV");
    ingest_cmd->add_option("--catalog", catalog_path, "Indicator catalog CSV (default: built-in)");
    ingest_cmd->add_option("--out", ingest.out, "Repository directory")->required();
    ingest_cmd->add_flag("--reproducible", ingest.reproducible, "Pin manifest timestamps to the epoch");

    pipeline::AnalyzeOptions analyze;
    AnalyzeFlags flags;
    auto* analyze_cmd = app.add_subcommand("analyze", "Run analytics over an ingested repository");
    analyze_cmd->add_option("--repo", analyze.repo, "Repository directory")->required();
    analyze_cmd->add_option("--disease", analyze.disease, "Disease name")->capture_default_str();
    analyze_cmd->add_option("--outcomes", flags.outcomes, "Outcomes (default: all)");
    analyze_cmd->add_option("--levels", flags.levels, "Levels (default: every ingested level)");
    analyze_cmd->add_option("--analytics", flags.analytics,
                            "causal_structure, regression, impact, hotspots, distribution or all")
        ->capture_default_str();
    analyze_cmd->add_option("--intervention", flags.intervention, "Intervention date YYYY-MM-DD");
    analyze_cmd->add_option("--controls", flags.controls, "Control series CSV (date,<series>...)");
    analyze_cmd->add_option("--seed", analyze.seed, "Seed for all stochastic steps")->capture_default_str();
    analyze_cmd->add_option("--sims", analyze.n_sims, "Counterfactual simulation paths")->capture_default_str();
    analyze_cmd->add_flag("--reproducible", analyze.reproducible, "Pin manifest timestamps to the epoch");
    analyze_cmd->add_option("--predictors", flags.predictors, "Indicator keys (default: all at the level)");
    analyze_cmd->add_option("--kernel", flags.kernel, "GWR kernel: gaussian or bisquare")->capture_default_str();
    analyze_cmd->add_flag("--fixed", flags.fixed, "Fixed (km) instead of adaptive (neighbor count) bandwidth");
    analyze_cmd->add_option("--bandwidth", flags.bandwidth, "GWR bandwidth or auto")->capture_default_str();
    analyze_cmd->add_option("--hotspot-bin", flags.hotspot_bin, "Emerging hotspot bin: daily or weekly")
        ->capture_default_str();
    analyze_cmd->add_flag("--no-fdr", flags.no_fdr, "Classify hotspots on raw p-values");
    analyze_cmd->add_option("--tau", analyze.tau, "Minimum |rho| for causal edges")->capture_default_str();
    analyze_cmd->add_option("--alpha", analyze.alpha, "FDR level for causal edges")->capture_default_str();
    analyze_cmd->add_option("--whitelist", flags.whitelist, "Domain-knowledge pairs file");
    analyze_cmd->add_option("--proxy", flags.proxies, "Temporal proxy link indicator_key=mobility_metric");

    api::ServeOptions serve;
    std::string app_dir;
    auto* serve_cmd = app.add_subcommand("serve", "Serve repository results over HTTP");
    serve_cmd->add_option("--repo", serve.repo, "Repository directory")->required();
    serve_cmd->add_option("--bind", serve.bind, "host:port")->capture_default_str();
    serve_cmd->add_option("--auth", serve.auth, "Token file")->required();
    serve_cmd->add_option("--app", app_dir, "Static client directory mounted at /app");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    if (*ingest_cmd) {
        if (!mobility.empty()) {
            ingest.mobility = mobility;
        }
        if (!catalog_path.empty()) {
            ingest.catalog = catalog_path;
        }
        return ingest_command(ingest);
    }
    if (*analyze_cmd) {
        return analyze_command(analyze, flags);
    }
    if (!app_dir.empty()) {
        serve.app = app_dir;
    }
    return api::serve(serve, std::cout);
}
