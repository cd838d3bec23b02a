#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "frf/campaign.hpp"

namespace {

int report_stage(const char* name, const frf::campaign::StageReport& rep, bool verbose) {
    if (verbose)
        for (const auto& n : rep.notes) std::printf("[%s] %s\n", name, n.c_str());
    for (const auto& f : rep.failures) std::fprintf(stderr, "[%s] FAIL %s\n", name, f.c_str());
    std::printf("[%s] %s\n", name, rep.ok ? "ok" : "failed");
    return rep.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FRF estimation workbench: simulate, estimate, fit, report"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_override;
    int jobs = 1;
    std::optional<std::uint64_t> seed_override;
    bool verbose = false;
    app.add_option("--config", config_path, "campaign configuration (JSON)")
        ->required()
        ->check(CLI::ExistingFile);
    app.add_option("--out", out_override, "output directory (defaults to config output_dir)");
    app.add_option("--jobs", jobs, "worker threads over configurations")
        ->check(CLI::PositiveNumber);
    app.add_option("--seed", seed_override, "override the campaign seed");
    app.add_flag("-v,--verbose", verbose, "print per-stage timing notes");

    auto* sim = app.add_subcommand("simulate", "run closed-loop experiments, write data + truth");
    auto* est = app.add_subcommand("estimate", "run every configured estimator on stored data");
    auto* fit = app.add_subcommand("fit", "gray-box parameter fit on stored estimates");
    auto* rep = app.add_subcommand("report", "bias tables and plot curves from stored results");
    auto* all = app.add_subcommand("all", "all four stages in order");

    CLI11_PARSE(app, argc, argv);

    try {
        frf::campaign::CampaignConfig cfg = frf::campaign::load_config(config_path);
        if (seed_override) cfg.seed = *seed_override;
        const std::filesystem::path out =
            out_override.empty() ? std::filesystem::path(cfg.output_dir)
                                 : std::filesystem::path(out_override);

        int rc = 0;
        const bool run_all = all->parsed();
        if (run_all || sim->parsed())
            rc |= report_stage("simulate", frf::campaign::run_simulate(cfg, out, jobs), verbose);
        if (rc == 0 && (run_all || est->parsed()))
            rc |= report_stage("estimate", frf::campaign::run_estimate(cfg, out, jobs), verbose);
        if (rc == 0 && (run_all || fit->parsed()))
            rc |= report_stage("fit", frf::campaign::run_fit(cfg, out, jobs), verbose);
        if (rc == 0 && (run_all || rep->parsed()))
            rc |= report_stage("report", frf::campaign::run_report(cfg, out), verbose);
        return rc;
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
}
