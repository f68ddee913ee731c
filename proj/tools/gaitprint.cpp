// gaitprint command line: ingest, train, evaluate, cma, plot.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "gaitprint/commands.hpp"
#include "gaitprint/error.hpp"

namespace {

struct Flags {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<std::string> method;
    std::optional<int> jobs;
    std::vector<std::string> subjects;
    bool verbose = false;
    bool quiet = false;
};

gaitprint::ExperimentConfig resolve(const Flags& f)
{
    auto cfg = gaitprint::load_config(f.config);
    if (f.seed) {
        cfg.seed = *f.seed;
        cfg.split.seed = *f.seed;
    }
    if (f.out)
        cfg.out_dir = *f.out;
    if (f.method)
        cfg.method = *f.method;
    if (f.jobs)
        cfg.jobs = *f.jobs;
    if (!f.subjects.empty())
        cfg.cma_subjects = f.subjects;
    cfg.validate();
    return cfg;
}

} // namespace

int main(int argc, char** argv)
{
    spdlog::set_default_logger(spdlog::stderr_color_st("gaitprint"));
    spdlog::set_pattern("%^[%l]%$ %v");

    CLI::App app{"Identify people from wrist accelerometry recorded while walking."};
    app.require_subcommand(1);
    Flags f;
    const auto add_common = [&](CLI::App* sub) {
        sub->add_option("-c,--config", f.config, "experiment config (INI)")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", f.seed, "override experiment.seed");
        sub->add_option("-o,--out", f.out, "override output.dir");
        sub->add_option("-m,--method", f.method, "gridcell-logistic or funreg");
        sub->add_option("-j,--jobs", f.jobs, "worker threads (0 = all cores, capped by GAITPRINT_JOBS)");
        sub->add_flag("-v,--verbose", f.verbose, "debug logging");
        sub->add_flag("-q,--quiet", f.quiet, "warnings and errors only");
    };

    auto* ingest = app.add_subcommand("ingest", "parse raw recordings into the interval store");
    auto* train = app.add_subcommand("train", "split, featurize and fit one-vs-rest models");
    auto* evaluate = app.add_subcommand("evaluate", "rank-k accuracy and seconds sensitivity on the test split");
    auto* cma = app.add_subcommand("cma", "simultaneous intervals and fingerprint plots for grid-cell models");
    auto* plot = app.add_subcommand("plot", "redraw SVG figures from existing outputs");
    for (auto* sub : {ingest, train, evaluate, cma, plot})
        add_common(sub);
    cma->add_option("-s,--subject", f.subjects, "restrict to these subjects");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    if (f.verbose)
        spdlog::set_level(spdlog::level::debug);
    else if (f.quiet)
        spdlog::set_level(spdlog::level::warn);

    return gaitprint::run_guarded([&] {
        const auto cfg = resolve(f);
        if (ingest->parsed())
            gaitprint::cmd_ingest(cfg);
        else if (train->parsed())
            gaitprint::cmd_train(cfg);
        else if (evaluate->parsed())
            gaitprint::cmd_evaluate(cfg);
        else if (cma->parsed())
            gaitprint::cmd_cma(cfg);
        else if (plot->parsed())
            gaitprint::cmd_plot(cfg);
    });
}
