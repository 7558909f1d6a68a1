// cbpscale — config-driven experiments on rescaled controlled branching
// processes and their continuous-state limits. Subcommands:
//   simulate  raw paths to CSV
//   converge  generator-gap and functional-deviation study over k
//   compare   marginal-law comparison against the limit process
//   check     control-family assumption verifiers
//   monotone  complete-monotonicity check of the discrete branching mechanism
//
// Exit codes: 0 success, 1 validation error, 2 numeric failure,
// 3 invariant violation.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "cbp/studies.hpp"

namespace {

struct CliArgs {
    std::string config_path;
    std::string out_path;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int threads = 0;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CliArgs& args) {
    cmd->add_option("--config", args.config_path, "experiment config file")->required();
    cmd->add_option("--out", args.out_path, "output CSV path (overrides the config)");
    cmd->add_option("--seed", args.seed, "seed override")->each([&args](const std::string&) {
        args.seed_given = true;
    });
    cmd->add_option("--threads", args.threads, "worker count (never affects results)");
    cmd->add_flag("--quiet", args.quiet, "suppress informational output");
}

int run(const std::string& subcommand, const CliArgs& args) {
    cbp::ExperimentConfig cfg = cbp::load_config_file(args.config_path);
    cbp::StudyOptions opt;
    opt.seed = args.seed_given ? args.seed : cfg.seed;
    opt.threads = args.threads > 0 ? args.threads
                                   : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    opt.quiet = args.quiet;

    std::string csv;
    if (subcommand == "simulate") csv = cbp::run_path_dump(cfg, opt);
    else if (subcommand == "converge") csv = cbp::run_convergence_study(cfg, opt);
    else if (subcommand == "compare") csv = cbp::run_distribution_comparison(cfg, opt);
    else if (subcommand == "check") csv = cbp::run_family_check(cfg, opt);
    else if (subcommand == "monotone") csv = cbp::run_monotone_check(cfg, opt);
    else throw cbp::ValidationError("unknown subcommand " + subcommand);

    const std::string out_path = !args.out_path.empty() ? args.out_path : cfg.out_path;
    if (out_path.empty() || out_path == "-") {
        std::cout << csv;
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw cbp::ValidationError("cannot open output file: " + out_path);
        out << csv;
        if (!args.quiet)
            std::cerr << subcommand << ": wrote " << out_path << " (seed " << opt.seed << ", "
                      << opt.threads << " threads)\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"scaling-limit experiments for controlled branching processes"};
    app.require_subcommand(1);

    CliArgs args;
    const char* names[] = {"simulate", "converge", "compare", "check", "monotone"};
    const char* descs[] = {"simulate paths to CSV", "run the convergence study",
                           "compare marginal laws against the limit",
                           "run family assumption verifiers", "run the complete-monotonicity check"};
    for (int i = 0; i < 5; ++i) add_common(app.add_subcommand(names[i], descs[i]), args);

    CLI11_PARSE(app, argc, argv);

    try {
        return run(app.get_subcommands().front()->get_name(), args);
    } catch (const cbp::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const cbp::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << '\n';
        return 2;
    } catch (const cbp::InvariantError& e) {
        std::cerr << "invariant violation: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
}
