// cdrlab eye|sweep|track|oracle --config <file> --out <dir> [--offsets a:b:c] [--seed N]
// cdrlab plot --in <csv> --out <svg>
//
// Exit codes: 0 success, 2 config error, 3 lock failure, 4 I/O error,
// 1 anything else.

#include "cdrlab/commands.hpp"
#include "cdrlab/config.hpp"
#include "cdrlab/errors.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace cdrlab;

struct RunArgs {
    std::string config;
    std::string out;
    std::string offsets;
    std::optional<std::uint64_t> seed;
};

CLI::App* add_run_command(CLI::App& app, const char* name, const char* about, RunArgs& a, bool with_offsets) {
    auto* sub = app.add_subcommand(name, about);
    sub->add_option("--config", a.config, "experiment config file")->required();
    sub->add_option("--out", a.out, "output directory")->required();
    if (with_offsets) sub->add_option("--offsets", a.offsets, "offset range start:stop:step, mV");
    sub->add_option("--seed", a.seed, "override data.seed");
    return sub;
}

ExperimentConfig resolve(const RunArgs& a) {
    ExperimentConfig cfg = load_config(a.config);
    if (!a.offsets.empty()) cfg.analysis.offsets_mv = parse_offset_range(a.offsets);
    if (a.seed) cfg.data.seed = *a.seed;
    cfg.validate();
    return cfg;
}

void print_report(const std::string& dir) {
    std::cout << read_file(std::filesystem::path(dir) / "report.txt");
    std::cout << "wrote " << dir << "/manifest.json\n";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bang-bang CDR behavioural simulator"};
    app.require_subcommand(1);

    RunArgs args;
    auto* eye = add_run_command(app, "eye", "eye diagram and crossing histogram", args, false);
    auto* sweep = add_run_command(app, "sweep", "recovered-clock jitter vs sampler offset", args, true);
    auto* track = add_run_command(app, "track", "threshold-tracking time evolution", args, false);
    auto* oracle = add_run_command(app, "oracle", "Markov oracle vs simulation on the 1-bit-ISI model", args, false);

    std::string plot_in, plot_out;
    auto* plot = app.add_subcommand("plot", "render a CSV to SVG");
    plot->add_option("--in", plot_in, "CSV written by another command")->required();
    plot->add_option("--out", plot_out, "SVG file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        if (plot->parsed()) {
            cmd_plot(plot_in, plot_out);
            std::cout << "wrote " << plot_out << "\n";
            return 0;
        }
        const ExperimentConfig cfg = resolve(args);
        if (eye->parsed()) cmd_eye(cfg, args.out);
        else if (sweep->parsed()) cmd_sweep(cfg, args.out);
        else if (oracle->parsed()) cmd_oracle(cfg, args.out);
        else if (track->parsed()) {
            try {
                cmd_track(cfg, args.out);
            } catch (const LockError&) {
                print_report(args.out);
                throw;
            }
        }
        print_report(args.out);
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const LockError& e) {
        std::cerr << "lock failure: " << e.what() << "\n";
        return 3;
    } catch (const InsufficientDataError& e) {
        std::cerr << "lock failure: " << e.what() << "\n";
        return 3;
    } catch (const IoError& e) {
        std::cerr << "I/O error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
