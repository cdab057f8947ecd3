// stoclim.cpp: command-line front end (spectrum, rates, generator, evolve, glauber, check)

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include <Eigen/Core>

#include "CLI11.hpp"
#include "stoclim/cli.hpp"

namespace {

using namespace stoclim;

struct Output {
    std::unique_ptr<std::ofstream> file;
    std::ostream& stream() { return file ? *file : std::cout; }
};

Output open_output(const std::string& path) {
    Output o;
    if (!path.empty() && path != "-") {
        o.file = std::make_unique<std::ofstream>(path);
        if (!*o.file) throw ConfigError("cannot write '" + path + "'");
    }
    return o;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"stoclim: stochastic-limit master equations for finite quantum systems"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::string out_path;
    std::string dos;
    bool json_output = false;
    int threads = 1;
    app.add_option("--config", config_path, "JSON run configuration");
    app.add_option("--out", out_path, "output file (default stdout)");
    app.add_flag("--json", json_output, "machine-readable output");
    app.add_option("--dos", dos, "density-of-states convention")->check(CLI::IsMember({"paper", "physical"}));
    app.add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

    auto* spectrum = app.add_subcommand("spectrum", "levels, Bohr frequencies and genericity");
    auto* rates = app.add_subcommand("rates", "correlation constants per Bohr frequency (CSV)");

    auto* generator = app.add_subcommand("generator", "structured generator (JSON) and optional dense matrix");
    std::string dense_path;
    generator->add_option("--dense", dense_path, "write the dense superoperator here (binary)");

    auto* evolve = app.add_subcommand("evolve", "density-matrix trajectory (CSV, eigenbasis)");
    std::optional<double> t_max;
    std::optional<int> points;
    evolve->add_option("--t-max", t_max, "final time");
    evolve->add_option("--points", points, "number of intervals");

    auto* glauber = app.add_subcommand("glauber", "Ising-chain Glauber dynamics (CSV)");
    cli::GlauberArgs ga;
    glauber->add_option("--sites", ga.sites, "number of sites");
    glauber->add_option("--coupling", ga.coupling, "bond coupling J");
    glauber->add_option("--beta", ga.beta, "inverse temperature");
    glauber->add_option("--boundary", ga.boundary, "open or periodic");
    glauber->add_option("--convention", ga.convention, "bond energy convention: half or full");
    glauber->add_option("--mode", ga.mode, "quantum or classical")->check(CLI::IsMember({"quantum", "classical"}));
    glauber->add_option("--observable", ga.observable, "magnetization, energy or all");
    glauber->add_option("--initial", ga.initial, "initial configuration, e.g. ++-+");
    glauber->add_option("--t-max", ga.t_max, "final time");
    glauber->add_option("--points", ga.points, "number of intervals");

    auto* check = app.add_subcommand("check", "run a property suite; exit 1 on failure");
    std::string suite;
    check->add_option("--suite", suite, "detailed-balance, leibniz, positivity, scaling, coherence-control")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : cli::kConfigError;
    }

    try {
        Eigen::setNbThreads(threads);
        cli::GlobalOptions g;
        g.json_output = json_output;
        g.threads = threads;
        if (!dos.empty()) g.dos = cli::parse_dos(dos, "--dos");

        std::optional<cli::RunConfig> cfg;
        if (!config_path.empty()) {
            cfg = cli::load_config(config_path);
            cli::apply_globals(*cfg, g);
        }
        auto need = [&]() -> const cli::RunConfig& {
            if (!cfg) throw ConfigError("--config is required for this command");
            return *cfg;
        };
        auto out = open_output(out_path);

        if (spectrum->parsed()) return cli::cmd_spectrum(need(), g, out.stream());
        if (rates->parsed()) return cli::cmd_rates(need(), g, out.stream());
        if (generator->parsed()) {
            return cli::cmd_generator(need(), g, out.stream(),
                                      dense_path.empty() ? std::nullopt : std::optional<std::string>(dense_path));
        }
        if (evolve->parsed()) return cli::cmd_evolve(need(), g, out.stream(), t_max, points);
        if (glauber->parsed()) return cli::cmd_glauber(cfg, ga, g, out.stream());
        if (check->parsed()) return cli::cmd_check(need(), suite, g, out.stream());
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return cli::kConfigError;
    }
    return cli::kOk;
}
