#include <CLI11.hpp>

#include <cstdlib>
#include <utility>
#include <iostream>

#include "gfspec/cli.hpp"

int main(int argc, char** argv)
{
    CLI::App app{"gfspec: growth-fragmentation semigroups, spectra and quasi-stationary laws"};
    app.require_subcommand(1);

    gfspec::CliRequest req;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    const std::pair<const char*, const char*> commands[] = {
        {"check", "verify the drift criteria for the configured regime"},
        {"simulate", "Monte Carlo estimate of T_t f(x0) and path endpoints"},
        {"pde", "finite-volume density u_t from a point mass at x0"},
        {"spectral", "principal eigen-triple and the lambda2 bound"},
        {"qsd", "Fleming-Viot quasi-stationary law, lambda0 and optional eta"},
        {"converge", "fitted rate of convergence to the asymptotic profile"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", req.config_path, "run configuration file")->required();
        sub->add_option("--seed", seed, "override the [run] seed");
        sub->add_option("--threads", threads, "worker threads (default: GFSPEC_THREADS or 1)");
        sub->add_option("--out", req.out_dir, "output directory");
        if (std::string(name) == "converge") {
            sub->add_option("--spectral", req.spectral_dir, "directory of a prior spectral run");
        }
        sub->callback([&req, name, sub, &seed] {
            req.command = name;
            if (sub->count("--seed")) req.seed = seed;
        });
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : gfspec::kExitConfigError;
    }
    req.threads = threads > 0 ? threads : gfspec::threads_from_env(std::getenv("GFSPEC_THREADS"));
    return gfspec::run_cli(req, std::cout, std::cerr);
}
