#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace gfspec {

enum ExitCode : int {
    kExitOk = 0,
    kExitCriterionFailed = 1,
    kExitConfigError = 2,
    kExitRuntimeError = 3,
};

struct CliRequest {
    std::string command;  // check | simulate | pde | spectral | qsd | converge
    std::string config_path;
    std::optional<std::uint64_t> seed;  // overrides [run] seed
    unsigned threads = 1;
    std::string out_dir = ".";
    std::string spectral_dir;  // converge: reuse the spectral run stored there
};

/// Runs one subcommand. The JSON summary goes to `out` and to <out_dir>/<command>.json;
/// errors go to `err` as {"error": {"kind", "message"}}.
int run_cli(const CliRequest& req, std::ostream& out, std::ostream& err);

/// Thread count from a GFSPEC_THREADS-style string; `fallback` when absent or invalid.
unsigned threads_from_env(const char* value, unsigned fallback = 1);

}  // namespace gfspec
