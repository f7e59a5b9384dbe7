#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "gfspec/cli.hpp"
#include "gfspec/config.hpp"
#include "gfspec/errors.hpp"

using namespace gfspec;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name)
{
    const auto p = fs::temp_directory_path() / ("gfspec_cli_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

fs::path write_config(const fs::path& dir, const std::string& text)
{
    const auto p = dir / "run.cfg";
    std::ofstream(p) << text;
    return p;
}

const char* kCanonical = R"(# c = 1, K = x, uniform fragments
[model]
growth = constant
rate = power
kernel = uniform
[numerics]
N = 64
[run]
n_paths = 200
particles = 200
t_end = 2
checkpoints = 16
regime = pseudo-entrance
)";

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(const std::string& command, const fs::path& cfg, const fs::path& out_dir,
        const std::string& spectral_dir = "")
{
    CliRequest r;
    r.command = command;
    r.config_path = cfg.string();
    r.out_dir = out_dir.string();
    r.spectral_dir = spectral_dir;
    std::ostringstream o, e;
    const int code = run_cli(r, o, e);
    return {code, o.str(), e.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream is(p, std::ios::binary);
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("config parsing")
{
    std::istringstream ok("[model]\nkernel = mitosis  # equal halves\n[run]\nseed = 7\nx0 = 2\n");
    const auto cfg = parse_config(ok);
    CHECK(cfg.kernel == "mitosis");
    CHECK(cfg.seed == 7);
    CHECK(cfg.x0 == 2.0);
    CHECK(cfg.N == 256);

    for (const char* bad : {"[model]\ngrowht = constant\n", "[modle]\n", "[model]\nkernel = halves\n",
                            "[run]\nn_paths = 0\n", "[run]\nx0 = 100\n", "[run]\nseed = -1\n",
                            "[numerics]\nx_min = 2\n", "kernel = uniform\n"}) {
        std::istringstream is(bad);
        CHECK_THROWS_AS(parse_config(is), Error);
    }
    try {
        std::istringstream is("[model]\ngrowht = constant\n");
        parse_config(is);
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::ConfigError);
        CHECK(e.message().find("growht") != std::string::npos);
    }

    std::istringstream a("[run]\nx0=2\n[model]\nkernel=uniform\n");
    std::istringstream b("[model]\n  kernel = uniform\n[run]\n  x0 = 2.0e0\n");
    CHECK(parse_config(a).hash() == parse_config(b).hash());
    std::istringstream c("[run]\nx0=2\nseed=4\n");
    CHECK(parse_config(c).hash() != parse_config(a).hash());
}

TEST_CASE("json writer")
{
    nlohmann::ordered_json j;
    j["b"] = 0.1;
    j["a"] = 3;
    j["v"] = {1.5, true, nullptr};
    CHECK(format_json(j, -1) == R"({"b":0.10000000000000001,"a":3,"v":[1.5,true,null]})");
    j["bad"] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(format_json(j), Error);
}

TEST_CASE("threads from environment")
{
    CHECK(threads_from_env(nullptr, 3) == 3);
    CHECK(threads_from_env("4") == 4);
    CHECK(threads_from_env("zero", 2) == 2);
    CHECK(threads_from_env("0", 2) == 2);
}

TEST_CASE("subcommands")
{
    const auto dir = scratch("run");
    const auto cfg = write_config(dir, kCanonical);

    const auto check = run("check", cfg, dir / "a");
    CHECK(check.code == kExitOk);
    const auto report = nlohmann::json::parse(check.out);
    CHECK(report["report"]["pass"] == true);
    CHECK(std::abs(report["report"]["parameters"]["uniform_kernel_threshold"].get<double>() -
                   (3.0 + 2.0 * std::sqrt(2.0))) <= 1e-12);

    for (const char* cmd : {"simulate", "pde", "spectral", "qsd"}) {
        CAPTURE(cmd);
        const auto first = run(cmd, cfg, dir / "a");
        const auto second = run(cmd, cfg, dir / "b");
        CHECK(first.code == kExitOk);
        CHECK(first.out == second.out);
    }
    CHECK(slurp(dir / "a" / "endpoints.csv") == slurp(dir / "b" / "endpoints.csv"));
    CHECK(slurp(dir / "a" / "qsd.csv") == slurp(dir / "b" / "qsd.csv"));
    CHECK(nlohmann::json::parse(slurp(dir / "a" / "spectral.json"))["triple"]["lambda0"] < 0.0);

    const auto conv = run("converge", cfg, dir / "c", (dir / "a").string());
    CHECK(conv.code == kExitOk);
    CHECK(nlohmann::json::parse(conv.out)["gap"] == true);

    const auto other = write_config(scratch("other"), std::string(kCanonical) + "seed = 9\n");
    const auto refused = run("converge", other, dir / "c", (dir / "a").string());
    CHECK(refused.code == kExitConfigError);
    CHECK(refused.err.find("config hash") != std::string::npos);
}

TEST_CASE("error exits")
{
    const auto dir = scratch("err");
    const auto missing = run("check", dir / "absent.cfg", dir);
    CHECK(missing.code == kExitConfigError);
    CHECK(nlohmann::json::parse(missing.err)["error"]["kind"] == "ConfigError");

    const auto cfg = write_config(dir, "[model]\nrate = fast\n");
    const auto bad = run("check", cfg, dir);
    CHECK(bad.code == kExitConfigError);
    CHECK(bad.err.find("rate") != std::string::npos);
    CHECK(bad.out.empty());

    const auto crit = write_config(scratch("crit"), "[model]\ngrowth = linear\nrate = constant\n"
                                                    "[numerics]\nx_min = 1e-8\nx_max = 1e8\n"
                                                    "[run]\nregime = lnx\n");
    CHECK(run("check", crit, dir).code == kExitCriterionFailed);
    CHECK(run("dance", cfg, dir).code == kExitConfigError);
}
