#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "gfspec/model.hpp"
#include "gfspec/pde.hpp"

namespace gfspec {

/// Parsed run configuration. Text form is sectioned key = value:
///
///   [model]     growth, growth_c0, growth_c1, growth_power, rate, rate_k0, rate_k1,
///               rate_gamma, kernel, kernel_beta, kinks, irreducible, doeblin
///   [numerics]  N, x_min, x_max, dt, quad_tol, scheme
///   [run]       seed, n_paths, particles, t_end, checkpoints, x0, regime, alpha,
///               observable, f_lo, f_hi, burn_in, fit_burn_in, eta_particles, t_probe
///
/// '#' starts a comment. Unknown sections or keys are errors.
struct RunConfig {
    // [model]
    std::string growth = "constant";  // constant | linear | power | affine
    double growth_c0 = 1.0;
    double growth_c1 = 1.0;
    double growth_power = 1.0;
    std::string rate = "power";  // constant | power | affine
    double rate_k0 = 1.0;
    double rate_k1 = 0.0;
    double rate_gamma = 1.0;
    std::string kernel = "uniform";  // uniform | mitosis | power
    double kernel_beta = 0.0;
    std::vector<double> kinks;
    bool irreducible = false;
    std::vector<double> doeblin;  // lo, hi, a

    // [numerics]
    std::size_t N = 256;
    double x_min = 1e-3;
    double x_max = 8.0;
    double dt = 0.0;
    double quad_tol = 1e-8;
    std::string scheme = "euler";  // euler | heun

    // [run]
    std::uint64_t seed = 1;
    std::size_t n_paths = 10000;
    std::size_t particles = 10000;
    double t_end = 2.0;
    std::size_t checkpoints = 20;
    double x0 = 1.0;
    std::string regime = "auto";  // auto | pseudo-entrance | lnx | K-constant | entrance
    double alpha = 2.414213562373095;
    std::string observable = "one";  // one | id | indicator
    double f_lo = 1.0;
    double f_hi = 2.0;
    double burn_in = 0.3;
    double fit_burn_in = 0.2;
    std::size_t eta_particles = 0;
    double t_probe = 3.0;

    /// Every key in fixed order with normalized values; the hash input.
    std::string canonical() const;
    std::uint64_t hash() const;
    std::string hash_hex() const;
};

/// ConfigError naming the offending key or line.
RunConfig parse_config(std::istream& is);
RunConfig load_config(const std::string& path);

ModelSpec build_model(const RunConfig& cfg);
ScalarFn build_observable(const RunConfig& cfg);
SolveOptions solve_options(const RunConfig& cfg);

std::uint64_t fnv1a(std::string_view bytes);

/// Serializes with keys in insertion order and doubles as %.17g. Non-finite numbers are
/// rejected with DomainError.
std::string format_json(const nlohmann::ordered_json& j, int indent = 2);

}  // namespace gfspec
