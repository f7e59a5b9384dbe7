#include "gfspec/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "gfspec/config.hpp"
#include "gfspec/errors.hpp"
#include "gfspec/lyapunov.hpp"
#include "gfspec/pdmp.hpp"
#include "gfspec/qsd.hpp"
#include "gfspec/spectral.hpp"

namespace gfspec {

namespace {

using Json = nlohmann::ordered_json;

struct Context {
    RunConfig cfg;
    ModelSpec model;
    unsigned threads = 1;
    std::filesystem::path out_dir;
};

std::string g17(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Json header(const Context& c, const std::string& command)
{
    Json j;
    j["command"] = command;
    j["config_hash"] = c.cfg.hash_hex();
    j["seed"] = c.cfg.seed;
    return j;
}

Json number_or_null(double v)
{
    if (std::isfinite(v)) return v;
    return nullptr;
}

std::ofstream open_csv(const Context& c, const std::string& name)
{
    std::ofstream os(c.out_dir / name, std::ios::binary);
    if (!os) throw Error(ErrorKind::ConfigError, "cannot write to output directory '" + c.out_dir.string() + "'");
    return os;
}

bool linear_growth(const RunConfig& cfg)
{
    return cfg.growth == "linear" || (cfg.growth == "power" && cfg.growth_power == 1.0);
}

SpectralTriple spectral_with(const Context& c, const SizeGrid& grid, const WeightFunction& psi)
{
    const DiscreteOperator op(c.model, grid);
    return principal_eigen(StepMap(op, solve_options(c.cfg)), psi);
}

AssumptionReport select_report(const Context& c)
{
    std::string regime = c.cfg.regime;
    if (regime == "auto") regime = linear_growth(c.cfg) ? "lnx" : "pseudo-entrance";
    if (regime == "pseudo-entrance") return criterion_pseudo_entrance_report(c.model, c.cfg.alpha);
    if (regime == "lnx") return criterion_lnx_report(c.model);
    if (regime == "K-constant") return criterion_K_constant(c.model);
    const auto grid = SizeGrid::scale_uniform(c.model, c.cfg.N);
    const double l0 = spectral_with(c, grid, WeightFunction::constant()).lambda0;
    return criterion_entrance(c.model, l0);
}

/// Weight and bound for the h-process; CriterionViolated when the regime built none.
AssumptionReport require_weight(AssumptionReport rep)
{
    if (!rep.h.value || !std::isfinite(rep.b)) {
        throw Error(ErrorKind::CriterionViolated, "regime '" + rep.regime + "' produced no admissible weight h");
    }
    return rep;
}

std::vector<double> checkpoint_times(const Context& c, const StepMap& step)
{
    const double steps = std::floor(c.cfg.t_end / step.dt());
    if (steps < static_cast<double>(c.cfg.checkpoints)) {
        throw Error(ErrorKind::ConfigError, "config key 'checkpoints': " + std::to_string(c.cfg.checkpoints) +
                                                " exceeds the " + std::to_string(static_cast<long>(steps)) +
                                                " solver steps up to t_end");
    }
    return lattice_times(step.dt(), c.cfg.t_end, c.cfg.checkpoints);
}

int cmd_check(const Context& c, Json& j)
{
    const auto rep = select_report(c);
    j["report"] = to_json(rep);
    return rep.passed() ? kExitOk : kExitCriterionFailed;
}

int cmd_simulate(const Context& c, Json& j)
{
    const auto rep = require_weight(select_report(c));
    const TiltedJumpLaw law(c.model, rep.h, rep.b);
    const auto f = build_observable(c.cfg);
    const auto mc = mc_semigroup(law, f, c.cfg.x0, c.cfg.t_end, c.cfg.n_paths, c.cfg.seed, c.threads);
    const auto ends = simulate_endpoints(law, c.cfg.x0, c.cfg.t_end, c.cfg.n_paths, c.cfg.seed, c.threads);
    auto os = open_csv(c, "endpoints.csv");
    os << "path,x,alive\r\n";
    for (std::size_t i = 0; i < ends.size(); ++i) {
        const bool alive = !std::isnan(ends[i]);
        os << i << ',' << (alive ? g17(ends[i]) : "") << ',' << (alive ? 1 : 0) << "\r\n";
    }
    j["regime"] = rep.regime;
    j["criteria_pass"] = rep.passed();
    j["b"] = rep.b;
    j["x0"] = c.cfg.x0;
    j["t"] = c.cfg.t_end;
    j["observable"] = c.cfg.observable;
    j["estimate"] = number_or_null(mc.estimate);
    j["std_error"] = number_or_null(mc.std_error);
    j["n_paths"] = mc.n_paths;
    j["alive_fraction"] = mc.alive_fraction;
    j["variance_blowup"] = mc.variance_blowup;
    return kExitOk;
}

int cmd_pde(const Context& c, Json& j)
{
    const auto grid = SizeGrid::scale_uniform(c.model, c.cfg.N);
    const DiscreteOperator op(c.model, grid);
    const StepMap step(op, solve_options(c.cfg));
    const auto traj = solve(step, point_mass(grid, c.cfg.x0), checkpoint_times(c, step));
    auto os = open_csv(c, "density.csv");
    write_checkpoints_csv(os, grid, traj);
    const auto f = build_observable(c.cfg);
    Json cps = Json::array();
    for (const auto& st : traj.checkpoints) {
        cps.push_back({{"t", st.t}, {"mass", pairing(grid, st, [](double) { return 1.0; })},
                       {"pairing", pairing(grid, st, f)}});
    }
    j["N"] = c.cfg.N;
    j["ds"] = grid.ds;
    j["substeps"] = step.substeps();
    j["observable"] = c.cfg.observable;
    j["checkpoints"] = cps;
    j["below_grid_inflow"] = traj.below_grid_inflow;
    j["right_outflow"] = traj.right_outflow;
    j["left_boundary_flag"] = traj.left_boundary_flag;
    return kExitOk;
}

Json triple_json(const SpectralTriple& tr)
{
    return {{"lambda0", tr.lambda0},
            {"step_rho", tr.step_rho},
            {"right_residual", tr.right_residual},
            {"left_residual", tr.left_residual},
            {"iterations", tr.iterations},
            {"m_psi", tr.normalization.m_psi},
            {"phi_over_psi", tr.normalization.phi_over_psi},
            {"duality", tr.normalization.duality}};
}

int cmd_spectral(const Context& c, Json& j)
{
    const auto rep = select_report(c);
    const WeightFunction psi = rep.psi.value ? rep.psi : WeightFunction::constant();
    const WeightFunction psi_prime = rep.psi_prime.value ? rep.psi_prime : identity_weight(c.model);
    const auto grid = SizeGrid::scale_uniform(c.model, c.cfg.N);
    const auto tr = spectral_with(c, grid, psi);
    auto os = open_csv(c, "triple.csv");
    write_triple_csv(os, grid, tr);
    j["N"] = c.cfg.N;
    j["psi"] = psi.label;
    j["triple"] = triple_json(tr);
    const auto l2 = lambda2_bound(c.model, psi_prime);
    j["lambda2"] = number_or_null(l2.lambda2);
    j["lambda2_nonconstant"] = l2.nonconstant;
    try {
        const auto b = lambda0_vs_bound(tr, l2.lambda2, l2.nonconstant);
        j["bound_margin"] = number_or_null(b.margin);
        j["bound_holds"] = true;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::BoundViolated) throw;
        j["bound_margin"] = number_or_null(l2.lambda2 - tr.lambda0);
        j["bound_holds"] = false;
        return kExitCriterionFailed;
    }
    return kExitOk;
}

int cmd_qsd(const Context& c, Json& j)
{
    const auto rep = require_weight(select_report(c));
    const TiltedJumpLaw law(c.model, rep.h, rep.b);
    const auto grid = SizeGrid::scale_uniform(c.model, c.cfg.N);
    FvOptions fo;
    fo.particles = c.cfg.particles;
    fo.t_end = c.cfg.t_end;
    fo.burn_in = c.cfg.burn_in;
    fo.seed = c.cfg.seed;
    const auto fv = fv_run(law, grid, c.cfg.x0, fo);
    const WeightFunction psi = rep.psi.value ? rep.psi : WeightFunction::constant();
    const auto rec = reconstruct_m_phi(grid, fv.nu, Eigen::VectorXd(), rep.h, psi);

    auto os = open_csv(c, "qsd.csv");
    os << "x,nu,m\r\n";
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        os << g17(grid.centers[i]) << ',' << g17(fv.nu(k)) << ',' << g17(rec.m(k)) << "\r\n";
    }
    j["regime"] = rep.regime;
    j["criteria_pass"] = rep.passed();
    j["b"] = rep.b;
    j["lambda0X"] = fv.lambda0X;
    j["ci"] = fv.ci;
    j["lambda0"] = fv.lambda0X - rep.b;
    j["particles"] = fv.particles;
    j["kills"] = fv.kills;
    j["kills_post_burn_in"] = fv.kills_post_burn_in;
    j["burn_in_time"] = fv.burn_in_time;
    j["stall"] = fv.stall;
    j["doeblin_declared"] = fv.supported;
    j["split_half_tv"] = fv.split_half_tv;
    j["batch_rates"] = fv.batch_rates;
    if (c.cfg.eta_particles > 0) {
        std::vector<double> xs;
        const std::size_t n = grid.size();
        for (std::size_t k = 0; k < 5; ++k) xs.push_back(grid.centers[n / 4 + k * (n / 2 - 1) / 4]);
        EtaOptions eo;
        eo.particles = c.cfg.eta_particles;
        eo.seed = c.cfg.seed + 1;
        eo.threads = c.threads;
        eo.max_drift = std::numeric_limits<double>::infinity();
        const auto eta = eta_estimate(law, xs, fv.lambda0X, c.cfg.t_probe, eo);
        Json e;
        e["t_probe"] = c.cfg.t_probe;
        e["x"] = eta.x;
        e["eta"] = eta.eta;
        e["eta_long"] = eta.eta_long;
        e["max_drift"] = eta.max_drift;
        j["eta"] = e;
        if (eta.max_drift > 0.1) return kExitCriterionFailed;
    }
    return kExitOk;
}

/// Triple from a previous `spectral` run in `dir`; refuses a different config hash.
SpectralTriple load_triple(const Context& c, const std::filesystem::path& dir, const SizeGrid& grid)
{
    std::ifstream js(dir / "spectral.json");
    if (!js) throw Error(ErrorKind::ConfigError, "no spectral.json in '" + dir.string() + "'");
    Json prior;
    try {
        prior = Json::parse(js);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::ConfigError, std::string("unreadable spectral.json: ") + e.what());
    }
    if (prior.value("config_hash", std::string()) != c.cfg.hash_hex()) {
        throw Error(ErrorKind::ConfigError, "spectral run has config hash " +
                                                prior.value("config_hash", std::string("?")) +
                                                ", this run has " + c.cfg.hash_hex());
    }
    SpectralTriple tr;
    const auto& t = prior.at("triple");
    tr.lambda0 = t.at("lambda0").get<double>();
    tr.step_rho = t.at("step_rho").get<double>();
    tr.normalization = {t.at("m_psi").get<double>(), t.at("phi_over_psi").get<double>(),
                        t.at("duality").get<double>()};
    std::ifstream csv(dir / "triple.csv");
    std::string line;
    std::getline(csv, line);
    tr.phi.resize(static_cast<Eigen::Index>(grid.size()));
    tr.m.resize(static_cast<Eigen::Index>(grid.size()));
    Eigen::Index i = 0;
    while (std::getline(csv, line) && i < tr.phi.size()) {
        double x = 0.0, phi = 0.0, m = 0.0;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &phi, &m) != 3) break;
        tr.phi(i) = phi;
        tr.m(i) = m;
        ++i;
    }
    if (i != tr.phi.size()) throw Error(ErrorKind::ConfigError, "triple.csv does not match the grid");
    return tr;
}

int cmd_converge(const Context& c, Json& j, const std::string& spectral_dir)
{
    const auto grid = SizeGrid::scale_uniform(c.model, c.cfg.N);
    SpectralTriple tr;
    if (spectral_dir.empty()) {
        const auto rep = select_report(c);
        tr = spectral_with(c, grid, rep.psi.value ? rep.psi : WeightFunction::constant());
        j["spectral"] = "inline";
    } else {
        tr = load_triple(c, spectral_dir, grid);
        j["spectral"] = spectral_dir;
    }
    const DiscreteOperator op(c.model, grid);
    const StepMap step(op, solve_options(c.cfg));
    const auto traj = solve(step, point_mass(grid, c.cfg.x0), checkpoint_times(c, step));
    j["lambda0"] = tr.lambda0;
    j["observable"] = c.cfg.observable;
    j["horizon"] = traj.checkpoints.back().t;
    try {
        const auto fit = fit_gap_rate(traj, tr, grid, c.cfg.x0, build_observable(c.cfg), c.cfg.fit_burn_in);
        j["gamma"] = fit.gamma;
        j["r_squared"] = fit.r_squared;
        j["points"] = fit.points;
        j["rate_positive"] = false;
        j["gap"] = fit.gamma > 0.0 && fit.r_squared >= 0.9;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::RatePositive) throw;
        j["gamma"] = nullptr;
        j["r_squared"] = nullptr;
        j["rate_positive"] = true;
        j["gap"] = false;
    }
    return kExitOk;
}

void emit_error(std::ostream& err, const std::string& kind, const std::string& message)
{
    Json e;
    e["error"] = {{"kind", kind}, {"message", message}};
    err << e.dump() << '\n';
}

}  // namespace

unsigned threads_from_env(const char* value, unsigned fallback)
{
    if (!value || !*value) return fallback;
    char* end = nullptr;
    const unsigned long v = std::strtoul(value, &end, 10);
    if (*end != '\0' || v == 0 || v > 4096) return fallback;
    return static_cast<unsigned>(v);
}

int run_cli(const CliRequest& req, std::ostream& out, std::ostream& err)
{
    try {
        Context c;
        c.cfg = load_config(req.config_path);
        if (req.seed) c.cfg.seed = *req.seed;
        c.threads = std::max(1u, req.threads);
        c.out_dir = req.out_dir.empty() ? std::filesystem::path(".") : std::filesystem::path(req.out_dir);
        std::error_code ec;
        std::filesystem::create_directories(c.out_dir, ec);
        if (ec) throw Error(ErrorKind::ConfigError, "cannot create output directory '" + req.out_dir + "'");
        c.model = build_model(c.cfg);

        Json j = header(c, req.command);
        int code = kExitOk;
        if (req.command == "check") code = cmd_check(c, j);
        else if (req.command == "simulate") code = cmd_simulate(c, j);
        else if (req.command == "pde") code = cmd_pde(c, j);
        else if (req.command == "spectral") code = cmd_spectral(c, j);
        else if (req.command == "qsd") code = cmd_qsd(c, j);
        else if (req.command == "converge") code = cmd_converge(c, j, req.spectral_dir);
        else throw Error(ErrorKind::ConfigError, "unknown command '" + req.command + "'");

        const std::string text = format_json(j) + "\n";
        std::ofstream js(c.out_dir / (req.command + ".json"), std::ios::binary);
        js << text;
        out << text;
        return code;
    } catch (const Error& e) {
        emit_error(err, std::string(e.name()), e.message());
        return e.kind() == ErrorKind::ConfigError ? kExitConfigError : kExitRuntimeError;
    } catch (const std::exception& e) {
        emit_error(err, "InternalError", e.what());
        return kExitRuntimeError;
    }
}

}  // namespace gfspec
