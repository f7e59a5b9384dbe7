// One line per acceptance criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"
#include "gfspec/lyapunov.hpp"
#include "gfspec/pde.hpp"
#include "gfspec/pdmp.hpp"
#include "gfspec/qsd.hpp"
#include "gfspec/spectral.hpp"

using namespace gfspec;

namespace {

struct Outcome {
    bool pass = true;
    std::string detail;

    __attribute__((format(printf, 3, 4))) void require(bool ok, const char* fmt, ...)
    {
        char buf[256];
        va_list args;
        va_start(args, fmt);
        std::vsnprintf(buf, sizeof buf, fmt, args);
        va_end(args);
        if (!detail.empty()) detail += "; ";
        detail += buf;
        if (!ok) {
            detail += " [fail]";
            pass = false;
        }
    }
};

double one(double) { return 1.0; }
double id(double x) { return x; }

ModelSpec canonical(Interval dom = {1e-3, 8.0})
{
    return make_model(GrowthSpec::from_scale([](double x) { return x - 1.0; },
                                             [](double v) { return v + 1.0; }, one),
                      FragmentationKernel::relative(RelativeMeasure::uniform(), id), dom);
}

AssumptionReport canonical_report(const ModelSpec& m)
{
    return criterion_pseudo_entrance_report(m, 1.0 + std::sqrt(2.0));
}

// ---------------------------------------------------------------------------

Outcome thresholds()
{
    Outcome o;
    const auto u = criterion_uniform_kernel();
    o.require(std::abs(u.threshold - (3.0 + 2.0 * std::sqrt(2.0))) <= 1e-6 &&
                  std::abs(u.argmin - (1.0 + std::sqrt(2.0))) <= 1e-6,
              "uniform %.9f at alpha %.6f", u.threshold, u.argmin);
    const auto mit = criterion_mitosis_kernel();
    o.require(std::abs(mit.threshold - 3.86) <= 0.01, "mitosis %.4f", mit.threshold);
    const auto l = criterion_lnx(RelativeMeasure::uniform());
    o.require(std::abs(l.low - 2.0) <= 1e-6 && std::abs(l.high - 2.0) <= 1e-6, "lnx (%.9f, %.9f)",
              l.low, l.high);

    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> c0d(0.5, 5.0);
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double c0 = c0d(gen);
        const double ci = std::uniform_real_distribution<double>(0.5 * c0, c0)(gen);
        const auto r = criterion_reggen(c0, ci);
        const double closed = 3.0 * c0 - ci - 2.0 * std::sqrt(2.0 * c0 * (c0 - ci));
        worst = std::max({worst, std::abs(r.optimizer_max - closed), std::abs(r.closed_form - closed)});
    }
    o.require(worst <= 1e-6, "reggen worst gap %.2e over 20 pairs", worst);
    return o;
}

Outcome semigroup_identities()
{
    Outcome o;
    constexpr std::size_t kPaths = 100000;
    const auto mit = make_model(GrowthSpec::from_speed(one),
                                FragmentationKernel::relative(RelativeMeasure::mitosis(), one),
                                {1e-3, 8.0});
    const auto lin = make_model(GrowthSpec::from_speed(id),
                                FragmentationKernel::relative(RelativeMeasure::uniform(), one),
                                {1e-5, 16.0});
    const TiltedJumpLaw mit_law(mit, WeightFunction::constant(), 1.0);
    const TiltedJumpLaw lin_law(lin, WeightFunction::constant(), 1.0);

    double worst_mc = 0.0;
    for (double t : {0.5, 1.0, 2.0}) {
        const auto a = mc_semigroup(mit_law, one, 1.0, t, kPaths, 21);
        const auto b = mc_semigroup(lin_law, id, 1.0, t, kPaths, 22);
        const double za = std::abs(a.estimate - std::exp(t)) / a.std_error;
        const double zb = std::abs(b.estimate - std::exp(t)) / b.std_error;
        worst_mc = std::max({worst_mc, za, zb});
    }
    o.require(worst_mc <= 3.0, "MC worst |z| %.2f", worst_mc);

    const std::vector<double> ts{0.5, 1.0, 2.0};
    double worst_pde = 0.0;
    {
        const DiscreteOperator op(mit, SizeGrid::scale_uniform(mit, 2048));
        const auto traj = solve(StepMap(op), point_mass(op.grid(), 1.0), ts);
        for (const auto& st : traj.checkpoints) {
            worst_pde = std::max(worst_pde, std::abs(st.mass.sum() / std::exp(st.t) - 1.0));
        }
    }
    {
        const DiscreteOperator op(lin, SizeGrid::scale_uniform(lin, 2048));
        const auto traj = solve(StepMap(op), point_mass(op.grid(), 1.0), ts);
        const double x0 = op.grid().centers[op.grid().locate(1.0)];
        for (const auto& st : traj.checkpoints) {
            worst_pde = std::max(worst_pde,
                                 std::abs(pairing(op.grid(), st, id) / (x0 * std::exp(st.t)) - 1.0));
        }
    }
    o.require(worst_pde <= 0.01, "PDE worst relative error %.2e at N=2048", worst_pde);
    return o;
}

Outcome duality()
{
    Outcome o;
    const auto m = canonical();
    const auto rep = canonical_report(m);
    const TiltedJumpLaw law(m, rep.h, rep.b);
    const double t = 2.0;
    const std::vector<std::size_t> sizes{512, 1024, 2048};
    const std::vector<std::pair<const char*, ScalarFn>> fs{
        {"1", one}, {"id", id}, {"1_[1,2]", [](double x) { return x >= 1.0 && x <= 2.0 ? 1.0 : 0.0; }}};

    std::vector<std::vector<double>> pde(fs.size());
    std::vector<double> dx;
    for (std::size_t n : sizes) {
        const DiscreteOperator op(m, SizeGrid::scale_uniform(m, n));
        const auto traj = solve(StepMap(op), point_mass(op.grid(), 1.0), {t});
        dx.push_back(op.grid().ds);
        for (std::size_t k = 0; k < fs.size(); ++k) {
            pde[k].push_back(pairing(op.grid(), traj.checkpoints.back(), fs[k].second));
        }
    }
    for (std::size_t k = 0; k < fs.size(); ++k) {
        // First-order Richardson constant from each refinement pair; the larger one is used.
        double c_scheme = 0.0;
        for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
            c_scheme = std::max(c_scheme, std::abs(pde[k][i] - pde[k][i + 1]) / (dx[i] - dx[i + 1]));
        }
        const auto mc = mc_semigroup(law, fs[k].second, 1.0, t, 100000, 31 + k);
        const double gap = std::abs(pde[k].back() - mc.estimate);
        const double allowed = 3.0 * mc.std_error + c_scheme * dx.back();
        o.require(gap <= allowed, "f=%s |pde-mc| %.4f <= %.4f", fs[k].first, gap, allowed);
    }
    return o;
}

Outcome spectral_sign_and_bound()
{
    Outcome o;
    const auto m = canonical();
    const auto rep = canonical_report(m);
    const DiscreteOperator op(m, SizeGrid::scale_uniform(m, 256));
    const StepMap step(op);
    const auto tr = principal_eigen(step, rep.psi);
    o.require(tr.lambda0 < 0.0, "lambda0 %.6f", tr.lambda0);
    const auto l2 = lambda2_bound(m, identity_weight(m));
    bool bound = false;
    try {
        (void)lambda0_vs_bound(tr, l2.lambda2, false, 1e-6);
        bound = true;
    } catch (const Error&) {
    }
    o.require(bound, "lambda2 %.6f", l2.lambda2);
    const auto dense = principal_eigen_dense(step, rep.psi);
    const double dl = std::abs(dense.lambda0 - tr.lambda0);
    const double dv = std::max((dense.m - tr.m).cwiseAbs().maxCoeff(),
                               (dense.phi - tr.phi).cwiseAbs().maxCoeff());
    o.require(dl <= 1e-8 && dv <= 1e-8, "dense vs power %.1e (vectors %.1e)", dl, dv);
    return o;
}

Outcome gap_dichotomy()
{
    Outcome o;
    {
        const auto m = canonical();
        const auto rep = canonical_report(m);
        const DiscreteOperator op(m, SizeGrid::scale_uniform(m, 256));
        const StepMap step(op);
        const auto tr = principal_eigen(step, rep.psi);
        const auto traj = solve(step, point_mass(op.grid(), 1.0), lattice_times(step.dt(), 2.0, 20));
        try {
            const auto fit = fit_gap_rate(traj, tr, op.grid(), 1.0, one);
            o.require(fit.gamma > 0.0 && fit.r_squared > 0.99, "canonical gamma %.4f r2 %.6f", fit.gamma,
                      fit.r_squared);
        } catch (const Error& e) {
            o.require(false, "canonical %s", e.what());
        }
    }
    {
        const auto m = make_model(GrowthSpec::from_scale([](double x) { return std::log(x); },
                                                         [](double v) { return std::exp(v); }, id),
                                  FragmentationKernel::relative(RelativeMeasure::uniform(), one),
                                  {1e-8, 1e8});
        const DiscreteOperator op(m, SizeGrid::scale_uniform(m, 1024));
        const StepMap step(op);
        const auto tr = principal_eigen(step, WeightFunction::constant());
        const auto traj = solve(step, point_mass(op.grid(), 1.0), lattice_times(step.dt(), 50.0, 200));
        try {
            const auto fit = fit_gap_rate(traj, tr, op.grid(), 1.0, one);
            o.require(fit.r_squared < 0.9, "critical gamma %.4f r2 %.4f", fit.gamma, fit.r_squared);
        } catch (const Error& e) {
            o.require(e.kind() == ErrorKind::RatePositive, "critical %s", e.what());
        }
    }
    return o;
}

Outcome qsd_consistency()
{
    Outcome o;
    const auto m = canonical();
    const auto rep = canonical_report(m);
    const TiltedJumpLaw law(m, rep.h, rep.b);
    const std::size_t n = 128;
    const DiscreteOperator op(m, SizeGrid::scale_uniform(m, n));
    const auto& grid = op.grid();
    const auto tr = principal_eigen(StepMap(op), rep.psi);
    const auto tr2 = principal_eigen(StepMap(DiscreteOperator(m, SizeGrid::scale_uniform(m, 2 * n))),
                                     rep.psi);
    const double grid_tol = std::abs(tr.lambda0 - tr2.lambda0);

    FvOptions fo;
    fo.particles = 10000;
    fo.t_end = 20.0;
    const auto fv = fv_run(law, grid, 1.0, fo);
    const double diff = std::abs(fv.lambda0X - rep.b - tr.lambda0);
    o.require(diff <= fv.ci + grid_tol, "|lambda0X-b-lambda0| %.4f <= %.4f", diff, fv.ci + grid_tol);

    const auto rec = reconstruct_m_phi(grid, fv.nu, Eigen::VectorXd(), rep.h, rep.psi);
    const double tv = total_variation(rec.m, tr.m);
    o.require(tv <= 0.05, "TV %.4f", tv);

    std::vector<double> xs;
    std::vector<std::size_t> cells;
    for (std::size_t k = 0; k < 5; ++k) {
        cells.push_back(n / 4 + k * (n / 2 - 1) / 4);
        xs.push_back(grid.centers[cells.back()]);
    }
    EtaOptions eo;
    eo.particles = 200000;
    eo.max_drift = std::numeric_limits<double>::infinity();
    const auto eta = eta_estimate(law, xs, tr.lambda0 + rep.b, 3.0, eo);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t k = 0; k < xs.size(); ++k) {
        const double ratio = eta.eta[k] * rep.h(xs[k]) / tr.phi(static_cast<Eigen::Index>(cells[k]));
        lo = std::min(lo, ratio);
        hi = std::max(hi, ratio);
    }
    const double shape = (hi - lo) / (hi + lo);
    o.require(shape <= 0.05, "eta h vs phi %.4f on x in [%.2f, %.2f]", shape, xs.front(), xs.back());
    return o;
}

Outcome structural_invariants()
{
    Outcome o;
    double worst = 0.0;
    const std::vector<ModelSpec> flows{
        make_model(GrowthSpec::from_speed(one), FragmentationKernel::relative(RelativeMeasure::uniform(), id),
                   {1e-3, 1e3}),
        make_model(GrowthSpec::from_speed(id), FragmentationKernel::relative(RelativeMeasure::uniform(), one),
                   {1e-3, 1e3}),
        make_model(GrowthSpec::from_speed([](double x) { return std::sqrt(x) + 0.5 * x; }),
                   FragmentationKernel::relative(RelativeMeasure::mitosis(), one), {1e-3, 1e3}),
    };
    for (const auto& fm : flows) {
        const auto xs = probe_grid({1e-2, 1e2}, 64);
        for (double x : xs) {
            for (int j = 0; j < 64; ++j) {
                const double t = 3.0 * j / 63.0;
                worst = std::max(worst, std::abs(fm.flow->s_of(fm.flow->flow_at(x, t)) - fm.flow->s_of(x) - t));
            }
        }
    }
    o.require(worst <= 1e-10, "flow identity %.1e on 3 x 64x64", worst);

    const auto m = canonical();
    const auto rep = canonical_report(m);
    const TiltedJumpLaw law(m, rep.h, rep.b);
    const double t = 2.0;
    const auto ends = simulate_endpoints(law, 1.0, t, 100000, 41);
    const double cap = m.flow->flow_at(1.0, t);
    std::size_t above = 0;
    for (double x : ends) above += (!std::isnan(x) && x > cap) ? 1 : 0;
    o.require(above == 0, "support bound: %zu of 1e5 above %.4f", above, cap);

    // 1 + x solves A h = h exactly, so it is admissible with b = 1 and no killing.
    WeightFunction h2;
    h2.value = [](double x) { return 1.0 + x; };
    h2.s_derivative = one;
    h2.label = "1+x";
    const auto check2 = verify_assumption1(m, h2);
    const TiltedJumpLaw law2(m, h2, check2.b);
    double worst_z = 0.0;
    for (const ScalarFn& f : std::vector<ScalarFn>{one, id}) {
        const auto a = mc_semigroup(law, f, 1.0, 1.0, 50000, 51);
        const auto b = mc_semigroup(law2, f, 1.0, 1.0, 50000, 52);
        worst_z = std::max(worst_z, std::abs(a.estimate - b.estimate) /
                                        std::hypot(a.std_error, b.std_error));
    }
    o.require(worst_z <= 3.0, "h-independence worst |z| %.2f (b2 %.4f, checks %s)", worst_z, check2.b,
              check2.passed() ? "pass" : "fail");

    const auto r1 = mc_semigroup(law, id, 1.0, 1.0, 5000, 61, 1);
    const auto r2 = mc_semigroup(law, id, 1.0, 1.0, 5000, 61, 2);
    const auto e1 = simulate_endpoints(law, 1.0, 1.0, 2000, 62);
    const auto e2 = simulate_endpoints(law, 1.0, 1.0, 2000, 62);
    const auto grid = SizeGrid::scale_uniform(m, 64);
    FvOptions fo;
    fo.particles = 500;
    fo.t_end = 4.0;
    const auto f1 = fv_run(law, grid, 1.0, fo);
    const auto f2 = fv_run(law, grid, 1.0, fo);
    const bool same_ends = std::equal(e1.begin(), e1.end(), e2.begin(), [](double a, double b) {
        return (std::isnan(a) && std::isnan(b)) || a == b;
    });
    o.require(r1.estimate == r2.estimate && r1.std_error == r2.std_error && same_ends &&
                  f1.kills == f2.kills && f1.nu == f2.nu,
              "reruns bit-identical");
    return o;
}

}  // namespace

int main()
{
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"thresholds", thresholds},
        {"semigroup identities", semigroup_identities},
        {"duality", duality},
        {"spectral sign and bound", spectral_sign_and_bound},
        {"gap dichotomy", gap_dichotomy},
        {"qsd consistency", qsd_consistency},
        {"structural invariants", structural_invariants},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o.pass = false;
            o.detail = std::string("threw ") + e.what();
        }
        const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("criterion %zu %s: %s (%.1fs) %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL",
                    sec, o.detail.c_str());
        std::fflush(stdout);
        failed += o.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}
