#include "gfspec/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"

namespace gfspec {

GrowthSpec GrowthSpec::from_speed(ScalarFn c, std::vector<double> kinks)
{
    GrowthSpec g;
    g.kind = Kind::SpeedC;
    g.c = std::move(c);
    g.kinks = std::move(kinks);
    return g;
}

GrowthSpec GrowthSpec::from_scale(ScalarFn s, ScalarFn s_inverse, ScalarFn c,
                                  std::vector<double> kinks)
{
    GrowthSpec g;
    g.kind = Kind::ExplicitS;
    g.s = std::move(s);
    g.s_inverse = std::move(s_inverse);
    g.c = std::move(c);
    g.kinks = std::move(kinks);
    return g;
}

// ---------------------------------------------------------------------------

double RelativeMeasure::integrate(const ScalarFn& g, std::span<const double> breaks,
                                  const QuadratureOptions& opt) const
{
    double total = 0.0;
    for (const auto& [u, w] : atoms) total += w * g(u);
    if (density) {
        std::vector<double> cuts(density_breaks.begin(), density_breaks.end());
        cuts.insert(cuts.end(), breaks.begin(), breaks.end());
        const ScalarFn& d = density;
        total += integrate_singular_piecewise([&](double u) { return g(u) * d(u); }, 0.0, 1.0,
                                              cuts, opt);
    }
    return total;
}

double RelativeMeasure::moment(double a) const
{
    try {
        return integrate([a](double u) { return std::pow(u, a); });
    } catch (const Error& e) {
        throw Error(ErrorKind::MomentDivergence,
                    "moment of order " + std::to_string(a) + " diverges (" + e.what() + ")");
    }
}

std::optional<double> RelativeMeasure::mass() const
{
    try {
        return moment(0.0);
    } catch (const Error&) {
        return std::nullopt;
    }
}

bool RelativeMeasure::conservative(double tol) const
{
    return std::abs(moment(1.0) - 1.0) <= tol;
}

RelativeMeasure RelativeMeasure::uniform()
{
    RelativeMeasure p;
    p.density = [](double) { return 2.0; };
    p.power_density = std::pair{2.0, 0.0};
    return p;
}

RelativeMeasure RelativeMeasure::mitosis()
{
    RelativeMeasure p;
    p.atoms = {{0.5, 2.0}};
    return p;
}

RelativeMeasure RelativeMeasure::power(double C, double beta)
{
    RelativeMeasure p;
    p.density = [C, beta](double u) { return C * std::pow(u, beta); };
    p.power_density = std::pair{C, beta};
    return p;
}

// ---------------------------------------------------------------------------

FragmentationKernel FragmentationKernel::relative(RelativeMeasure p, ScalarFn K,
                                                  std::vector<double> K_kinks)
{
    for (const auto& [u, w] : p.atoms) {
        if (!(u > 0.0 && u < 1.0) || !(w >= 0.0)) {
            throw Error(ErrorKind::DomainError, "relative atom outside (0,1) or negative weight");
        }
    }
    FragmentationKernel k;
    k.kind_ = Kind::Relative;
    k.p_ = std::move(p);
    k.K_ = std::move(K);
    k.K_kinks_ = std::move(K_kinks);
    return k;
}

FragmentationKernel FragmentationKernel::general(std::function<KernelMeasure(double)> kernel,
                                                 ScalarFn K, std::vector<double> K_kinks)
{
    FragmentationKernel k;
    k.kind_ = Kind::General;
    k.general_ = std::move(kernel);
    k.K_ = std::move(K);
    k.K_kinks_ = std::move(K_kinks);
    return k;
}

KernelMeasure FragmentationKernel::measure_at(double x) const
{
    if (kind_ == Kind::General) return general_(x);
    KernelMeasure m;
    const double K = K_(x);
    for (const auto& [u, w] : p_.atoms) m.atoms.emplace_back(u * x, K * w);
    if (p_.density) {
        const ScalarFn d = p_.density;
        m.density = [d, K, x](double y) { return K * d(y / x) / x; };
        for (double b : p_.density_breaks) m.breaks.push_back(b * x);
    }
    return m;
}

double FragmentationKernel::integrate(double x, const ScalarFn& g,
                                      std::span<const double> g_kinks,
                                      const QuadratureOptions& opt) const
{
    if (!(x > 0.0)) throw Error(ErrorKind::DomainError, "kernel evaluated at x <= 0");
    if (kind_ == Kind::Relative) {
        const double K = K_(x);
        if (K == 0.0) return 0.0;
        std::vector<double> breaks;
        for (double y : g_kinks) {
            if (y > 0.0 && y < x) breaks.push_back(y / x);
        }
        return K * p_.integrate([&](double u) { return g(u * x); }, breaks, opt);
    }
    const KernelMeasure m = general_(x);
    double total = 0.0;
    for (const auto& [y, w] : m.atoms) {
        if (!(y > 0.0 && y < x)) {
            throw Error(ErrorKind::DomainError, "kernel atom outside (0, x)");
        }
        total += w * g(y);
    }
    if (m.density) {
        std::vector<double> cuts = m.breaks;
        cuts.insert(cuts.end(), g_kinks.begin(), g_kinks.end());
        total += integrate_singular_piecewise([&](double y) { return g(y) * m.density(y); }, 0.0,
                                              x, cuts, opt);
    }
    return total;
}

double FragmentationKernel::total_mass(double x) const
{
    return integrate(x, [](double) { return 1.0; });
}

// ---------------------------------------------------------------------------

WeightFunction WeightFunction::constant(double v)
{
    WeightFunction w;
    w.value = [v](double) { return v; };
    w.s_derivative = [](double) { return 0.0; };
    w.log_s_derivative = [](double) { return 0.0; };
    w.sup_below = [v](double) { return v; };
    w.label = "constant";
    return w;
}

WeightFunction identity_weight(const ModelSpec& model)
{
    WeightFunction w;
    auto flow = model.flow;
    w.value = [](double x) { return x; };
    w.s_derivative = [flow](double x) { return flow->speed(x); };
    w.sup_below = [](double x) { return x; };
    w.label = "id";
    return w;
}

double ModelSpec::speed(double x) const { return flow->speed(x); }

double ModelSpec::s(double x) const { return flow->s_of(x); }

std::vector<double> ModelSpec::kinks() const
{
    std::vector<double> k = growth.kinks;
    k.insert(k.end(), frag.rate_kinks().begin(), frag.rate_kinks().end());
    std::sort(k.begin(), k.end());
    k.erase(std::unique(k.begin(), k.end()), k.end());
    return k;
}

std::vector<double> probe_grid(const Interval& domain, std::size_t n)
{
    std::vector<double> x(n);
    const double a = std::log(domain.lo);
    const double b = std::log(domain.hi);
    for (std::size_t i = 0; i < n; ++i) {
        x[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    return x;
}

ModelSpec make_model(GrowthSpec growth, FragmentationKernel frag, Interval domain,
                     Declarations declared, ModelOptions opt)
{
    if (!(domain.lo > 0.0 && domain.lo < 1.0 && domain.hi > 1.0)) {
        throw Error(ErrorKind::DomainError, "domain must satisfy 0 < x_min < 1 < x_max");
    }
    FlowEngine::Options fo;
    fo.table_lo = opt.table_lo > 0.0 ? opt.table_lo : std::min(1e-6, domain.lo * 1e-3);
    fo.table_hi = opt.table_hi > 0.0 ? opt.table_hi : std::max(1e6, domain.hi * 1e3);
    fo.hard_max = domain.hi * 1e6;
    fo.log_step = opt.log_step;
    fo.rel_tol = opt.rel_tol;

    ModelSpec m;
    m.growth = std::move(growth);
    m.frag = std::move(frag);
    m.declared = std::move(declared);
    m.domain = domain;
    m.flow = std::make_shared<const FlowEngine>(m.growth, fo);

    const auto probes = probe_grid(domain);
    double prev = -std::numeric_limits<double>::infinity();
    for (double x : probes) {
        const double c = m.speed(x);
        if (!(c > 0.0) || !std::isfinite(c)) {
            throw Error(ErrorKind::DomainError, "growth speed not positive at x = " +
                                                    std::to_string(x));
        }
        const double K = m.frag.rate(x);
        if (!(K >= 0.0) || !std::isfinite(K)) {
            throw Error(ErrorKind::DomainError, "fragmentation rate invalid at x = " +
                                                    std::to_string(x));
        }
        const double s = m.s(x);
        if (!(s > prev)) throw Error(ErrorKind::DomainError, "s is not strictly increasing");
        prev = s;
    }
    if (const auto& d = m.declared.doeblin) {
        for (double x : probe_grid(d->I, 16)) {
            if (!(m.frag.total_mass(x) > 0.0)) {
                throw Error(ErrorKind::DomainError, "Doeblin interval without fragmentation");
            }
        }
    }
    if (const auto& d = m.declared.doeblin_map) {
        for (double x : probe_grid(d->I, 16)) {
            const double h = 1e-5 * x;
            const double ds = m.s(x + h) - m.s(x - h);
            const double dsT = m.s(d->T(x + h)) - m.s(d->T(x - h));
            if (std::abs(dsT / ds - 1.0) < 1e-6) {
                throw Error(ErrorKind::DomainError,
                            "Doeblin map has d(s o T)/ds = 1 at x = " + std::to_string(x));
            }
        }
    }
    return m;
}

double generator_apply(const ModelSpec& model, const WeightFunction& f, double x)
{
    if (!(x > 0.0)) throw Error(ErrorKind::DomainError, "generator evaluated at x <= 0");
    double jump = 0.0;
    try {
        jump = model.frag.integrate(x, f.value, f.kinks);
    } catch (const Error& e) {
        char where[64];
        std::snprintf(where, sizeof where, " (A%s at x = %.17g)", f.label.c_str(), x);
        throw Error(e.kind(), e.message() + where);
    }
    return f.s_derivative(x) + jump - model.frag.rate(x) * f.value(x);
}

double mass_conservation_defect(const ModelSpec& model, double x)
{
    if (!(x > 0.0)) throw Error(ErrorKind::DomainError, "defect evaluated at x <= 0");
    return model.frag.integrate(x, [x](double y) { return y / x; }) - model.frag.rate(x);
}

void validate_weight(const ModelSpec& model, const WeightFunction& f)
{
    const auto kinks = f.kinks;
    for (double x : probe_grid(model.domain)) {
        const double v = f.value(x);
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw Error(ErrorKind::DomainError,
                        f.label + " not positive at x = " + std::to_string(x));
        }
        const bool near_kink = std::any_of(kinks.begin(), kinks.end(), [x](double k) {
            return std::abs(x - k) < 1e-3 * x;
        });
        if (near_kink) continue;
        const double d = 1e-7 * x;
        const double fd = (f.value(x + d) - f.value(x - d)) / (model.s(x + d) - model.s(x - d));
        const double sd = f.s_derivative(x);
        if (std::abs(fd - sd) > 1e-4 * (1.0 + std::abs(sd))) {
            throw Error(ErrorKind::DomainError, f.label + " s-derivative mismatch at x = " +
                                                    std::to_string(x));
        }
    }
}

}  // namespace gfspec
