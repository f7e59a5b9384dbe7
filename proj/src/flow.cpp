#include "gfspec/flow.hpp"

#include <algorithm>
#include <cmath>

#include "gfspec/errors.hpp"
#include "gfspec/quadrature.hpp"

namespace gfspec {

FlowEngine::FlowEngine(GrowthSpec growth, Options opt) : growth_(std::move(growth)), opt_(opt)
{
    if (growth_.kind == GrowthSpec::Kind::SpeedC) {
        if (!growth_.c) throw Error(ErrorKind::DomainError, "speed-c growth without c");
        const ScalarFn c = growth_.c;
        CumulativeTable::Options to;
        to.lo = opt_.table_lo;
        to.hi = opt_.table_hi;
        to.hard_max = opt_.hard_max;
        to.log_step = opt_.log_step;
        to.rel_tol = opt_.rel_tol;
        table_ = CumulativeTable([c](double x) { return 1.0 / c(x); }, growth_.kinks, to);
        s_zero_ = table_.limit_at_zero();
        if (table_.limit_at_infinity()) {
            throw Error(ErrorKind::DomainError, "s(+inf) is finite: the flow explodes");
        }
        return;
    }
    if (!growth_.s) throw Error(ErrorKind::DomainError, "explicit-s growth without s");
    if (std::abs(growth_.s(1.0)) > 1e-12) throw Error(ErrorKind::DomainError, "s(1) != 0");
    const double a = growth_.s(1e-12);
    const double b = growth_.s(1e-24);
    const double c = growth_.s(1e-36);
    if (std::isfinite(c) && std::abs(c - b) < 1e-6 * std::max(1.0, std::abs(a - b))) s_zero_ = c;
}

double FlowEngine::s_of(double x) const
{
    if (!(x > 0.0)) throw Error(ErrorKind::DomainError, "s evaluated at x <= 0");
    if (x == 1.0) return 0.0;
    if (growth_.kind == GrowthSpec::Kind::SpeedC) return table_(x);
    return growth_.s(x);
}

double FlowEngine::s_inverse(double v) const
{
    if (v == 0.0) return 1.0;
    if (s_zero_ && v <= *s_zero_) throw Error(ErrorKind::DomainError, "s^{-1} below s(0+)");
    if (growth_.kind == GrowthSpec::Kind::SpeedC) return table_.inverse(v, opt_.inversion_tol);
    if (growth_.s_inverse) return growth_.s_inverse(v);
    double za = 0.0;
    double zb = 0.0;
    if (v > 0.0) {
        while (growth_.s(std::exp(zb)) < v) {
            za = zb;
            zb += 1.0;
            if (std::exp(zb) > opt_.hard_max) {
                throw Error(ErrorKind::RangeExtensionFailure, "flow leaves the working range");
            }
        }
    } else {
        while (growth_.s(std::exp(za)) > v) {
            zb = za;
            za -= 1.0;
            if (za < -700.0) throw Error(ErrorKind::DomainError, "s^{-1} underflow");
        }
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double zm = 0.5 * (za + zb);
        const double sm = growth_.s(std::exp(zm));
        if (std::abs(sm - v) <= opt_.inversion_tol || zb - za < 1e-15) return std::exp(zm);
        if (sm < v) za = zm; else zb = zm;
    }
    return std::exp(0.5 * (za + zb));
}

double FlowEngine::flow_at(double x, double t) const
{
    if (!(t >= 0.0)) throw Error(ErrorKind::DomainError, "negative flow time");
    if (t == 0.0) return x;
    return s_inverse(s_of(x) + t);
}

double FlowEngine::integrate_along_flow(const ScalarFn& g, double x, double t,
                                        const std::vector<double>& kinks) const
{
    if (t == 0.0) return 0.0;
    const double s0 = s_of(x);
    std::vector<double> breaks;
    for (double k : kinks) {
        if (k <= x) continue;
        const double u = s_of(k) - s0;
        if (u > 0.0 && u < t) breaks.push_back(u);
    }
    return integrate_piecewise([&](double u) { return g(flow_at(x, u)); }, 0.0, t, breaks);
}

double FlowEngine::speed(double x) const
{
    if (growth_.c) return growth_.c(x);
    const double d = 1e-6 * x;
    return 2.0 * d / (growth_.s(x + d) - growth_.s(x - d));
}

}  // namespace gfspec
