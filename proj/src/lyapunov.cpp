#include "gfspec/lyapunov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "gfspec/cumulative.hpp"
#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"
#include "gfspec/optimize.hpp"

namespace gfspec {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kCap = 1e12;

const RelativeMeasure& require_relative(const ModelSpec& model, const char* who)
{
    const RelativeMeasure* p = model.frag.relative_measure();
    if (!p) throw Error(ErrorKind::DomainError, std::string(who) + " needs a relative kernel");
    return *p;
}

double cap_margin(double v)
{
    if (!std::isfinite(v)) return -1.0;
    return std::log(kCap) - std::log1p(std::abs(v));
}

std::vector<double> ratios(const ModelSpec& model, const WeightFunction& f,
                           const std::vector<double>& xs)
{
    std::vector<double> r(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) r[i] = generator_apply(model, f, xs[i]) / f(xs[i]);
    return r;
}

enum class Side { Zero, Infinity };

std::vector<double> tail_window(const std::vector<double>& x, const std::vector<double>& v,
                                Side side)
{
    std::vector<double> w;
    if (side == Side::Infinity) {
        const double cut = x.back() / 100.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] >= cut) w.push_back(v[i]);
        }
    } else {
        const double cut = x.front() * 100.0;
        for (std::size_t i = x.size(); i-- > 0;) {
            if (x[i] <= cut) w.push_back(v[i]);
        }
    }
    // w runs toward the boundary.
    if (w.size() < 3) {
        w.clear();
        const std::size_t n = std::min<std::size_t>(3, x.size());
        if (side == Side::Infinity) {
            for (std::size_t i = x.size() - n; i < x.size(); ++i) w.push_back(v[i]);
        } else {
            for (std::size_t i = n; i-- > 0;) w.push_back(v[i]);
        }
    }
    return w;
}

bool monotone(const std::vector<double>& w)
{
    bool up = true;
    bool down = true;
    for (std::size_t i = 1; i < w.size(); ++i) {
        up = up && w[i] >= w[i - 1];
        down = down && w[i] <= w[i - 1];
    }
    return up || down;
}

double tail_extreme(const std::vector<double>& x, const std::vector<double>& v, Side side,
                    bool sup)
{
    const auto w = tail_window(x, v, side);
    if (monotone(w)) return w.back();
    return sup ? *std::max_element(w.begin(), w.end()) : *std::min_element(w.begin(), w.end());
}

CumulativeTable rate_primitive(const ModelSpec& model)
{
    CumulativeTable::Options to;
    const auto& fo = model.flow->options();
    to.lo = fo.table_lo;
    to.hi = fo.table_hi;
    to.hard_max = fo.hard_max;
    to.log_step = fo.log_step;
    to.rel_tol = fo.rel_tol;
    auto flow = model.flow;
    const FragmentationKernel frag = model.frag;
    return CumulativeTable([flow, frag](double x) { return frag.rate(x) / flow->speed(x); },
                           model.kinks(), to);
}

struct PseudoEntranceFit {
    double alpha = 0.0;
    double p_alpha = 0.0;
    double a0 = 0.0;
    double a_inf = 0.0;
    double eps_half = 0.0;
    double x_probe = 0.0;
    std::vector<std::pair<double, double>> u_margins;  // first failing alpha if none passed
    bool ok = false;
};

const double kProbeU[] = {0.05, 0.1, 0.25, 0.5, 0.75, 0.9};

// liminf over x of \int_{ux}^x K ds, read off the tail probes, against -alpha ln u / (1 - p_alpha).
std::vector<std::pair<double, double>> pseudo_entrance_margins(const CumulativeTable& G,
                                                               const RelativeMeasure& p,
                                                               double alpha,
                                                               const std::vector<double>& xs)
{
    const double pa = p.moment(alpha);
    std::vector<std::pair<double, double>> out;
    std::vector<double> lhs(xs.size());
    for (double u : kProbeU) {
        for (std::size_t i = 0; i < xs.size(); ++i) lhs[i] = G(xs[i]) - G(u * xs[i]);
        const double rhs = -alpha * std::log(u) / (1.0 - pa);
        out.emplace_back(u, tail_extreme(xs, lhs, Side::Infinity, false) - rhs);
    }
    return out;
}

PseudoEntranceFit fit_pseudo_entrance(const ModelSpec& model, const CumulativeTable& G,
                                      double alpha)
{
    const RelativeMeasure& p = require_relative(model, "pseudo-entrance weight");
    if (!(alpha > 1.0)) throw Error(ErrorKind::DomainError, "pseudo-entrance needs alpha > 1");
    const auto p0 = p.mass();
    if (!p0) throw Error(ErrorKind::CriterionViolated, "p is not a finite measure");
    if (!G.limit_at_zero()) {
        throw Error(ErrorKind::CriterionViolated, "\\int_0^1 K ds diverges");
    }
    PseudoEntranceFit fit;
    fit.x_probe = model.domain.hi / 2.0;
    fit.a0 = *p0 - 1.0 + 0.1;
    const auto xs = probe_grid(model.domain);
    std::vector<std::pair<double, double>> first;
    for (int k = 0; k <= 40; ++k) {
        const double a = 1.0 + (alpha - 1.0) * std::ldexp(1.0, -k);
        auto margins = pseudo_entrance_margins(G, p, a, xs);
        if (k == 0) first = margins;
        const bool pass = std::all_of(margins.begin(), margins.end(),
                                      [](const auto& m) { return m.second > 0.0; });
        if (pass) {
            fit.alpha = a;
            fit.u_margins = margins;
            fit.ok = true;
            break;
        }
    }
    if (!fit.ok) {
        fit.u_margins = first;
        return fit;
    }
    fit.p_alpha = p.moment(fit.alpha);
    const double thr = fit.alpha / (1.0 - fit.p_alpha);
    const double x = fit.x_probe;
    fit.eps_half = (G(x) - G(0.5 * x)) / std::log(2.0) - thr;
    const double ell = thr + 0.5 * fit.eps_half;
    const double lo = fit.alpha / ell;
    const double hi = 1.0 - fit.p_alpha;
    fit.ok = false;
    for (double theta : {0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99}) {
        const double a = lo + theta * (hi - lo);
        const double tilt = p.integrate([&](double u) { return std::exp(-a * (G(x) - G(u * x))); });
        if (tilt < fit.p_alpha) {
            fit.a_inf = a;
            fit.ok = true;
            break;
        }
    }
    return fit;
}

WeightFunction pseudo_entrance_weight(const ModelSpec& model, std::shared_ptr<CumulativeTable> G,
                                      double a0, double a_inf)
{
    const double g0 = *G->limit_at_zero();
    const double h0 = std::exp(-a0 * g0);
    const FragmentationKernel frag = model.frag;
    WeightFunction h;
    h.value = [G, a0, a_inf](double x) {
        const double g = (*G)(x);
        return x < 1.0 ? std::exp(-a0 * g) : std::exp(a_inf * g);
    };
    h.s_derivative = [G, a0, a_inf, frag](double x) {
        const double g = (*G)(x);
        return x < 1.0 ? -a0 * frag.rate(x) * std::exp(-a0 * g)
                       : a_inf * frag.rate(x) * std::exp(a_inf * g);
    };
    h.log_s_derivative = [a0, a_inf, frag](double x) {
        return (x < 1.0 ? -a0 : a_inf) * frag.rate(x);
    };
    h.sup_below = [G, a_inf, h0](double x) {
        return x <= 1.0 ? h0 : std::max(h0, std::exp(a_inf * (*G)(x)));
    };
    h.kinks = model.kinks();
    h.kinks.push_back(1.0);
    h.label = "h_pseudo_entrance";
    return h;
}

double probe_inf(const std::vector<double>& v)
{
    return *std::min_element(v.begin(), v.end());
}

}  // namespace

// ---------------------------------------------------------------------------

bool AssumptionReport::passed() const
{
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.pass; });
}

nlohmann::ordered_json to_json(const AssumptionReport& r)
{
    auto num = [](double v) -> nlohmann::ordered_json {
        if (std::isfinite(v)) return v;
        return nullptr;
    };
    nlohmann::ordered_json j;
    j["regime"] = r.regime;
    j["pass"] = r.passed();
    j["b"] = num(r.b);
    j["lambda1"] = num(r.lambda1);
    j["lambda2"] = num(r.lambda2);
    j["L"] = {num(r.L.lo), num(r.L.hi)};
    auto checks = nlohmann::ordered_json::array();
    for (const auto& c : r.checks) {
        checks.push_back({{"name", c.name}, {"margin", num(c.margin)}, {"pass", c.pass}});
    }
    j["checks"] = checks;
    auto params = nlohmann::ordered_json::object();
    for (const auto& [k, v] : r.parameters) params[k] = num(v);
    j["parameters"] = params;
    j["asymptotic_extrapolation"] = r.extrapolated;
    return j;
}

// ---------------------------------------------------------------------------

double pseudo_entrance_objective(const RelativeMeasure& p, double alpha)
{
    return alpha / (1.0 - p.moment(alpha));
}

Threshold criterion_pseudo_entrance(const RelativeMeasure& p)
{
    auto r = golden_section([&p](double a) { return pseudo_entrance_objective(p, a); }, 1.5, 4.0,
                            1.0, kInf);
    return {r.value, r.argmin};
}

Threshold criterion_uniform_kernel()
{
    auto f = [](double a) { return a * (a + 1.0) / (a - 1.0); };
    auto r = golden_section(f, 1.5, 4.0, 1.0, kInf);
    return {r.value, r.argmin};
}

Threshold criterion_mitosis_kernel()
{
    auto f = [](double a) { return a / (1.0 - std::exp2(1.0 - a)); };
    auto r = golden_section(f, 1.5, 4.0, 1.0, kInf);
    return {r.value, r.argmin};
}

LnxThresholds criterion_lnx(const RelativeMeasure& p)
{
    double slope = 0.0;
    try {
        slope = p.integrate([](double u) { return u * std::log(u); });
    } catch (const Error& e) {
        throw Error(ErrorKind::MomentDivergence, std::string("\\int u ln u p(du): ") + e.what());
    }
    if (!(slope < 0.0) || !std::isfinite(slope)) {
        throw Error(ErrorKind::MomentDivergence, "degenerate kernel: \\int u ln u p(du) >= 0");
    }
    LnxThresholds t;
    t.low = t.high = -1.0 / slope;
    // The objectives are secant slopes of the convex map a -> p_a, so the limit at 1 is
    // extremal; a sweep guards against kernels where moments misbehave.
    for (int i = 1; i <= 64; ++i) {
        const double a = 1.0 - 3.0 * i / 64.0;
        try {
            const double pa = p.moment(a);
            if (pa > 1.0) {
                const double v = (1.0 - a) / (pa - 1.0);
                if (v > t.low) {
                    t.low = v;
                    t.alpha = a;
                }
            }
        } catch (const Error&) {
        }
        const double b = 1.0 + 9.0 * i / 64.0;
        const double pb = p.moment(b);
        if (pb < 1.0) {
            const double v = (b - 1.0) / (1.0 - pb);
            if (v < t.high) {
                t.high = v;
                t.beta = b;
            }
        }
    }
    return t;
}

ReggenResult criterion_reggen(double c0, double c_inf)
{
    if (!(c_inf > 0.0 && c_inf < c0)) {
        throw Error(ErrorKind::DomainError, "reggen criterion needs 0 < c_inf < c0");
    }
    ReggenResult r;
    r.closed_form = 3.0 * c0 - c_inf - 2.0 * std::sqrt(2.0 * c0 * (c0 - c_inf));
    auto g = [c0, c_inf](double a) { return (a + c0) * (c_inf - a) / (c0 - a); };
    auto m = golden_section([&g](double a) { return -g(a); }, 0.25 * c_inf, 0.75 * c_inf, 0.0,
                            c_inf);
    r.argmax = m.argmin;
    r.optimizer_max = -m.value;
    if (g(0.0) > r.optimizer_max) {
        r.argmax = 0.0;
        r.optimizer_max = g(0.0);
    }
    r.agrees = std::abs(r.optimizer_max - r.closed_form) <= 1e-6;
    return r;
}

double tail_limsup_at_infinity(const std::vector<double>& x, const std::vector<double>& v)
{
    return tail_extreme(x, v, Side::Infinity, true);
}

double tail_liminf_at_infinity(const std::vector<double>& x, const std::vector<double>& v)
{
    return tail_extreme(x, v, Side::Infinity, false);
}

double tail_limsup_at_zero(const std::vector<double>& x, const std::vector<double>& v)
{
    return tail_extreme(x, v, Side::Zero, true);
}

double tail_liminf_at_zero(const std::vector<double>& x, const std::vector<double>& v)
{
    return tail_extreme(x, v, Side::Zero, false);
}

// ---------------------------------------------------------------------------

WeightFunction build_h_pseudo_entrance(const ModelSpec& model, double alpha)
{
    auto G = std::make_shared<CumulativeTable>(rate_primitive(model));
    const auto fit = fit_pseudo_entrance(model, *G, alpha);
    if (!fit.ok) {
        auto worst = *std::min_element(fit.u_margins.begin(), fit.u_margins.end(),
                                       [](const auto& a, const auto& b) { return a.second < b.second; });
        throw Error(ErrorKind::CriterionViolated,
                    "pseudo-entrance condition fails at u = " + std::to_string(worst.first) +
                        " with margin " + std::to_string(worst.second));
    }
    return pseudo_entrance_weight(model, G, fit.a0, fit.a_inf);
}

WeightFunction build_h_powerlaw(const ModelSpec& model, double alpha, double beta)
{
    auto flow = model.flow;
    if (const RelativeMeasure* p = model.frag.relative_measure()) {
        double inf_below = kInf;
        double inf_above = kInf;
        for (double x : probe_grid(model.domain)) {
            const double r = x / model.speed(x);
            (x < 1.0 ? inf_below : inf_above) = std::min(x < 1.0 ? inf_below : inf_above, r);
        }
        for (double e : {alpha * inf_below, beta * inf_above}) {
            try {
                (void)p->moment(std::min(e, 0.0));
            } catch (const Error&) {
                throw Error(ErrorKind::CriterionViolated,
                            "\\int u^" + std::to_string(e) + " p(du) diverges");
            }
        }
    }
    const auto s0 = flow->s_at_zero();
    const double h0 = s0 ? std::exp(alpha * *s0) : (alpha > 0 ? 0.0 : alpha < 0 ? kInf : 1.0);
    WeightFunction h;
    h.value = [flow, alpha, beta](double x) {
        const double s = flow->s_of(x);
        return std::exp((x < 1.0 ? alpha : beta) * s);
    };
    h.s_derivative = [flow, alpha, beta](double x) {
        const double a = x < 1.0 ? alpha : beta;
        return a * std::exp(a * flow->s_of(x));
    };
    h.log_s_derivative = [alpha, beta](double x) { return x < 1.0 ? alpha : beta; };
    h.sup_below = [flow, alpha, beta, h0](double x) {
        const double left = alpha >= 0.0 ? std::exp(alpha * flow->s_of(std::min(x, 1.0))) : h0;
        if (x <= 1.0) return left;
        const double right = beta >= 0.0 ? std::exp(beta * flow->s_of(x)) : 1.0;
        return std::max(left, right);
    };
    h.kinks = model.kinks();
    h.kinks.push_back(1.0);
    h.label = "h_powerlaw";
    return h;
}

WeightFunction build_h_entrance(const ModelSpec& model, double a)
{
    const auto s0 = model.flow->s_at_zero();
    if (!s0) throw Error(ErrorKind::EntranceBoundaryAbsent, "s(0+) = -inf");
    if (a > 0.0) throw Error(ErrorKind::DomainError, "entrance weight needs a <= 0");
    auto flow = model.flow;
    const double z = *s0;
    const double base = std::exp(-a * z);
    const double x0 = flow->s_inverse(1.0 - base);
    WeightFunction h;
    h.value = [flow, a, z, base](double x) {
        const double s = flow->s_of(x);
        return x < 1.0 ? std::exp(a * (s - z)) : std::min(1.0, base + s);
    };
    h.s_derivative = [flow, a, z, x0](double x) {
        if (x < 1.0) return a * std::exp(a * (flow->s_of(x) - z));
        return x < x0 ? 1.0 : 0.0;
    };
    h.sup_below = [](double) { return 1.0; };
    h.kinks = model.kinks();
    h.kinks.push_back(1.0);
    h.kinks.push_back(x0);
    h.label = "h_entrance";
    return h;
}

// ---------------------------------------------------------------------------

AssumptionReport verify_assumption1(const ModelSpec& model, const WeightFunction& h)
{
    AssumptionReport rep;
    rep.h = h;
    const auto xs = probe_grid(model.domain);
    const auto r = ratios(model, h, xs);
    for (double v : r) {
        if (!std::isfinite(v)) throw Error(ErrorKind::UnboundedAbove, "A h / h not finite");
    }
    double b = *std::max_element(r.begin(), r.end());
    const double b_probe = b;
    // Refine around interior local maxima so that q = b - Ah/h stays non-negative
    // between probe points.
    for (std::size_t i = 0; i < xs.size(); ++i) {
        const bool left = i == 0 || r[i] >= r[i - 1];
        const bool right = i + 1 == xs.size() || r[i] >= r[i + 1];
        if (!(left && right)) continue;
        const double lo = std::log(xs[i == 0 ? 0 : i - 1]);
        const double hi = std::log(xs[i + 1 == xs.size() ? i : i + 1]);
        if (hi <= lo) continue;
        auto m = golden_section(
            [&](double z) {
                const double x = std::exp(z);
                return -generator_apply(model, h, x) / h(x);
            },
            lo + 0.25 * (hi - lo), lo + 0.75 * (hi - lo), lo, hi, 1e-9, 80);
        b = std::max(b, -m.value);
    }
    rep.b = b;
    rep.parameters["b_probe_max"] = b_probe;

    // Tail trend over the last decade.
    const double cut = xs.back() / 10.0;
    std::vector<double> tail;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i] >= cut) tail.push_back(r[i]);
    }
    bool rising = tail.size() >= 2;
    for (std::size_t i = 1; i < tail.size(); ++i) {
        rising = rising && tail[i] > tail[i - 1] + 1e-12 * std::abs(tail[i - 1]);
    }
    if (rising) {
        throw Error(ErrorKind::UnboundedAbove,
                    "A h / h increases over the last decade of probes (to " +
                        std::to_string(tail.back()) + ")");
    }
    rep.add("Ah_over_h_bounded_above", cap_margin(b));

    for (double M : {1.0, 10.0, 100.0, model.domain.hi}) {
        if (M <= model.domain.lo) continue;
        if (M > model.domain.hi && M != model.domain.hi) continue;
        double sup = 0.0;
        for (double x : xs) {
            if (x >= M) break;
            const double hx = h(x);
            sup = std::max(sup, model.frag.integrate(
                                    x, [&h, hx](double y) { return h(y) / hx; }, h.kinks));
        }
        char name[64];
        std::snprintf(name, sizeof name, "tilted_mass_sup_below_%g", M);
        rep.add(name, cap_margin(sup));
        rep.parameters[name] = sup;
    }
    return rep;
}

Lambda2 lambda2_bound(const ModelSpec& model, const WeightFunction& psi_prime)
{
    const auto xs = probe_grid(model.domain);
    const auto r = ratios(model, psi_prime, xs);
    const double lo = probe_inf(r);
    const double hi = *std::max_element(r.begin(), r.end());
    double mean = 0.0;
    for (double v : r) mean += v / static_cast<double>(r.size());
    return {-lo, (hi - lo) > 1e-9 * (1.0 + std::abs(mean))};
}

Lambda1 lambda1_estimate(const ModelSpec& model, const WeightFunction& psi)
{
    const auto xs = probe_grid(model.domain);
    const auto r = ratios(model, psi, xs);
    // Outer region: the first and last tenth of the log range.
    const std::size_t edge = std::max<std::size_t>(2, xs.size() / 10);
    double outer = -kInf;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (i < edge || i + edge >= xs.size()) outer = std::max(outer, r[i]);
    }
    Lambda1 out;
    out.lambda1 = -outer;
    std::size_t first = xs.size();
    std::size_t last = 0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        if (r[i] > -out.lambda1) {
            first = std::min(first, i);
            last = i;
        }
    }
    if (first == xs.size()) {
        const std::size_t mid = xs.size() / 2;
        out.L = {xs[mid], xs[mid]};
        return out;
    }
    out.L = {xs[first], xs[last]};
    for (std::size_t i = first; i <= last; ++i) {
        out.C = std::max(out.C, psi(xs[i]) * (r[i] + out.lambda1));
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

void attach_lyapunov(const ModelSpec& model, AssumptionReport& rep)
{
    const auto l1 = lambda1_estimate(model, rep.psi);
    const auto l2 = lambda2_bound(model, rep.psi_prime);
    rep.lambda1 = l1.lambda1;
    rep.lambda2 = l2.lambda2;
    rep.L = l1.L;
    rep.parameters["C"] = l1.C;
    rep.parameters["psi_prime_nonconstant"] = l2.nonconstant ? 1.0 : 0.0;
    rep.add("lambda1_minus_lambda2", l1.lambda1 - l2.lambda2);
    // psi'/psi must vanish at both ends: compare the end probes to the interior maximum.
    const auto xs = probe_grid(model.domain);
    double interior = 0.0;
    for (double x : xs) interior = std::max(interior, rep.psi_prime(x) / rep.psi(x));
    const double ends = std::max(rep.psi_prime(xs.front()) / rep.psi(xs.front()),
                                 rep.psi_prime(xs.back()) / rep.psi(xs.back()));
    rep.add("psi_prime_over_psi_decays", interior > 0.0 ? 1.0 - ends / interior : -1.0);
}

void merge(AssumptionReport& into, const AssumptionReport& a1)
{
    into.b = a1.b;
    for (const auto& c : a1.checks) into.checks.push_back(c);
    for (const auto& [k, v] : a1.parameters) into.parameters[k] = v;
}

}  // namespace

AssumptionReport criterion_pseudo_entrance_report(const ModelSpec& model, double alpha)
{
    const RelativeMeasure& p = require_relative(model, "pseudo-entrance criterion");
    AssumptionReport rep;
    rep.regime = "pseudo-entrance";
    auto G = std::make_shared<CumulativeTable>(rate_primitive(model));
    const auto fit = fit_pseudo_entrance(model, *G, alpha);
    const auto thr = criterion_pseudo_entrance(p);
    rep.parameters["alpha_requested"] = alpha;
    rep.parameters["threshold_min"] = thr.threshold;
    rep.parameters["threshold_argmin"] = thr.argmin;
    rep.add("mass_conservation", 1e-8 - std::abs(p.moment(1.0) - 1.0));
    for (const auto& [u, m] : fit.u_margins) {
        char name[64];
        std::snprintf(name, sizeof name, "pseudo_entrance_u_%g", u);
        rep.add(name, m);
    }
    if (!fit.ok) {
        rep.add("a_inf_window", -1.0);
        return rep;
    }
    rep.parameters["alpha"] = fit.alpha;
    rep.parameters["a0"] = fit.a0;
    rep.parameters["a_inf"] = fit.a_inf;
    rep.parameters["eps_half"] = fit.eps_half;
    rep.parameters["uniform_kernel_threshold"] = criterion_uniform_kernel().threshold;
    rep.h = pseudo_entrance_weight(model, G, fit.a0, fit.a_inf);
    rep.psi = rep.h;
    rep.psi_prime = identity_weight(model);
    merge(rep, verify_assumption1(model, rep.h));
    attach_lyapunov(model, rep);
    return rep;
}

AssumptionReport criterion_lnx_report(const ModelSpec& model)
{
    const RelativeMeasure& p = require_relative(model, "lnx criterion");
    AssumptionReport rep;
    rep.regime = "lnx-critical";
    const auto xs = probe_grid(model.domain);
    std::vector<double> cx(xs.size());
    std::vector<double> K(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cx[i] = model.speed(xs[i]) / xs[i];
        K[i] = model.frag.rate(xs[i]);
    }
    const double inf_all = probe_inf(cx);
    const double inf_tails = std::min(tail_liminf_at_zero(xs, cx), tail_liminf_at_infinity(xs, cx));
    const double ic = std::min(inf_all, inf_tails);
    if (std::abs(inf_all - inf_tails) > 1e-9 * (1.0 + std::abs(ic))) {
        rep.parameters["inf_c_over_x_differs"] = inf_all - inf_tails;
    }
    // liminf x/c = 1 / limsup c/x at each end.
    const double r0 = 1.0 / tail_limsup_at_zero(xs, cx);
    const double rinf = 1.0 / tail_limsup_at_infinity(xs, cx);
    const double limsup_cx_inf = tail_limsup_at_infinity(xs, cx);
    const double K0 = tail_limsup_at_zero(xs, K);
    const double Kinf = tail_liminf_at_infinity(xs, K);

    auto low = [&](double a) { return (ic - a) / (p.moment(a * r0) - 1.0); };
    auto high = [&](double b) { return (b - ic) / (1.0 - p.moment(b * rinf)); };

    double low_sup = 0.0;
    double high_inf = kInf;
    const bool exact_log = std::abs(ic - 1.0) < 1e-9 && std::abs(r0 - 1.0) < 1e-9 &&
                           std::abs(rinf - 1.0) < 1e-9;
    if (exact_log) {
        const auto t = criterion_lnx(p);
        low_sup = t.low;
        high_inf = t.high;
    }
    const double a_hi = std::min(ic, 1.0 / r0) * (1.0 - 1e-6);
    auto am = golden_section([&](double a) { return -low(a); }, 0.25 * a_hi, 0.75 * a_hi, 0.0, a_hi);
    low_sup = std::max(low_sup, -am.value);
    const double b_lo = std::max(limsup_cx_inf, 1.0 / rinf) * (1.0 + 1e-6);
    auto bm = golden_section(high, b_lo * 1.25, b_lo * 2.0, b_lo, kInf);
    high_inf = std::min(high_inf, bm.value);

    rep.parameters["low_threshold"] = low_sup;
    rep.parameters["high_threshold"] = high_inf;
    rep.parameters["limsup_K_at_0"] = K0;
    rep.parameters["liminf_K_at_inf"] = Kinf;
    rep.add("lnx_zero_side", low_sup - K0);
    rep.add("lnx_infinity_side", Kinf - high_inf);

    // Exponents with positive margins for the weight, when they exist.
    double alpha = 0.5 * a_hi;
    double beta = 2.0 * b_lo;
    for (double t = 0.5; t < 1.0; t = 0.5 * (1.0 + t)) {
        const double a = t * a_hi;
        if (low(a) > K0) alpha = a;
        const double b = b_lo * (1.0 + (1.0 - t));
        if (high(b) < Kinf) beta = b;
        if (t > 0.999) break;
    }
    rep.parameters["alpha"] = alpha;
    rep.parameters["beta"] = beta;
    try {
        rep.h = build_h_powerlaw(model, alpha, beta);
        rep.psi = rep.h;
        rep.psi_prime = identity_weight(model);
        merge(rep, verify_assumption1(model, rep.h));
        attach_lyapunov(model, rep);
    } catch (const Error& e) {
        rep.add(std::string("weight_construction: ") + std::string(e.name()), -1.0);
    }
    return rep;
}

AssumptionReport criterion_K_constant(const ModelSpec& model)
{
    const RelativeMeasure& p = require_relative(model, "K-constant criterion");
    AssumptionReport rep;
    rep.regime = "K-constant-critical";
    double delta = 0.0;
    for (double d : {0.5, 0.25, 0.1, 0.01}) {
        try {
            (void)p.moment(-d);
            delta = d;
            break;
        } catch (const Error&) {
        }
    }
    if (delta == 0.0) {
        throw Error(ErrorKind::MomentDivergence, "no delta in {0.5,0.25,0.1,0.01} with finite moment");
    }
    rep.parameters["delta"] = delta;
    const double theta = p.integrate([](double u) { return -std::log(u); });
    rep.parameters["threshold"] = theta;

    const auto xs = probe_grid(model.domain);
    std::vector<double> cx(xs.size());
    std::vector<double> K(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        cx[i] = model.speed(xs[i]) / xs[i];
        K[i] = model.frag.rate(xs[i]);
    }
    const double kmin = probe_inf(K);
    const double kmax = *std::max_element(K.begin(), K.end());
    rep.add("inf_K_positive", kmin);
    rep.add("inf_K_at_most_1", 1.0 + 1e-12 - kmin);
    rep.add("K_tails_equal_inf_K",
            1e-6 - std::max(std::abs(tail_limsup_at_zero(xs, K) - kmin),
                            std::abs(tail_limsup_at_infinity(xs, K) - kmin)));
    rep.add("s_zero_diverges", model.flow->s_at_zero() ? -1.0 : 1.0);
    rep.add("K_constant_infinity_side", theta - tail_limsup_at_infinity(xs, cx));
    rep.add("K_constant_zero_side", tail_liminf_at_zero(xs, cx) - theta);
    rep.parameters["sup_K"] = kmax;

    // psi' = 1, psi = h = exp(-eps s) below 1, exp(eps s) above; eps halved until both
    // tails of A h / h sit below inf A psi' / psi'.
    rep.psi_prime = WeightFunction::constant();
    std::vector<double> a1(xs.size());
    for (std::size_t i = 0; i < xs.size(); ++i) {
        a1[i] = generator_apply(model, rep.psi_prime, xs[i]);
    }
    const double floor = probe_inf(a1);
    double eps = 0.5;
    double best = -kInf;
    for (int k = 0; k < 12; ++k, eps *= 0.5) {
        auto h = build_h_powerlaw(model, -eps, eps);
        const auto r = ratios(model, h, xs);
        const double m = floor - std::max(tail_limsup_at_zero(xs, r), tail_limsup_at_infinity(xs, r));
        if (m > best) {
            best = m;
            rep.parameters["alpha"] = eps;
            rep.parameters["beta"] = eps;
            rep.h = h;
        }
        if (m > 0.0) break;
    }
    rep.add("lyapunov_tails_below_inf_A1", best);
    rep.psi = rep.h;
    merge(rep, verify_assumption1(model, rep.h));
    attach_lyapunov(model, rep);
    return rep;
}

AssumptionReport criterion_entrance(const ModelSpec& model, double lambda0_estimate)
{
    const auto s0 = model.flow->s_at_zero();
    if (!s0) throw Error(ErrorKind::EntranceBoundaryAbsent, "s(0+) diverges on the table");
    AssumptionReport rep;
    rep.regime = "entrance";
    rep.parameters["s0"] = *s0;
    rep.parameters["lambda0_estimate"] = lambda0_estimate;
    const auto xs = probe_grid(model.domain);
    std::vector<double> mass(xs.size());
    std::vector<double> d(xs.size());
    double sup_mass = 0.0;
    for (std::size_t i = 0; i < xs.size(); ++i) {
        mass[i] = model.frag.total_mass(xs[i]);
        d[i] = mass[i] - model.frag.rate(xs[i]);
        sup_mass = std::max(sup_mass, mass[i]);
    }
    const double limsup_inf = tail_limsup_at_infinity(xs, d);
    const double limsup_zero_mass = tail_limsup_at_zero(xs, mass);
    rep.parameters["limsup_balance_at_inf"] = limsup_inf;
    rep.add("kernel_mass_locally_bounded", cap_margin(sup_mass));
    rep.add("balance_bounded_at_inf", cap_margin(limsup_inf));
    rep.add("entrance_margin", -lambda0_estimate - limsup_inf);

    const double a = std::min(0.0, -limsup_zero_mass - lambda0_estimate) - 0.5;
    rep.parameters["a"] = a;
    rep.h = build_h_entrance(model, a);
    rep.psi = rep.h;
    rep.psi_prime = identity_weight(model);
    merge(rep, verify_assumption1(model, rep.h));
    const auto l1 = lambda1_estimate(model, rep.psi);
    rep.lambda1 = l1.lambda1;
    rep.L = l1.L;
    rep.parameters["C"] = l1.C;
    rep.lambda2 = lambda2_bound(model, rep.psi_prime).lambda2;
    rep.add("lambda1_above_lambda0", l1.lambda1 - lambda0_estimate);
    return rep;
}

}  // namespace gfspec
