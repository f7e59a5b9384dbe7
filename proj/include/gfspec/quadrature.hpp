#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>

#include "gfspec/errors.hpp"

namespace gfspec {

struct QuadratureOptions {
    double rel_tol = 1e-8;
    unsigned max_depth = 15;
};

namespace detail {

inline void check_quadrature(double value, double error, double l1, double rel_tol,
                             const char* where)
{
    if (!std::isfinite(value) || !std::isfinite(error)) {
        throw Error(ErrorKind::QuadratureDivergence,
                    std::string(where) + ": non-finite integral");
    }
    // Judged against the L1 norm so that cancelling integrands do not spuriously fail.
    // The estimate is the gap between the last two levels and is pessimistic on integrands
    // built from C^1 tables; divergent integrals give error/|f|_1 of order one.
    if (error > 1e3 * rel_tol * std::max(l1, 1e-300) && error > 1e-14) {
        char msg[128];
        std::snprintf(msg, sizeof msg, ": error estimate %.3g above tolerance for |f|_1 = %.3g",
                      error, l1);
        throw Error(ErrorKind::QuadratureDivergence, std::string(where) + msg);
    }
}

inline boost::math::quadrature::tanh_sinh<double>& tanh_sinh_engine()
{
    thread_local boost::math::quadrature::tanh_sinh<double> engine(15);
    return engine;
}

}  // namespace detail

struct QuadraturePart {
    double value = 0.0;
    double error = 0.0;
    double l1 = 0.0;
};

namespace detail {

template <class F>
QuadraturePart gk_part(F&& f, double a, double b, const QuadratureOptions& opt)
{
    QuadraturePart r;
    r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(
        f, a, b, opt.max_depth, opt.rel_tol, &r.error, &r.l1);
    return r;
}

template <class F>
QuadraturePart tanh_sinh_part(F&& f, double a, double b, const QuadratureOptions& opt)
{
    QuadraturePart r;
    std::size_t levels = 0;
    try {
        r.value = tanh_sinh_engine().integrate(f, a, b, opt.rel_tol, &r.error, &r.l1, &levels);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::QuadratureDivergence, std::string("tanh_sinh: ") + e.what());
    }
    return r;
}

// Pieces are judged together so that a sliver next to a break point is not held to a
// relative tolerance of its own.
template <class Part>
double sum_pieces(Part&& part, double lo, double hi, std::span<const double> breaks,
                  const QuadratureOptions& opt, const char* where)
{
    // Break points closer than this to a neighbour would leave slivers the rule cannot resolve.
    const double gap = 1e-9 * (hi - lo);
    std::vector<double> inner;
    for (double p : breaks) {
        if (p > lo + gap && p < hi - gap) inner.push_back(p);
    }
    std::sort(inner.begin(), inner.end());
    std::vector<double> cuts{lo};
    for (double p : inner) {
        if (p > cuts.back() + gap) cuts.push_back(p);
    }
    cuts.push_back(hi);
    QuadraturePart total;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        if (cuts[i + 1] - cuts[i] <= 0.0) continue;
        const auto r = part(cuts[i], cuts[i + 1]);
        total.value += r.value;
        total.error += r.error;
        total.l1 += r.l1;
    }
    check_quadrature(total.value, total.error, total.l1, opt.rel_tol, where);
    return total.value;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod (7/15) integral of a smooth integrand on [a, b].
template <class F>
double integrate(F&& f, double a, double b, const QuadratureOptions& opt = {})
{
    if (a == b) return 0.0;
    const auto r = detail::gk_part(f, a, b, opt);
    detail::check_quadrature(r.value, r.error, r.l1, opt.rel_tol, "gauss_kronrod");
    return r.value;
}

/// Same as integrate() but splits [a, b] at the given interior break points.
template <class F>
double integrate_piecewise(F&& f, double a, double b, std::span<const double> breaks,
                           const QuadratureOptions& opt = {})
{
    if (a == b) return 0.0;
    const double sign = a < b ? 1.0 : -1.0;
    auto part = [&](double lo, double hi) { return detail::gk_part(f, lo, hi, opt); };
    return sign * detail::sum_pieces(part, std::min(a, b), std::max(a, b), breaks, opt,
                                     "gauss_kronrod");
}

/// Double-exponential rule for integrands with integrable endpoint singularities
/// (kernel densities on (0,1) such as u^{-delta}). Never evaluates the endpoints.
template <class F>
double integrate_singular(F&& f, double a, double b, const QuadratureOptions& opt = {})
{
    if (a == b) return 0.0;
    const auto r = detail::tanh_sinh_part(f, a, b, opt);
    detail::check_quadrature(r.value, r.error, r.l1, opt.rel_tol, "tanh_sinh");
    return r.value;
}

template <class F>
double integrate_singular_piecewise(F&& f, double a, double b, std::span<const double> breaks,
                                    const QuadratureOptions& opt = {})
{
    if (a == b) return 0.0;
    auto part = [&](double lo, double hi) { return detail::tanh_sinh_part(f, lo, hi, opt); };
    return detail::sum_pieces(part, a, b, breaks, opt, "tanh_sinh");
}

}  // namespace gfspec
