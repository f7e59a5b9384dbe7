#pragma once

#include <cmath>
#include <functional>
#include <limits>

#include "gfspec/errors.hpp"

namespace gfspec {

struct MinimizeResult {
    double argmin = 0.0;
    double value = 0.0;
    int iterations = 0;
};

/// Golden-section minimization of a unimodal f on the open interval (lower, upper).
/// The starting bracket [a, b] is expanded outward (never past the bounds) until it
/// holds an interior minimum.
inline MinimizeResult golden_section(const std::function<double(double)>& f, double a, double b,
                                     double lower = -std::numeric_limits<double>::infinity(),
                                     double upper = std::numeric_limits<double>::infinity(),
                                     double abs_tol = 1e-10, int max_iter = 200)
{
    constexpr double invphi = 0.6180339887498948482;
    int iter = 0;
    auto clamp_in = [&](double x) {
        if (x <= lower) x = lower + 1e-12 * std::max(1.0, std::abs(lower));
        if (x >= upper) x = upper - 1e-12 * std::max(1.0, std::abs(upper));
        return x;
    };
    a = clamp_in(a);
    b = clamp_in(b);
    double m = 0.5 * (a + b);
    double fa = f(a);
    double fb = f(b);
    double fm = f(m);
    while ((fa < fm || fb < fm) && iter < max_iter) {
        ++iter;
        if (fa < fm) {
            const double na = clamp_in(a - 1.618 * (b - a));
            b = m;
            fb = fm;
            m = a;
            fm = fa;
            a = na;
            fa = f(a);
            if (a == clamp_in(lower)) break;
        } else {
            const double nb = clamp_in(b + 1.618 * (b - a));
            a = m;
            fa = fm;
            m = b;
            fm = fb;
            b = nb;
            fb = f(b);
            if (b == clamp_in(upper)) break;
        }
    }
    double c = b - invphi * (b - a);
    double d = a + invphi * (b - a);
    double fc = f(c);
    double fd = f(d);
    while (b - a > abs_tol && iter < max_iter) {
        ++iter;
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - invphi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + invphi * (b - a);
            fd = f(d);
        }
    }
    const double x = fc < fd ? c : d;
    return {x, std::min(fc, fd), iter};
}

/// Root of a continuous g on [a, b] with g(a) g(b) <= 0, by bisection to abs_tol.
inline double bisect_root(const std::function<double(double)>& g, double a, double b,
                          double abs_tol = 1e-12, int max_iter = 200)
{
    double ga = g(a);
    const double gb = g(b);
    if (ga == 0.0) return a;
    if (gb == 0.0) return b;
    if ((ga > 0) == (gb > 0)) throw Error(ErrorKind::DomainError, "root not bracketed");
    for (int i = 0; i < max_iter && b - a > abs_tol; ++i) {
        const double m = 0.5 * (a + b);
        const double gm = g(m);
        if (gm == 0.0) return m;
        if ((gm > 0) == (ga > 0)) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    return 0.5 * (a + b);
}

/// Minimizer of a smooth convex f through the root of a central-difference derivative.
inline MinimizeResult derivative_bisection(const std::function<double(double)>& f, double a,
                                           double b, double abs_tol = 1e-10)
{
    auto df = [&f](double x) {
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        return (f(x + h) - f(x - h)) / (2.0 * h);
    };
    const double x = bisect_root(df, a, b, abs_tol);
    return {x, f(x), 0};
}

}  // namespace gfspec
