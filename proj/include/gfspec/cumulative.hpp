#pragma once

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace gfspec {

/// Tabulated primitive G(x) = \int_1^x g(y) dy of a positive, locally bounded
/// integrand on a log-spaced node set. Interpolation is cubic Hermite in ln x
/// using the exact derivative x g(x), so breakpoints of g must be passed as kinks.
/// Intervals touching an integrable singularity of g are evaluated by direct
/// quadrature. Queries outside the table fall back to direct quadrature up to `hard_max`.
/// Immutable after construction.
class CumulativeTable {
public:
    struct Options {
        double lo = 1e-6;
        double hi = 1e6;
        double hard_max = 1e12;
        double log_step = 2e-3;
        double rel_tol = 1e-8;
    };

    CumulativeTable() = default;
    CumulativeTable(std::function<double(double)> integrand, std::vector<double> kinks,
                    Options opt);

    double operator()(double x) const;
    /// Solves G(x) = v to `tol` in G-units; G must be strictly increasing.
    double inverse(double v, double tol = 1e-12) const;
    /// G(0+) when the integral converges at the origin.
    std::optional<double> limit_at_zero() const { return limit_at_zero_; }
    /// G(+inf) when finite.
    std::optional<double> limit_at_infinity() const { return limit_at_infinity_; }

    double lo() const { return nodes_.front(); }
    double hi() const { return nodes_.back(); }
    double integrand(double x) const { return g_(x); }

private:
    double direct(double a, double b) const;
    double hermite(std::size_t i, double z) const;
    double bisect(double za, double zb, double v, double tol) const;

    std::function<double(double)> g_;
    std::vector<double> kinks_;
    Options opt_;
    std::vector<double> nodes_;   // x
    std::vector<double> logs_;    // ln x
    std::vector<double> values_;  // G(x)
    std::vector<double> dleft_;   // dG/dz at left end of interval i (right limit)
    std::vector<double> dright_;  // dG/dz at right end of interval i (left limit)
    std::vector<char> exact_;     // interval evaluated by quadrature (singular end)
    std::optional<double> limit_at_zero_;
    std::optional<double> limit_at_infinity_;
};

}  // namespace gfspec
