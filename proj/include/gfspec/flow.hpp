#pragma once

#include <optional>

#include "gfspec/cumulative.hpp"
#include "gfspec/model.hpp"

namespace gfspec {

/// Scale s, its inverse and the semi-flow phi(x,t) = s^{-1}(s(x) + t).
/// Immutable after construction; all queries are safe for concurrent use.
class FlowEngine {
public:
    struct Options {
        double table_lo = 1e-6;
        double table_hi = 1e6;
        double hard_max = 1e9;  // x_max * 1e6
        double log_step = 2e-3;
        double rel_tol = 1e-8;
        double inversion_tol = 1e-12;
    };

    FlowEngine(GrowthSpec growth, Options opt);

    double s_of(double x) const;
    /// s^{-1}(v); throws DomainError below s(0+) and RangeExtensionFailure past hard_max.
    double s_inverse(double v) const;
    double flow_at(double x, double t) const;
    /// \int_0^t g(phi(x,u)) du.
    double integrate_along_flow(const ScalarFn& g, double x, double t,
                                const std::vector<double>& kinks = {}) const;

    /// c(x); for an explicit scale without c, 1/s'(x) by central differences.
    double speed(double x) const;
    std::optional<double> s_at_zero() const { return s_zero_; }
    const GrowthSpec& growth() const { return growth_; }
    const Options& options() const { return opt_; }

private:
    GrowthSpec growth_;
    Options opt_;
    CumulativeTable table_;
    std::optional<double> s_zero_;
};

}  // namespace gfspec
