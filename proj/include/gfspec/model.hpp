#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gfspec/quadrature.hpp"

namespace gfspec {

using ScalarFn = std::function<double(double)>;

class FlowEngine;

struct Interval {
    double lo = 0.0;
    double hi = 0.0;
};

/// Growth law, given either through the scale s or through the speed c with
/// s(x) = \int_1^x dy / c(y).
struct GrowthSpec {
    enum class Kind { ExplicitS, SpeedC };

    Kind kind = Kind::SpeedC;
    ScalarFn s;          // ExplicitS
    ScalarFn s_inverse;  // ExplicitS, optional
    ScalarFn c;          // SpeedC; optional for ExplicitS (then 1/s' numerically)
    std::vector<double> kinks;

    static GrowthSpec from_speed(ScalarFn c, std::vector<double> kinks = {});
    static GrowthSpec from_scale(ScalarFn s, ScalarFn s_inverse = {}, ScalarFn c = {},
                                 std::vector<double> kinks = {});
};

/// Relative-size measure p on (0,1): atoms plus an optional density.
struct RelativeMeasure {
    std::vector<std::pair<double, double>> atoms;  // (u, weight)
    ScalarFn density;                              // on (0,1), may be empty
    std::vector<double> density_breaks;
    /// (C, beta) when the density is exactly C u^beta; enables exact sampling.
    std::optional<std::pair<double, double>> power_density;

    /// \int u^a p(du). Throws MomentDivergence when the integral does not converge.
    double moment(double a) const;
    /// \int g(u) p(du), atoms exact and density by double-exponential quadrature.
    double integrate(const ScalarFn& g, std::span<const double> breaks = {},
                     const QuadratureOptions& opt = {}) const;
    /// p((0,1)) when finite.
    std::optional<double> mass() const;
    bool conservative(double tol = 1e-8) const;

    static RelativeMeasure uniform();                   // 2 du
    static RelativeMeasure mitosis();                   // 2 delta_{1/2}
    static RelativeMeasure power(double C, double beta);  // C u^beta du
};

/// Measure k(x, .) on (0, x) for a general kernel.
struct KernelMeasure {
    std::vector<std::pair<double, double>> atoms;  // (y, weight)
    ScalarFn density;                              // in y on (0, x)
    std::vector<double> breaks;
};

/// Fragmentation kernel k together with the fragmentation rate K.
class FragmentationKernel {
public:
    enum class Kind { Relative, General };

    FragmentationKernel() = default;

    static FragmentationKernel relative(RelativeMeasure p, ScalarFn K,
                                        std::vector<double> K_kinks = {});
    static FragmentationKernel general(std::function<KernelMeasure(double)> k, ScalarFn K,
                                       std::vector<double> K_kinks = {});

    Kind kind() const { return kind_; }
    double rate(double x) const { return K_(x); }
    const std::vector<double>& rate_kinks() const { return K_kinks_; }
    const RelativeMeasure* relative_measure() const
    {
        return kind_ == Kind::Relative ? &p_ : nullptr;
    }
    /// k(x, .) as an explicit measure in y.
    KernelMeasure measure_at(double x) const;

    /// \int_{(0,x)} g(y) k(x, dy); `g_kinks` are break points of g in y.
    double integrate(double x, const ScalarFn& g, std::span<const double> g_kinks = {},
                     const QuadratureOptions& opt = {}) const;
    /// k(x, (0, x)).
    double total_mass(double x) const;

private:
    Kind kind_ = Kind::Relative;
    RelativeMeasure p_;
    std::function<KernelMeasure(double)> general_;
    ScalarFn K_;
    std::vector<double> K_kinks_;
};

/// Positive function with its s-derivative.
struct WeightFunction {
    ScalarFn value;
    ScalarFn s_derivative;
    std::string label;
    std::vector<double> kinks;
    /// Optional x -> sup_{0<y<x} value(y); +inf allowed. Used by samplers.
    ScalarFn sup_below;
    /// Optional closed form of s_derivative / value.
    ScalarFn log_s_derivative;

    double operator()(double x) const { return value(x); }
    double log_derivative(double x) const
    {
        return log_s_derivative ? log_s_derivative(x) : s_derivative(x) / value(x);
    }

    static WeightFunction constant(double v = 1.0);
};

struct DoeblinInterval {
    Interval I;
    double a = 0.0;  // minorizing measure: uniform law on I
};

struct DoeblinMap {
    ScalarFn T;
    Interval I;
    double a = 0.0;
};

struct Declarations {
    bool irreducible = false;
    std::optional<DoeblinInterval> doeblin;
    std::optional<DoeblinMap> doeblin_map;
};

struct ModelOptions {
    double table_lo = 0.0;  // 0: derived from the domain
    double table_hi = 0.0;
    double log_step = 2e-3;
    double rel_tol = 1e-8;
};

/// Full coefficient set (s, K, k) plus declared structural assumptions.
/// Immutable once built by make_model(), which validates it on the probe grid.
struct ModelSpec {
    GrowthSpec growth;
    FragmentationKernel frag;
    Declarations declared;
    Interval domain{1e-3, 1e3};
    std::shared_ptr<const FlowEngine> flow;

    double speed(double x) const;
    double s(double x) const;
    /// Growth and rate kinks merged and sorted.
    std::vector<double> kinks() const;
};

ModelSpec make_model(GrowthSpec growth, FragmentationKernel frag, Interval domain,
                     Declarations declared = {}, ModelOptions opt = {});

/// 256 log-uniform points on the domain.
std::vector<double> probe_grid(const Interval& domain, std::size_t n = 256);

/// A f(x) = df/ds(x) + \int f(y) k(x,dy) - K(x) f(x).
double generator_apply(const ModelSpec& model, const WeightFunction& f, double x);

/// \int (y/x) k(x,dy) - K(x).
double mass_conservation_defect(const ModelSpec& model, double x);

/// f(x) = x, whose s-derivative is c(x).
WeightFunction identity_weight(const ModelSpec& model);

/// Checks positivity and the finite-difference s-derivative at probe points.
void validate_weight(const ModelSpec& model, const WeightFunction& f);

}  // namespace gfspec
