#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "gfspec/model.hpp"

namespace gfspec {

struct CriterionCheck {
    std::string name;
    double margin = 0.0;
    bool pass = false;
};

struct AssumptionReport {
    std::string regime = "custom";
    WeightFunction h;
    WeightFunction psi;
    WeightFunction psi_prime;
    double b = 0.0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    Interval L;
    std::vector<CriterionCheck> checks;
    std::map<std::string, double> parameters;  // a0, a_inf, alpha, beta, thresholds
    bool extrapolated = true;  // limsup/liminf read off finite probe tails

    bool passed() const;
    void add(std::string name, double margin)
    {
        checks.push_back({std::move(name), margin, margin > 0.0});
    }
};

nlohmann::ordered_json to_json(const AssumptionReport& report);

struct Threshold {
    double threshold = 0.0;
    double argmin = 0.0;
};

/// alpha / (1 - \int u^alpha p(du)), the normalized right side of the pseudo-entrance condition.
double pseudo_entrance_objective(const RelativeMeasure& p, double alpha);
/// Minimum of the pseudo-entrance objective over alpha > 1.
Threshold criterion_pseudo_entrance(const RelativeMeasure& p);
Threshold criterion_uniform_kernel();
Threshold criterion_mitosis_kernel();

struct LnxThresholds {
    double low = 0.0;   // bound on limsup_{x->0} K
    double high = 0.0;  // bound on liminf_{x->inf} K
    double alpha = 1.0;  // exponents attaining them (1 for the limit)
    double beta = 1.0;
};
LnxThresholds criterion_lnx(const RelativeMeasure& p);

struct ReggenResult {
    double closed_form = 0.0;
    double optimizer_max = 0.0;
    double argmax = 0.0;
    bool agrees = false;
};
/// max over alpha in [0, c_inf) of (alpha + c0)(c_inf - alpha)/(c0 - alpha), closed form and optimizer.
ReggenResult criterion_reggen(double c0, double c_inf);

/// Limit estimates from the last (first) two decades of a log probe grid: the end value
/// when the tail is monotone, the extreme otherwise.
double tail_limsup_at_infinity(const std::vector<double>& x, const std::vector<double>& v);
double tail_liminf_at_infinity(const std::vector<double>& x, const std::vector<double>& v);
double tail_limsup_at_zero(const std::vector<double>& x, const std::vector<double>& v);
double tail_liminf_at_zero(const std::vector<double>& x, const std::vector<double>& v);

WeightFunction build_h_pseudo_entrance(const ModelSpec& model, double alpha);
WeightFunction build_h_powerlaw(const ModelSpec& model, double alpha, double beta);
WeightFunction build_h_entrance(const ModelSpec& model, double a);

AssumptionReport criterion_pseudo_entrance_report(const ModelSpec& model, double alpha);
AssumptionReport criterion_lnx_report(const ModelSpec& model);
AssumptionReport criterion_K_constant(const ModelSpec& model);
AssumptionReport criterion_entrance(const ModelSpec& model, double lambda0_estimate);

/// b = sup A h / h on probes (refined around local maxima), tilted-mass sups, tail trend.
AssumptionReport verify_assumption1(const ModelSpec& model, const WeightFunction& h);

struct Lambda2 {
    double lambda2 = 0.0;
    bool nonconstant = false;
};
Lambda2 lambda2_bound(const ModelSpec& model, const WeightFunction& psi_prime);

struct Lambda1 {
    double lambda1 = 0.0;
    double C = 0.0;
    Interval L;
};
/// Largest lambda with A psi <= -lambda psi + C 1_L off the central region.
Lambda1 lambda1_estimate(const ModelSpec& model, const WeightFunction& psi);

}  // namespace gfspec
