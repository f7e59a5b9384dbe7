#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "gfspec/pde.hpp"
#include "gfspec/pdmp.hpp"
#include "gfspec/spectral.hpp"

namespace gfspec {

struct FvOptions {
    std::size_t particles = 10000;
    double t_end = 20.0;
    double burn_in = 0.3;       // fraction of t_end
    std::size_t batches = 20;
    std::size_t snapshots = 400;  // post-burn-in snapshots of the ensemble
    double event_window = 1.0;    // thinning horizon per scheduled event
    std::uint64_t seed = 1;
};

/// Fleming-Viot particle system for the killed h-process: a killed particle restarts at the
/// current position of a uniformly chosen other particle.
struct FvResult {
    double lambda0X = 0.0;  // post-burn-in kills per particle per unit time
    double ci = 0.0;        // batch-means half width (t quantile, 95%)
    std::uint64_t kills = 0;
    std::uint64_t kills_post_burn_in = 0;
    std::size_t particles = 0;
    double burn_in_time = 0.0;
    std::vector<double> batch_rates;
    Eigen::VectorXd nu;   // time-averaged occupation of grid cells, sums to 1
    double split_half_tv = 0.0;
    bool stall = false;      // no kills after burn-in
    bool supported = false;  // model declares a Doeblin minorization
    SamplerCounters counters;
};

FvResult fv_run(const TiltedJumpLaw& law, const SizeGrid& grid, double x0, const FvOptions& opt = {});

struct Reconstruction {
    Eigen::VectorXd m;
    Eigen::VectorXd phi;
    Normalization normalization;
};

/// m_i = nu_i / h(x_i) and phi_i = eta_i h(x_i), normalized like a SpectralTriple. An empty
/// eta stands for eta = 1.
Reconstruction reconstruct_m_phi(const SizeGrid& grid, const Eigen::VectorXd& nu,
                                 const Eigen::VectorXd& eta, const WeightFunction& h,
                                 const WeightFunction& psi);

struct EtaOptions {
    std::size_t particles = 1000;  // Fleming-Viot particles per probe point
    std::uint64_t seed = 2;
    unsigned threads = 1;
    double max_drift = 0.1;
};

struct EtaResult {
    std::vector<double> x;
    std::vector<double> eta;       // e^{lambda0X t} P_x(t < zeta)
    std::vector<double> eta_long;  // same at 1.5 t
    std::vector<double> drift;     // |eta_long / eta - 1|
    std::vector<char> resolved;    // eta above 1e-3 of its maximum
    double max_drift = 0.0;        // over resolved points
};

/// Survival probabilities from a Fleming-Viot system started at each x, read off the kill
/// counter as (1 - 1/n)^kills; InconsistentEta if the resolved drift exceeds max_drift.
EtaResult eta_estimate(const TiltedJumpLaw& law, const std::vector<double>& xs, double lambda0X,
                       double t_probe, const EtaOptions& opt = {});

/// Total variation between two non-negative vectors after scaling each to unit sum.
double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

}  // namespace gfspec
