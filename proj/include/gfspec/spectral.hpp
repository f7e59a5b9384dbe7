#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <iosfwd>
#include <vector>

#include "gfspec/model.hpp"
#include "gfspec/pde.hpp"

namespace gfspec {

using LinearMap = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct PowerOptions {
    /// Stop once both residuals |Av - rho v|_inf / (rho |v|_inf) fall below this.
    double tol = 1e-12;
    int max_iter = 100000;
    /// Iterate on (A + I) / 2 instead of A (guards against periodic matrices).
    bool lazy = false;
};

/// Perron root and vectors of a non-negative map, A v = rho v and A^T w = rho w.
struct PerronPair {
    double rho = 0.0;
    Eigen::VectorXd right;  // max-normalized
    Eigen::VectorXd left;
    double right_residual = 0.0;
    double left_residual = 0.0;
    int iterations = 0;
};

PerronPair perron_power(const LinearMap& apply, const LinearMap& adjoint, Eigen::Index n,
                        const PowerOptions& opt = {});

/// True when the directed graph of the nonzero pattern is strongly connected.
bool strongly_connected(const Eigen::SparseMatrix<double>& pattern);

/// Principal eigenvalue of a Metzler matrix M by power iteration on I + tau M.
struct MetzlerEigen {
    double mu = 0.0;
    Eigen::VectorXd right;
    Eigen::VectorXd left;
};
MetzlerEigen metzler_principal(const Eigen::MatrixXd& M, const PowerOptions& opt = {});

struct Normalization {
    double m_psi = 0.0;          // m(psi), 1 after normalization
    double phi_over_psi = 0.0;   // max_i phi_i / psi(x_i), 1 after normalization
    double duality = 0.0;        // m(phi)
};

/// Scales m to m(psi) = 1 and phi to max phi/psi = 1 (psi at cell centers); Reducible if
/// phi is not positive.
Normalization normalize_pair(const SizeGrid& grid, const WeightFunction& psi, Eigen::VectorXd& m,
                             Eigen::VectorXd& phi);

/// lambda0 with the grid representations of phi (a function on cells) and m (cell masses).
/// lambda0 = -rho where rho = ln rho(P) / ds is the growth rate of the step map.
struct SpectralTriple {
    double lambda0 = 0.0;
    double step_rho = 0.0;       // Perron root of the step map P
    Eigen::VectorXd phi;
    Eigen::VectorXd m;
    double right_residual = 0.0;  // |P m - rho m|_inf / (ds |m|_inf), rate units
    double left_residual = 0.0;
    int iterations = 0;
    Normalization normalization;
};

/// Perron triple of the step map; Reducible if the generator is not irreducible.
SpectralTriple principal_eigen(const StepMap& step, const WeightFunction& psi,
                               const PowerOptions& opt = {});

/// Same normalizations applied to a dense eigensolve of StepMap::dense().
SpectralTriple principal_eigen_dense(const StepMap& step, const WeightFunction& psi);

struct BoundReport {
    double lambda0 = 0.0;
    double lambda2 = 0.0;
    double margin = 0.0;  // lambda2 - lambda0
    bool strict = false;
};

/// lambda0 <= lambda2 + tol, and lambda0 < lambda2 - tol when `nonconstant`; BoundViolated otherwise.
BoundReport lambda0_vs_bound(const SpectralTriple& triple, double lambda2, bool nonconstant,
                             double tol = 1e-6);

struct GapFit {
    double gamma = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Least-squares line through (t, log|residual|); gamma = -slope. RatePositive if slope >= 0.
GapFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& residual);

/// Fits |e^{lambda0 t} <u_t, f> - phi(x0) m(f) / m(phi)| ~ C e^{-gamma t} after a burn-in
/// fraction of the horizon. Points below the roundoff floor are dropped.
GapFit fit_gap_rate(const Trajectory& traj, const SpectralTriple& triple, const SizeGrid& grid,
                    double x0, const ScalarFn& f, double burn_in = 0.2);

/// CSV with header x,phi,m.
void write_triple_csv(std::ostream& os, const SizeGrid& grid, const SpectralTriple& triple);

}  // namespace gfspec
