#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <functional>
#include <iosfwd>
#include <vector>

#include "gfspec/model.hpp"

namespace gfspec {

/// Cells uniform in the scale s: edges e_i = s^{-1}(s(x_min) + i ds). On such a grid the
/// flow carries cell i onto cell i+1 in time ds exactly (log-uniform when c(x) = x,
/// uniform when c = 1).
struct SizeGrid {
    std::vector<double> edges;    // N + 1
    std::vector<double> centers;  // s-midpoints
    std::vector<double> widths;
    double ds = 0.0;
    double s_lo = 0.0;

    std::size_t size() const { return centers.size(); }
    /// Index of the cell containing x, clamped to the grid.
    std::size_t locate(double x) const;

    static SizeGrid scale_uniform(const ModelSpec& model, std::size_t n, double x_min, double x_max);
    static SizeGrid scale_uniform(const ModelSpec& model, std::size_t n);
};

/// Cell masses u_i ~ \int_{cell} u_t(x) dx at time t.
struct DensityState {
    double t = 0.0;
    Eigen::VectorXd mass;
};

/// Semi-discrete adjoint of A on a SizeGrid: upwind transport in s plus the fragmentation
/// mass matrix. Independent of any weight h.
class DiscreteOperator {
public:
    DiscreteOperator(const ModelSpec& model, SizeGrid grid);

    const SizeGrid& grid() const { return grid_; }
    /// Fragmentation block: column j sends K(x_j) k(x_j, cell i)/K(x_j) to row i and loses K(x_j).
    const Eigen::SparseMatrix<double>& fragmentation() const { return F_; }
    /// Rate at which parent j sends mass below x_min (already folded into cell 0).
    const Eigen::VectorXd& below_rate() const { return below_; }
    /// Full generator M = T + F with donor-cell fluxes U_i / ds.
    Eigen::SparseMatrix<double> generator() const;
    /// Largest |F_jj|, the stiffness of the fragmentation block.
    double max_fragmentation_rate() const { return max_rate_; }

private:
    SizeGrid grid_;
    Eigen::SparseMatrix<double> F_;
    Eigen::VectorXd below_;
    double max_rate_ = 0.0;
};

enum class TimeScheme { Euler, Heun };

struct SolveOptions {
    TimeScheme scheme = TimeScheme::Euler;
    /// Largest fragmentation sub-step; 0 selects 0.9 / max rate.
    double dt = 0.0;
};

/// One-step map of the solver. Euler: fragmentation sub-steps, then an exact one-cell shift.
/// Heun: Strang splitting with the shift between two half fragmentation steps.
class StepMap {
public:
    StepMap(const DiscreteOperator& op, SolveOptions opt = {});

    double dt() const { return op_->grid().ds; }
    int substeps() const { return substeps_; }
    const DiscreteOperator& op() const { return *op_; }

    /// u -> P u over one full step ds; `outflow` receives the mass carried past x_max.
    Eigen::VectorXd apply(const Eigen::VectorXd& u, double* outflow = nullptr) const;
    /// phi -> P^T phi.
    Eigen::VectorXd apply_adjoint(const Eigen::VectorXd& phi) const;
    /// Partial step of length tau < ds (upwind at Courant number tau/ds).
    Eigen::VectorXd apply_partial(const Eigen::VectorXd& u, double tau, double* outflow = nullptr) const;
    Eigen::MatrixXd dense() const;

private:
    Eigen::VectorXd fragment(const Eigen::VectorXd& u, double h) const;
    Eigen::VectorXd fragment_adjoint(const Eigen::VectorXd& phi, double h) const;

    const DiscreteOperator* op_;
    SolveOptions opt_;
    int substeps_ = 1;
};

struct Trajectory {
    std::vector<DensityState> checkpoints;
    double below_grid_inflow = 0.0;  // mass routed into cell 0 from below x_min
    double right_outflow = 0.0;      // mass transported past x_max
    bool left_boundary_flag = false;  // below-grid inflow above 0.1% of the final mass
};

Eigen::VectorXd point_mass(const SizeGrid& grid, double x0, double mass = 1.0);

/// `count` checkpoint times k ds spread evenly over (0, horizon].
std::vector<double> lattice_times(double ds, double horizon, std::size_t count);

/// Integrates u' = M u from u0 and records the state at each requested time.
Trajectory solve(const StepMap& step, const Eigen::VectorXd& u0, std::vector<double> times);

/// \sum_i f(center_i) u_i.
double pairing(const SizeGrid& grid, const Eigen::VectorXd& mass, const std::function<double(double)>& f);
double pairing(const SizeGrid& grid, const DensityState& state, const std::function<double(double)>& f);

/// RFC-4180 CSV with header t,cell_center,mass.
void write_checkpoints_csv(std::ostream& os, const SizeGrid& grid, const Trajectory& traj);

}  // namespace gfspec
