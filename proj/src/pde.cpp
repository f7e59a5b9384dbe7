#include "gfspec/pde.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "gfspec/cumulative.hpp"
#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"

namespace gfspec {

std::size_t SizeGrid::locate(double x) const
{
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    if (it == edges.begin()) return 0;
    return std::min<std::size_t>(static_cast<std::size_t>(it - edges.begin()) - 1, size() - 1);
}

SizeGrid SizeGrid::scale_uniform(const ModelSpec& model, std::size_t n, double x_min, double x_max)
{
    if (n < 2) throw Error(ErrorKind::DomainError, "grid needs at least 2 cells");
    if (!(x_min > 0.0 && x_min < x_max)) throw Error(ErrorKind::DomainError, "grid needs 0 < x_min < x_max");
    const FlowEngine& flow = *model.flow;
    SizeGrid g;
    g.s_lo = flow.s_of(x_min);
    const double s_hi = flow.s_of(x_max);
    g.ds = (s_hi - g.s_lo) / static_cast<double>(n);
    g.edges.resize(n + 1);
    g.centers.resize(n);
    g.widths.resize(n);
    g.edges[0] = x_min;
    g.edges[n] = x_max;
    for (std::size_t i = 1; i < n; ++i) g.edges[i] = flow.s_inverse(g.s_lo + static_cast<double>(i) * g.ds);
    for (std::size_t i = 0; i < n; ++i) {
        g.centers[i] = flow.s_inverse(g.s_lo + (static_cast<double>(i) + 0.5) * g.ds);
        g.widths[i] = g.edges[i + 1] - g.edges[i];
        if (!(g.widths[i] > 0.0)) throw Error(ErrorKind::DomainError, "degenerate grid cell");
    }
    return g;
}

SizeGrid SizeGrid::scale_uniform(const ModelSpec& model, std::size_t n)
{
    return scale_uniform(model, n, model.domain.lo, model.domain.hi);
}

// ---------------------------------------------------------------------------

namespace {

/// v -> p_density((0, v)) for v in [0, 1].
class DensityPrimitive {
public:
    explicit DensityPrimitive(const RelativeMeasure& p)
    {
        if (!p.density) return;
        if (p.power_density) {
            power_ = p.power_density;
            if (!(power_->second > -1.0)) {
                throw Error(ErrorKind::QuadratureDivergence, "kernel density has infinite mass near 0");
            }
            return;
        }
        std::vector<double> kinks = p.density_breaks;
        kinks.push_back(1.0);
        const ScalarFn d = p.density;
        CumulativeTable::Options o;
        o.lo = 1e-9;
        o.hi = 4.0;
        table_ = CumulativeTable([d](double v) { return v < 1.0 ? d(v) : 0.0; }, kinks, o);
        const auto z = table_.limit_at_zero();
        if (!z) throw Error(ErrorKind::QuadratureDivergence, "kernel density has infinite mass near 0");
        zero_ = *z;
        has_table_ = true;
    }

    double operator()(double v) const
    {
        if (!(v > 0.0)) return 0.0;
        v = std::min(v, 1.0);
        if (power_) {
            const auto [C, beta] = *power_;
            return C * std::pow(v, beta + 1.0) / (beta + 1.0);
        }
        if (has_table_) return table_(v) - zero_;
        return 0.0;
    }

private:
    std::optional<std::pair<double, double>> power_;
    CumulativeTable table_;
    double zero_ = 0.0;
    bool has_table_ = false;
};

}  // namespace

DiscreteOperator::DiscreteOperator(const ModelSpec& model, SizeGrid grid) : grid_(std::move(grid))
{
    const std::size_t n = grid_.size();
    const auto& e = grid_.edges;
    below_ = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n));
    std::vector<Eigen::Triplet<double>> trip;
    std::vector<double> col(n);

    const RelativeMeasure* p = model.frag.relative_measure();
    std::optional<DensityPrimitive> prim;
    if (p) prim.emplace(*p);

    for (std::size_t j = 0; j < n; ++j) {
        const double x = grid_.centers[j];
        const double K = model.frag.rate(x);
        std::fill(col.begin(), col.end(), 0.0);
        double below = 0.0;
        auto deposit = [&](double y, double w) {
            if (y < e[0]) {
                below += w;
                col[0] += w;
            } else {
                col[grid_.locate(y)] += w;
            }
        };
        if (p) {
            if (K != 0.0) {
                for (const auto& [u, w] : p->atoms) deposit(u * x, K * w);
                if (p->density) {
                    double prev = (*prim)(e[0] / x);
                    below += K * prev;
                    col[0] += K * prev;
                    for (std::size_t i = 0; i <= j && e[i] < x; ++i) {
                        const double cur = (*prim)(std::min(e[i + 1] / x, 1.0));
                        col[i] += K * (cur - prev);
                        prev = cur;
                    }
                }
            }
        } else {
            const KernelMeasure m = model.frag.measure_at(x);
            for (const auto& [y, w] : m.atoms) deposit(y, w);
            if (m.density) {
                const double b0 = integrate_singular_piecewise(m.density, 0.0, e[0], m.breaks);
                below += b0;
                col[0] += b0;
                for (std::size_t i = 0; i <= j && e[i] < x; ++i) {
                    col[i] += integrate_singular_piecewise(m.density, e[i], std::min(e[i + 1], x), m.breaks);
                }
            }
        }
        col[j] -= K;
        for (std::size_t i = 0; i < n; ++i) {
            if (col[i] != 0.0) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), col[i]);
        }
        below_[static_cast<Eigen::Index>(j)] = below;
        max_rate_ = std::max(max_rate_, std::abs(col[j]));
    }
    F_.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    F_.setFromTriplets(trip.begin(), trip.end());
    F_.makeCompressed();
}

Eigen::SparseMatrix<double> DiscreteOperator::generator() const
{
    const auto n = static_cast<Eigen::Index>(grid_.size());
    Eigen::SparseMatrix<double> T(n, n);
    std::vector<Eigen::Triplet<double>> trip;
    const double r = 1.0 / grid_.ds;
    for (Eigen::Index i = 0; i < n; ++i) {
        trip.emplace_back(static_cast<int>(i), static_cast<int>(i), -r);
        if (i + 1 < n) trip.emplace_back(static_cast<int>(i + 1), static_cast<int>(i), r);
    }
    T.setFromTriplets(trip.begin(), trip.end());
    return T + F_;
}

// ---------------------------------------------------------------------------

namespace {

Eigen::VectorXd shift(const Eigen::VectorXd& u)
{
    const Eigen::Index n = u.size();
    Eigen::VectorXd v(n);
    v(0) = 0.0;
    v.tail(n - 1) = u.head(n - 1);
    return v;
}

Eigen::VectorXd shift_adjoint(const Eigen::VectorXd& phi)
{
    const Eigen::Index n = phi.size();
    Eigen::VectorXd v(n);
    v.head(n - 1) = phi.tail(n - 1);
    v(n - 1) = 0.0;
    return v;
}

}  // namespace

StepMap::StepMap(const DiscreteOperator& op, SolveOptions opt) : op_(&op), opt_(opt)
{
    const double ds = op.grid().ds;
    const double rate = op.max_fragmentation_rate();
    const double hmax = opt_.dt > 0.0 ? opt_.dt : (rate > 0.0 ? 0.9 / rate : ds);
    if (!(hmax >= 1e-12)) {
        throw Error(ErrorKind::CFLUnsatisfiable, "fragmentation step below 1e-12");
    }
    substeps_ = std::max(1, static_cast<int>(std::ceil(ds / hmax - 1e-12)));
    if (ds / substeps_ * rate > 1.0) {
        throw Error(ErrorKind::CFLViolation, "fragmentation step exceeds 1 / max rate");
    }
}

Eigen::VectorXd StepMap::fragment(const Eigen::VectorXd& u, double h) const
{
    const auto& F = op_->fragmentation();
    Eigen::VectorXd Fu = F * u;
    if (opt_.scheme == TimeScheme::Euler) return u + h * Fu;
    Eigen::VectorXd u1 = u + h * Fu;
    return u + 0.5 * h * (Fu + F * u1);
}

Eigen::VectorXd StepMap::fragment_adjoint(const Eigen::VectorXd& phi, double h) const
{
    const auto& F = op_->fragmentation();
    Eigen::VectorXd Fp = F.transpose() * phi;
    if (opt_.scheme == TimeScheme::Euler) return phi + h * Fp;
    Eigen::VectorXd p1 = phi + h * Fp;
    return phi + 0.5 * h * (Fp + F.transpose() * p1);
}

Eigen::VectorXd StepMap::apply(const Eigen::VectorXd& u, double* outflow) const
{
    const double h = dt() / substeps_;
    if (opt_.scheme == TimeScheme::Euler) {
        Eigen::VectorXd v = u;
        for (int k = 0; k < substeps_; ++k) v = fragment(v, h);
        if (outflow) *outflow = v(v.size() - 1);
        return shift(v);
    }
    // Strang: half fragmentation, exact transport, half fragmentation.
    Eigen::VectorXd v = u;
    for (int k = 0; k < substeps_; ++k) v = fragment(v, 0.5 * h);
    if (outflow) *outflow = v(v.size() - 1);
    v = shift(v);
    for (int k = 0; k < substeps_; ++k) v = fragment(v, 0.5 * h);
    return v;
}

Eigen::VectorXd StepMap::apply_adjoint(const Eigen::VectorXd& phi) const
{
    const double h = dt() / substeps_;
    if (opt_.scheme == TimeScheme::Euler) {
        Eigen::VectorXd v = shift_adjoint(phi);
        for (int k = 0; k < substeps_; ++k) v = fragment_adjoint(v, h);
        return v;
    }
    Eigen::VectorXd v = phi;
    for (int k = 0; k < substeps_; ++k) v = fragment_adjoint(v, 0.5 * h);
    v = shift_adjoint(v);
    for (int k = 0; k < substeps_; ++k) v = fragment_adjoint(v, 0.5 * h);
    return v;
}

Eigen::VectorXd StepMap::apply_partial(const Eigen::VectorXd& u, double tau, double* outflow) const
{
    const double nu = tau / dt();
    if (outflow) *outflow = nu * u(u.size() - 1);
    Eigen::VectorXd v = (1.0 - nu) * u + nu * shift(u);
    const int m = std::max(1, static_cast<int>(std::ceil(substeps_ * nu - 1e-12)));
    for (int k = 0; k < m; ++k) v = fragment(v, tau / m);
    return v;
}

Eigen::MatrixXd StepMap::dense() const
{
    const auto n = static_cast<Eigen::Index>(op_->grid().size());
    Eigen::MatrixXd P(n, n);
    for (Eigen::Index j = 0; j < n; ++j) P.col(j) = apply(Eigen::VectorXd::Unit(n, j));
    return P;
}

// ---------------------------------------------------------------------------

Eigen::VectorXd point_mass(const SizeGrid& grid, double x0, double mass)
{
    Eigen::VectorXd u = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(grid.size()));
    u(static_cast<Eigen::Index>(grid.locate(x0))) = mass;
    return u;
}

std::vector<double> lattice_times(double ds, double horizon, std::size_t count)
{
    const auto steps = static_cast<long>(std::floor(horizon / ds + 1e-9));
    if (count == 0 || steps < static_cast<long>(count)) {
        throw Error(ErrorKind::DomainError, "horizon holds fewer steps than checkpoints");
    }
    std::vector<double> ts;
    for (std::size_t i = 1; i <= count; ++i) {
        const long k = static_cast<long>(std::llround(static_cast<double>(steps) * i / count));
        ts.push_back(static_cast<double>(k) * ds);
    }
    return ts;
}

Trajectory solve(const StepMap& step, const Eigen::VectorXd& u0, std::vector<double> times)
{
    std::sort(times.begin(), times.end());
    const double ds = step.dt();
    const auto& below = step.op().below_rate();
    Trajectory traj;
    // The main state stays on the lattice k ds; off-lattice checkpoints take a partial
    // step on a copy, so partial-step smoothing never accumulates.
    Eigen::VectorXd u = u0;
    long k = 0;
    double tail_below = 0.0, tail_out = 0.0;
    auto check = [&](const Eigen::VectorXd& v, double t) {
        if ((v.array() < 0.0).any()) {
            throw Error(ErrorKind::NegativeMass, "negative cell mass at t = " + std::to_string(t));
        }
    };
    check(u, 0.0);
    for (double target : times) {
        if (target < 0.0) continue;
        const auto n = static_cast<long>(std::floor(target / ds + 1e-9));
        double out = 0.0;
        for (; k < n; ++k) {
            traj.below_grid_inflow += ds * below.dot(u);
            u = step.apply(u, &out);
            traj.right_outflow += out;
        }
        const double rest = target - static_cast<double>(k) * ds;
        tail_below = tail_out = 0.0;
        if (rest > 1e-9 * ds) {
            tail_below = rest * below.dot(u);
            Eigen::VectorXd v = step.apply_partial(u, rest, &tail_out);
            check(v, target);
            traj.checkpoints.push_back({target, std::move(v)});
        } else {
            check(u, target);
            traj.checkpoints.push_back({target, u});
        }
    }
    traj.below_grid_inflow += tail_below;
    traj.right_outflow += tail_out;
    const double total = traj.checkpoints.empty() ? u.sum() : traj.checkpoints.back().mass.sum();
    traj.left_boundary_flag = traj.below_grid_inflow > 1e-3 * total;
    return traj;
}

double pairing(const SizeGrid& grid, const Eigen::VectorXd& mass,
               const std::function<double(double)>& f)
{
    double s = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double m = mass(static_cast<Eigen::Index>(i));
        if (m != 0.0) s += f(grid.centers[i]) * m;
    }
    return s;
}

double pairing(const SizeGrid& grid, const DensityState& state,
               const std::function<double(double)>& f)
{
    return pairing(grid, state.mass, f);
}

void write_checkpoints_csv(std::ostream& os, const SizeGrid& grid, const Trajectory& traj)
{
    os << "t,cell_center,mass\r\n";
    char line[96];
    for (const auto& st : traj.checkpoints) {
        for (std::size_t i = 0; i < grid.size(); ++i) {
            std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\r\n", st.t, grid.centers[i],
                          st.mass(static_cast<Eigen::Index>(i)));
            os << line;
        }
    }
}

}  // namespace gfspec
