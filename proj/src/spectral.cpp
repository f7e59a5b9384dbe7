#include "gfspec/spectral.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "gfspec/errors.hpp"

namespace gfspec {

namespace {

struct PowerRun {
    double rho = 0.0;
    Eigen::VectorXd v;
    int iterations = 0;
};

PowerRun power_run(const LinearMap& A, Eigen::Index n, const PowerOptions& opt)
{
    PowerRun r;
    r.v = Eigen::VectorXd::Ones(n);
    for (int it = 1; it <= opt.max_iter; ++it) {
        Eigen::VectorXd w = A(r.v);
        if (opt.lazy) w = 0.5 * (w + r.v);
        const double rho = w.maxCoeff();
        if (!(rho > 0.0) || !std::isfinite(rho)) {
            throw Error(ErrorKind::NoConvergence, "power iteration lost the positive cone");
        }
        w /= rho;
        // With |v|_inf = 1 this is |Av - rho v|_inf / rho.
        const double change = (w - r.v).cwiseAbs().maxCoeff();
        r.v = std::move(w);
        r.rho = rho;
        r.iterations = it;
        if (change <= opt.tol) {
            if (opt.lazy) r.rho = 2.0 * rho - 1.0;
            return r;
        }
    }
    throw Error(ErrorKind::NoConvergence,
                "power iteration did not converge in " + std::to_string(opt.max_iter) + " iterations");
}

double residual(const LinearMap& A, const Eigen::VectorXd& v, double rho)
{
    return (A(v) - rho * v).cwiseAbs().maxCoeff() / (rho * v.cwiseAbs().maxCoeff());
}

void normalize(const SizeGrid& grid, const WeightFunction& psi, SpectralTriple& tr)
{
    tr.normalization = normalize_pair(grid, psi, tr.m, tr.phi);
}

Eigen::VectorXd real_perron_vector(const Eigen::MatrixXd& P, double& rho)
{
    Eigen::EigenSolver<Eigen::MatrixXd> es(P);
    if (es.info() != Eigen::Success) throw Error(ErrorKind::NoConvergence, "dense eigensolver failed");
    Eigen::Index best = 0;
    for (Eigen::Index i = 1; i < P.rows(); ++i) {
        if (es.eigenvalues()(i).real() > es.eigenvalues()(best).real()) best = i;
    }
    rho = es.eigenvalues()(best).real();
    Eigen::VectorXd v = es.eigenvectors().col(best).real();
    if (v.sum() < 0.0) v = -v;
    return v / v.cwiseAbs().maxCoeff();
}

}  // namespace

Normalization normalize_pair(const SizeGrid& grid, const WeightFunction& psi, Eigen::VectorXd& m,
                             Eigen::VectorXd& phi)
{
    const Eigen::Index n = m.size();
    Eigen::VectorXd ps(n);
    for (Eigen::Index i = 0; i < n; ++i) ps(i) = psi(grid.centers[static_cast<std::size_t>(i)]);
    m = m.cwiseMax(0.0);
    m /= m.dot(ps);
    phi /= phi.cwiseQuotient(ps).maxCoeff();
    if ((phi.array() <= 0.0).any()) {
        throw Error(ErrorKind::Reducible, "eigenfunction vanishes on part of the grid");
    }
    return {m.dot(ps), phi.cwiseQuotient(ps).maxCoeff(), m.dot(phi)};
}

PerronPair perron_power(const LinearMap& apply, const LinearMap& adjoint, Eigen::Index n,
                        const PowerOptions& opt)
{
    const PowerRun right = power_run(apply, n, opt);
    const PowerRun left = power_run(adjoint, n, opt);
    PerronPair p;
    p.rho = right.rho;
    p.right = right.v;
    p.left = left.v;
    p.right_residual = residual(apply, p.right, p.rho);
    p.left_residual = residual(adjoint, p.left, p.rho);
    p.iterations = std::max(right.iterations, left.iterations);
    return p;
}

bool strongly_connected(const Eigen::SparseMatrix<double>& pattern)
{
    const Eigen::Index n = pattern.cols();
    if (n == 0) return true;
    std::vector<std::vector<Eigen::Index>> out(n), in(n);
    for (Eigen::Index j = 0; j < pattern.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(pattern, j); it; ++it) {
            if (it.value() != 0.0 && it.row() != j) {
                out[j].push_back(it.row());
                in[it.row()].push_back(j);
            }
        }
    }
    auto reaches_all = [n](const std::vector<std::vector<Eigen::Index>>& adj) {
        std::vector<char> seen(n, 0);
        std::vector<Eigen::Index> stack{0};
        seen[0] = 1;
        Eigen::Index count = 1;
        while (!stack.empty()) {
            const Eigen::Index v = stack.back();
            stack.pop_back();
            for (Eigen::Index w : adj[v]) {
                if (!seen[w]) {
                    seen[w] = 1;
                    ++count;
                    stack.push_back(w);
                }
            }
        }
        return count == n;
    };
    return reaches_all(out) && reaches_all(in);
}

MetzlerEigen metzler_principal(const Eigen::MatrixXd& M, const PowerOptions& opt)
{
    if (!strongly_connected(M.sparseView())) throw Error(ErrorKind::Reducible, "matrix is reducible");
    const double dmax = (-M.diagonal()).maxCoeff();
    const double tau = dmax > 0.0 ? 0.5 / dmax : 1.0;
    const Eigen::Index n = M.rows();
    const Eigen::MatrixXd P = Eigen::MatrixXd::Identity(n, n) + tau * M;
    const PerronPair p = perron_power([&](const Eigen::VectorXd& v) { return Eigen::VectorXd(P * v); },
                                      [&](const Eigen::VectorXd& v) {
                                          return Eigen::VectorXd(P.transpose() * v);
                                      },
                                      n, opt);
    return {(p.rho - 1.0) / tau, p.right, p.left};
}

SpectralTriple principal_eigen(const StepMap& step, const WeightFunction& psi,
                               const PowerOptions& opt)
{
    if (!strongly_connected(step.op().generator())) {
        throw Error(ErrorKind::Reducible, "discrete operator is not irreducible on the grid");
    }
    const auto n = static_cast<Eigen::Index>(step.op().grid().size());
    const PerronPair p = perron_power([&](const Eigen::VectorXd& v) { return step.apply(v); },
                                      [&](const Eigen::VectorXd& v) { return step.apply_adjoint(v); },
                                      n, opt);
    const double ds = step.dt();
    SpectralTriple tr;
    tr.step_rho = p.rho;
    tr.lambda0 = -std::log(p.rho) / ds;
    tr.m = p.right;
    tr.phi = p.left;
    tr.right_residual = p.right_residual * p.rho / ds;
    tr.left_residual = p.left_residual * p.rho / ds;
    tr.iterations = p.iterations;
    normalize(step.op().grid(), psi, tr);
    return tr;
}

SpectralTriple principal_eigen_dense(const StepMap& step, const WeightFunction& psi)
{
    const Eigen::MatrixXd P = step.dense();
    const double ds = step.dt();
    SpectralTriple tr;
    double rho_l = 0.0;
    tr.m = real_perron_vector(P, tr.step_rho);
    tr.phi = real_perron_vector(P.transpose(), rho_l);
    tr.lambda0 = -std::log(tr.step_rho) / ds;
    auto ap = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(P * v); };
    auto at = [&](const Eigen::VectorXd& v) { return Eigen::VectorXd(P.transpose() * v); };
    tr.right_residual = residual(ap, tr.m, tr.step_rho) * tr.step_rho / ds;
    tr.left_residual = residual(at, tr.phi, tr.step_rho) * tr.step_rho / ds;
    normalize(step.op().grid(), psi, tr);
    return tr;
}

BoundReport lambda0_vs_bound(const SpectralTriple& triple, double lambda2, bool nonconstant,
                             double tol)
{
    BoundReport r{triple.lambda0, lambda2, lambda2 - triple.lambda0, false};
    r.strict = r.margin > tol;
    char buf[160];
    if (r.margin < -tol) {
        std::snprintf(buf, sizeof buf, "lambda0 = %.10g exceeds lambda2 = %.10g", triple.lambda0,
                      lambda2);
        throw Error(ErrorKind::BoundViolated, buf);
    }
    if (nonconstant && !r.strict) {
        std::snprintf(buf, sizeof buf, "lambda0 = %.10g not strictly below lambda2 = %.10g",
                      triple.lambda0, lambda2);
        throw Error(ErrorKind::BoundViolated, buf);
    }
    return r;
}

GapFit fit_log_linear(const std::vector<double>& t, const std::vector<double>& residual)
{
    const std::size_t n = t.size();
    if (n < 2 || residual.size() != n) throw Error(ErrorKind::DomainError, "fit needs at least 2 points");
    double mt = 0.0, my = 0.0;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        if (!(std::abs(residual[i]) > 0.0)) throw Error(ErrorKind::DomainError, "zero residual in fit");
        y[i] = std::log(std::abs(residual[i]));
        mt += t[i];
        my += y[i];
    }
    mt /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double stt = 0.0, sty = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        stt += (t[i] - mt) * (t[i] - mt);
        sty += (t[i] - mt) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    const double slope = sty / stt;
    GapFit g;
    g.gamma = -slope;
    g.points = n;
    const double ssres = std::max(0.0, syy - slope * sty);
    g.r_squared = syy > 0.0 ? 1.0 - ssres / syy : 1.0;
    if (slope >= 0.0) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "residual slope %.6g >= 0", slope);
        throw Error(ErrorKind::RatePositive, buf);
    }
    return g;
}

GapFit fit_gap_rate(const Trajectory& traj, const SpectralTriple& triple, const SizeGrid& grid,
                    double x0, const ScalarFn& f, double burn_in)
{
    if (traj.checkpoints.empty()) throw Error(ErrorKind::DomainError, "no checkpoints");
    const double horizon = traj.checkpoints.back().t;
    const Eigen::Index i0 = static_cast<Eigen::Index>(grid.locate(x0));
    const double limit = triple.phi(i0) * pairing(grid, triple.m, f) / triple.normalization.duality;
    const double floor = 1e-11 * std::abs(limit);

    std::vector<double> ts, rs;
    std::size_t eligible = 0;
    for (const auto& st : traj.checkpoints) {
        if (st.t < burn_in * horizon || st.t <= 0.0) continue;
        ++eligible;
        const double r = std::exp(triple.lambda0 * st.t) * pairing(grid, st, f) - limit;
        if (std::abs(r) <= floor) break;
        ts.push_back(st.t);
        rs.push_back(r);
    }
    if (eligible < 8) {
        throw Error(ErrorKind::DomainError, "need at least 8 checkpoints after burn-in");
    }
    if (ts.size() < 4) {
        throw Error(ErrorKind::DomainError, "residual reached the roundoff floor within 4 checkpoints");
    }
    return fit_log_linear(ts, rs);
}

void write_triple_csv(std::ostream& os, const SizeGrid& grid, const SpectralTriple& triple)
{
    os << "x,phi,m\r\n";
    char line[96];
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto k = static_cast<Eigen::Index>(i);
        std::snprintf(line, sizeof line, "%.17g,%.17g,%.17g\r\n", grid.centers[i], triple.phi(k),
                      triple.m(k));
        os << line;
    }
}

}  // namespace gfspec
