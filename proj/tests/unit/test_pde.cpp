#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"
#include "gfspec/pde.hpp"

using namespace gfspec;

namespace {

ModelSpec model_of(RelativeMeasure p, ScalarFn K, ScalarFn c, Interval dom = {1e-3, 8.0})
{
    return make_model(GrowthSpec::from_speed(std::move(c)),
                      FragmentationKernel::relative(std::move(p), std::move(K)), dom);
}

double one(double) { return 1.0; }

}  // namespace

TEST_CASE("scale-uniform grid")
{
    const auto lin = model_of(RelativeMeasure::uniform(), one, [](double x) { return x; });
    const auto g = SizeGrid::scale_uniform(lin, 64, 0.5, 32.0);
    CHECK(g.edges.front() == 0.5);
    CHECK(g.edges.back() == 32.0);
    CHECK(g.ds == doctest::Approx(std::log(64.0) / 64).epsilon(1e-12));
    for (std::size_t i = 0; i < g.size(); ++i) {
        CHECK(g.edges[i + 1] / g.edges[i] == doctest::Approx(std::exp(g.ds)).epsilon(1e-9));
        CHECK(g.locate(g.centers[i]) == i);
    }
    CHECK(g.locate(0.1) == 0);
    CHECK(g.locate(100.0) == 63);
    CHECK_THROWS_AS(SizeGrid::scale_uniform(lin, 1, 0.5, 2.0), Error);
}

TEST_CASE("transport only")
{
    const auto idle = model_of(RelativeMeasure::uniform(), [](double) { return 0.0; }, one);
    const DiscreteOperator op(idle, SizeGrid::scale_uniform(idle, 400));
    CHECK(op.fragmentation().nonZeros() == 0);
    // Transport block: every column loses 1/ds, all but the last hand it to the next cell.
    const Eigen::SparseMatrix<double> M = op.generator();
    const Eigen::RowVectorXd colsum = Eigen::RowVectorXd::Ones(M.rows()) * M;
    for (Eigen::Index j = 0; j + 1 < colsum.size(); ++j) CHECK(std::abs(colsum(j)) < 1e-9);
    CHECK(colsum(colsum.size() - 1) == doctest::Approx(-1.0 / op.grid().ds));

    const StepMap step(op);
    const auto traj = solve(step, point_mass(op.grid(), 1.0), {1.0, 2.0, 2.37});
    REQUIRE(traj.checkpoints.size() == 3);
    const double w = op.grid().widths[0];
    for (const auto& st : traj.checkpoints) {
        const double total = st.mass.sum();
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        const double center = pairing(op.grid(), st, [](double x) { return x; }) / total;
        CHECK(std::abs(center - (1.0 + st.t)) <= w);
    }
    CHECK(traj.right_outflow == 0.0);
}

TEST_CASE("exact semigroup identities")
{
    // Mitosis, K = 1, c = 1: A1 = 1.
    const auto mit = model_of(RelativeMeasure::mitosis(), one, one);
    const DiscreteOperator op(mit, SizeGrid::scale_uniform(mit, 2048));
    const Eigen::RowVectorXd colsum =
        Eigen::RowVectorXd::Ones(op.fragmentation().rows()) * op.fragmentation();
    for (Eigen::Index j = 0; j < colsum.size(); ++j) CHECK(std::abs(colsum(j) - 1.0) <= 1e-8);
    for (auto scheme : {TimeScheme::Euler, TimeScheme::Heun}) {
        const StepMap step(op, {scheme});
        const auto traj = solve(step, point_mass(op.grid(), 1.0), {0.5, 1.0});
        for (const auto& st : traj.checkpoints) {
            CHECK(std::abs(st.mass.sum() / std::exp(st.t) - 1.0) < 0.01);
        }
    }

    // Uniform kernel, c = x: A id = id.
    const auto lin = model_of(RelativeMeasure::uniform(), one, [](double x) { return x; },
                              {1e-5, 8.0});
    const DiscreteOperator op2(lin, SizeGrid::scale_uniform(lin, 2048));
    const Eigen::RowVectorXd cs2 =
        Eigen::RowVectorXd::Ones(op2.fragmentation().rows()) * op2.fragmentation();
    for (Eigen::Index j = 0; j < cs2.size(); ++j) CHECK(std::abs(cs2(j) - 1.0) <= 1e-8);
    const StepMap step2(op2);
    const auto traj2 = solve(step2, point_mass(op2.grid(), 1.0), {1.0});
    const double x0 = op2.grid().centers[op2.grid().locate(1.0)];
    const double m1 = pairing(op2.grid(), traj2.checkpoints.back(), [](double x) { return x; });
    CHECK(std::abs(m1 / (x0 * std::exp(1.0)) - 1.0) < 0.01);
    CHECK_FALSE(traj2.left_boundary_flag);
}

TEST_CASE("kernel mass matrix")
{
    // Mitosis on a dyadic log grid: parent j sends 2 K to cell j - 8 exactly.
    const auto lin = model_of(RelativeMeasure::mitosis(), one, [](double x) { return x; });
    const DiscreteOperator op(lin, SizeGrid::scale_uniform(lin, 64, 1.0 / 16, 16.0));
    const Eigen::MatrixXd F(op.fragmentation());
    for (Eigen::Index j = 0; j < F.cols(); ++j) {
        for (Eigen::Index i = 0; i < F.rows(); ++i) {
            double expect = 0.0;
            if (i == j) expect -= 1.0;
            if (j >= 8 && i == j - 8) expect += 2.0;
            if (j < 8 && i == 0) expect += 2.0;
            CHECK(F(i, j) == expect);
        }
    }

    // Uniform kernel: cell masses against a 1e5-node Simpson oracle of 2/x on each cell.
    const auto uni = model_of(RelativeMeasure::uniform(), [](double x) { return x; },
                              [](double x) { return x; }, {0.1, 10.0});
    const auto gen = make_model(
        GrowthSpec::from_speed([](double x) { return x; }),
        FragmentationKernel::general(
            [](double x) {
                KernelMeasure m;
                m.density = [](double) { return 2.0; };  // K(x) * 2/x with K(x) = x
                return m;
            },
            [](double x) { return x; }),
        {0.1, 10.0});
    for (const ModelSpec* m : {&uni, &gen}) {
        const DiscreteOperator o(*m, SizeGrid::scale_uniform(*m, 40));
        const auto& g = o.grid();
        const Eigen::MatrixXd G(o.fragmentation());
        for (std::size_t j = 0; j < g.size(); j += 7) {
            const double x = g.centers[j];
            for (std::size_t i = 0; i <= j; ++i) {
                const double a = g.edges[i], b = std::min(g.edges[i + 1], x);
                const int n = 100000;
                const double hh = (b - a) / n;
                double s = 0.0;
                for (int k = 0; k <= n; ++k) {
                    const double wgt = (k == 0 || k == n) ? 1.0 : (k % 2 ? 4.0 : 2.0);
                    s += wgt * 2.0;  // K(x) p(dy/x)/dy = x * 2/x
                }
                double oracle = s * hh / 3.0;
                if (i == 0) oracle += x * 2.0 * g.edges[0] / x;
                double got = G(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
                if (i == j) got += x;
                CHECK(std::abs(got - oracle) <= 1e-6 * oracle);
            }
        }
        CHECK(o.below_rate()(5) == doctest::Approx(2.0 * 0.1).epsilon(1e-8));
    }
}

TEST_CASE("support bound and pairing")
{
    const auto mit = model_of(RelativeMeasure::uniform(), [](double x) { return x; }, one);
    const DiscreteOperator op(mit, SizeGrid::scale_uniform(mit, 800));
    const StepMap step(op);
    const auto traj = solve(step, point_mass(op.grid(), 1.3), {0.7, 2.0});
    const auto& g = op.grid();
    for (const auto& st : traj.checkpoints) {
        const double bound = mit.flow->flow_at(1.3, st.t) + 2.0 * g.widths[0];
        double above = 0.0;
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g.edges[i] >= bound) above += st.mass(static_cast<Eigen::Index>(i));
        }
        CHECK(above <= 1e-12 * st.mass.sum());
        CHECK((st.mass.array() >= 0.0).all());
        CHECK(pairing(g, st, one) == doctest::Approx(st.mass.sum()).epsilon(1e-14));
        const std::size_t k = g.locate(1.0);
        CHECK(pairing(g, st, [&](double x) { return g.locate(x) == k ? 1.0 : 0.0; }) ==
              st.mass(static_cast<Eigen::Index>(k)));
    }

    std::ostringstream os;
    write_checkpoints_csv(os, g, traj);
    const std::string csv = os.str();
    CHECK(csv.rfind("t,cell_center,mass\r\n", 0) == 0);
    CHECK(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')) == 1 + 2 * g.size());
}

TEST_CASE("step map adjoint and step limits")
{
    const auto lin = model_of(RelativeMeasure::uniform(), one, [](double x) { return x; },
                              {0.1, 10.0});
    const DiscreteOperator op(lin, SizeGrid::scale_uniform(lin, 50));
    for (auto scheme : {TimeScheme::Euler, TimeScheme::Heun}) {
        const StepMap step(op, {scheme});
        const Eigen::MatrixXd P = step.dense();
        const Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(50, 0.5, 2.0);
        CHECK((P.transpose() * v - step.apply_adjoint(v)).norm() <= 1e-12 * v.norm());
        CHECK((P.array() >= 0.0).all());
    }
    CHECK_THROWS_AS(StepMap(op, {TimeScheme::Euler, 1e-13}), Error);
    const auto fast = model_of(RelativeMeasure::uniform(), [](double) { return 1e3; },
                               [](double x) { return x; }, {0.1, 10.0});
    const DiscreteOperator op2(fast, SizeGrid::scale_uniform(fast, 50));
    CHECK(StepMap(op2).substeps() >= 100);
    CHECK_THROWS_AS(StepMap(op2, {TimeScheme::Euler, 0.01}), Error);
}
