#include <doctest.h>

#include <cmath>

#include "gfspec/errors.hpp"
#include "gfspec/lyapunov.hpp"
#include "gfspec/qsd.hpp"

using namespace gfspec;

namespace {

ModelSpec canonical()
{
    return make_model(GrowthSpec::from_scale([](double x) { return x - 1.0; },
                                             [](double v) { return v + 1.0; },
                                             [](double) { return 1.0; }),
                      FragmentationKernel::relative(RelativeMeasure::uniform(),
                                                    [](double x) { return x; }),
                      {1e-3, 8.0});
}

// c = x with the uniform kernel: A id = id, so h = id and b = 1 leave nothing to kill.
ModelSpec linear()
{
    return make_model(GrowthSpec::from_speed([](double x) { return x; }),
                      FragmentationKernel::relative(RelativeMeasure::uniform(),
                                                    [](double x) { return 1.0 + x; }),
                      {1e-3, 50.0});
}

}  // namespace

TEST_CASE("no killing")
{
    const auto m = linear();
    const TiltedJumpLaw law(m, identity_weight(m), 1.0);
    const auto grid = SizeGrid::scale_uniform(m, 32);
    FvOptions o;
    o.particles = 200;
    o.t_end = 4.0;
    const auto fv = fv_run(law, grid, 1.0, o);
    CHECK(fv.kills == 0);
    CHECK(fv.stall);
    CHECK(fv.lambda0X == 0.0);
    CHECK(std::abs(fv.nu.sum() - 1.0) <= 1e-12);

    EtaOptions eo;
    eo.particles = 100;
    const auto eta = eta_estimate(law, {0.5, 1.0, 2.0}, 0.0, 2.0, eo);
    for (double e : eta.eta) CHECK(e == 1.0);
    CHECK(eta.max_drift == 0.0);
}

TEST_CASE("reconstruction")
{
    const auto m = canonical();
    const auto grid = SizeGrid::scale_uniform(m, 16);
    Eigen::VectorXd nu(16);
    for (int i = 0; i < 16; ++i) nu(i) = 1.0 + 0.25 * i;
    nu /= nu.sum();
    const auto psi = WeightFunction::constant();

    const auto flat = reconstruct_m_phi(grid, nu, Eigen::VectorXd(), WeightFunction::constant(), psi);
    CHECK((flat.m - nu).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK((flat.phi.array() == 1.0).all());

    const auto rep = criterion_pseudo_entrance_report(m, 1.0 + std::sqrt(2.0));
    WeightFunction h3 = rep.h;
    h3.value = [h = rep.h](double x) { return 3.0 * h(x); };
    const auto a = reconstruct_m_phi(grid, nu, Eigen::VectorXd(), rep.h, rep.psi);
    const auto b = reconstruct_m_phi(grid, nu, Eigen::VectorXd(), h3, rep.psi);
    CHECK((a.m - b.m).cwiseAbs().maxCoeff() <= 1e-12 * a.m.maxCoeff());
    CHECK((a.phi - b.phi).cwiseAbs().maxCoeff() <= 1e-12 * a.phi.maxCoeff());

    CHECK_THROWS_AS(reconstruct_m_phi(grid, Eigen::VectorXd::Ones(3), Eigen::VectorXd(), rep.h, psi),
                    Error);
    CHECK(total_variation(nu, 2.0 * nu) == doctest::Approx(0.0));
}

TEST_CASE("Fleming-Viot on the canonical model")
{
    const auto m = canonical();
    const auto rep = criterion_pseudo_entrance_report(m, 1.0 + std::sqrt(2.0));
    REQUIRE(rep.passed());
    const TiltedJumpLaw law(m, rep.h, rep.b);
    const auto grid = SizeGrid::scale_uniform(m, 64);

    FvOptions o;
    o.particles = 99;
    CHECK_THROWS_AS(fv_run(law, grid, 1.0, o), Error);

    o.particles = 1000;
    const auto small = fv_run(law, grid, 1.0, o);
    o.particles = 2000;
    const auto large = fv_run(law, grid, 1.0, o);
    const double shrink = small.ci / large.ci;
    CHECK(shrink >= 1.3);
    CHECK(shrink <= 3.0);
    CHECK(small.batch_rates.size() == 20);
    CHECK(large.kills >= large.kills_post_burn_in);
    CHECK(std::abs(large.nu.sum() - 1.0) <= 1e-12);
    CHECK(large.split_half_tv < 0.1);
    CHECK_FALSE(large.stall);

    const auto tr = principal_eigen(StepMap(DiscreteOperator(m, grid)), rep.psi);
    CHECK(std::abs(large.lambda0X - rep.b - tr.lambda0) <= 3.0 * large.ci);
}

TEST_CASE("eta two-t consistency")
{
    const auto m = canonical();
    const auto rep = criterion_pseudo_entrance_report(m, 1.0 + std::sqrt(2.0));
    const TiltedJumpLaw law(m, rep.h, rep.b);
    const auto tr = principal_eigen(StepMap(DiscreteOperator(m, SizeGrid::scale_uniform(m, 256))),
                                    rep.psi);
    EtaOptions eo;
    eo.particles = 10000;
    const auto eta = eta_estimate(law, {2.0, 4.0}, tr.lambda0 + rep.b, 10.0, eo);
    CHECK(eta.max_drift <= 0.1);
    CHECK(eta.eta[0] > eta.eta[1]);
    CHECK((eta.resolved[0] && eta.resolved[1]));

    eo.max_drift = 1e-6;
    CHECK_THROWS_AS(eta_estimate(law, {2.0}, tr.lambda0 + rep.b, 10.0, eo), Error);
}
