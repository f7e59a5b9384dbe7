#include <doctest.h>

#include <cmath>

#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"

using namespace gfspec;

namespace {

ModelSpec with_speed(ScalarFn c, std::vector<double> kinks = {})
{
    auto frag = FragmentationKernel::relative(RelativeMeasure::uniform(), [](double) { return 1.0; });
    return make_model(GrowthSpec::from_speed(std::move(c), std::move(kinks)), std::move(frag),
                      {1e-3, 1e3});
}

}  // namespace

TEST_CASE("scale function examples")
{
    auto lin = with_speed([](double x) { return x; });
    CHECK(std::abs(lin.flow->s_of(std::exp(1.0)) - 1.0) < 1e-10);
    CHECK(lin.flow->s_of(1.0) == 0.0);
    CHECK(std::abs(lin.flow->flow_at(1.0, std::log(2.0)) - 2.0) < 1e-9);
    CHECK_FALSE(lin.flow->s_at_zero().has_value());

    auto one = with_speed([](double) { return 1.0; });
    CHECK(std::abs(one.flow->s_of(5.0) - 4.0) < 1e-10);
    CHECK(std::abs(one.flow->flow_at(2.0, 3.0) - 5.0) < 1e-10);

    auto sq = with_speed([](double x) { return std::sqrt(std::abs(x - 1.0)); }, {1.0});
    CHECK(std::abs(sq.flow->s_of(2.0) - 2.0) < 1e-8);
    for (double t : {0.1, 0.5, 1.0, 2.0, 3.0}) {
        CHECK(std::abs(sq.flow->flow_at(1.0, t) - (1.0 + t * t / 4.0)) < 1e-8);
    }
    CHECK(std::abs(sq.flow->s_of(0.5) + 2.0 * std::sqrt(0.5)) < 1e-8);

    CHECK_THROWS_AS(one.flow->s_of(0.0), Error);
}

TEST_CASE("entrance boundary detected from the table")
{
    auto m = with_speed([](double x) { return std::sqrt(x); });
    REQUIRE(m.flow->s_at_zero().has_value());
    CHECK(*m.flow->s_at_zero() == doctest::Approx(-2.0).epsilon(1e-6));
}

TEST_CASE("flow semigroup law and round trip on a probe lattice")
{
    auto m = with_speed([](double x) { return x < 2.0 ? 2.0 : 1.0 + 0.5 * x; }, {2.0});
    const auto xs = probe_grid({1e-2, 1e2}, 16);
    for (double x : xs) {
        for (double t : {0.0, 0.3, 1.7, 5.0}) {
            const double y = m.flow->flow_at(x, t);
            CHECK(std::abs(m.flow->s_of(y) - m.flow->s_of(x) - t) < 1e-10);
            const double z = m.flow->flow_at(y, 0.9);
            CHECK(std::abs(z - m.flow->flow_at(x, t + 0.9)) < 1e-9 * std::max(1.0, z));
        }
    }
}

TEST_CASE("integrate along flow")
{
    auto one = with_speed([](double) { return 1.0; });
    CHECK(one.flow->integrate_along_flow([](double) { return 1.0; }, 0.7, 2.5) ==
          doctest::Approx(2.5).epsilon(1e-14));
    CHECK(std::abs(one.flow->integrate_along_flow([](double y) { return y; }, 1.0, 2.0) - 4.0) <
          1e-8);
}

TEST_CASE("explicit scale")
{
    auto frag = FragmentationKernel::relative(RelativeMeasure::uniform(), [](double) { return 1.0; });
    auto m = make_model(GrowthSpec::from_scale([](double x) { return std::log(x); }), frag,
                        {1e-3, 1e3});
    CHECK(std::abs(m.flow->flow_at(1.0, std::log(2.0)) - 2.0) < 1e-9);
    CHECK(m.speed(3.0) == doctest::Approx(3.0).epsilon(1e-6));
}
