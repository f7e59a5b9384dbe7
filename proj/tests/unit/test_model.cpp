#include <doctest.h>

#include <cmath>

#include "gfspec/errors.hpp"
#include "gfspec/flow.hpp"

using namespace gfspec;

TEST_CASE("generator on elementary functions")
{
    auto lin = make_model(GrowthSpec::from_speed([](double x) { return x; }),
                          FragmentationKernel::relative(RelativeMeasure::uniform(),
                                                        [](double x) { return 1.0 + x; }),
                          {1e-3, 1e3});
    const auto id = identity_weight(lin);
    CHECK(generator_apply(lin, id, 2.0) == doctest::Approx(2.0).epsilon(1e-10));
    for (double x : probe_grid(lin.domain, 32)) {
        CHECK(generator_apply(lin, id, x) == doctest::Approx(x).epsilon(1e-8));
        CHECK(std::abs(mass_conservation_defect(lin, x)) < 1e-10 * (1.0 + x));
    }

    auto mit = make_model(GrowthSpec::from_speed([](double) { return 1.0; }),
                          FragmentationKernel::relative(RelativeMeasure::mitosis(),
                                                        [](double) { return 1.0; }),
                          {1e-3, 1e3});
    CHECK(generator_apply(mit, WeightFunction::constant(), 3.0) == doctest::Approx(1.0));
    CHECK_THROWS_AS(generator_apply(mit, WeightFunction::constant(), 0.0), Error);

    auto three = make_model(GrowthSpec::from_speed([](double) { return 1.0; }),
                            FragmentationKernel::relative(RelativeMeasure::power(3.0, 0.0),
                                                          [](double) { return 1.0; }),
                            {1e-3, 1e3});
    CHECK(mass_conservation_defect(three, 1.0) == doctest::Approx(0.5).epsilon(1e-10));
}

TEST_CASE("general kernel matches brute-force trapezoid")
{
    // k(x, dy) = 6 y (x - y) / x^3 dy * K(x): two children on average, mean y = x/2.
    auto kernel = [](double x) {
        KernelMeasure m;
        m.density = [x](double y) { return 6.0 * y * (x - y) / (x * x * x) * (1.0 + x); };
        return m;
    };
    auto model = make_model(GrowthSpec::from_speed([](double) { return 1.0; }),
                            FragmentationKernel::general(kernel, [](double x) { return 1.0 + x; }),
                            {1e-3, 1e3});
    const double x = 2.5;
    const int n = 100000;
    double trap = 0.0;
    const auto m = kernel(x);
    for (int i = 0; i <= n; ++i) {
        const double y = x * i / n;
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        trap += w * (y / x) * m.density(y);
    }
    trap = trap * x / n - (1.0 + x);
    CHECK(mass_conservation_defect(model, x) == doctest::Approx(trap).epsilon(1e-6));
}

TEST_CASE("relative measures")
{
    CHECK(RelativeMeasure::uniform().conservative());
    CHECK(RelativeMeasure::mitosis().conservative());
    CHECK(RelativeMeasure::uniform().moment(-0.5) == doctest::Approx(4.0).epsilon(1e-8));
    CHECK_THROWS_AS(RelativeMeasure::uniform().moment(-1.0), Error);
    CHECK_FALSE(RelativeMeasure::power(1.0, -1.5).mass().has_value());
}

TEST_CASE("generator linearity")
{
    auto model = make_model(GrowthSpec::from_speed([](double) { return 1.0; }),
                            FragmentationKernel::relative(RelativeMeasure::uniform(),
                                                          [](double x) { return x; }),
                            {1e-3, 1e3});
    WeightFunction f{[](double x) { return 1.0 / (1.0 + x); }, [](double x) { return -1.0 / ((1.0 + x) * (1.0 + x)); },
                     "f", {}, {}};
    WeightFunction g{[](double x) { return x * x; }, [](double x) { return 2 * x; }, "g", {}, {}};
    WeightFunction lc{[&](double x) { return 2.0 * f(x) - 3.0 * g(x); },
                      [&](double x) { return 2.0 * f.s_derivative(x) - 3.0 * g.s_derivative(x); },
                      "lc", {}, {}};
    for (double x : probe_grid(model.domain, 32)) {
        const double af = generator_apply(model, f, x);
        const double ag = generator_apply(model, g, x);
        CHECK(std::abs(generator_apply(model, lc, x) - 2 * af + 3 * ag) <=
              1e-9 * (1 + std::abs(af) + std::abs(ag)));
    }
    validate_weight(model, f);
    WeightFunction bad{[](double x) { return x; }, [](double) { return 2.0; }, "bad", {}, {}};
    CHECK_THROWS_AS(validate_weight(model, bad), Error);
}
