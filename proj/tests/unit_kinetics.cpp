// Survival and volume factors along backward characteristics.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mspop/kinetics.hpp"
#include "mspop/num/quad.hpp"
#include "mspop/rng.hpp"
#include "mspop/verify.hpp"

#include <cmath>

using namespace mspop;

namespace {

constexpr double TAU_QUAD = 1e-9;

ModelSpec reference_spec(double mu_d = 0.0) {
    ModelSpec s;
    s.m = 2;
    s.x_m = 0.5;
    s.x_M = 2.0;
    s.alpha = std::log(2.0);
    s.mu_d = mu_d;
    return s;
}

ModelSpec flat_hazard_spec(double b0, double mu_d) {
    ModelSpec s = reference_spec(mu_d);
    s.m = 0;
    s.division.kind = DivisionKind::smooth_hazard;
    s.hazard.kind = HazardKind::constant;
    s.hazard.b0 = b0;
    return s;
}

StateVector st(double size, std::vector<double> aux = {}) {
    StateVector x;
    x.size = size;
    x.aux = std::move(aux);
    return x;
}

} // namespace

TEST_CASE("survival is one without any loss mechanism") {
    const Model m = Model::validate(flat_hazard_spec(0.0, 0.0));
    CHECK(survival(m, 0.7, 1.2, st(1.1)) == doctest::Approx(1.0));
    CHECK(survival(m, 0.0, 1.2, st(1.1)) == 1.0);
}

TEST_CASE("deterministic division: survival steps to zero at the event") {
    const Model m = Model::validate(reference_spec());
    // Dividing at age 1; a window not reaching back to it keeps the unit.
    StateVector x = st(1.8, {0.9, 0.9});
    CHECK(survival(m, 0.5, 0.9, x) == doctest::Approx(1.0));
    // At age 1.2 the window [0.4, 1.2] covers the division age.
    StateVector post = st(1.2, {1.2, 1.2});
    CHECK(survival(m, 0.8, 1.2, post) == 0.0);
}

TEST_CASE("constant hazard in the reproductive band, quadrature oracle") {
    const Model m = Model::validate(flat_hazard_spec(0.1, 0.0));
    // Whole backward window reproductive: sizes 2 e^{-ln2 u} stay > 1.
    StateVector x = st(2.0);
    const double s = survival(m, 1.0, 3.0, x);
    CHECK(s == doctest::Approx(std::exp(-0.1)).epsilon(1e-12));

    // Cross-check the region-gated exposure against direct quadrature.
    const Model g = Model::validate(flat_hazard_spec(0.7, 0.05));
    StateVector y = st(1.6);
    auto mu_along = [&](double u) {
        StateVector xs = st(1.6 * std::exp(std::log(2.0) * u));
        return g.loss_rate(2.0 + u, xs);
    };
    const double direct =
        num::integrate(mu_along, -1.5, 0.0).value;
    CHECK(survival(g, 1.5, 2.0, y) ==
          doctest::Approx(std::exp(-direct)).epsilon(TAU_QUAD));
}

TEST_CASE("background death alone decays exponentially in the window") {
    const Model m = Model::validate(flat_hazard_spec(0.0, 0.3));
    CHECK(survival(m, 2.0, 2.5, st(0.9)) ==
          doctest::Approx(std::exp(-0.6)).epsilon(1e-12));
}

TEST_CASE("survival validates the window") {
    const Model m = Model::validate(flat_hazard_spec(0.0, 0.1));
    CHECK_THROWS_AS(survival(m, -0.1, 1.0, st(1.0)), OutOfRange);
    CHECK_THROWS_AS(survival(m, 1.5, 1.0, st(1.0)), OutOfRange);
}

TEST_CASE("volume factor: pinned values for exponential growth") {
    const Model m = Model::validate(reference_spec());
    StateVector x = st(1.0, {1.0, 1.0});
    CHECK(jacobian(m, 0.0, 1.0, x) == 1.0);
    CHECK(jacobian(m, 1.0, 1.0, x) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(jacobian(m, 2.0, 2.0, st(1.0, {2.0, 2.0})) ==
          doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("volume factor matches the finite-difference determinant") {
    const Model m = Model::validate(reference_spec());
    StateVector x = st(1.0, {1.0, 1.0});
    CHECK(jacobian_fd(m, 0.0, 1.0, x) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(jacobian_fd(m, 1.0, 1.0, x) == doctest::Approx(0.5).epsilon(1e-6));
    CHECK(jacobian(m, 1.0, 1.0, x) ==
          doctest::Approx(jacobian_fd(m, 1.0, 1.0, x)).epsilon(1e-6));
}

TEST_CASE("volume factor is one for a divergence-free field") {
    // Constant-velocity size growth has zero divergence.
    ModelSpec s = flat_hazard_spec(0.0, 0.0);
    Model m = Model::validate(s);
    m.set_velocity(0,
                   VelocityField{[](double, const StateVector&) { return 0.25; },
                                 [](double, const StateVector&) { return 0.0; }});
    StateVector x = st(1.4);
    CHECK(jacobian(m, 1.0, 2.0, x) == doctest::Approx(1.0).epsilon(1e-8));
    CHECK(jacobian_fd(m, 1.0, 2.0, x) == doctest::Approx(1.0).epsilon(1e-5));
}

TEST_CASE("volume factor is multiplicative along the curve") {
    const Model m = Model::validate(reference_spec());
    CounterRng rng(4242);
    FlowOptions fo;
    fo.domain = DomainPolicy::extend;
    for (int i = 0; i < 40; ++i) {
        const double t1 = rng.uniform(0.05, 0.6);
        const double t2 = rng.uniform(0.05, 0.6);
        StateVector x = st(rng.uniform(0.7, 1.9),
                           {rng.uniform(1.0, 2.0), rng.uniform(1.0, 2.0)});
        const double age = 1.5;
        const double whole = jacobian(m, t1 + t2, age, x);
        const StateVector mid = flow(m, -t1, age, x, fo).state;
        const double split = jacobian(m, t1, age, x) *
                             jacobian(m, t2, age - t1, mid);
        CHECK(whole == doctest::Approx(split).epsilon(10 * TAU_QUAD));
    }
}

TEST_CASE("transport identity holds at random points") {
    // d/dt [density along the curve] + div v + mu checks out against the
    // analytic Jacobian on the coupled three-coordinate field.
    const Model m = make_coupled_test_model();
    const LiouvilleReport rep = liouville_check(m, 120, 99);
    CHECK(rep.passed);
    CHECK(rep.max_rel_err < 1e-6);
}

TEST_CASE("generic survival path agrees with the gated closed form") {
    const Model m = Model::validate(flat_hazard_spec(0.9, 0.2));
    KineticsOptions gen;
    gen.force_generic = true;
    CounterRng rng(31);
    for (int i = 0; i < 30; ++i) {
        StateVector x = st(rng.uniform(0.6, 1.95));
        const double age = rng.uniform(0.5, 3.0);
        const double theta = rng.uniform(0.0, age);
        CHECK(survival(m, theta, age, x) ==
              doctest::Approx(survival(m, theta, age, x, gen))
                  .epsilon(10 * TAU_QUAD));
    }
}
