// Characteristic curves: flow map, growth clock, division events.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mspop/characteristics.hpp"
#include "mspop/rng.hpp"

#include <cmath>

using namespace mspop;

namespace {

// Flow-map accuracy used throughout: the generic integrator runs at
// rtol 1e-10, so closed-form comparisons get an order of magnitude slack.
constexpr double TAU_FLOW = 1e-9;

ModelSpec reference_spec() {
    ModelSpec s;
    s.m = 2;
    s.x_m = 0.5;
    s.x_M = 2.0;
    s.alpha = std::log(2.0);
    s.mu_d = 0.0;
    return s;
}

StateVector st(double size, std::vector<double> aux = {}) {
    StateVector x;
    x.size = size;
    x.aux = std::move(aux);
    return x;
}

} // namespace

TEST_CASE("flow forward one unit doubles size and advances clocks") {
    const Model m = Model::validate(reference_spec());
    const FlowResult r = flow(m, 1.0, 0.0, st(1.0, {0.0, 0.0}));
    CHECK(r.age == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(r.state.size == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(r.state.aux[0] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.state.aux[1] == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.steps == 0); // closed form, no integrator involved
}

TEST_CASE("flow with zero offset is the identity") {
    const Model m = Model::validate(reference_spec());
    const StateVector x = st(1.3, {0.4, 1.1});
    const FlowResult r = flow(m, 0.0, 0.7, x);
    CHECK(r.age == 0.7);
    CHECK(r.state.size == x.size);
    CHECK(r.state.aux == x.aux);
}

TEST_CASE("flow backward recovers the birth state") {
    const Model m = Model::validate(reference_spec());
    const FlowResult r =
        flow(m, -0.5, 1.0, st(std::sqrt(2.0), {0.5, 0.5}));
    CHECK(r.age == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(r.state.size == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(r.state.aux[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("strict domain policy reports the exiting coordinate") {
    const Model m = Model::validate(reference_spec());
    // Forward from size 1.5 the box wall x_M = 2 is hit at ln(4/3)/ln 2.
    CHECK_THROWS_AS(flow(m, 1.0, 0.0, st(1.5, {0.0, 0.0})), LeftDomain);
    try {
        flow(m, 1.0, 0.0, st(1.5, {0.0, 0.0}));
    } catch (const LeftDomain& e) {
        CHECK(e.component == 0);
        CHECK(e.theta_exit == doctest::Approx(std::log(4.0 / 3.0) /
                                              std::log(2.0)).epsilon(1e-6));
    }
    // Backward past age zero is also an exit.
    CHECK_THROWS_AS(flow(m, -0.5, 0.2, st(1.0, {0.0, 0.0})), LeftDomain);
}

TEST_CASE("extend policy continues the field beyond the box") {
    const Model m = Model::validate(reference_spec());
    FlowOptions fo;
    fo.domain = DomainPolicy::extend;
    const FlowResult r = flow(m, 2.0, 0.0, st(1.5, {0.0, 0.0}), fo);
    CHECK(r.state.size == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("growth clock closed form and pinned values") {
    const Model m = Model::validate(reference_spec());
    CHECK(growth_time(m, 0.5) == 0.0);
    CHECK(growth_time(m, 2.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(growth_time(m, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
    // Generic path (adaptive quadrature of 1/v1) agrees with the log form.
    CHECK(growth_time(m, 1.37, true) ==
          doctest::Approx(growth_time(m, 1.37)).epsilon(TAU_FLOW));
}

TEST_CASE("size curve: identity at zero, doubling per unit time") {
    const Model m = Model::validate(reference_spec());
    CHECK(growth_curve(m, 0.0, 1.3) == doctest::Approx(1.3));
    CHECK(growth_curve(m, 1.0, 1.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(growth_curve(m, -1.0, 1.0) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("size curve refuses to grow past the maximum size") {
    const Model m = Model::validate(reference_spec());
    CHECK_THROWS_AS(growth_curve(m, 2.0, 1.5), ExceedsMaxSize);
    CHECK_THROWS_AS(growth_curve(m, 2.0, 1.5, true), ExceedsMaxSize);
    // Landing exactly on the wall is allowed.
    CHECK(growth_curve(m, 1.0, 1.0) == doctest::Approx(2.0));
}

TEST_CASE("auxiliary curves are unit-rate shifts") {
    const Model m = Model::validate(reference_spec());
    CHECK(aux_time(m, 1, 0.0) == 0.0);
    CHECK(aux_curve(m, 1, 2.5, 1.0) == doctest::Approx(3.5));
    CHECK(aux_time(m, 2, aux_curve(m, 2, 0.8, 0.3)) ==
          doctest::Approx(aux_time(m, 2, 0.3) + 0.8));
}

TEST_CASE("flow satisfies the semigroup law") {
    const Model m = Model::validate(reference_spec());
    CounterRng rng(2718);
    FlowOptions fo;
    fo.domain = DomainPolicy::extend;
    for (int i = 0; i < 1000; ++i) {
        const double age = rng.uniform(0.0, 2.0);
        StateVector x = st(rng.uniform(0.6, 1.9),
                           {rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)});
        const double s1 = rng.uniform(-0.5, 0.5);
        const double s2 = rng.uniform(-0.5, 0.5);
        const FlowResult two_hops =
            flow(m, s2, age + s1, flow(m, s1, age, x, fo).state, fo);
        const FlowResult one_hop = flow(m, s1 + s2, age, x, fo);
        CHECK(two_hops.state.size ==
              doctest::Approx(one_hop.state.size).epsilon(10 * TAU_FLOW));
        CHECK(two_hops.state.aux[0] ==
              doctest::Approx(one_hop.state.aux[0]).epsilon(10 * TAU_FLOW));
    }
}

TEST_CASE("backward flow inverts forward flow") {
    ModelSpec s = reference_spec();
    s.m = 1;
    const Model m1 = Model::validate(s);
    CounterRng rng(577);
    FlowOptions fo;
    fo.domain = DomainPolicy::extend;
    for (int i = 0; i < 300; ++i) {
        StateVector x = st(rng.uniform(0.6, 1.9), {rng.uniform(0.0, 2.0)});
        const double theta = rng.uniform(0.0, 1.5);
        const StateVector fwd = flow(m1, theta, 0.0, x, fo).state;
        const StateVector back = flow(m1, -theta, theta, fwd, fo).state;
        CHECK(back.size == doctest::Approx(x.size).epsilon(10 * TAU_FLOW));
        CHECK(back.aux[0] == doctest::Approx(x.aux[0]).epsilon(1e-8));
    }
}

TEST_CASE("size along the curve is strictly monotone in time") {
    const Model m = Model::validate(reference_spec());
    FlowOptions fo;
    fo.domain = DomainPolicy::extend;
    double prev = 0.0;
    for (int k = 0; k <= 20; ++k) {
        const double theta = -1.0 + 2.0 * k / 20.0;
        const double s = flow(m, theta, 2.0, st(1.0, {2.0, 2.0}), fo).state.size;
        if (k > 0) CHECK(s > prev);
        prev = s;
    }
}

TEST_CASE("generic integrator matches the closed forms") {
    const Model m = Model::validate(reference_spec());
    CounterRng rng(8128);
    FlowOptions closed;
    closed.domain = DomainPolicy::extend;
    FlowOptions generic = closed;
    generic.force_generic = true;
    for (int i = 0; i < 50; ++i) {
        const double theta = rng.uniform(-0.8, 0.8);
        const double age = 1.0 + std::max(0.0, -theta);
        StateVector x = st(rng.uniform(0.7, 1.8),
                           {rng.uniform(0.0, 2.0), rng.uniform(0.0, 2.0)});
        const FlowResult a = flow(m, theta, age, x, closed);
        const FlowResult b = flow(m, theta, age, x, generic);
        CHECK(b.steps > 0);
        CHECK(a.state.size == doctest::Approx(b.state.size).epsilon(TAU_FLOW));
        CHECK(a.state.aux[1] ==
              doctest::Approx(b.state.aux[1]).epsilon(1e-8));
    }
}

TEST_CASE("division age under the doubling rule is size-free") {
    const Model m = Model::validate(reference_spec());
    CHECK(division_age(m, 0.8) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(division_age(m, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("division age under the adder rule depends on birth size") {
    ModelSpec s = reference_spec();
    s.division.kind = DivisionKind::adder;
    s.division.delta_l = 0.8;
    const Model m = Model::validate(s);
    // Born at 0.8, divides at 1.6: age = ln 2 / ln 2 = 1.
    CHECK(division_age(m, 0.8) == doctest::Approx(1.0).epsilon(1e-12));
    // Born at 1.0, divides at 1.8: age = log2(1.8).
    CHECK(division_age(m, 1.0) ==
          doctest::Approx(std::log2(1.8)).epsilon(1e-12));
}

TEST_CASE("division event reports age and size, saturating at the wall") {
    const Model m = Model::validate(reference_spec());
    auto ev = division_event(m, 1.0);
    REQUIRE(ev.has_value());
    CHECK(ev->age == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(ev->size == doctest::Approx(2.0).epsilon(1e-12));

    // An explicit division age later than the wall-hitting time parks the
    // mother at x_M until the event fires.
    ModelSpec s = reference_spec();
    s.division.kind = DivisionKind::adder;
    s.division.delta_l = 0.8;
    s.hazard.a_star = 1.5;
    const Model late = Model::validate(s);
    auto lv = division_event(late, 1.0);
    REQUIRE(lv.has_value());
    CHECK(lv->age == doctest::Approx(1.5));
    CHECK(lv->size == doctest::Approx(2.0)); // capped at x_M
}
