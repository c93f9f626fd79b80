// Transported densities, population accounting, propagator checks.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mspop/cohort.hpp"
#include "mspop/renewal.hpp"
#include "mspop/rng.hpp"
#include "mspop/verify.hpp"

#include <cmath>

using namespace mspop;

namespace {

const double LN2 = std::log(2.0);

ModelSpec no_loss_spec() {
    ModelSpec s;
    s.m = 0;
    s.x_m = 0.5;
    s.x_M = 2.0;
    s.alpha = LN2;
    s.mu_d = 0.0;
    s.division.kind = DivisionKind::smooth_hazard;
    s.hazard.kind = HazardKind::constant;
    s.hazard.b0 = 0.0;
    return s;
}

// Smooth test density with a closed form to transport by hand.
AnalyticCohort gaussian_cohort() {
    AnalyticCohort c;
    c.density = [](double age, const StateVector& x) {
        const double z = (x.size - 1.2) / 0.3;
        return std::exp(-age) * std::exp(-z * z);
    };
    return c;
}

StateVector st(double size) {
    StateVector x;
    x.size = size;
    return x;
}

} // namespace

TEST_CASE("at time zero the density is the initial cohort") {
    const Model m = Model::validate(no_loss_spec());
    const InitialCohort phi = gaussian_cohort();
    const auto& f = std::get<AnalyticCohort>(phi).density;
    for (double age : {0.2, 0.9, 2.4})
        for (double size : {0.7, 1.2, 1.8})
            CHECK(propagate_initial(m, 0.0, age, st(size), phi) ==
                  doctest::Approx(f(age, st(size))).epsilon(1e-12));
}

TEST_CASE("transport along the curve matches the hand formula") {
    ModelSpec spec = no_loss_spec();
    spec.mu_d = 0.15;
    const Model m = Model::validate(spec);
    const InitialCohort phi = gaussian_cohort();
    const auto& f = std::get<AnalyticCohort>(phi).density;
    const double t = 0.4, age = 1.0, size = 1.2;
    // phi(a - t, x e^{-alpha t}) * e^{-mu_d t} * e^{-alpha t}
    const double expected = f(age - t, st(size * std::exp(-LN2 * t))) *
                            std::exp(-0.15 * t) * std::exp(-LN2 * t);
    CHECK(propagate_initial(m, t, age, st(size), phi) ==
          doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("branch guards: each evaluator owns one side of t = a") {
    const Model m = Model::validate(no_loss_spec());
    const InitialCohort phi = gaussian_cohort();
    AtomBirths births;
    births.horizon = 2.0;
    CHECK_THROWS_AS(propagate_initial(m, 1.0, 1.0, st(1.0), phi), WrongBranch);
    CHECK_THROWS_AS(propagate_initial(m, 1.5, 1.0, st(1.0), phi), WrongBranch);
    CHECK_THROWS_AS(birth_branch(m, 0.5, 1.0, st(1.0), BirthFunction{births}),
                    WrongBranch);
    // Beyond the solved horizon the birth data cannot answer.
    CHECK_THROWS_AS(birth_branch(m, 3.0, 0.5, st(1.0), BirthFunction{births}),
                    BirthFunctionUndefined);
}

TEST_CASE("atom cohorts ride their characteristic and are zero elsewhere") {
    const Model m = Model::validate(no_loss_spec());
    AtomCohort atoms;
    atoms.atoms.push_back({0.3, st(1.0), 2.0});
    const InitialCohort phi = atoms;
    const double t = 0.5;
    // On the forward image: weight times the volume factor.
    const double on = propagate_initial(m, t, 0.8, st(std::exp2(0.5)), phi);
    CHECK(on == doctest::Approx(2.0 * std::exp2(-0.5)).epsilon(1e-9));
    // Slightly off the curve: nothing.
    CHECK(propagate_initial(m, t, 0.8, st(std::exp2(0.5) + 0.01), phi) == 0.0);
    CHECK(propagate_initial(m, t, 0.9, st(std::exp2(0.5)), phi) == 0.0);
}

TEST_CASE("newborn line evaluates the birth rate directly") {
    const Model m = Model::validate(no_loss_spec());
    GridBirths gb;
    gb.values = num::Lattice({num::Axis{0.0, 2.0, 5}, num::Axis{0.5, 2.0, 4}});
    std::vector<double> c(2);
    for (std::size_t i = 0; i < gb.values.size(); ++i) {
        gb.values.node_coords(i, c);
        gb.values.values()[i] = 0.7 * c[0] + c[1];
    }
    gb.horizon = 2.0;
    const BirthFunction births = gb;
    CHECK(birth_branch(m, 1.25, 0.0, st(1.1), births) ==
          doctest::Approx(0.7 * 1.25 + 1.1).epsilon(1e-12));
    // A short age later the same cohort carries the volume factor.
    const double a = 0.2;
    const double expect =
        (0.7 * (1.25 - a) + 1.1 * std::exp(-LN2 * a)) * std::exp(-LN2 * a);
    CHECK(birth_branch(m, 1.25, a, st(1.1), births) ==
          doctest::Approx(expect).epsilon(1e-10));
}

TEST_CASE("population mass is conserved without loss") {
    const Model m = Model::validate(no_loss_spec());
    AtomCohort atoms;
    atoms.atoms.push_back({0.0, st(0.8), 3.0});
    atoms.atoms.push_back({0.4, st(0.6), 2.0});
    const InitialCohort phi = atoms;
    for (double t : {0.0, 0.5, 1.1})
        CHECK(total_population(m, t, phi) == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("population halves per death time constant") {
    ModelSpec spec = no_loss_spec();
    spec.mu_d = 0.2;
    const Model m = Model::validate(spec);
    AtomCohort atoms;
    atoms.atoms.push_back({0.0, st(0.8), 500.0});
    CHECK(total_population(m, 2.0, InitialCohort{atoms}) ==
          doctest::Approx(500.0 * std::exp(-0.4)).epsilon(1e-10));
}

TEST_CASE("population doubles at each division wave") {
    ModelSpec spec = no_loss_spec();
    spec.m = 0;
    spec.division.kind = DivisionKind::doubling;
    spec.hazard.kind = HazardKind::dirac;
    const Model m = Model::validate(spec);
    AtomCohort atoms;
    atoms.atoms.push_back({0.0, st(1.0), 1000.0});
    const InitialCohort phi = atoms;
    const BirthFunction births = solve_series(m, phi, 2.5).births;
    CHECK(total_population(m, 0.5, phi, &births) == doctest::Approx(1000.0));
    CHECK(total_population(m, 1.5, phi, &births) == doctest::Approx(2000.0));
    CHECK(total_population(m, 2.4, phi, &births) == doctest::Approx(4000.0));
}

TEST_CASE("propagator composition: two short hops equal one long hop") {
    const Model m = Model::validate(no_loss_spec());
    const InitialCohort phi = gaussian_cohort();
    SampleBox box;
    box.margin = 0.05;
    const SemigroupReport rep = verify_semigroup(m, phi, 0.3, 0.3, 400, 7, box);
    CHECK(rep.points == 400);
    CHECK(rep.max_deviation < 1e-8);
    CHECK(rep.l1_monotone);
}

TEST_CASE("propagator with a zero second hop is exact") {
    const Model m = Model::validate(no_loss_spec());
    const InitialCohort phi = gaussian_cohort();
    SampleBox box;
    box.margin = 0.05;
    const SemigroupReport rep = verify_semigroup(m, phi, 0.4, 0.0, 100, 11, box);
    CHECK(rep.max_deviation <= 1e-14);
}

TEST_CASE("difference quotients converge to the generator at first order") {
    ModelSpec spec = no_loss_spec();
    spec.mu_d = 0.1;
    spec.hazard.b0 = 0.5;
    const Model m = Model::validate(spec);
    const AnalyticCohort phi = make_smooth_cohort(m);
    SampleBox box;
    box.margin = 0.1;
    const GeneratorReport rep =
        verify_generator(m, phi, {1e-2, 5e-3, 2.5e-3}, 200, 3, box);
    REQUIRE(rep.ratios.size() == 2);
    for (double r : rep.ratios) CHECK(std::abs(r - 0.5) < 0.1);
}

TEST_CASE("densities stay non-negative wherever sampled") {
    ModelSpec spec = no_loss_spec();
    spec.mu_d = 0.35;
    spec.hazard.b0 = 1.2;
    const Model m = Model::validate(spec);
    const InitialCohort phi = gaussian_cohort();
    CounterRng rng(1234);
    for (int i = 0; i < 200; ++i) {
        const double t = rng.uniform(0.0, 1.0);
        const double age = t + rng.uniform(1e-3, 2.0);
        const double size = rng.uniform(0.55, 1.95);
        CHECK(evaluate_density(m, t, age, st(size), phi, nullptr) >= 0.0);
    }
}
