// Birth cascade: inhomogeneous term, one-step operator, series solution.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "mspop/renewal.hpp"

#include <cmath>

using namespace mspop;

namespace {

const double LN2 = std::log(2.0);

ModelSpec doubling_spec(double mu_d = 0.0) {
    ModelSpec s;
    s.m = 2;
    s.x_m = 0.5;
    s.x_M = 2.0;
    s.alpha = LN2;
    s.mu_d = mu_d;
    return s;
}

InitialCohort seed_atom(double age, double size, double weight,
                        std::vector<double> aux = {0.0, 0.0}) {
    AtomCohort c;
    InitialAtom a;
    a.age = age;
    a.state.size = size;
    a.state.aux = std::move(aux);
    a.weight = weight;
    c.atoms.push_back(a);
    return c;
}

// Smooth-hazard model whose mothers divide slowly enough that the
// contraction window certifies a geometric tail.
ModelSpec flat_spec(double b0) {
    ModelSpec s;
    s.m = 0;
    s.x_m = 0.5;
    s.x_M = 4.0;
    s.alpha = 1.0;
    s.mu_d = 0.0;
    s.division.kind = DivisionKind::smooth_hazard;
    s.hazard.kind = HazardKind::constant;
    s.hazard.b0 = b0;
    return s;
}

GridCohort band_cohort(const Model& m) {
    GridCohort g;
    g.density = num::Lattice(
        {num::Axis{0.0, 0.5, 9}, num::Axis{m.x_m(), m.x_M(), 71}});
    const auto& sa = g.density.axis(1);
    const double s0 = sa.coord(2), s1 = sa.coord(62);
    g.density.fill([&](std::span<const double> c) {
        if (c[1] < s0 || c[1] > s1) return 0.0;
        return 4.0 * (s1 - c[1]) / ((s1 - s0) * (s1 - s0));
    });
    return g;
}

} // namespace

TEST_CASE("first-generation births from one newborn mother") {
    const Model m = Model::validate(doubling_spec());
    const BirthFunction b = phi_term(m, seed_atom(0.0, 1.0, 1.0), 3.5);
    const auto& atoms = std::get<AtomBirths>(b).atoms;
    REQUIRE(atoms.size() == 1);
    CHECK(atoms[0].time == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(atoms[0].state.size == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(atoms[0].state.aux[0] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(atoms[0].state.aux[1] == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(atoms[0].weight == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(atoms[0].generation == 0); // the direct wave opens the count
}

TEST_CASE("a mother observed mid-life divides after the remaining age") {
    const Model m = Model::validate(doubling_spec());
    // Born at size 2^{-0.4}, already 0.4 old: divides 0.6 from now.
    const double b0 = std::exp2(-0.4);
    const BirthFunction b =
        phi_term(m, seed_atom(0.4, 1.0, 3.0, {0.4, 0.4}), 3.5);
    const auto& atoms = std::get<AtomBirths>(b).atoms;
    REQUIRE(atoms.size() == 1);
    CHECK(atoms[0].time == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(atoms[0].state.size == doctest::Approx(b0 * 2.0 / 2.0));
    CHECK(atoms[0].weight == doctest::Approx(6.0).epsilon(1e-12));
}

TEST_CASE("no births when the division target exceeds the box") {
    const Model m = Model::validate(doubling_spec());
    // Doubling from 1.2 would need size 2.4 > x_M; the rule never fires.
    const BirthFunction b = phi_term(m, seed_atom(0.0, 1.2, 1.0), 3.5);
    CHECK(std::get<AtomBirths>(b).atoms.empty());
}

TEST_CASE("births beyond the horizon are not recorded") {
    const Model m = Model::validate(doubling_spec());
    const BirthFunction b = phi_term(m, seed_atom(0.0, 1.0, 1.0), 0.8);
    CHECK(std::get<AtomBirths>(b).atoms.empty());
}

TEST_CASE("one operator application advances the cascade a generation") {
    const Model m = Model::validate(doubling_spec());
    AtomBirths b;
    b.horizon = 3.5;
    BirthAtom a;
    a.time = 0.3;
    a.state.size = 1.0;
    a.state.aux = {0.2, 0.6};
    a.weight = 5.0;
    a.generation = 1;
    b.atoms.push_back(a);
    const BirthFunction next = apply_K(m, BirthFunction{b});
    const auto& atoms = std::get<AtomBirths>(next).atoms;
    REQUIRE(atoms.size() == 1);
    CHECK(atoms[0].time == doctest::Approx(1.3).epsilon(1e-12));
    CHECK(atoms[0].state.size == doctest::Approx(1.0).epsilon(1e-12));
    // Mother's component ages advanced a full lifetime, then halved.
    CHECK(atoms[0].state.aux[0] == doctest::Approx(0.6).epsilon(1e-12));
    CHECK(atoms[0].state.aux[1] == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(atoms[0].weight == doctest::Approx(10.0).epsilon(1e-12));
    CHECK(atoms[0].generation == 2);
}

TEST_CASE("background death thins each generation by the lifetime factor") {
    const Model m = Model::validate(doubling_spec(0.1));
    AtomBirths b;
    b.horizon = 3.0;
    BirthAtom a;
    a.time = 0.0;
    a.state.size = 1.0;
    a.state.aux = {0.0, 0.0};
    a.weight = 1.0;
    b.atoms.push_back(a);
    const BirthFunction out = apply_K(m, BirthFunction{b});
    const auto& next = std::get<AtomBirths>(out).atoms;
    REQUIRE(next.size() == 1);
    CHECK(next[0].weight == doctest::Approx(2.0 * std::exp(-0.1)).epsilon(1e-12));
}

TEST_CASE("the operator is linear in the birth data") {
    const Model m = Model::validate(doubling_spec());
    AtomBirths b1, b2, sum;
    b1.horizon = b2.horizon = sum.horizon = 3.0;
    BirthAtom a;
    a.state.size = 1.0;
    a.state.aux = {0.0, 0.0};
    a.time = 0.2;
    a.weight = 1.5;
    b1.atoms.push_back(a);
    sum.atoms.push_back(a);
    a.time = 0.7;
    a.weight = 2.5;
    b2.atoms.push_back(a);
    sum.atoms.push_back(a);
    const BirthFunction o1 = apply_K(m, BirthFunction{b1});
    const BirthFunction o2 = apply_K(m, BirthFunction{b2});
    const BirthFunction os = apply_K(m, BirthFunction{sum});
    const auto& r1 = std::get<AtomBirths>(o1).atoms;
    const auto& r2 = std::get<AtomBirths>(o2).atoms;
    const auto& rs = std::get<AtomBirths>(os).atoms;
    REQUIRE(rs.size() == r1.size() + r2.size());
    double w_split = 0, w_sum = 0;
    for (const auto& x : r1) w_split += x.weight;
    for (const auto& x : r2) w_split += x.weight;
    for (const auto& x : rs) w_sum += x.weight;
    CHECK(w_sum == doctest::Approx(w_split).epsilon(1e-12));
}

TEST_CASE("empty birth data stays empty under the operator") {
    const Model m = Model::validate(doubling_spec());
    AtomBirths b;
    b.horizon = 3.0;
    const BirthFunction next = apply_K(m, BirthFunction{b});
    CHECK(std::get<AtomBirths>(next).atoms.empty());
}

TEST_CASE("series solution lists the doubling cascade exactly") {
    const Model m = Model::validate(doubling_spec());
    const RenewalSolution sol = solve_series(m, seed_atom(0.0, 1.0, 1.0), 3.5);
    CHECK(sol.converged);
    const auto& atoms = std::get<AtomBirths>(sol.births).atoms;
    REQUIRE(atoms.size() == 3);
    const double times[] = {1.0, 2.0, 3.0};
    const double weights[] = {2.0, 4.0, 8.0};
    const double aux0[] = {0.5, 0.75, 0.875};
    for (int k = 0; k < 3; ++k) {
        CHECK(atoms[k].time == doctest::Approx(times[k]).epsilon(1e-12));
        CHECK(atoms[k].weight == doctest::Approx(weights[k]).epsilon(1e-12));
        CHECK(atoms[k].state.size == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(atoms[k].state.aux[0] ==
              doctest::Approx(aux0[k]).epsilon(1e-12));
        CHECK(atoms[k].generation == k);
    }
    REQUIRE(sol.term_norms.size() >= 3);
    CHECK(sol.term_norms[0] == doctest::Approx(2.0));
    CHECK(sol.term_norms[1] == doctest::Approx(4.0));
    CHECK(sol.term_norms[2] == doctest::Approx(8.0));
}

TEST_CASE("an empty cohort produces no births") {
    const Model m = Model::validate(doubling_spec());
    const RenewalSolution sol = solve_series(m, InitialCohort{AtomCohort{}}, 3.5);
    CHECK(sol.converged);
    CHECK(std::get<AtomBirths>(sol.births).atoms.empty());
}

TEST_CASE("grid solution is a fixed point of the renewal operator") {
    const Model m = Model::validate(flat_spec(2.0));
    const InitialCohort phi = band_cohort(m);
    const double horizon = contraction_window(m, phi, 0.8);
    RenewalOptions ro;
    ro.backend = RenewalBackend::grid;
    ro.time_nodes = 129;
    ro.size_nodes = 65;
    const RenewalSolution sol = solve_series(m, phi, horizon, ro);
    CHECK(sol.converged);

    const BirthFunction lhs = phi_term(m, phi, horizon, ro);
    const BirthFunction khs = apply_K(m, sol.births, ro);
    const auto& bl = std::get<GridBirths>(sol.births).values;
    const auto& pl = std::get<GridBirths>(lhs).values;
    const auto& kl = std::get<GridBirths>(khs).values;
    double dev = 0, scale = bl.max_abs();
    for (std::size_t i = 0; i < bl.size(); ++i)
        dev = std::max(dev, std::abs(bl.values()[i] - pl.values()[i] -
                                     kl.values()[i]));
    CHECK(dev <= 10 * ro.tol * std::max(scale, 1.0));
}

TEST_CASE("series terms decay inside the certified window") {
    const Model m = Model::validate(flat_spec(2.0));
    const InitialCohort phi = band_cohort(m);
    const double horizon = contraction_window(m, phi, 0.8);
    CHECK(horizon > 0.1);
    RenewalOptions ro;
    ro.backend = RenewalBackend::grid;
    const RenewalSolution sol = solve_series(m, phi, horizon, ro);
    const SeriesBoundReport rep = series_bound_report(m, phi, sol, horizon);
    CHECK(rep.contraction < 1.0);
    CHECK(rep.satisfied);
    for (const auto& row : rep.rows) CHECK_FALSE(row.violated);
    // The certified ratio really contracts successive norms.
    for (std::size_t n = 1; n + 1 < sol.term_norms.size(); ++n)
        if (sol.term_norms[n] > 0)
            CHECK(sol.term_norms[n + 1] / sol.term_norms[n] < 1.0);
}

TEST_CASE("switching off the hazard silences the cascade") {
    const Model m = Model::validate(flat_spec(0.0));
    const InitialCohort phi = band_cohort(m);
    RenewalOptions ro;
    ro.backend = RenewalBackend::grid;
    const RenewalSolution sol = solve_series(m, phi, 1.0, ro);
    CHECK(sol.converged);
    CHECK(std::get<GridBirths>(sol.births).values.max_abs() == 0.0);
}

TEST_CASE("a tall narrow hazard approaches the point-division limit") {
    // Rate 20/eps on [1-eps/2, 1+eps/2]: crossing it divides a mother with
    // probability 1 - e^{-20}.  Mothers sit in the reproductive band and
    // grow too slowly to reach the wall inside the window, so the ratio
    // (first-wave birth mass) / (2 * cohort mass) estimates that
    // probability.
    auto run = [](double eps, std::size_t time_nodes) {
        ModelSpec s;
        s.m = 0;
        s.x_m = 0.5;
        s.x_M = 2.0;
        s.alpha = 0.1;
        s.mu_d = 0.0;
        s.division.kind = DivisionKind::smooth_hazard;
        s.hazard.kind = HazardKind::table;
        const double h = 20.0 / eps;
        s.hazard.ages = {1.0 - eps / 2, 1.0 - eps / 2 + 1e-9,
                         1.0 + eps / 2 - 1e-9, 1.0 + eps / 2};
        s.hazard.rates = {0.0, h, h, 0.0};
        const Model m = Model::validate(s);

        GridCohort g;
        g.density = num::Lattice(
            {num::Axis{0.0, 0.05, 3}, num::Axis{0.5, 2.0, 121}});
        g.density.fill([](std::span<const double> c) {
            return (c[1] >= 1.1 && c[1] <= 1.5) ? 1.0 : 0.0;
        });
        const double mass = g.density.integral();

        RenewalOptions ro;
        ro.backend = RenewalBackend::grid;
        ro.time_nodes = time_nodes;
        ro.size_nodes = 121;
        const BirthFunction b = phi_term(m, InitialCohort{g}, 1.3, ro);
        const double born = std::get<GridBirths>(b).values.integral();
        return born / (2.0 * mass);
    };
    // Resolved spikes: the survival factor decays by e^{-20} across ~40
    // time steps and the trapezoid sums settle at the limit.
    CHECK(run(0.2, 641) == doctest::Approx(1.0).epsilon(0.01));
    CHECK(run(0.1, 1281) == doctest::Approx(1.0).epsilon(0.01));
    // An unresolved spike is visibly wrong; sharpening the hazard without
    // refining the grid is the failure mode this guards against.
    CHECK(std::abs(run(0.1, 161) - 1.0) > 0.05);
}

TEST_CASE("no births precede the earliest possible division") {
    const Model m = Model::validate(doubling_spec());
    AtomCohort c;
    for (double a0 : {0.0, 0.2, 0.5}) {
        InitialAtom a;
        a.age = a0;
        a.state.size = std::exp2(a0 - 0.0) * 0.9; // born at 0.9
        a.state.aux = {a0, a0};
        a.weight = 1.0;
        c.atoms.push_back(a);
    }
    const BirthFunction waves = phi_term(m, InitialCohort{c}, 3.0);
    const auto& atoms = std::get<AtomBirths>(waves).atoms;
    // Oldest initial age is 0.5, so the first division is at t >= 0.5.
    for (const auto& a : atoms) CHECK(a.time >= 0.5 - 1e-12);
}

TEST_CASE("serial and parallel solves agree to the bit") {
    const Model md = Model::validate(doubling_spec(0.05));
    RenewalOptions ser, par;
    ser.exec = Exec::serial;
    par.exec = Exec::parallel;
    const auto a = std::get<AtomBirths>(
        solve_series(md, seed_atom(0.0, 1.0, 1.0), 3.5, ser).births);
    const auto b = std::get<AtomBirths>(
        solve_series(md, seed_atom(0.0, 1.0, 1.0), 3.5, par).births);
    REQUIRE(a.atoms.size() == b.atoms.size());
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        CHECK(a.atoms[i].time == b.atoms[i].time);
        CHECK(a.atoms[i].weight == b.atoms[i].weight);
    }

    const Model mg = Model::validate(flat_spec(2.0));
    const InitialCohort phi = band_cohort(mg);
    RenewalOptions gs = ser, gp = par;
    gs.backend = gp.backend = RenewalBackend::grid;
    const auto gvs = std::get<GridBirths>(solve_series(mg, phi, 0.5, gs).births);
    const auto gvp = std::get<GridBirths>(solve_series(mg, phi, 0.5, gp).births);
    REQUIRE(gvs.values.size() == gvp.values.size());
    for (std::size_t i = 0; i < gvs.values.size(); ++i)
        CHECK(gvs.values.values()[i] == gvp.values.values()[i]);
}
