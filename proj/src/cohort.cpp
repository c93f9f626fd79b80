#include "mspop/cohort.hpp"

#include "mspop/rng.hpp"

#include <algorithm>
#include <cmath>
#include <variant>

namespace mspop {

namespace {

double state_distance(double age_a, const StateVector& a, double age_b,
                      const StateVector& b) {
    double d = std::abs(age_a - age_b);
    d = std::max(d, std::abs(a.size - b.size));
    for (std::size_t i = 0; i < a.aux.size(); ++i)
        d = std::max(d, std::abs(a.aux[i] - b.aux[i]));
    return d;
}

// phi evaluated at the backward image (age - t, X(-t, x)), times the
// survival and geometry factors.  Callers guarantee age > t.
double transported_value(const Model& model, double t, double age,
                         const StateVector& x, const InitialCohort& phi,
                         const DensityOptions& opt) {
    FlowOptions fo;
    fo.rtol = opt.kin.flow_rtol;
    fo.domain = DomainPolicy::extend;
    fo.force_generic = opt.kin.force_generic;
    FlowResult back = flow(model, -t, age, x, fo);

    double value = 0;
    if (const auto* atoms = std::get_if<AtomCohort>(&phi)) {
        for (const auto& a : atoms->atoms)
            if (state_distance(back.age, back.state, a.age, a.state) <=
                opt.atom_match_tol)
                value += a.weight;
    } else if (const auto* grid = std::get_if<GridCohort>(&phi)) {
        std::vector<double> p(grid->density.dims());
        p[0] = back.age;
        p[1] = back.state.size;
        for (std::size_t i = 0; i < back.state.aux.size(); ++i)
            p[2 + i] = back.state.aux[i];
        value = grid->density.value(p);
    } else {
        value = std::get<AnalyticCohort>(phi).density(back.age, back.state);
    }
    if (value == 0) return 0;
    return value * survival(model, t, age, x, opt.kin) *
           jacobian(model, t, age, x, opt.kin);
}

// Survival of an individual that had age a0 and size s0 when released,
// over the next dt time units of forward transport.  Closed forms for the
// declarative velocity fields; division events count as loss.
double forward_survival(const Model& model, double a0, double s0, double dt) {
    if (!model.closed_form())
        throw OutOfRange("population totals need the declarative velocities");
    if (dt < 0) throw OutOfRange("forward_survival: negative span");

    if (model.deterministic_division()) {
        double birth_size = s0 * std::exp(-model.alpha() * a0);
        double a_div = division_age(model, birth_size);
        double e = a_div - a0; // elapsed time to the event
        if (e >= 0 && e <= dt) {
            double size_at_div = birth_size * std::exp(model.alpha() * a_div);
            if (model.region_of_size(std::min(size_at_div, model.x_M())) ==
                Region::reproductive)
                return 0.0;
        }
        return std::exp(-model.mu_d() * dt);
    }
    // Pointwise hazard: active from the moment the size passes x_M/2 (the
    // trajectory never drops back below it, including after it parks at
    // the maximum size).
    double enter = std::log(model.x_M() / (2 * s0)) / model.alpha();
    enter = std::max(enter, 0.0);
    double exposure = 0;
    if (dt > enter)
        exposure = model.hazard_cumulative(a0 + dt) -
                   model.hazard_cumulative(a0 + enter);
    return std::exp(-model.mu_d() * dt - exposure);
}

} // namespace

double cohort_value(const Model& model, const InitialCohort& phi, double age,
                    const StateVector& x) {
    (void)model;
    if (std::holds_alternative<AtomCohort>(phi)) return 0.0;
    if (const auto* grid = std::get_if<GridCohort>(&phi)) {
        std::vector<double> p(grid->density.dims());
        p[0] = age;
        p[1] = x.size;
        for (std::size_t i = 0; i < x.aux.size(); ++i) p[2 + i] = x.aux[i];
        return grid->density.value(p);
    }
    return std::get<AnalyticCohort>(phi).density(age, x);
}

double cohort_mass(const InitialCohort& phi) {
    if (const auto* atoms = std::get_if<AtomCohort>(&phi)) {
        double s = 0;
        for (const auto& a : atoms->atoms) s += a.weight;
        return s;
    }
    if (const auto* grid = std::get_if<GridCohort>(&phi))
        return grid->density.integral();
    throw OutOfRange("analytic cohorts have no bounded support to integrate");
}

double birth_horizon(const BirthFunction& b) {
    if (const auto* a = std::get_if<AtomBirths>(&b)) return a->horizon;
    return std::get<GridBirths>(b).horizon;
}

double propagate_initial(const Model& model, double t, double age,
                         const StateVector& x, const InitialCohort& phi,
                         const DensityOptions& opt) {
    if (!(t < age))
        throw WrongBranch("propagate_initial: needs t < a");
    if (t < 0) throw OutOfRange("propagate_initial: negative time");
    return transported_value(model, t, age, x, phi, opt);
}

double birth_branch(const Model& model, double t, double age,
                    const StateVector& x, const BirthFunction& births,
                    const DensityOptions& opt) {
    if (t < age)
        throw WrongBranch("birth_branch: needs t >= a");
    const double tau = t - age; // birth time of the evaluated cohort
    if (tau > birth_horizon(births) * (1 + 1e-12))
        throw BirthFunctionUndefined(
            "birth_branch: birth time beyond the solved horizon");

    FlowOptions fo;
    fo.rtol = opt.kin.flow_rtol;
    fo.domain = DomainPolicy::extend;
    fo.force_generic = opt.kin.force_generic;
    StateVector at_birth = flow(model, -age, age, x, fo).state;

    double value = 0;
    if (const auto* atoms = std::get_if<AtomBirths>(&births)) {
        for (const auto& a : atoms->atoms)
            if (std::abs(a.time - tau) <= opt.atom_match_tol &&
                state_distance(0, at_birth, 0, a.state) <= opt.atom_match_tol)
                value += a.weight;
    } else {
        const auto* grid = std::get_if<GridBirths>(&births);
        if (model.m() != 0)
            throw OutOfRange("grid births carry the size marginal; evaluate "
                             "atomically when auxiliary coordinates matter");
        value = grid->values.value(std::vector<double>{tau, at_birth.size});
    }
    if (value == 0) return 0;
    return value * survival(model, age, age, x, opt.kin) *
           jacobian(model, age, age, x, opt.kin);
}

double evaluate_density(const Model& model, double t, double age,
                        const StateVector& x, const InitialCohort& phi,
                        const BirthFunction* births, const DensityOptions& opt) {
    if (age < 0 || t < 0)
        throw OutOfRange("evaluate_density: negative age or time");
    if (t < age) return propagate_initial(model, t, age, x, phi, opt);
    if (!births)
        throw BirthFunctionUndefined(
            "evaluate_density: point needs the birth history");
    return birth_branch(model, t, age, x, *births, opt);
}

double sterile_value(const Model& model, double t, double age,
                     const StateVector& x, const InitialCohort& phi,
                     const DensityOptions& opt) {
    if (age <= t) return 0.0; // nothing was born after release
    return transported_value(model, t, age, x, phi, opt);
}

double total_population(const Model& model, double t, const InitialCohort& phi,
                        const BirthFunction* births, Exec exec) {
    if (t < 0) throw OutOfRange("total_population: negative time");
    double total = 0;

    if (const auto* atoms = std::get_if<AtomCohort>(&phi)) {
        for (const auto& a : atoms->atoms)
            total += a.weight * forward_survival(model, a.age, a.state.size, t);
    } else if (const auto* grid = std::get_if<GridCohort>(&phi)) {
        const auto& lat = grid->density;
        std::vector<double> partial(lat.size());
        for_each_index(
            static_cast<std::ptrdiff_t>(lat.size()), exec, [&](std::ptrdiff_t k) {
                double v = lat.values()[static_cast<std::size_t>(k)];
                if (v == 0) {
                    partial[static_cast<std::size_t>(k)] = 0;
                    return;
                }
                std::vector<double> c(lat.dims());
                lat.node_coords(static_cast<std::size_t>(k), c);
                partial[static_cast<std::size_t>(k)] =
                    v * lat.node_weight(static_cast<std::size_t>(k)) *
                    forward_survival(model, c[0], c[1], t);
            });
        for (double p : partial) total += p;
    } else {
        throw OutOfRange("total_population: analytic cohorts are unbounded");
    }

    if (!births) return total;

    if (const auto* atoms = std::get_if<AtomBirths>(births)) {
        for (const auto& a : atoms->atoms)
            if (a.time <= t)
                total +=
                    a.weight * forward_survival(model, 0.0, a.state.size, t - a.time);
    } else {
        const auto& grid = std::get<GridBirths>(*births);
        if (t > grid.horizon * (1 + 1e-12))
            throw BirthFunctionUndefined(
                "total_population: births unknown past the solved horizon");
        const auto& lat = grid.values;
        const auto& taxis = lat.axis(0);
        const auto& saxis = lat.axis(1);
        // Integrate the piecewise-linear birth rate in time, cell by cell,
        // truncating the last cell at t.
        for (std::size_t i = 0; i < saxis.n; ++i) {
            double ws = saxis.step();
            if (i == 0 || i == saxis.n - 1) ws *= 0.5;
            double s = saxis.coord(i);
            double acc = 0;
            for (std::size_t j = 0; j + 1 < taxis.n; ++j) {
                double t0 = taxis.coord(j), t1 = taxis.coord(j + 1);
                if (t0 >= t) break;
                double b0 = lat.value(std::vector<double>{t0, s});
                double g0 = b0 * forward_survival(model, 0.0, s, t - t0);
                double tend = std::min(t1, t);
                double b1 = lat.value(std::vector<double>{tend, s});
                double g1 = b1 * forward_survival(model, 0.0, s, t - tend);
                acc += 0.5 * (g0 + g1) * (tend - t0);
            }
            total += ws * acc;
        }
    }
    return total;
}

SemigroupReport verify_semigroup(const Model& model, const InitialCohort& phi,
                                 double t, double s, int n_points,
                                 std::uint64_t seed, const SampleBox& box,
                                 const std::vector<double>& h_continuity,
                                 Exec exec) {
    SemigroupReport rep;
    rep.points = n_points;
    rep.h = h_continuity;
    DensityOptions opt;

    std::vector<double> dev(static_cast<std::size_t>(n_points));
    for_each_index(n_points, exec, [&](std::ptrdiff_t i) {
        CounterRng rng(CounterRng::derive_key(seed, 0,
                                              static_cast<std::uint64_t>(i)));
        double age = rng.uniform(0.0, box.age_max);
        StateVector x;
        x.size = rng.uniform(model.x_m(), model.x_M());
        x.aux.resize(model.m());
        for (auto& a : x.aux) a = rng.uniform(0.0, box.aux_max);

        // Direct propagation over t+s versus the two-stage composition.
        double direct = sterile_value(model, t + s, age, x, phi, opt);
        double composed = 0;
        if (age > s) {
            FlowOptions fo;
            fo.domain = DomainPolicy::extend;
            FlowResult back = flow(model, -s, age, x, fo);
            double inner =
                sterile_value(model, t, back.age, back.state, phi, opt);
            if (inner != 0)
                composed = inner * survival(model, s, age, x, opt.kin) *
                           jacobian(model, s, age, x, opt.kin);
        }
        dev[static_cast<std::size_t>(i)] = std::abs(direct - composed);
    });
    for (double d : dev) rep.max_deviation = std::max(rep.max_deviation, d);

    // Strong continuity: L1 distance between P(h)phi and phi on a lattice.
    const num::Lattice* lat = nullptr;
    num::Lattice own;
    if (const auto* grid = std::get_if<GridCohort>(&phi)) {
        lat = &grid->density;
    } else {
        std::vector<num::Axis> axes;
        axes.push_back({0.0, box.age_max, 41});
        axes.push_back({model.x_m(), model.x_M(), 41});
        for (int i = 0; i < model.m(); ++i)
            axes.push_back({0.0, box.aux_max, 9});
        own = num::Lattice(axes);
        lat = &own;
    }
    for (double h : h_continuity) {
        std::vector<double> partial(lat->size());
        for_each_index(
            static_cast<std::ptrdiff_t>(lat->size()), exec,
            [&](std::ptrdiff_t k) {
                std::vector<double> c(lat->dims());
                lat->node_coords(static_cast<std::size_t>(k), c);
                StateVector x;
                x.size = c[1];
                x.aux.assign(c.begin() + 2, c.end());
                double now = cohort_value(model, phi, c[0], x);
                double moved = sterile_value(model, h, c[0], x, phi, opt);
                partial[static_cast<std::size_t>(k)] =
                    std::abs(moved - now) *
                    lat->node_weight(static_cast<std::size_t>(k));
            });
        double l1 = 0;
        for (double p : partial) l1 += p;
        rep.l1.push_back(l1);
    }
    rep.l1_monotone = true;
    for (std::size_t i = 0; i + 1 < rep.l1.size(); ++i)
        if (rep.l1[i + 1] >= rep.l1[i]) rep.l1_monotone = false;
    return rep;
}

GeneratorReport verify_generator(const Model& model, const AnalyticCohort& phi,
                                 const std::vector<double>& h_list,
                                 int n_points, std::uint64_t seed,
                                 const SampleBox& box, Exec exec) {
    if (!phi.d_age || phi.d_x.size() != static_cast<std::size_t>(model.dim()))
        throw OutOfRange("verify_generator: cohort needs analytic partials");
    GeneratorReport rep;
    rep.h = h_list;
    rep.points = n_points;
    double h_max = *std::max_element(h_list.begin(), h_list.end());
    const double margin = std::max(box.margin, 2 * h_max);

    // Sample once, away from the size walls and the region boundary so the
    // reproductive indicator cannot flip across a difference step.
    std::vector<double> ages(static_cast<std::size_t>(n_points));
    std::vector<StateVector> xs(static_cast<std::size_t>(n_points));
    for (int i = 0; i < n_points; ++i) {
        CounterRng rng(CounterRng::derive_key(seed, 1,
                                              static_cast<std::uint64_t>(i)));
        ages[static_cast<std::size_t>(i)] = rng.uniform(margin, box.age_max);
        StateVector x;
        do {
            x.size = rng.uniform(model.x_m() + margin, model.x_M() - margin);
        } while (std::abs(x.size - model.x_M() / 2) < margin);
        x.aux.resize(model.m());
        for (auto& a : x.aux) a = rng.uniform(margin, box.aux_max);
        xs[static_cast<std::size_t>(i)] = std::move(x);
    }

    InitialCohort cohort = phi;
    DensityOptions opt;
    for (double h : h_list) {
        std::vector<double> devs(static_cast<std::size_t>(n_points));
        for_each_index(n_points, exec, [&](std::ptrdiff_t i) {
            const double age = ages[static_cast<std::size_t>(i)];
            const StateVector& x = xs[static_cast<std::size_t>(i)];
            double val = phi.density(age, x);
            double quotient =
                (sterile_value(model, h, age, x, cohort, opt) - val) / h;
            double a_phi = phi.d_age(age, x);
            for (int c = 0; c < model.dim(); ++c)
                a_phi += model.velocity(c, age, x) * phi.d_x[static_cast<std::size_t>(c)](age, x);
            a_phi += val * model.divergence(age, x);
            a_phi += val * model.loss_rate(age, x);
            a_phi = -a_phi;
            devs[static_cast<std::size_t>(i)] = std::abs(quotient - a_phi);
        });
        double mx = 0;
        for (double d : devs) mx = std::max(mx, d);
        rep.max_dev.push_back(mx);
    }
    for (std::size_t i = 0; i + 1 < rep.max_dev.size(); ++i)
        rep.ratios.push_back(rep.max_dev[i + 1] / rep.max_dev[i]);
    return rep;
}

} // namespace mspop
