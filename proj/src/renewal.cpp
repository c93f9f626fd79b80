#include "mspop/renewal.hpp"

#include "mspop/characteristics.hpp"
#include "mspop/kinetics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <variant>

namespace mspop {

namespace {

void sort_atoms(std::vector<BirthAtom>& atoms) {
    std::sort(atoms.begin(), atoms.end(),
              [](const BirthAtom& a, const BirthAtom& b) {
                  if (a.time != b.time) return a.time < b.time;
                  if (a.generation != b.generation)
                      return a.generation < b.generation;
                  if (a.state.size != b.state.size)
                      return a.state.size < b.state.size;
                  return a.state.aux < b.state.aux;
              });
}

double atoms_norm(const AtomBirths& b) {
    double s = 0;
    for (const auto& a : b.atoms) s += a.weight;
    return s;
}

// Peak birth-mass rate: sup over time nodes of the size integral.
double grid_norm(const GridBirths& g) {
    const auto& lat = g.values;
    const auto& ta = lat.axis(0);
    const auto& sa = lat.axis(1);
    double best = 0;
    for (std::size_t j = 0; j < ta.n; ++j) {
        double acc = 0;
        for (std::size_t i = 0; i < sa.n; ++i) {
            double w = (i == 0 || i == sa.n - 1) ? 0.5 : 1.0;
            acc += w * sa.step() *
                   lat.values()[j * sa.n + i];
        }
        best = std::max(best, acc);
    }
    return best;
}

void require_declarative(const Model& model) {
    if (!model.closed_form())
        throw OutOfRange("renewal needs the declarative velocity fields");
}

AtomBirths phi_atoms(const Model& model, const AtomCohort& phi, double horizon,
                     const RenewalOptions&) {
    if (!model.deterministic_division())
        throw OutOfRange("atomic renewal needs a deterministic division rule");
    AtomBirths out;
    out.horizon = horizon;
    for (const auto& a : phi.atoms) {
        if (a.weight == 0) continue;
        model.check_state(a.state);
        double birth_size = a.state.size * std::exp(-model.alpha() * a.age);
        auto ev = division_event(model, birth_size);
        if (!ev) continue;
        double e = ev->age - a.age; // time from release to the event
        if (e < 0 || e > horizon) continue;
        StateVector mother;
        mother.size = ev->size;
        mother.aux = a.state.aux;
        for (auto& c : mother.aux) c += e;
        BirthAtom child;
        child.time = e;
        child.state = model.daughter_state(mother);
        child.weight = 2 * a.weight * std::exp(-model.mu_d() * e);
        child.generation = 0;
        out.atoms.push_back(std::move(child));
    }
    sort_atoms(out.atoms);
    return out;
}

AtomBirths k_atoms(const Model& model, const AtomBirths& b) {
    if (!model.deterministic_division())
        throw OutOfRange("atomic renewal needs a deterministic division rule");
    AtomBirths out;
    out.horizon = b.horizon;
    for (const auto& a : b.atoms) {
        if (a.weight == 0) continue;
        auto ev = division_event(model, a.state.size);
        if (!ev) continue;
        double t_div = a.time + ev->age;
        if (t_div > b.horizon) continue;
        StateVector mother;
        mother.size = ev->size;
        mother.aux = a.state.aux;
        for (auto& c : mother.aux) c += ev->age;
        BirthAtom child;
        child.time = t_div;
        child.state = model.daughter_state(mother);
        child.weight = 2 * a.weight * std::exp(-model.mu_d() * ev->age);
        child.generation = a.generation + 1;
        out.atoms.push_back(std::move(child));
    }
    sort_atoms(out.atoms);
    return out;
}

void require_grid_model(const Model& model) {
    if (model.deterministic_division())
        throw DiracHazardNotPointwise(
            "grid renewal needs a pointwise division hazard");
    if (model.m() != 0)
        throw OutOfRange("grid renewal carries the size marginal; auxiliary "
                         "coordinates need the atomic backend");
}

GridBirths phi_grid(const Model& model, const GridCohort& phi, double horizon,
                    const RenewalOptions& opt) {
    require_grid_model(model);
    if (phi.density.dims() != 2)
        throw OutOfRange("grid renewal expects an (age, size) cohort lattice");

    GridBirths out;
    out.horizon = horizon;
    out.values = num::Lattice({num::Axis{0.0, horizon, opt.time_nodes},
                               num::Axis{model.x_M() / 4, model.x_M() / 2,
                                         opt.size_nodes}});
    const auto& ta = out.values.axis(0);
    const auto& sa = out.values.axis(1);
    const auto& age_axis = phi.density.axis(0);
    const double alpha = model.alpha();

    for_each_index(
        static_cast<std::ptrdiff_t>(out.values.size()), opt.exec,
        [&](std::ptrdiff_t k) {
            std::size_t j = static_cast<std::size_t>(k) / sa.n;
            std::size_t i = static_cast<std::size_t>(k) % sa.n;
            double t = ta.coord(j);
            double s = sa.coord(i);
            // Daughters of size s come from mothers of size 2s, who must be
            // reproductive to divide.
            if (model.region_of_size(2 * s) != Region::reproductive) {
                out.values.values()[static_cast<std::size_t>(k)] = 0;
                return;
            }
            double u = 2 * s * std::exp(-alpha * t); // mother size at release
            double acc = 0;
            std::vector<double> p(2);
            for (std::size_t q = 0; q < age_axis.n; ++q) {
                double a0 = age_axis.coord(q);
                double w = (q == 0 || q == age_axis.n - 1) ? 0.5 : 1.0;
                w *= age_axis.step();
                p[0] = a0;
                p[1] = u;
                double val = phi.density.value(p);
                if (val == 0) continue;
                double rate = model.hazard_rate(a0 + t);
                if (rate == 0) continue;
                StateVector x;
                x.size = 2 * s;
                acc += w * val * rate * survival(model, t, a0 + t, x, opt.kin);
            }
            // Two daughters per division, and the mother-to-daughter size
            // substitution contributes another factor 2 e^{-alpha t}.
            out.values.values()[static_cast<std::size_t>(k)] =
                acc * 4 * std::exp(-alpha * t);
        });
    return out;
}

GridBirths k_grid(const Model& model, const GridBirths& b,
                  const RenewalOptions& opt) {
    require_grid_model(model);
    GridBirths out;
    out.horizon = b.horizon;
    out.values = num::Lattice(
        {b.values.axis(0), b.values.axis(1)});
    const auto& ta = out.values.axis(0);
    const auto& sa = out.values.axis(1);
    const double dt = ta.step();
    const double alpha = model.alpha();

    for_each_index(
        static_cast<std::ptrdiff_t>(out.values.size()), opt.exec,
        [&](std::ptrdiff_t k) {
            std::size_t j = static_cast<std::size_t>(k) / sa.n;
            std::size_t i = static_cast<std::size_t>(k) % sa.n;
            double t = ta.coord(j);
            double s = sa.coord(i);
            if (model.region_of_size(2 * s) != Region::reproductive) {
                out.values.values()[static_cast<std::size_t>(k)] = 0;
                return;
            }
            double acc = 0;
            std::vector<double> p(2);
            for (std::size_t q = 0; q <= j; ++q) {
                double a = ta.coord(q); // mother age at the division
                double rate = model.hazard_rate(a);
                if (rate == 0) continue;
                p[0] = t - a;
                p[1] = 2 * s * std::exp(-alpha * a); // her size at birth
                double val = b.values.value(p);
                if (val == 0) continue;
                double w = (q == 0 || q == j) ? 0.5 : 1.0;
                StateVector x;
                x.size = 2 * s;
                acc += w * dt * rate * survival(model, a, a, x, opt.kin) *
                       4 * std::exp(-alpha * a);
            }
            out.values.values()[static_cast<std::size_t>(k)] = acc;
        });
    return out;
}

} // namespace

BirthFunction phi_term(const Model& model, const InitialCohort& phi,
                       double horizon, const RenewalOptions& opt) {
    require_declarative(model);
    if (!(horizon > 0)) throw OutOfRange("phi_term: horizon must be positive");
    if (opt.backend == RenewalBackend::atomic) {
        const auto* atoms = std::get_if<AtomCohort>(&phi);
        if (!atoms)
            throw OutOfRange("atomic renewal needs an atom cohort");
        return phi_atoms(model, *atoms, horizon, opt);
    }
    const auto* grid = std::get_if<GridCohort>(&phi);
    if (!grid) throw OutOfRange("grid renewal needs a lattice cohort");
    return phi_grid(model, *grid, horizon, opt);
}

BirthFunction apply_K(const Model& model, const BirthFunction& b,
                      const RenewalOptions& opt) {
    require_declarative(model);
    if (const auto* atoms = std::get_if<AtomBirths>(&b))
        return k_atoms(model, *atoms);
    return k_grid(model, std::get<GridBirths>(b), opt);
}

RenewalSolution solve_series(const Model& model, const InitialCohort& phi,
                             double horizon, const RenewalOptions& opt) {
    require_declarative(model);
    if (!(horizon > 0))
        throw OutOfRange("solve_series: horizon must be positive");
    RenewalSolution sol;

    if (opt.backend == RenewalBackend::atomic) {
        AtomBirths total =
            std::get<AtomBirths>(phi_term(model, phi, horizon, opt));
        AtomBirths current = total;
        sol.term_norms.push_back(atoms_norm(current));
        for (int n = 1; n <= opt.max_terms; ++n) {
            if (current.atoms.empty()) {
                sol.converged = true;
                break;
            }
            current = k_atoms(model, current);
            if (current.atoms.empty()) {
                sol.converged = true;
                break;
            }
            sol.term_norms.push_back(atoms_norm(current));
            total.atoms.insert(total.atoms.end(), current.atoms.begin(),
                               current.atoms.end());
        }
        if (!sol.converged)
            throw NotConverged(
                "solve_series: generation count exceeded max_terms");
        sort_atoms(total.atoms);
        sol.births = std::move(total);
        return sol;
    }

    GridBirths total = std::get<GridBirths>(phi_term(model, phi, horizon, opt));
    GridBirths current = total;
    sol.term_norms.push_back(grid_norm(current));
    const double scale = std::max(sol.term_norms.front(), 1e-300);
    if (sol.term_norms.front() <= opt.tol * scale) sol.converged = true;
    for (int n = 1; n <= opt.max_terms && !sol.converged; ++n) {
        current = k_grid(model, current, opt);
        double norm = grid_norm(current);
        sol.term_norms.push_back(norm);
        auto tv = total.values.values();
        auto cv = current.values.values();
        for (std::size_t i = 0; i < tv.size(); ++i) tv[i] += cv[i];
        if (norm <= opt.tol * scale) sol.converged = true;
    }
    if (!sol.converged)
        throw NotConverged("solve_series: series terms still above tolerance "
                           "at max_terms");
    sol.births = std::move(total);
    return sol;
}

double support_volume(const Model& model, const InitialCohort& phi) {
    const int d = model.dim();
    std::vector<double> lo(static_cast<std::size_t>(d),
                           std::numeric_limits<double>::infinity());
    std::vector<double> hi(static_cast<std::size_t>(d),
                           -std::numeric_limits<double>::infinity());
    bool any = false;

    if (const auto* atoms = std::get_if<AtomCohort>(&phi)) {
        for (const auto& a : atoms->atoms) {
            if (a.weight == 0) continue;
            any = true;
            lo[0] = std::min(lo[0], a.state.size);
            hi[0] = std::max(hi[0], a.state.size);
            for (std::size_t i = 0; i < a.state.aux.size(); ++i) {
                lo[i + 1] = std::min(lo[i + 1], a.state.aux[i]);
                hi[i + 1] = std::max(hi[i + 1], a.state.aux[i]);
            }
        }
    } else if (const auto* grid = std::get_if<GridCohort>(&phi)) {
        const auto& lat = grid->density;
        std::vector<double> c(lat.dims());
        for (std::size_t k = 0; k < lat.size(); ++k) {
            if (lat.values()[k] == 0) continue;
            any = true;
            lat.node_coords(k, c);
            for (int i = 0; i < d; ++i) {
                lo[static_cast<std::size_t>(i)] =
                    std::min(lo[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(i) + 1]);
                hi[static_cast<std::size_t>(i)] =
                    std::max(hi[static_cast<std::size_t>(i)], c[static_cast<std::size_t>(i) + 1]);
            }
        }
    } else {
        throw OutOfRange("support_volume: analytic cohorts are unbounded");
    }
    if (!any) return 0;
    double v = 1;
    for (int i = 0; i < d; ++i)
        v *= hi[static_cast<std::size_t>(i)] - lo[static_cast<std::size_t>(i)];
    return v;
}

SeriesBoundReport series_bound_report(const Model& model,
                                      const InitialCohort& phi,
                                      const RenewalSolution& sol,
                                      double horizon) {
    SeriesBoundReport rep;
    rep.horizon = horizon;
    rep.beta_sup = model.hazard_bound();
    rep.phi_norm = cohort_mass(phi);
    // The forward flow expands state-space volume at rate div v = alpha, so
    // the occupied volume grows by at most e^{alpha T} over the window.
    rep.omega1 =
        support_volume(model, phi) * std::exp(model.alpha() * horizon);
    rep.contraction = horizon * rep.beta_sup * rep.omega1;

    double bound = rep.beta_sup * rep.phi_norm;
    for (std::size_t n = 0; n < sol.term_norms.size(); ++n) {
        SeriesBoundRow row;
        row.n = static_cast<int>(n);
        row.norm = sol.term_norms[n];
        row.bound = bound;
        row.violated = row.norm > bound * (1 + 1e-9);
        if (row.violated) rep.satisfied = false;
        rep.rows.push_back(row);
        bound *= rep.contraction;
    }
    return rep;
}

double contraction_window(const Model& model, const InitialCohort& phi,
                          double ratio) {
    if (!(ratio > 0)) throw OutOfRange("contraction_window: ratio must be > 0");
    double v = support_volume(model, phi);
    double beta = model.hazard_bound();
    if (v <= 0 || beta <= 0)
        throw OutOfRange("contraction_window: degenerate support or hazard");
    double t = ratio / (beta * v);
    for (int i = 0; i < 300; ++i) {
        double next = ratio / (beta * v * std::exp(model.alpha() * t));
        double step = 0.5 * (next - t); // damped, avoids flip-flopping
        t += step;
        if (std::abs(step) < 1e-15 * std::max(t, 1.0)) break;
    }
    return t;
}

} // namespace mspop
