#include "mspop/verify.hpp"

#include "mspop/characteristics.hpp"
#include "mspop/kinetics.hpp"
#include "mspop/renewal.hpp"
#include "mspop/rng.hpp"
#include "mspop/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace mspop {

LiouvilleReport liouville_check(const Model& model, int n_points,
                                std::uint64_t seed, double h, double tolerance,
                                Exec exec) {
    if (n_points <= 0) throw OutOfRange("liouville_check: n_points must be positive");
    LiouvilleReport rep;
    rep.tolerance = tolerance;
    rep.points.resize(static_cast<std::size_t>(n_points));
    LiouvillePoint* pts = rep.points.data();

    const double span = model.x_M() - model.x_m();
    const double margin = std::max(4 * h, 0.01 * span);
    const int m = model.m();

    for_each_index(n_points, exec, [&](std::ptrdiff_t i) {
        CounterRng rng(CounterRng::derive_key(seed, 0, static_cast<std::uint64_t>(i)));
        LiouvillePoint p;
        p.theta = rng.uniform(0.0, 1.5);
        p.age = p.theta + rng.uniform(0.0, 2.0);
        p.x.size = rng.uniform(model.x_m() + margin, model.x_M() - margin);
        p.x.aux.resize(static_cast<std::size_t>(m));
        for (int k = 0; k < m; ++k) p.x.aux[k] = rng.uniform(0.25, 2.25);

        p.analytic = jacobian(model, p.theta, p.age, p.x);
        p.fd = jacobian_fd(model, p.theta, p.age, p.x, h);
        p.rel_err = std::abs(p.analytic - p.fd) /
                    std::max(std::abs(p.analytic), 1e-300);
        pts[i] = std::move(p);
    });

    for (const auto& p : rep.points) rep.max_rel_err = std::max(rep.max_rel_err, p.rel_err);
    rep.passed = rep.max_rel_err < tolerance;
    return rep;
}

Model make_coupled_test_model() {
    ModelSpec spec;
    spec.m = 2;
    spec.x_m = 0.5;
    spec.x_M = 4.0;
    spec.alpha = 0.6;
    spec.mu_d = 0.05;
    spec.division.kind = DivisionKind::smooth_hazard;
    spec.hazard.kind = HazardKind::constant;
    spec.hazard.b0 = 0.4;
    Model m = Model::validate(spec);
    // Every component reads a neighbouring coordinate, so no closed form
    // applies and each diagonal derivative contributes to the divergence.
    m.set_velocity(0, VelocityField{
        [](double, const StateVector& x) {
            return 0.6 * x.size * (1 + 0.1 * std::sin(x.aux[0]));
        },
        [](double, const StateVector& x) {
            return 0.6 * (1 + 0.1 * std::sin(x.aux[0]));
        }});
    m.set_velocity(1, VelocityField{
        [](double, const StateVector& x) { return 0.8 + 0.1 * std::tanh(x.aux[0]); },
        [](double, const StateVector& x) {
            const double th = std::tanh(x.aux[0]);
            return 0.1 * (1 - th * th);
        }});
    m.set_velocity(2, VelocityField{
        [](double, const StateVector& x) {
            return 1 + 0.05 * std::sin(x.aux[1]) + 0.1 * std::cos(x.size);
        },
        [](double, const StateVector& x) { return 0.05 * std::cos(x.aux[1]); }});
    return m;
}

AnalyticCohort make_smooth_cohort(const Model& model) {
    const double c = 0.5 * (model.x_m() + model.x_M());
    const double w = 0.25 * (model.x_M() - model.x_m());
    const int m = model.m();
    auto value = [c, w, m](double age, const StateVector& x) {
        double v = std::exp(-1.5 * age);
        const double z = (x.size - c) / w;
        v *= std::exp(-z * z);
        for (int k = 0; k < m; ++k) v *= std::exp(-0.7 * x.aux[k]);
        return v;
    };
    AnalyticCohort phi;
    phi.density = value;
    phi.d_age = [value](double age, const StateVector& x) {
        return -1.5 * value(age, x);
    };
    phi.d_x.push_back([value, c, w](double age, const StateVector& x) {
        return -2 * (x.size - c) / (w * w) * value(age, x);
    });
    for (int k = 0; k < m; ++k)
        phi.d_x.push_back([value](double age, const StateVector& x) {
            return -0.7 * value(age, x);
        });
    return phi;
}

namespace {

// Same box and rates as the supplied model but with a flat unit hazard,
// for suites that need a finite pointwise loss rate.
Model flat_hazard_companion(const Model& base) {
    ModelSpec s = base.spec();
    s.division = {};
    s.division.kind = DivisionKind::smooth_hazard;
    s.hazard = {};
    s.hazard.kind = HazardKind::constant;
    s.hazard.b0 = 1.0;
    return Model::validate(s);
}

// Scalar-state flat-hazard model sized so that the contraction factor of
// the series bound stays comfortably below one on the derived window.
Model bound_companion() {
    ModelSpec s;
    s.m = 0;
    s.x_m = 0.5;
    s.x_M = 4.0;
    s.alpha = 1.0;
    s.mu_d = 0.0;
    s.division.kind = DivisionKind::smooth_hazard;
    s.hazard.kind = HazardKind::constant;
    s.hazard.b0 = 2.0;
    return Model::validate(s);
}

// Uniform in age on [0, 1/2], linear in size falling from near the lower
// wall to zero near the top wall.  The kinks sit on lattice nodes, so the
// multilinear representation is exact.  Total mass one.
GridCohort triangle_cohort(const Model& model) {
    const num::Axis size_axis{model.x_m(), model.x_M(), 71};
    const double s0 = size_axis.coord(2);
    const double s1 = size_axis.coord(62);
    GridCohort phi;
    phi.density = num::Lattice({num::Axis{0.0, 0.5, 9}, size_axis});
    phi.density.fill([&](std::span<const double> c) {
        const double s = c[1];
        if (s < s0 || s > s1) return 0.0;
        return 4 * (s1 - s) / ((s1 - s0) * (s1 - s0));
    });
    return phi;
}

VerifyCheck row(std::string name, double observed, double bound, bool passed,
                std::string detail = {}) {
    VerifyCheck c;
    c.name = std::move(name);
    c.observed = observed;
    c.bound = bound;
    c.passed = passed;
    c.detail = std::move(detail);
    return c;
}

double atoms_gap(const AtomBirths& a, const AtomBirths& b) {
    if (a.atoms.size() != b.atoms.size())
        return std::numeric_limits<double>::infinity();
    double gap = 0;
    for (std::size_t i = 0; i < a.atoms.size(); ++i) {
        const BirthAtom& u = a.atoms[i];
        const BirthAtom& v = b.atoms[i];
        gap = std::max(gap, std::abs(u.time - v.time));
        gap = std::max(gap, std::abs(u.weight - v.weight) / std::max(1.0, std::abs(u.weight)));
        gap = std::max(gap, std::abs(u.state.size - v.state.size));
        for (std::size_t k = 0; k < u.state.aux.size(); ++k)
            gap = std::max(gap, std::abs(u.state.aux[k] - v.state.aux[k]));
    }
    return gap;
}

} // namespace

VerifyReport run_verify(const Model& model, const VerifyOptions& opt) {
    VerifyReport rep;

    // Geometry factor against the finite-difference determinant, on the
    // supplied model and on the coupled-velocity stress model.
    rep.liouville = liouville_check(model, opt.liouville_points, opt.seed,
                                    1e-4, 1e-6, opt.exec);
    rep.checks.push_back(row("liouville.model", rep.liouville.max_rel_err,
                             rep.liouville.tolerance, rep.liouville.passed));
    {
        const Model coupled = make_coupled_test_model();
        LiouvilleReport lc = liouville_check(coupled, opt.liouville_points,
                                             opt.seed + 1, 1e-4, 1e-6, opt.exec);
        rep.checks.push_back(row("liouville.coupled", lc.max_rel_err,
                                 lc.tolerance, lc.passed,
                                 "three coupled velocity components"));
    }

    // Propagator composition and strong continuity on a smooth cohort.
    {
        const AnalyticCohort phi = make_smooth_cohort(model);
        SampleBox box;
        box.age_max = 3;
        box.aux_max = 2;
        box.margin = 0.02 * (model.x_M() - model.x_m());
        const double tol = model.closed_form() ? 1e-8 : 1e-6;
        SemigroupReport sg = verify_semigroup(model, InitialCohort{phi}, 0.4, 0.3,
                                              opt.semigroup_points, opt.seed + 2,
                                              box, {0.1, 0.01, 0.001}, opt.exec);
        rep.checks.push_back(row("semigroup.composition", sg.max_deviation, tol,
                                 sg.max_deviation < tol));
        std::ostringstream cont;
        for (std::size_t i = 0; i < sg.l1.size(); ++i) {
            if (i) cont << " > ";
            cont << sg.l1[i];
        }
        rep.checks.push_back(row("semigroup.continuity",
                                 sg.l1.empty() ? 0.0 : sg.l1.back(), 0.0,
                                 sg.l1_monotone, cont.str()));
    }

    // Difference quotients of the generator; the dirac rule has no
    // pointwise loss rate, so it gets a flat-hazard companion.
    {
        const bool substitute = model.deterministic_division();
        const Model gen_model = substitute ? flat_hazard_companion(model) : model;
        const AnalyticCohort phi = make_smooth_cohort(gen_model);
        SampleBox box;
        box.age_max = 2;
        box.aux_max = 2;
        box.margin = 0.02 * (gen_model.x_M() - gen_model.x_m());
        GeneratorReport gr = verify_generator(gen_model, phi,
                                              {1e-2, 5e-3, 2.5e-3},
                                              opt.generator_points, opt.seed + 3,
                                              box, opt.exec);
        double worst = 0;
        for (double r : gr.ratios) worst = std::max(worst, std::abs(r - 0.5));
        rep.checks.push_back(row("generator.ratio", worst, 0.1, worst < 0.1,
                                 substitute ? "flat-hazard companion (b0 = 1)"
                                            : ""));
    }

    // Renewal fixed point: the summed series must satisfy
    // B = phi-term + K(B) on whichever backend the model admits.
    if (model.deterministic_division()) {
        const double a_scale = model.has_fixed_a_star()
                                   ? model.a_star()
                                   : std::log(2.0) / model.alpha();
        const double horizon = 3.5 * a_scale;
        AtomCohort seed_cohort;
        InitialAtom atom;
        atom.age = 0;
        atom.state.size = 0.375 * model.x_M();
        atom.state.aux.assign(static_cast<std::size_t>(model.m()), 0.0);
        atom.weight = 1;
        seed_cohort.atoms.push_back(atom);

        RenewalOptions ro;
        ro.backend = RenewalBackend::atomic;
        ro.exec = opt.exec;
        RenewalSolution sol = solve_series(model, InitialCohort{seed_cohort},
                                           horizon, ro);
        BirthFunction recomposed = apply_K(model, sol.births, ro);
        BirthFunction phi0 = phi_term(model, InitialCohort{seed_cohort}, horizon, ro);
        AtomBirths merged = std::get<AtomBirths>(recomposed);
        const auto& phi_atoms = std::get<AtomBirths>(phi0).atoms;
        merged.atoms.insert(merged.atoms.end(), phi_atoms.begin(), phi_atoms.end());
        std::sort(merged.atoms.begin(), merged.atoms.end(),
                  [](const BirthAtom& a, const BirthAtom& b) {
                      if (a.time != b.time) return a.time < b.time;
                      if (a.generation != b.generation) return a.generation < b.generation;
                      return a.state.size < b.state.size;
                  });
        const double gap = atoms_gap(std::get<AtomBirths>(sol.births), merged);
        rep.checks.push_back(row("renewal.fixed_point", gap, 1e-12, gap <= 1e-12,
                                 "atomic backend"));
    } else {
        const bool own = model.m() == 0 && model.closed_form();
        const Model grid_model = own ? model : bound_companion();
        const GridCohort phi = triangle_cohort(grid_model);
        const double horizon =
            contraction_window(grid_model, InitialCohort{phi}, 0.8);
        RenewalOptions ro;
        ro.backend = RenewalBackend::grid;
        ro.exec = opt.exec;
        RenewalSolution sol = solve_series(grid_model, InitialCohort{phi},
                                           horizon, ro);
        BirthFunction rhs = phi_term(grid_model, InitialCohort{phi}, horizon, ro);
        BirthFunction kb = apply_K(grid_model, sol.births, ro);
        const auto bv = std::get<GridBirths>(sol.births).values.values();
        const auto rv = std::get<GridBirths>(rhs).values.values();
        const auto kv = std::get<GridBirths>(kb).values.values();
        double dev = 0, scale = 0;
        for (std::size_t i = 0; i < bv.size(); ++i) {
            dev = std::max(dev, std::abs(bv[i] - (rv[i] + kv[i])));
            scale = std::max(scale, std::abs(bv[i]));
        }
        const double bound = 10 * ro.tol * std::max(scale, 1.0);
        rep.checks.push_back(row("renewal.fixed_point", dev, bound, dev <= bound,
                                 own ? "grid backend" : "grid backend on scalar companion"));
    }

    // Series term norms against the a-priori geometric bound.
    {
        const bool own = !model.deterministic_division() && model.m() == 0 &&
                         model.closed_form();
        const Model bm = own ? model : bound_companion();
        const GridCohort phi = triangle_cohort(bm);
        const double horizon = contraction_window(bm, InitialCohort{phi}, 0.8);
        RenewalOptions ro;
        ro.backend = RenewalBackend::grid;
        ro.exec = opt.exec;
        RenewalSolution sol = solve_series(bm, InitialCohort{phi}, horizon, ro);
        SeriesBoundReport sb = series_bound_report(bm, InitialCohort{phi}, sol,
                                                   horizon);
        double worst = 0; // largest norm/bound ratio across rows
        for (const auto& r : sb.rows)
            if (r.bound > 0) worst = std::max(worst, r.norm / r.bound);
        rep.checks.push_back(row("renewal.term_bound", worst, 1.0, sb.satisfied,
                                 own ? "" : "scalar flat-hazard companion"));
    }

    // Dominant eigenvalue: residual at the root plus a cross check with an
    // independent method.
    {
        SpectralOptions so;
        so.exec = opt.exec;
        SpectralResult sr = dominant_eigenvalue(model, so);
        rep.lambda0 = sr.lambda0;
        const double res_tol = sr.atomic ? 1e-9 : 1e-6;
        rep.checks.push_back(row("eigen.residual", sr.residual, res_tol,
                                 sr.residual < res_tol));
        if (model.deterministic_division()) {
            SpectralOptions alt = so;
            alt.method = SpectralMethod::euler_lotka_scalar;
            SpectralResult sb2 = dominant_eigenvalue(model, alt);
            const double gap = std::abs(sb2.lambda0 - sr.lambda0);
            rep.checks.push_back(row("eigen.cross_method", gap, 1e-8, gap < 1e-8,
                                     "closed form vs scalar bisection"));
            // One generation multiplies the profile by 2 exp(-mu_d a).
            const double a_gen = std::log(2.0) / sr.paper_lambda;
            const AsymptoticProfile p0 = asymptotic_profile(model, sr, 1.3);
            const AsymptoticProfile p1 = asymptotic_profile(model, sr, 1.3 + a_gen);
            const double ratio = p1.scale / p0.scale;
            const double expected = 2 * std::exp(-model.mu_d() * a_gen);
            const double err = std::abs(ratio / expected - 1);
            rep.checks.push_back(row("eigen.generation_ratio", err, 1e-12,
                                     err < 1e-12));
        } else {
            const double delta = 0.05;
            const double lo = spectral_radius(model, sr.lambda0 - delta, so);
            const double hi = spectral_radius(model, sr.lambda0 + delta, so);
            const double obs = std::min(lo - 1, 1 - hi);
            std::ostringstream d;
            d << "r(l0-d) = " << lo << ", r(l0+d) = " << hi;
            rep.checks.push_back(row("eigen.cross_method", obs, 0.0, obs > 0,
                                     d.str()));
        }
    }

    rep.all_passed = true;
    for (const auto& c : rep.checks) rep.all_passed = rep.all_passed && c.passed;
    return rep;
}

} // namespace mspop
