#include "mspop/spectral.hpp"

#include "mspop/characteristics.hpp"
#include "mspop/num/quad.hpp"
#include "mspop/num/roots.hpp"

#include <algorithm>
#include <cmath>
#include <optional>

namespace mspop {

namespace {

// Fixed point of the deterministic birth-size map (daughter size of a
// mother born at b).  Doubling is stationary immediately; the adder rule
// contracts towards delta_l at rate 1/2 per generation.
std::optional<DivisionEvent> stable_orbit(const Model& model) {
    double b = 0.375 * model.x_M();
    for (int i = 0; i < 200; ++i) {
        auto ev = division_event(model, b);
        if (!ev) return std::nullopt;
        double next = ev->size / 2;
        if (std::abs(next - b) < 1e-14 * model.x_M())
            return division_event(model, next);
        b = next;
    }
    return std::nullopt;
}

double scalar_radius(const Model& model, double lambda) {
    auto ev = stable_orbit(model);
    if (!ev) return 0.0;
    return 2 * std::exp(-(lambda + model.mu_d()) * ev->age);
}

// Discretized kernel at a fixed lambda: row i receives the Laplace-weighted
// births landing at size node i, expressed in the columns of the mother's
// birth-size interpolation weights.
std::vector<double> build_matrix(const Model& model, double lambda,
                                 const num::Axis& sa,
                                 const SpectralOptions& opt) {
    const std::size_t n = sa.n;
    std::vector<double> m(n * n, 0.0);
    const double alpha = model.alpha();
    const bool table = model.spec().hazard.kind == HazardKind::table;

    for_each_index(
        static_cast<std::ptrdiff_t>(n), opt.exec, [&](std::ptrdiff_t row) {
            const std::size_t i = static_cast<std::size_t>(row);
            const double s = sa.coord(i);
            if (model.region_of_size(2 * s) != Region::reproductive) return;
            // Beyond a_hi the mother's birth size falls off the lattice.
            double a_hi = std::log(8 * s / model.x_M()) / alpha;
            if (table) a_hi = std::min(a_hi, model.spec().hazard.ages.back());
            if (!(a_hi > 0)) return;

            const std::size_t q = std::max<std::size_t>(opt.quad_nodes, 9);
            const double da = a_hi / static_cast<double>(q - 1);
            StateVector mother;
            mother.size = 2 * s;
            for (std::size_t k = 0; k < q; ++k) {
                double a = da * static_cast<double>(k);
                double rate = model.hazard_rate(a);
                if (rate == 0) continue;
                double w = (k == 0 || k == q - 1) ? 0.5 : 1.0;
                double factor = w * da * std::exp(-lambda * a) * 2 * rate *
                                survival(model, a, a, mother, opt.kin) * 2 *
                                std::exp(-alpha * a);
                double u = 2 * s * std::exp(-alpha * a);
                if (u < sa.lo || u > sa.hi) continue;
                double t = (u - sa.lo) / sa.step();
                std::size_t j =
                    std::min(static_cast<std::size_t>(t), n - 2);
                double f = t - static_cast<double>(j);
                m[i * n + j] += factor * (1 - f);
                m[i * n + j + 1] += factor * f;
            }
        });
    return m;
}

struct PowerOut {
    double r = 0;
    std::vector<double> v; // L1-normalized iterate
};

PowerOut power_iterate(const std::vector<double>& m, std::size_t n,
                       const SpectralOptions& opt) {
    std::vector<double> v(n, 1.0 / static_cast<double>(n)), w(n);
    double r_prev = -1;
    for (int iter = 0; iter < opt.max_power_iters; ++iter) {
        double r = 0;
        for (std::size_t i = 0; i < n; ++i) {
            double acc = 0;
            for (std::size_t j = 0; j < n; ++j) acc += m[i * n + j] * v[j];
            w[i] = acc;
            r += acc; // entries are non-negative
        }
        if (r == 0) return {0.0, std::move(v)};
        for (auto& x : w) x /= r;
        v.swap(w);
        if (std::abs(r - r_prev) < opt.power_tol * std::max(1.0, r))
            return {r, std::move(v)};
        r_prev = r;
    }
    throw PowerIterationStalled(
        "spectral_radius: power iteration did not settle");
}

num::Axis birth_axis(const Model& model, const SpectralOptions& opt) {
    return num::Axis{model.x_M() / 4, model.x_M() / 2, opt.size_nodes};
}

SpectralMethod resolve_method(const Model& model, const SpectralOptions& opt) {
    if (opt.method != SpectralMethod::auto_pick) {
        if (opt.method == SpectralMethod::power_iteration &&
            model.deterministic_division())
            throw DiracHazardNotPointwise(
                "power iteration needs a pointwise hazard");
        if (opt.method != SpectralMethod::power_iteration &&
            !model.deterministic_division())
            throw OutOfRange(
                "scalar spectral methods need deterministic division");
        return opt.method;
    }
    return model.deterministic_division() ? SpectralMethod::closed_form
                                          : SpectralMethod::power_iteration;
}

} // namespace

double khat_apply(const Model& model, double lambda,
                  const std::function<double(const StateVector&)>& psi,
                  const StateVector& x, const SpectralOptions& opt) {
    // No half-plane restriction up front: deterministic division and table
    // hazards have bounded age support, so their transforms are entire.
    // The unbounded constant-hazard integral checks its own tail decay.
    // Mother state at the division: every coordinate doubled (symmetric
    // split of the whole state vector).
    StateVector mother;
    mother.size = 2 * x.size;
    mother.aux.reserve(x.aux.size());
    for (double a : x.aux) mother.aux.push_back(2 * a);
    if (model.region_of_size(mother.size) != Region::reproductive) return 0.0;

    FlowOptions fo;
    fo.rtol = opt.kin.flow_rtol;
    fo.domain = DomainPolicy::extend;
    fo.force_generic = opt.kin.force_generic;

    if (model.deterministic_division()) {
        // Division age of a mother observed dividing at size 2 x1.
        double a = 0;
        const auto& spec = model.spec();
        if (spec.hazard.a_star > 0) {
            a = spec.hazard.a_star;
        } else if (spec.division.kind == DivisionKind::doubling) {
            a = model.closed_form()
                    ? std::log(2.0) / model.alpha()
                    : growth_time(model, mother.size, true) -
                          growth_time(model, mother.size / 2, true);
        } else {
            double b = mother.size - spec.division.delta_l;
            if (!(b > 0)) return 0.0;
            a = model.closed_form()
                    ? std::log(mother.size / b) / model.alpha()
                    : growth_time(model, mother.size, true) -
                          growth_time(model, b, true);
        }
        FlowResult back = flow(model, -a, a, mother, fo);
        // Survival up to (not through) the division instant, times the
        // volume factor riding the curve.
        return 2 * std::exp(-lambda * a) * std::exp(-model.mu_d() * a) *
               jacobian(model, a, a, mother, opt.kin) * psi(back.state);
    }

    double a_hi = 0;
    if (model.spec().hazard.kind == HazardKind::table) {
        a_hi = model.spec().hazard.ages.back();
    } else {
        double decay = lambda + model.mu_d() + model.alpha();
        if (decay <= 1e-9)
            throw DivergentTransform(
                "khat_apply: kernel tail does not decay at this lambda");
        a_hi = 40.0 / decay;
    }
    if (!(a_hi > 0)) return 0.0;

    auto f = [&](double a) {
        double rate = model.hazard_rate(a);
        if (rate == 0) return 0.0;
        double value = psi(flow(model, -a, a, mother, fo).state);
        if (value == 0) return 0.0;
        return std::exp(-lambda * a) * 2 * rate *
               survival(model, a, a, mother, opt.kin) *
               jacobian(model, a, a, mother, opt.kin) * value;
    };
    num::QuadOptions qo;
    qo.rtol = 1e-10;
    qo.atol = 1e-16;
    if (model.spec().hazard.kind == HazardKind::table) {
        // Narrow table profiles can hide between the nodes of a single
        // panel; segment the integral at the tabulated ages.
        std::vector<double> pts{0.0};
        for (double age : model.spec().hazard.ages)
            if (age > 0 && age < a_hi) pts.push_back(age);
        pts.push_back(a_hi);
        return num::integrate_segments(f, pts, qo).value;
    }
    return num::integrate(f, 0.0, a_hi, qo).value;
}

double spectral_radius(const Model& model, double lambda,
                       const SpectralOptions& opt) {
    // One generation is a single event for deterministic rules, so the
    // multiplier is defined for every lambda.
    if (model.deterministic_division()) return scalar_radius(model, lambda);
    if (model.hazard_bound() == 0) return 0.0; // kernel is identically zero
    if (lambda <= -model.mu_infinity())
        throw DivergentTransform(
            "spectral_radius: lambda outside the transform half-plane");
    num::Axis sa = birth_axis(model, opt);
    return power_iterate(build_matrix(model, lambda, sa, opt), sa.n, opt).r;
}

SpectralResult dominant_eigenvalue(const Model& model,
                                   const SpectralOptions& opt) {
    SpectralResult res;
    res.method = resolve_method(model, opt);
    const double lo = -model.mu_infinity() + 1e-9;

    if (res.method == SpectralMethod::closed_form ||
        res.method == SpectralMethod::euler_lotka_scalar) {
        auto ev = stable_orbit(model);
        if (!ev)
            throw NoBracket("dominant_eigenvalue: the division rule never "
                            "fires; the population cannot renew");
        const double a_gen = ev->age;
        res.paper_lambda = std::log(2.0) / a_gen;

        if (res.method == SpectralMethod::closed_form) {
            res.lambda0 = std::log(2.0) / a_gen - model.mu_d();
        } else {
            auto f = [&](double lambda) {
                return scalar_radius(model, lambda) - 1.0;
            };
            double hi = std::max(lo + 1.0, 1.0);
            int guard = 0;
            while (f(hi) >= 0) {
                hi = lo + 2 * (hi - lo);
                if (++guard > 200)
                    throw NoBracket(
                        "dominant_eigenvalue: no supercritical bracket");
            }
            res.lambda0 = num::find_root(f, lo, hi, opt.bisect_tol);
        }
        res.residual =
            std::abs(scalar_radius(model, res.lambda0) - 1.0);
        res.discrepancy_flag = model.mu_d() > 0;
        res.atomic = true;
        PsiAtom atom;
        atom.state.size = ev->size / 2;
        atom.state.aux.assign(
            static_cast<std::size_t>(model.m()),
            model.spec().daughter_aux == DaughterAux::halve ? a_gen : 0.0);
        atom.weight = 1.0;
        res.psi_atoms.push_back(std::move(atom));
        return res;
    }

    // Pointwise hazard: bisection on the discretized operator's radius.
    num::Axis sa = birth_axis(model, opt);
    auto radius = [&](double lambda) {
        return power_iterate(build_matrix(model, lambda, sa, opt), sa.n, opt)
            .r;
    };
    if (radius(lo) <= 1.0)
        throw NoBracket("dominant_eigenvalue: subcritical at every "
                        "admissible lambda");
    auto f = [&](double lambda) { return radius(lambda) - 1.0; };
    double hi = std::max(lo + 1.0, 1.0);
    int guard = 0;
    while (f(hi) >= 0) {
        hi = lo + 2 * (hi - lo);
        if (++guard > 200)
            throw NoBracket("dominant_eigenvalue: no supercritical bracket");
    }
    res.lambda0 = num::find_root(f, lo, hi, opt.bisect_tol);
    res.paper_lambda = res.lambda0;
    res.discrepancy_flag = false;
    res.atomic = false;

    std::vector<double> m = build_matrix(model, res.lambda0, sa, opt);
    PowerOut out = power_iterate(m, sa.n, opt);
    double num_resid = 0, denom = 0;
    for (std::size_t i = 0; i < sa.n; ++i) {
        double acc = 0;
        for (std::size_t j = 0; j < sa.n; ++j)
            acc += m[i * sa.n + j] * out.v[j];
        num_resid += std::abs(acc - out.v[i]);
        denom += std::abs(out.v[i]);
    }
    res.residual = num_resid / denom;

    res.psi_grid = num::Lattice({sa});
    auto vals = res.psi_grid.values();
    for (std::size_t i = 0; i < sa.n; ++i) vals[i] = out.v[i];
    double mass = res.psi_grid.integral();
    if (mass > 0)
        for (auto& v : vals) v /= mass;
    return res;
}

AsymptoticProfile asymptotic_profile(const Model& model,
                                     const SpectralResult& spectral,
                                     double t) {
    AsymptoticProfile p;
    p.t = t;
    p.atomic = spectral.atomic;
    if (spectral.atomic) {
        auto ev = stable_orbit(model);
        double death = ev ? std::exp(-model.mu_d() * ev->age) : 1.0;
        p.scale = std::exp(spectral.lambda0 * t) * death;
        p.atoms = spectral.psi_atoms;
        for (auto& a : p.atoms) a.weight *= p.scale;
    } else {
        p.scale = std::exp(spectral.lambda0 * t);
        p.grid = spectral.psi_grid;
        auto vals = p.grid.values();
        for (auto& v : vals) v *= p.scale;
    }
    return p;
}

} // namespace mspop
