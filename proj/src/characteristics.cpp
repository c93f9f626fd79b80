#include "mspop/characteristics.hpp"

#include "mspop/num/ode.hpp"
#include "mspop/num/quad.hpp"
#include "mspop/num/roots.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mspop {

namespace {

constexpr double REL_EPS = 1e-12;

// Admissibility with a small relative slack against roundoff at the walls.
bool inside_domain(const Model& m, double age, const double* x, int dim) {
    const double eps = REL_EPS * m.x_M();
    if (age < -REL_EPS) return false;
    if (x[0] < m.x_m() - eps || x[0] > m.x_M() + eps) return false;
    for (int i = 1; i < dim; ++i)
        if (x[i] < -REL_EPS) return false;
    return true;
}

FlowResult flow_closed(const Model& m, double theta, double age,
                       const StateVector& x, const FlowOptions& opt) {
    FlowResult r;
    r.age = age + theta;
    r.state.size = x.size * std::exp(m.alpha() * theta);
    r.state.aux.resize(x.aux.size());
    for (std::size_t i = 0; i < x.aux.size(); ++i)
        r.state.aux[i] = x.aux[i] + theta;

    if (opt.domain == DomainPolicy::strict) {
        // Every coordinate is monotone in theta, so the trajectory stays
        // admissible iff the endpoint does; the exit offset of the binding
        // coordinate is available in closed form.
        const double eps = REL_EPS * m.x_M();
        if (r.age < -REL_EPS)
            throw LeftDomain(-1, -age, "flow: age left [0, inf)");
        if (r.state.size < m.x_m() - eps)
            throw LeftDomain(0, std::log(m.x_m() / x.size) / m.alpha(),
                             "flow: size fell below x_m");
        if (r.state.size > m.x_M() + eps)
            throw LeftDomain(0, std::log(m.x_M() / x.size) / m.alpha(),
                             "flow: size exceeded x_M");
        for (std::size_t i = 0; i < r.state.aux.size(); ++i)
            if (r.state.aux[i] < -REL_EPS)
                throw LeftDomain(static_cast<int>(i) + 1, -x.aux[i],
                                 "flow: auxiliary coordinate left [0, inf)");
    }
    return r;
}

} // namespace

FlowResult flow(const Model& model, double theta, double age,
                const StateVector& x, const FlowOptions& opt) {
    if (static_cast<int>(x.aux.size()) != model.m())
        throw OutOfRange("flow: state has wrong auxiliary dimension");
    if (model.closed_form() && !opt.force_generic)
        return flow_closed(model, theta, age, x, opt);

    const int dim = model.dim();
    // Joint system y = (age, size, aux...); d(age)/dtheta = 1.
    std::vector<double> y0(dim + 1);
    y0[0] = age;
    y0[1] = x.size;
    for (int i = 0; i < model.m(); ++i) y0[2 + i] = x.aux[i];

    StateVector xs;
    xs.aux.resize(model.m());
    auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
        xs.size = y[1];
        for (int i = 0; i < model.m(); ++i) xs.aux[i] = y[2 + i];
        dy[0] = 1.0;
        for (int i = 0; i < dim; ++i)
            dy[1 + i] = model.velocity(i, y[0], xs);
    };

    num::OdeOptions oopt;
    oopt.rtol = opt.rtol;
    oopt.atol = 1e-2 * opt.rtol;
    num::OdeGuard guard;
    if (opt.domain == DomainPolicy::strict)
        guard = [&](double, std::span<const double> y) {
            return inside_domain(model, y[0], y.data() + 1, dim);
        };
    num::OdeResult res = num::integrate(rhs, 0.0, y0, theta, oopt, guard);
    if (res.stopped) {
        // The stop state sits on the first boundary reached; report the
        // coordinate closest to its wall.
        int comp = 0;
        double best = std::min(std::abs(res.y[1] - model.x_m()),
                               std::abs(res.y[1] - model.x_M()));
        if (std::abs(res.y[0]) < best) {
            comp = -1;
            best = std::abs(res.y[0]);
        }
        for (int i = 1; i < dim; ++i)
            if (std::abs(res.y[1 + i]) < best) {
                comp = i;
                best = std::abs(res.y[1 + i]);
            }
        throw LeftDomain(comp, res.t, "flow: trajectory left the domain");
    }
    FlowResult out;
    out.age = res.y[0];
    out.state.size = res.y[1];
    out.state.aux.assign(res.y.begin() + 2, res.y.end());
    out.steps = res.stats.steps;
    out.est_error = res.stats.est_error;
    return out;
}

double growth_time(const Model& model, double size, bool force_generic) {
    if (!(size > 0) || size > model.x_M() * (1 + REL_EPS))
        throw OutOfRange("growth_time: size outside (0, x_M]");
    if (!model.closed_form() && !force_generic)
        throw OutOfRange("growth_time: custom size velocity has no G; "
                         "use the flow operation");
    if (!force_generic)
        return std::log(size / model.x_m()) / model.alpha();

    // Quadrature of 1/v1 between x_m and size; velocity evaluated with age
    // 0 and zero aux (separable declarative field).
    StateVector probe;
    probe.aux.assign(model.m(), 0.0);
    auto inv_v = [&](double s) {
        probe.size = s;
        return 1.0 / model.velocity(0, 0.0, probe);
    };
    num::QuadOptions q;
    q.rtol = 1e-12;
    double sign = (size >= model.x_m()) ? 1.0 : -1.0;
    auto r = (sign > 0) ? num::integrate(inv_v, model.x_m(), size, q)
                        : num::integrate(inv_v, size, model.x_m(), q);
    return sign * r.value;
}

double growth_curve(const Model& model, double theta, double size,
                    bool force_generic) {
    if (!force_generic) {
        const double out = size * std::exp(model.alpha() * theta);
        if (out > model.x_M() * (1 + REL_EPS))
            throw ExceedsMaxSize("growth_curve: requested time pushes the size past x_M");
        return out;
    }

    // Invert G(y) = theta + G(size) with a safeguarded Newton iteration;
    // dG/dy = 1/v1(y) keeps the update cheap.
    const double target = theta + growth_time(model, size, true);
    if (target > growth_time(model, model.x_M(), true) + REL_EPS)
        throw ExceedsMaxSize("growth_curve: requested time pushes the size past x_M");
    StateVector probe;
    probe.aux.assign(model.m(), 0.0);
    auto g = [&](double y) { return growth_time(model, y, true) - target; };
    auto dg = [&](double y) {
        probe.size = y;
        return 1.0 / model.velocity(0, 0.0, probe);
    };
    // Bracket by scanning outward from the closed-form guess.
    double guess = size * std::exp(model.alpha() * theta);
    double lo = std::max(guess * 0.5, 1e-12);
    double hi = guess * 2;
    for (int i = 0; i < 200 && g(lo) > 0; ++i) lo *= 0.5;
    for (int i = 0; i < 200 && g(hi) < 0; ++i) hi *= 2;
    return num::find_root(g, lo, hi, 1e-14 * std::max(1.0, hi), dg);
}

double aux_time(const Model& model, int i, double x) {
    if (i < 1 || i > model.m())
        throw OutOfRange("aux_time: coordinate index out of range");
    if (x < 0) throw OutOfRange("aux_time: negative coordinate");
    return x; // unit velocity: F_i is the identity
}

double aux_curve(const Model& model, int i, double theta, double x) {
    if (i < 1 || i > model.m())
        throw OutOfRange("aux_curve: coordinate index out of range");
    return x + theta;
}

double division_age(const Model& model, double birth_size) {
    if (!model.deterministic_division())
        throw OutOfRange("division_age: model has a smooth hazard");
    const auto& spec = model.spec();
    if (spec.hazard.a_star > 0) return spec.hazard.a_star;
    if (!(birth_size > 0))
        throw OutOfRange("division_age: birth size must be positive");

    double target = 0; // size at division
    switch (spec.division.kind) {
    case DivisionKind::doubling:
        target = 2 * birth_size;
        break;
    case DivisionKind::adder:
        target = birth_size + spec.division.delta_l;
        break;
    case DivisionKind::smooth_hazard:
        return std::numeric_limits<double>::infinity();
    }
    if (target > model.x_M() * (1 + REL_EPS))
        return std::numeric_limits<double>::infinity();
    if (model.closed_form())
        return std::log(target / birth_size) / model.alpha();
    return growth_time(model, target, true) -
           growth_time(model, birth_size, true);
}

std::optional<DivisionEvent> division_event(const Model& model,
                                            double birth_size) {
    double a = division_age(model, birth_size);
    if (!std::isfinite(a)) return std::nullopt;
    double size = 0;
    if (model.spec().hazard.a_star > 0) {
        // Explicit division age; the size rides the growth curve and parks
        // at the wall if it gets there first.
        const bool gen = !model.closed_form();
        const double wall = growth_time(model, model.x_M(), gen) -
                            growth_time(model, birth_size, gen);
        size = a >= wall ? model.x_M()
                         : growth_curve(model, a, birth_size, gen);
    } else if (model.spec().division.kind == DivisionKind::doubling) {
        size = 2 * birth_size;
    } else {
        size = birth_size + model.spec().division.delta_l;
    }
    if (model.region_of_size(size) != Region::reproductive) return std::nullopt;
    return DivisionEvent{a, size};
}

} // namespace mspop
