#include "mspop/kinetics.hpp"

#include "mspop/num/linalg.hpp"
#include "mspop/num/ode.hpp"
#include "mspop/num/quad.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace mspop {

namespace {

// Integral of f(age+u, X(u, x)) over u in [-theta, 0], taken in one pass by
// augmenting the characteristic system with an accumulator.
double path_integral(const Model& model, double theta, double age,
                     const StateVector& x, double rtol,
                     const std::function<double(double, const StateVector&)>& f) {
    const int dim = model.dim();
    std::vector<double> y0(dim + 2);
    y0[0] = age;
    y0[1] = x.size;
    for (int i = 0; i < model.m(); ++i) y0[2 + i] = x.aux[i];
    y0[dim + 1] = 0.0;

    StateVector xs;
    xs.aux.resize(model.m());
    auto rhs = [&](double, std::span<const double> y, std::span<double> dy) {
        xs.size = y[1];
        for (int i = 0; i < model.m(); ++i) xs.aux[i] = y[2 + i];
        dy[0] = 1.0;
        for (int i = 0; i < dim; ++i)
            dy[1 + i] = model.velocity(i, y[0], xs);
        dy[dim + 1] = f(y[0], xs);
    };
    num::OdeOptions opt;
    opt.rtol = rtol;
    opt.atol = 1e-2 * rtol;
    num::OdeResult res = num::integrate(rhs, 0.0, y0, -theta, opt);
    // The accumulator integrated from 0 down to -theta; flip orientation.
    return -res.y[dim + 1];
}

// Division-hazard exposure along the backward window for pointwise hazards
// on the declarative model: the reproductive indicator flips at most once
// (size is monotone along the curve), so the integral reduces to cumulative
// hazard differences.
double hazard_exposure_closed(const Model& model, double theta, double age,
                              const StateVector& x) {
    if (x.size <= model.x_M() / 2) return 0.0; // never reproductive backwards
    // Offset at which the size crossed into the reproductive region.
    double u_enter = std::log(model.x_M() / (2 * x.size)) / model.alpha();
    double u_lo = std::max(-theta, u_enter);
    if (u_lo >= 0) return 0.0;
    return model.hazard_cumulative(age) - model.hazard_cumulative(age + u_lo);
}

} // namespace

double survival(const Model& model, double theta, double age,
                const StateVector& x, const KineticsOptions& opt) {
    if (theta < 0 || theta > age * (1 + 1e-12) + 1e-300)
        throw OutOfRange("survival: need 0 <= theta <= age");
    if (theta == 0) return 1.0;

    if (model.deterministic_division()) {
        // Division age of this individual, from its size at birth.
        double a_div;
        if (model.has_fixed_a_star()) {
            a_div = model.a_star();
        } else {
            FlowOptions fo;
            fo.domain = DomainPolicy::extend;
            fo.rtol = opt.flow_rtol;
            double birth_size = flow(model, -age, age, x, fo).state.size;
            a_div = division_age(model, birth_size);
        }
        if (a_div > age - theta && a_div <= age) {
            // The window covers the event; it fires only if the individual
            // is reproductive at that moment.
            FlowOptions fo;
            fo.domain = DomainPolicy::extend;
            fo.rtol = opt.flow_rtol;
            StateVector at_div = flow(model, a_div - age, age, x, fo).state;
            if (model.region_of(at_div) == Region::reproductive) return 0.0;
        }
        return std::exp(-model.mu_d() * theta);
    }

    // Pointwise hazards.
    if (model.closed_form() && !opt.force_generic)
        return std::exp(-model.mu_d() * theta -
                        hazard_exposure_closed(model, theta, age, x));

    double integral;
    if (model.closed_form()) {
        // Generic-path cross-check on the declarative model: adaptive
        // quadrature of the loss rate along the (closed-form) curve.
        auto integrand = [&](double u) {
            StateVector xs;
            xs.size = x.size * std::exp(model.alpha() * u);
            xs.aux.resize(x.aux.size());
            for (std::size_t i = 0; i < x.aux.size(); ++i)
                xs.aux[i] = x.aux[i] + u;
            return model.loss_rate(age + u, xs);
        };
        num::QuadOptions q;
        q.rtol = opt.quad_rtol;
        // Split at the loss-rate kinks: the entry into the reproductive
        // region, and any tabulated hazard ages inside the window.
        std::vector<double> pts{-theta};
        if (x.size > model.x_M() / 2) {
            double u_enter = std::log(model.x_M() / (2 * x.size)) / model.alpha();
            if (u_enter > -theta && u_enter < 0) pts.push_back(u_enter);
        }
        if (model.spec().hazard.kind == HazardKind::table)
            for (double t : model.spec().hazard.ages) {
                double u = t - age;
                if (u > -theta && u < 0) pts.push_back(u);
            }
        pts.push_back(0.0);
        std::sort(pts.begin(), pts.end());
        integral = num::integrate_segments(integrand, pts, q).value;
    } else {
        integral = path_integral(model, theta, age, x, opt.flow_rtol,
                                 [&](double a, const StateVector& xs) {
                                     return model.loss_rate(a, xs);
                                 });
    }
    return std::exp(-integral);
}

double jacobian(const Model& model, double theta, double age,
                const StateVector& x, const KineticsOptions& opt) {
    if (theta < 0) throw OutOfRange("jacobian: need theta >= 0");
    if (theta == 0) return 1.0;

    if (model.closed_form() && !opt.force_generic)
        return std::exp(-theta * model.alpha()); // divergence is alpha

    if (model.closed_form()) {
        auto integrand = [&](double u) {
            StateVector xs;
            xs.size = x.size * std::exp(model.alpha() * u);
            xs.aux.resize(x.aux.size());
            for (std::size_t i = 0; i < x.aux.size(); ++i)
                xs.aux[i] = x.aux[i] + u;
            return model.divergence(age + u, xs);
        };
        num::QuadOptions q;
        q.rtol = opt.quad_rtol;
        return std::exp(-num::integrate(integrand, -theta, 0.0, q).value);
    }
    double integral = path_integral(model, theta, age, x, opt.flow_rtol,
                                    [&](double a, const StateVector& xs) {
                                        return model.divergence(a, xs);
                                    });
    return std::exp(-integral);
}

double jacobian_fd(const Model& model, double theta, double age,
                   const StateVector& x, double h, double flow_rtol) {
    const int dim = model.dim();
    FlowOptions fo;
    fo.domain = DomainPolicy::extend;
    fo.rtol = flow_rtol;

    std::vector<double> mat(static_cast<std::size_t>(dim) * dim);
    StateVector xp, xm;
    for (int j = 0; j < dim; ++j) {
        xp = x;
        xm = x;
        double& cp = (j == 0) ? xp.size : xp.aux[j - 1];
        double& cm = (j == 0) ? xm.size : xm.aux[j - 1];
        const double hj = h * std::max(1.0, std::abs(cp));
        cp += hj;
        cm -= hj;
        StateVector fp = flow(model, -theta, age, xp, fo).state;
        StateVector fm = flow(model, -theta, age, xm, fo).state;
        for (int i = 0; i < dim; ++i) {
            double vp = (i == 0) ? fp.size : fp.aux[i - 1];
            double vm = (i == 0) ? fm.size : fm.aux[i - 1];
            mat[static_cast<std::size_t>(i) * dim + j] = (vp - vm) / (2 * hj);
        }
    }
    return num::det_lu(std::move(mat), static_cast<std::size_t>(dim));
}

} // namespace mspop
