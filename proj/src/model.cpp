#include "mspop/model.hpp"

#include <algorithm>
#include <cmath>

namespace mspop {

std::vector<std::string> Model::check(const ModelSpec& s) {
    std::vector<std::string> v;
    if (s.m < 0 || s.m > 7)
        v.push_back("m must be between 0 and 7");
    if (!(s.x_m > 0))
        v.push_back("x_m must be positive");
    if (!(s.x_M > s.x_m))
        v.push_back("x_M must exceed x_m");
    if (s.x_M < 4 * s.x_m)
        v.push_back("x_M must be at least 4*x_m, otherwise a dividing mother "
                    "could produce a daughter below the minimum size");
    if (!(s.alpha > 0))
        v.push_back("alpha must be positive");
    if (s.mu_d < 0)
        v.push_back("mu_d must be non-negative");

    const bool deterministic = s.division.kind == DivisionKind::doubling ||
                               s.division.kind == DivisionKind::adder;
    if (deterministic && s.hazard.kind != HazardKind::dirac)
        v.push_back("doubling/adder division requires the dirac hazard");
    if (s.division.kind == DivisionKind::smooth_hazard &&
        s.hazard.kind == HazardKind::dirac)
        v.push_back("smooth-hazard division requires a constant or table hazard");

    if (s.division.kind == DivisionKind::adder) {
        if (!(s.division.delta_l > 0))
            v.push_back("adder rule needs delta_l > 0");
        else if (s.division.delta_l > s.x_M / 2)
            v.push_back("delta_l must not exceed x_M/2, otherwise the largest "
                        "newborn would outgrow the maximum size before dividing");
    }
    switch (s.hazard.kind) {
    case HazardKind::dirac:
        if (s.hazard.a_star < 0)
            v.push_back("dirac hazard age must be non-negative");
        // An explicit age must agree with the doubling rule when the
        // declarative exponential growth pins that age down.
        if (s.hazard.a_star > 0 && s.division.kind == DivisionKind::doubling &&
            s.alpha > 0 &&
            std::abs(s.hazard.a_star - std::log(2.0) / s.alpha) >
                1e-9 * s.hazard.a_star)
            v.push_back("explicit dirac age contradicts the doubling age "
                        "ln(2)/alpha");
        break;
    case HazardKind::constant:
        // b0 = 0 is allowed: a sterile population is a legitimate (if
        // subcritical) model, and downstream code reports it as such.
        if (s.hazard.b0 < 0)
            v.push_back("constant hazard rate must be non-negative");
        break;
    case HazardKind::table: {
        const auto& a = s.hazard.ages;
        const auto& r = s.hazard.rates;
        if (a.size() < 2 || a.size() != r.size())
            v.push_back("table hazard needs matching age/rate samples (>= 2)");
        else {
            if (a.front() < 0) v.push_back("table hazard ages must start >= 0");
            if (!std::is_sorted(a.begin(), a.end()) ||
                std::adjacent_find(a.begin(), a.end()) != a.end())
                v.push_back("table hazard ages must be strictly increasing");
            for (double x : r) {
                if (x < 0) {
                    v.push_back("table hazard rates must be non-negative");
                    break;
                }
            }
        }
        break;
    }
    }
    return v;
}

Model Model::validate(const ModelSpec& spec) {
    auto violations = check(spec);
    if (!violations.empty()) throw ValidationError(std::move(violations));
    Model m;
    m.spec_ = spec;
    if (spec.hazard.kind == HazardKind::dirac) {
        if (spec.hazard.a_star > 0)
            m.a_star_ = spec.hazard.a_star;
        else if (spec.division.kind == DivisionKind::doubling)
            m.a_star_ = std::log(2.0) / spec.alpha;
        // adder: the division age depends on the birth size, no fixed value
    } else if (spec.hazard.kind == HazardKind::table) {
        // Prefix integrals of the piecewise-linear profile.
        const auto& a = spec.hazard.ages;
        const auto& r = spec.hazard.rates;
        m.hazard_cum_.assign(a.size(), 0.0);
        for (std::size_t i = 1; i < a.size(); ++i)
            m.hazard_cum_[i] = m.hazard_cum_[i - 1] +
                               0.5 * (r[i] + r[i - 1]) * (a[i] - a[i - 1]);
    }
    return m;
}

double Model::a_star() const {
    if (a_star_ <= 0)
        throw OutOfRange("model has no fixed division age");
    return a_star_;
}

Region Model::region_of_size(double size) const {
    if (size > spec_.x_M / 2 && size <= spec_.x_M) return Region::reproductive;
    if (size > spec_.x_m && size <= spec_.x_M / 2) return Region::birth;
    return Region::outside;
}

double Model::hazard_rate(double age) const {
    switch (spec_.hazard.kind) {
    case HazardKind::dirac:
        throw DiracHazardNotPointwise(
            "dirac hazard has no pointwise rate; division is an event");
    case HazardKind::constant:
        return spec_.hazard.b0;
    case HazardKind::table: {
        const auto& a = spec_.hazard.ages;
        const auto& r = spec_.hazard.rates;
        if (age <= a.front() || age >= a.back()) {
            // Zero outside the table, except exactly at the end samples.
            if (age == a.front()) return r.front();
            if (age == a.back()) return r.back();
            return 0.0;
        }
        auto it = std::upper_bound(a.begin(), a.end(), age);
        std::size_t i = static_cast<std::size_t>(it - a.begin());
        double w = (age - a[i - 1]) / (a[i] - a[i - 1]);
        return r[i - 1] + w * (r[i] - r[i - 1]);
    }
    }
    return 0;
}

double Model::hazard_cumulative(double age) const {
    switch (spec_.hazard.kind) {
    case HazardKind::dirac:
        throw DiracHazardNotPointwise(
            "dirac hazard has no pointwise cumulative; division is an event");
    case HazardKind::constant:
        return spec_.hazard.b0 * std::max(age, 0.0);
    case HazardKind::table: {
        const auto& a = spec_.hazard.ages;
        if (age <= a.front()) return 0.0;
        if (age >= a.back()) return hazard_cum_.back();
        auto it = std::upper_bound(a.begin(), a.end(), age);
        std::size_t i = static_cast<std::size_t>(it - a.begin());
        double lo = a[i - 1];
        double rl = spec_.hazard.rates[i - 1];
        double rh = hazard_rate(age);
        return hazard_cum_[i - 1] + 0.5 * (rl + rh) * (age - lo);
    }
    }
    return 0;
}

double Model::hazard_bound() const {
    switch (spec_.hazard.kind) {
    case HazardKind::dirac:
        throw DiracHazardNotPointwise("dirac hazard has no finite bound");
    case HazardKind::constant:
        return spec_.hazard.b0;
    case HazardKind::table:
        return *std::max_element(spec_.hazard.rates.begin(),
                                 spec_.hazard.rates.end());
    }
    return 0;
}

double Model::mu_infinity() const {
    // Death persists forever; a constant hazard also persists because a
    // non-dividing cell stays reproductive once it got there.  Table
    // hazards vanish beyond their age support.
    if (spec_.hazard.kind == HazardKind::constant)
        return spec_.mu_d + spec_.hazard.b0;
    return spec_.mu_d;
}

double Model::loss_rate(double age, const StateVector& x) const {
    double mu = spec_.mu_d;
    if (region_of(x) == Region::reproductive) mu += hazard_rate(age);
    return mu;
}

StateVector Model::daughter_state(const StateVector& mother) const {
    if (region_of(mother) != Region::reproductive)
        throw NotReproductive("daughter_state: mother is not reproductive");
    StateVector d;
    d.size = mother.size / 2;
    d.aux = mother.aux;
    if (spec_.daughter_aux == DaughterAux::halve)
        for (double& a : d.aux) a /= 2;
    return d;
}

double Model::velocity(int i, double age, const StateVector& x) const {
    for (const auto& [idx, f] : custom_)
        if (idx == i) return f.v(age, x);
    if (i == 0) return spec_.alpha * x.size;
    return 1.0;
}

double Model::velocity_ddx(int i, double age, const StateVector& x) const {
    for (const auto& [idx, f] : custom_)
        if (idx == i) {
            if (f.ddx) return f.ddx(age, x);
            // Central difference in the field's own coordinate.
            StateVector xp = x, xm = x;
            double& cp = (i == 0) ? xp.size : xp.aux[i - 1];
            double& cm = (i == 0) ? xm.size : xm.aux[i - 1];
            double h = 1e-6 * std::max(1.0, std::abs(cp));
            cp += h;
            cm -= h;
            return (f.v(age, xp) - f.v(age, xm)) / (2 * h);
        }
    if (i == 0) return spec_.alpha;
    return 0.0;
}

double Model::divergence(double age, const StateVector& x) const {
    double d = 0;
    for (int i = 0; i <= spec_.m; ++i) d += velocity_ddx(i, age, x);
    return d;
}

void Model::set_velocity(int i, VelocityField f) {
    if (i < 0 || i > spec_.m)
        throw OutOfRange("set_velocity: coordinate index out of range");
    // A custom size velocity invalidates the derived doubling age.
    if (i == 0 && spec_.hazard.kind == HazardKind::dirac &&
        spec_.hazard.a_star == 0)
        a_star_ = 0;
    for (auto& [idx, g] : custom_)
        if (idx == i) {
            g = std::move(f);
            return;
        }
    custom_.emplace_back(i, std::move(f));
}

void Model::check_state(const StateVector& x) const {
    if (static_cast<int>(x.aux.size()) != spec_.m)
        throw OutOfRange("state has wrong auxiliary dimension");
    const double eps = 1e-12 * spec_.x_M;
    if (x.size < spec_.x_m - eps || x.size > spec_.x_M + eps)
        throw OutOfRange("state size outside [x_m, x_M]");
    for (double a : x.aux)
        if (a < -1e-12) throw OutOfRange("auxiliary coordinate negative");
}

} // namespace mspop
