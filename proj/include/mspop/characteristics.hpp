#pragma once

#include "mspop/model.hpp"

#include <cstddef>
#include <optional>

namespace mspop {

struct FlowResult {
    double age = 0;
    StateVector state;
    std::size_t steps = 0;   // 0 on the closed-form path
    double est_error = 0;
};

// strict: leaving [x_m, x_M] x R_+^m (or age < 0) raises LeftDomain.
// extend: the vector field is evaluated as given beyond the box; used for
// finite-difference flow maps and for formal backward evaluations.
enum class DomainPolicy { strict, extend };

struct FlowOptions {
    double rtol = 1e-10;
    DomainPolicy domain = DomainPolicy::strict;
    bool force_generic = false; // skip closed forms, exercise the integrator
};

// Propagate (age, state) by a signed time offset theta along the
// characteristic curves.
FlowResult flow(const Model& model, double theta, double age,
                const StateVector& x, const FlowOptions& opt = {});

// G(x): time to grow from x_m to x.  Defined for the declarative
// exponential size velocity; force_generic integrates 1/v1 adaptively.
double growth_time(const Model& model, double size, bool force_generic = false);

// X1(theta, x1) = G^{-1}(theta + G(x1)).
double growth_curve(const Model& model, double theta, double size,
                    bool force_generic = false);

// F_i and its inverse for auxiliary coordinate i (1-based); the declarative
// unit velocity makes both the identity shifted by theta.
double aux_time(const Model& model, int i, double x);
double aux_curve(const Model& model, int i, double theta, double x);

// Age at which an individual born with the given size divides under a
// deterministic division rule (doubling, adder, explicit dirac age).
// Returns +infinity when the model's rule never triggers for this size.
double division_age(const Model& model, double birth_size);

// Age and size at the division of an individual born at `birth_size`, or
// nothing when the rule never fires with the mother reproductive.
struct DivisionEvent {
    double age = 0;
    double size = 0;
};
std::optional<DivisionEvent> division_event(const Model& model,
                                            double birth_size);

} // namespace mspop
