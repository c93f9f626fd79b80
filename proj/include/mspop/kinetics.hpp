#pragma once

#include "mspop/characteristics.hpp"
#include "mspop/model.hpp"

namespace mspop {

struct KineticsOptions {
    double flow_rtol = 1e-10;
    double quad_rtol = 1e-10;
    bool force_generic = false; // bypass analytic fast paths
};

// Probability that the individual arriving at (age, state) carried no loss
// over its last theta time units, i.e. exp of minus the loss rate
// integrated along the backward characteristic ending at (age, state).
// For deterministic division rules the division hazard contributes a unit
// step: the value drops to zero as soon as the age window covers the
// division age (with the individual reproductive at that moment).
// Requires 0 <= theta <= age.
double survival(const Model& model, double theta, double age,
                const StateVector& x, const KineticsOptions& opt = {});

// Geometry factor J(theta) = exp(-integral of the velocity divergence along
// the same backward curve); equals the determinant of the backward flow map
// x -> X(-theta, x).  Requires theta >= 0.
double jacobian(const Model& model, double theta, double age,
                const StateVector& x, const KineticsOptions& opt = {});

// Independent check: assembles the backward flow-map Jacobian matrix by
// central differences of flow() in each state coordinate and returns its
// determinant.
double jacobian_fd(const Model& model, double theta, double age,
                   const StateVector& x, double h = 1e-4,
                   double flow_rtol = 1e-12);

} // namespace mspop
