#pragma once

#include "mspop/model.hpp"
#include "mspop/num/lattice.hpp"

#include <functional>
#include <variant>
#include <vector>

namespace mspop {

// ---- initial cohort representations ----

struct InitialAtom {
    double age = 0;
    StateVector state;
    double weight = 1;
};

struct AtomCohort {
    std::vector<InitialAtom> atoms;
};

// Sampled density on an (age, size, aux...) lattice, zero off the box,
// multilinear in between.
struct GridCohort {
    num::Lattice density;
};

// Smooth density given in closed form, with optional analytic partial
// derivatives (needed by the generator check).
struct AnalyticCohort {
    std::function<double(double age, const StateVector&)> density;
    std::function<double(double age, const StateVector&)> d_age;
    // One entry per state coordinate, index 0 = size.
    std::vector<std::function<double(double age, const StateVector&)>> d_x;
};

using InitialCohort = std::variant<AtomCohort, GridCohort, AnalyticCohort>;

// Pointwise value of the cohort density.  Atom cohorts are measures; their
// pointwise value is zero except under the matched-atom convention used by
// the density evaluators (see cohort.hpp).
double cohort_value(const Model& model, const InitialCohort& phi, double age,
                    const StateVector& x);

// Total mass: atom weights summed, or the lattice integral.  Analytic
// cohorts have no a-priori box and are rejected.
double cohort_mass(const InitialCohort& phi);

// ---- birth function representations ----

struct BirthAtom {
    double time = 0;     // birth time
    StateVector state;   // newborn state
    double weight = 1;   // expected number of newborns in this atom
    int generation = 0;
};

struct AtomBirths {
    std::vector<BirthAtom> atoms; // sorted by (time, generation)
    double horizon = 0;
};

// Birth rate density on a [0, horizon] x size lattice (axes: time, size).
// Models with auxiliary coordinates are handled atomically; the grid
// backend carries the size marginal, which is exact when aux velocities
// are the unit defaults and the hazard depends on age only.
struct GridBirths {
    num::Lattice values;
    double horizon = 0;
};

using BirthFunction = std::variant<AtomBirths, GridBirths>;

double birth_horizon(const BirthFunction& b);

} // namespace mspop
