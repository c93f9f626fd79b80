#pragma once

#include "mspop/cohort.hpp"

#include <cstddef>
#include <vector>

namespace mspop {

enum class RenewalBackend { atomic, grid };

struct RenewalOptions {
    RenewalBackend backend = RenewalBackend::atomic;
    std::size_t time_nodes = 129; // grid: nodes over [0, horizon]
    std::size_t size_nodes = 65;  // grid: nodes over the birth-size range
    int max_terms = 64;
    double tol = 1e-10; // stop once a term's norm falls below tol * scale
    KineticsOptions kin{};
    Exec exec = Exec::parallel;
};

// Births produced directly by the initial cohort (the inhomogeneous term
// of the renewal equation).  The atomic backend needs a deterministic
// division rule and an atom cohort; the grid backend needs a pointwise
// hazard, no auxiliary coordinates, and a lattice cohort.
BirthFunction phi_term(const Model& model, const InitialCohort& phi,
                       double horizon, const RenewalOptions& opt = {});

// One application of the renewal operator: births produced by individuals
// that were themselves recorded as births in `b`.  Birth counts are
// tracked honestly: each division contributes two daughters, and on the
// grid the mother-to-daughter change of size variable carries a factor 2
// alongside the backward-flow Jacobian.
BirthFunction apply_K(const Model& model, const BirthFunction& b,
                      const RenewalOptions& opt = {});

struct RenewalSolution {
    BirthFunction births;
    // Atomic backend: total weight per generation.  Grid backend: peak
    // birth-mass rate of each term, sup over time of the L1 size integral.
    std::vector<double> term_norms;
    bool converged = false;
};

// Successive approximation: accumulate phi_term + K(phi_term) + K^2 + ...
// The atomic backend terminates exactly (finitely many generations fit in
// the horizon); the grid backend stops at the tolerance and throws
// NotConverged if max_terms is exhausted first.
RenewalSolution solve_series(const Model& model, const InitialCohort& phi,
                             double horizon, const RenewalOptions& opt = {});

struct SeriesBoundRow {
    int n = 0;
    double norm = 0;
    double bound = 0;
    bool violated = false;
};

// Geometric-decay audit of the series terms: term N must stay below
// (T * beta_sup * omega1)^N * beta_sup * |phi|_L1, where omega1 is the
// state-space volume occupied by the initial cohort inflated by the
// forward volume expansion over the window.  Meaningful for pointwise
// hazards (a division spike has no finite sup).
struct SeriesBoundReport {
    double horizon = 0;
    double beta_sup = 0;
    double omega1 = 0;
    double contraction = 0; // horizon * beta_sup * omega1
    double phi_norm = 0;
    std::vector<SeriesBoundRow> rows;
    bool satisfied = true;
};

SeriesBoundReport series_bound_report(const Model& model,
                                      const InitialCohort& phi,
                                      const RenewalSolution& sol,
                                      double horizon);

// State-space volume of the cohort's support (bounding box over the state
// axes; atoms give the box spanned by their states).
double support_volume(const Model& model, const InitialCohort& phi);

// Window T with T * beta_sup * omega1(T) = ratio; ratio < 1 gives the
// horizon on which the geometric decay of the series terms is certified.
double contraction_window(const Model& model, const InitialCohort& phi,
                          double ratio);

} // namespace mspop
