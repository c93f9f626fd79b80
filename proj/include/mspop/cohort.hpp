#pragma once

#include "mspop/kinetics.hpp"
#include "mspop/parallel.hpp"
#include "mspop/population.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace mspop {

struct DensityOptions {
    KineticsOptions kin{};
    // Atomic data carry weights, not densities; an evaluation point whose
    // backward image lands within this distance of an atom picks up the
    // atom's transported weight.
    double atom_match_tol = 1e-9;
};

// Density carried forward from the initial cohort along characteristics:
// phi(a - t, X(-t, x)) * survival * jacobian.  Only defined strictly below
// the t = a line; throws WrongBranch otherwise.
double propagate_initial(const Model& model, double t, double age,
                         const StateVector& x, const InitialCohort& phi,
                         const DensityOptions& opt = {});

// Density carried from the birth function: B(t - a, X(-a, x)) * survival *
// jacobian, for t >= a (the line itself belongs to this branch).
double birth_branch(const Model& model, double t, double age,
                    const StateVector& x, const BirthFunction& births,
                    const DensityOptions& opt = {});

// Piecewise evaluation across both branches.
double evaluate_density(const Model& model, double t, double age,
                        const StateVector& x, const InitialCohort& phi,
                        const BirthFunction* births,
                        const DensityOptions& opt = {});

// Individuals alive at time t: initial cohort members that survived to t
// plus births that survived since their birth time.  Mass is accounted in
// release coordinates (along each trajectory), so with zero loss it is
// conserved exactly.  Requires the declarative velocity fields.
double total_population(const Model& model, double t,
                        const InitialCohort& phi,
                        const BirthFunction* births = nullptr,
                        Exec exec = Exec::parallel);

// ---- propagator verification ----

struct SampleBox {
    double age_max = 4;
    double aux_max = 3;
    double margin = 0; // keep samples this far from size walls and x_M/2
};

// Sterile propagator (no birth feedback): value of the transported initial
// density at (age, x) after time t.
double sterile_value(const Model& model, double t, double age,
                     const StateVector& x, const InitialCohort& phi,
                     const DensityOptions& opt = {});

struct SemigroupReport {
    double max_deviation = 0;   // sup |P(s)P(t) - P(t+s)| over the samples
    int points = 0;
    std::vector<double> h;      // continuity offsets
    std::vector<double> l1;     // |P(h)phi - phi|_L1 per offset
    bool l1_monotone = false;   // l1 decreasing as h decreases
};

SemigroupReport verify_semigroup(const Model& model, const InitialCohort& phi,
                                 double t, double s, int n_points,
                                 std::uint64_t seed, const SampleBox& box,
                                 const std::vector<double>& h_continuity = {0.1, 0.01, 0.001},
                                 Exec exec = Exec::parallel);

struct GeneratorReport {
    std::vector<double> h;
    std::vector<double> max_dev; // sup |(P(h)phi - phi)/h - A phi|
    std::vector<double> ratios;  // successive max_dev ratios
    int points = 0;
};

// Difference-quotient check of the infinitesimal generator
// A phi = -(d_age phi + sum v_i d_i phi + phi div v + mu phi)
// on a smooth cohort with analytic partials.  Needs a pointwise hazard.
GeneratorReport verify_generator(const Model& model, const AnalyticCohort& phi,
                                 const std::vector<double>& h_list,
                                 int n_points, std::uint64_t seed,
                                 const SampleBox& box,
                                 Exec exec = Exec::parallel);

} // namespace mspop
