#pragma once

#include "mspop/cohort.hpp"
#include "mspop/parallel.hpp"
#include "mspop/population.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace mspop {

// ---- geometry-factor cross validation ----

struct LiouvillePoint {
    double theta = 0;
    double age = 0;
    StateVector x;
    double analytic = 0; // jacobian()
    double fd = 0;       // jacobian_fd()
    double rel_err = 0;
};

struct LiouvilleReport {
    std::vector<LiouvillePoint> points;
    double max_rel_err = 0;
    double tolerance = 0;
    bool passed = false;
};

// Compares the divergence-integral geometry factor against the
// finite-difference flow-map determinant at random interior points.
LiouvilleReport liouville_check(const Model& model, int n_points,
                                std::uint64_t seed, double h = 1e-4,
                                double tolerance = 1e-6,
                                Exec exec = Exec::parallel);

// Three state coordinates with velocities that read each other's values,
// so none of the closed forms apply and the flow must be integrated.
// Exercises the generic kinetics paths end to end.
Model make_coupled_test_model();

// Smooth separable density with analytic partials, scaled to the model box;
// suitable for the semigroup and generator suites.
AnalyticCohort make_smooth_cohort(const Model& model);

// ---- aggregated property suite ----

struct VerifyCheck {
    std::string name;
    double observed = 0;
    double bound = 0;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    int liouville_points = 150;
    int semigroup_points = 2000;
    int generator_points = 300;
    std::uint64_t seed = 0x5eedULL;
    Exec exec = Exec::parallel;
};

struct VerifyReport {
    std::vector<VerifyCheck> checks;
    LiouvilleReport liouville; // on the supplied model, kept for CSV output
    double lambda0 = 0;
    bool all_passed = false;
};

// Runs every invariant suite against the supplied model: Liouville (both on
// the model and on the coupled three-coordinate test model), semigroup
// composition and continuity, generator difference quotients, series bound,
// renewal fixed point, and eigenvalue cross checks.  Suites that need a
// pointwise hazard or a scalar state fall back to companion models when the
// supplied one does not qualify; the check's detail column says so.
VerifyReport run_verify(const Model& model, const VerifyOptions& opt = {});

} // namespace mspop
