#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace mspop::num {

struct QuadOptions {
    double rtol = 1e-10;
    double atol = 1e-14;
    std::size_t max_intervals = 20000;
};

struct QuadResult {
    double value = 0;
    double est_error = 0;
    std::size_t evaluations = 0;
};

using Integrand = std::function<double(double)>;

// Single Gauss-Kronrod 7/15 panel on [a, b]; err receives |K15 - G7|.
double gk15(const Integrand& f, double a, double b, double& err);

// Globally adaptive Gauss-Kronrod: repeatedly splits the interval with the
// largest error estimate.  Throws NotConverged if the interval budget runs
// out before the requested tolerance is met.
//
// Like every sampling-based scheme, the refinement can only chase features
// that at least one node of the initial panel has seen; a spike much
// narrower than the node spacing may be stepped over entirely.  Callers
// integrating across known kinks or narrow features (table-hazard spikes)
// should supply them as breakpoints via integrate_segments.
QuadResult integrate(const Integrand& f, double a, double b,
                     const QuadOptions& opt = {});

// Adaptive integration of each [pts[k], pts[k+1]] separately, summed.
// `pts` must be sorted ascending with at least two entries; zero-length
// segments are skipped.
QuadResult integrate_segments(const Integrand& f,
                              const std::vector<double>& pts,
                              const QuadOptions& opt = {});

} // namespace mspop::num
