#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

namespace mspop::num {

struct OdeOptions {
    double rtol = 1e-10;
    double atol = 1e-12;
    double h_init = 0.0; // 0 selects an automatic starting step
    std::size_t max_steps = 2000000;
};

struct OdeStats {
    std::size_t steps = 0;
    std::size_t rejected = 0;
    double est_error = 0.0; // accumulated scaled error of accepted steps
};

struct OdeResult {
    std::vector<double> y;
    double t = 0;
    bool stopped = false; // guard fired before reaching t1
    OdeStats stats;
};

using OdeRhs = std::function<void(double, std::span<const double>, std::span<double>)>;
using OdeGuard = std::function<bool(double, std::span<const double>)>;

// Dormand-Prince 5(4) with step-size control.  Integrates from t0 to t1 in
// either direction.  If `inside` is given and turns false after a step, the
// crossing is localized by re-integration over shrinking subintervals and
// the result carries the last state still inside (stopped = true).
OdeResult integrate(const OdeRhs& f, double t0, std::span<const double> y0,
                    double t1, const OdeOptions& opt = {},
                    const OdeGuard& inside = nullptr);

} // namespace mspop::num
