#pragma once

#include "mspop/errors.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace mspop::num {

// Safeguarded Newton on a bracket [lo, hi]: Newton steps are taken while
// they stay inside the current bracket, otherwise the method falls back to
// bisection.  `df` may be null (pure bisection).  Requires a sign change.
inline double find_root(const std::function<double(double)>& f, double lo,
                        double hi, double xtol,
                        const std::function<double(double)>& df = nullptr,
                        int max_iter = 200) {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0) return lo;
    if (fhi == 0) return hi;
    if ((flo > 0) == (fhi > 0))
        throw NoBracket("find_root: no sign change on the bracket");
    double x = 0.5 * (lo + hi);
    for (int it = 0; it < max_iter; ++it) {
        double fx = f(x);
        if (fx == 0 || std::abs(hi - lo) < xtol) return x;
        if ((fx > 0) == (fhi > 0)) {
            hi = x;
            fhi = fx;
        } else {
            lo = x;
            flo = fx;
        }
        double xn = std::numeric_limits<double>::quiet_NaN();
        if (df) {
            double d = df(x);
            if (d != 0) xn = x - fx / d;
        }
        if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
        x = xn;
    }
    throw NotConverged("find_root: iteration limit reached");
}

} // namespace mspop::num
